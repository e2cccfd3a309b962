// Batch front end for the de-fencing pipeline.
//
//   defence refine-masks --frames DIR --soft-masks DIR --out DIR
//   defence defence      --frames DIR --soft-masks DIR --out DIR [--target N]
//   defence synth        --spec FILE --out DIR
//   defence eval         --result DIR --truth DIR --masks DIR [--pred-masks DIR]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Diagnostics and
// per-frame timing go to standard error.

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "defence/io.hpp"
#include "defence/metrics.hpp"
#include "defence/synth.hpp"
#include "defence/tv_fusion.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

defence::FenceMask binarize(const defence::SoftMask& soft, double mu) {
  defence::FenceMask m(soft.width(), soft.height());
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, soft[i] >= mu);
  return m;
}

int run_refine_masks(const std::string& frames_dir, const std::string& masks_dir,
                     const std::string& out_dir, const defence::RefineParams& refine) {
  const auto frames = defence::load_sequence(frames_dir);
  const auto softs = defence::load_soft_mask_sequence(masks_dir);
  if (frames.size() != softs.size())
    throw defence::DimensionMismatch("frame and mask counts differ");
  fs::create_directories(out_dir);

  std::vector<defence::Grid> grays;
  for (const auto& f : frames) grays.push_back(defence::to_grayscale(f));

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto t0 = Clock::now();
    const defence::FenceMask refined = defence::detail::refine_frame_mask(
        frames, softs, grays, static_cast<int>(i), refine);
    defence::save_mask(fs::path(out_dir) / defence::detail::indexed_name(
                                               "mask_", static_cast<int>(i)),
                       refined);
    std::cerr << "refine-masks: frame " << i << " done in " << seconds_since(t0)
              << " s\n";
  }
  return 0;
}

int run_defence(const std::string& frames_dir, const std::string& masks_dir,
                const std::string& out_dir, int target, int jobs,
                const defence::RefineParams& refine, const defence::FlowParams& flow,
                const defence::FusionParams& fusion) {
  const auto frames = defence::load_sequence(frames_dir);
  const auto softs = defence::load_soft_mask_sequence(masks_dir);
  if (frames.size() != softs.size())
    throw defence::DimensionMismatch("frame and mask counts differ");
  fs::create_directories(out_dir);

  std::vector<int> targets;
  if (target >= 0) {
    if (target >= static_cast<int>(frames.size()))
      throw defence::InvalidSpec("--target out of range");
    targets.push_back(target);
  } else {
    for (int i = 0; i < static_cast<int>(frames.size()); ++i) targets.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= targets.size() || failed.load()) return;
      const int idx = targets[i];
      const auto t0 = Clock::now();
      try {
        const defence::Frame out =
            defence::defence_frame(frames, softs, idx, refine, flow, fusion);
        defence::save_frame(fs::path(out_dir) / defence::detail::indexed_name("frame_", idx),
                            out);
        std::cerr << "defence: frame " << idx << " done in " << seconds_since(t0)
                  << " s\n";
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
        return;
      }
    }
  };

  jobs = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load()) throw defence::Error(first_error);
  return 0;
}

int run_synth(const std::string& spec_path, const std::string& out_dir) {
  defence::Config cfg = defence::Config::load(spec_path);
  const defence::SceneSpec spec = defence::scene_spec_from_config(cfg);
  const defence::Scene scene = defence::generate_scene(spec);

  const fs::path out(out_dir);
  fs::create_directories(out / "fenced");
  fs::create_directories(out / "clean");
  fs::create_directories(out / "masks");
  for (int t = 0; t < spec.frame_count; ++t) {
    defence::save_frame(out / "fenced" / defence::detail::indexed_name("frame_", t),
                        scene.fenced_frames[static_cast<std::size_t>(t)]);
    defence::save_frame(out / "clean" / defence::detail::indexed_name("frame_", t),
                        scene.clean_frames[static_cast<std::size_t>(t)]);
    defence::save_mask(out / "masks" / defence::detail::indexed_name("mask_", t),
                       scene.masks[static_cast<std::size_t>(t)]);
  }
  std::cerr << "synth: wrote " << spec.frame_count << " frames to " << out_dir << "\n";
  return 0;
}

int run_eval(const std::string& result_dir, const std::string& truth_dir,
             const std::string& masks_dir, const std::string& pred_masks_dir) {
  const auto results = defence::load_sequence(result_dir);
  const auto truths = defence::load_sequence(truth_dir);
  const auto masks = defence::load_mask_sequence(masks_dir);
  if (results.size() != truths.size() || results.size() != masks.size())
    throw defence::DimensionMismatch("result/truth/mask counts differ");

  auto print = [](const std::string& name, double value) {
    if (std::isinf(value))
      std::cout << name << " = inf\n";
    else
      std::cout << name << " = " << value << "\n";
  };

  double sum_fence = 0.0, sum_full = 0.0;
  bool any_inf_fence = false, any_inf_full = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const double pf = defence::psnr(results[i], truths[i], masks[i]);
    const double pw = defence::psnr(results[i], truths[i]);
    if (std::isinf(pf)) any_inf_fence = true; else sum_fence += pf;
    if (std::isinf(pw)) any_inf_full = true; else sum_full += pw;
  }
  print("psnr_fence", any_inf_fence ? std::numeric_limits<double>::infinity()
                                    : sum_fence / results.size());
  print("psnr_full", any_inf_full ? std::numeric_limits<double>::infinity()
                                  : sum_full / results.size());

  if (!pred_masks_dir.empty()) {
    const auto preds = defence::load_mask_sequence(pred_masks_dir);
    if (preds.size() != masks.size())
      throw defence::DimensionMismatch("predicted/truth mask counts differ");
    double p = 0.0, r = 0.0, f = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const defence::MaskScores s = defence::mask_prf(preds[i], masks[i]);
      p += s.precision;
      r += s.recall;
      f += s.f_measure;
    }
    print("precision", p / preds.size());
    print("recall", r / preds.size());
    print("f_measure", f / preds.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video de-fencing: mask refinement, occlusion-aware flow, "
               "multi-frame fusion and recovery"};
  app.require_subcommand(1);

  defence::RefineParams refine;
  defence::FlowParams flow;
  defence::FusionParams fusion;

  std::string frames_dir, masks_dir, out_dir, spec_path;
  std::string result_dir, truth_dir, truth_masks_dir, pred_masks_dir;
  int target = -1, jobs = 1;

  auto* refine_cmd = app.add_subcommand("refine-masks", "Temporally refine fence masks");
  refine_cmd->add_option("--frames", frames_dir, "Input frame directory")->required();
  refine_cmd->add_option("--soft-masks", masks_dir, "Soft mask directory")->required();
  refine_cmd->add_option("--out", out_dir, "Output mask directory")->required();
  refine_cmd->add_option("--m", refine.m, "Neighbor frames used per mask");
  refine_cmd->add_option("--mu", refine.mu, "Averaged-prediction threshold");
  refine_cmd->add_option("--close-radius", refine.close_radius, "Closing disk radius");

  auto* defence_cmd = app.add_subcommand("defence", "Remove the fence from a sequence");
  defence_cmd->add_option("--frames", frames_dir, "Input frame directory")->required();
  defence_cmd->add_option("--soft-masks", masks_dir, "Soft mask directory")->required();
  defence_cmd->add_option("--out", out_dir, "Output frame directory")->required();
  defence_cmd->add_option("--n", fusion.n, "Neighbor frames fused per target");
  defence_cmd->add_option("--m", refine.m, "Neighbor frames for mask refinement");
  defence_cmd->add_option("--mu", refine.mu, "Averaged-prediction threshold");
  defence_cmd->add_option("--lambda-flow", flow.lambda, "Flow regularization weight");
  defence_cmd->add_option("--lambda-fusion", fusion.lambda_fusion, "Fusion TV weight");
  defence_cmd->add_option("--inpaint-radius", fusion.inpaint_radius, "Fallback inpaint radius");
  defence_cmd->add_option("--target", target, "Process only this frame index");
  defence_cmd->add_option("--jobs", jobs, "Parallel frame workers");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic fenced sequence");
  synth_cmd->add_option("--spec", spec_path, "Scene spec file (key = value)")->required();
  synth_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Score results against ground truth");
  eval_cmd->add_option("--result", result_dir, "De-fenced frame directory")->required();
  eval_cmd->add_option("--truth", truth_dir, "Clean ground-truth directory")->required();
  eval_cmd->add_option("--masks", truth_masks_dir, "Ground-truth mask directory")->required();
  eval_cmd->add_option("--pred-masks", pred_masks_dir, "Predicted masks to score");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto t0 = Clock::now();
    int rc = 1;
    if (refine_cmd->parsed()) {
      rc = run_refine_masks(frames_dir, masks_dir, out_dir, refine);
    } else if (defence_cmd->parsed()) {
      rc = run_defence(frames_dir, masks_dir, out_dir, target, jobs, refine, flow, fusion);
    } else if (synth_cmd->parsed()) {
      rc = run_synth(spec_path, out_dir);
    } else if (eval_cmd->parsed()) {
      rc = run_eval(result_dir, truth_dir, truth_masks_dir, pred_masks_dir);
    }
    std::cerr << "total: " << seconds_since(t0) << " s\n";
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
