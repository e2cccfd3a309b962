#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "defence/tv_fusion.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace defence;

// ---------------------------------------------------------------------------
// prox_tv_1d

TEST_CASE("prox_tv_1d identity cases") {
  const std::vector<double> s{0.3, 0.9, 0.1, 0.5};
  CHECK(prox_tv_1d(s, 0.0) == s);
  const std::vector<double> c(7, 0.42);
  const auto out = prox_tv_1d(c, 1.3);
  for (double v : out) CHECK(v == doctest::Approx(0.42));
}

TEST_CASE("prox_tv_1d two-sample case matches brute force") {
  // [0,1], lambda 0.25: endpoints move toward each other by lambda.
  const auto out = prox_tv_1d({0.0, 1.0}, 0.25);
  CHECK(out[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(out[1] == doctest::Approx(0.75).epsilon(1e-9));

  // Brute-force sweep over a fine 2D grid confirms the optimum.
  double best0 = 0, best1 = 0, best = 1e9;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) {
      const double a = i / 400.0, b = j / 400.0;
      const double obj = 0.5 * (a * a + (b - 1.0) * (b - 1.0)) + 0.25 * std::abs(b - a);
      if (obj < best) {
        best = obj;
        best0 = a;
        best1 = b;
      }
    }
  CHECK(std::abs(out[0] - best0) < 5e-3);
  CHECK(std::abs(out[1] - best1) < 5e-3);
}

TEST_CASE("prox_tv_1d matches the dual projected-gradient oracle") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::uniform_real_distribution<double> lam(0.01, 0.6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s(8 + trial % 9);
    for (auto& v : s) v = dist(rng);
    const double lambda = lam(rng);
    const auto mine = prox_tv_1d(s, lambda);
    const auto ref = oracles::tv1d_dual_pg(s, lambda, 50000);
    const double fo = oracles::tv1d_objective(mine, s, lambda);
    const double fr = oracles::tv1d_objective(ref, s, lambda);
    CHECK(fo <= fr + 1e-9);  // exact solver never loses to the iterative one
    CHECK(std::abs(fo - fr) <= 1e-6 * std::max(1.0, std::abs(fr)));
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(mine[i] - ref[i]) < 1e-4);
  }
}

TEST_CASE("prox_tv_1d is exact on monotone signals") {
  // On a monotone signal the taut string clips each end by lambda and
  // pools flat runs; objective must not exceed the input's and must beat
  // random perturbations.
  std::mt19937 rng(5);
  std::normal_distribution<double> noise(0.0, 1e-3);
  const std::vector<double> s{0.0, 0.1, 0.25, 0.4, 0.7, 0.9, 1.0};
  const double lambda = 0.15;
  const auto out = prox_tv_1d(s, lambda);
  const double f_out = oracles::tv1d_objective(out, s, lambda);
  CHECK(f_out <= oracles::tv1d_objective(s, s, lambda) + 1e-12);
  for (int trial = 0; trial < 10000; ++trial) {
    auto pert = out;
    for (auto& v : pert) v += noise(rng);
    CHECK(f_out <= oracles::tv1d_objective(pert, s, lambda) + 1e-12);
  }
}

// ---------------------------------------------------------------------------
// prox_tv_2d

TEST_CASE("prox_tv_2d identity cases") {
  const Grid g = testutil::random_grid(6, 5, 2);
  const Grid same = prox_tv_2d(g, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(same[i] == g[i]);
  const Grid constant(7, 7, 0.3);
  const Grid flat = prox_tv_2d(constant, 0.5);
  for (double v : flat.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("prox_tv_2d objective matches the dual oracle on random images") {
  FusionParams params;
  params.prox_max_passes = 200;
  params.prox_tolerance = 1e-10;
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Grid b = testutil::random_grid(6, 6, 100 + seed);
    const double lambda = 0.3;
    const Grid mine = prox_tv_2d(b, lambda, params);
    const Grid ref = oracles::tv2d_dual_pg(b, lambda, 50000);
    const double fo = oracles::tv2d_objective(mine, b, lambda);
    const double fr = oracles::tv2d_objective(ref, b, lambda);
    CHECK(std::abs(fo - fr) <= 1e-6 * std::max(1.0, std::abs(fr)));
  }
}

TEST_CASE("prox_tv_2d never increases the objective") {
  for (unsigned seed = 0; seed < 4; ++seed) {
    const Grid b = testutil::random_grid(10, 8, 300 + seed);
    FusionParams params;
    const double lambda = 0.2;
    const Grid out = prox_tv_2d(b, lambda, params);
    CHECK(oracles::tv2d_objective(out, b, lambda) <=
          oracles::tv2d_objective(b, b, lambda) + 1e-9);
  }
}

// ---------------------------------------------------------------------------
// fusion ops

TEST_CASE("fuse_weighted_mean single fully visible neighbor, lambda 0") {
  const Frame n = testutil::frame_from_grid(testutil::random_grid(8, 8, 9));
  FusionParams params;
  params.lambda_fusion = 0.0;
  auto [x_hat, uncovered] =
      fuse_weighted_mean({n}, {FenceMask(8, 8, true)}, {1.0}, params);
  for (std::size_t i = 0; i < n.data().size(); ++i)
    CHECK(x_hat.data()[i] == doctest::Approx(n.data()[i]).epsilon(1e-12));
  CHECK(uncovered.count_true() == 0);
}

TEST_CASE("fuse_weighted_mean is the plain weighted mean with lambda 0") {
  Frame a(4, 4, 0.2), b(4, 4, 0.6);
  FusionParams params;
  params.lambda_fusion = 0.0;
  auto [x_hat, uncovered] = fuse_weighted_mean(
      {a, b}, {FenceMask(4, 4, true), FenceMask(4, 4, true)}, {0.5, 0.5}, params);
  for (double v : x_hat.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("fuse_weighted_mean flags pixels no neighbor covers") {
  Frame a(6, 6, 0.5);
  FenceMask vis(6, 6, true);
  vis.set(3, 3, false);
  FusionParams params;
  auto [x_hat, uncovered] = fuse_weighted_mean({a}, {vis}, {1.0}, params);
  CHECK(uncovered.count_true() == 1);
  CHECK(uncovered.at(3, 3));
}

TEST_CASE("fuse_weighted_mean errors") {
  FusionParams params;
  CHECK_THROWS_AS(fuse_weighted_mean({}, {}, {}, params), EmptyInput);
  CHECK_THROWS_AS(fuse_weighted_mean({Frame(4, 4)}, {FenceMask(3, 3)}, {1.0}, params),
                  DimensionMismatch);
}

TEST_CASE("nearest_source_index picks the closest feasible candidate") {
  Frame x_hat(2, 1, 0.5);
  Frame c0(2, 1, 0.5), c1(2, 1, 0.9);
  const FenceMask all(2, 1, true);
  const SourceIndexMap map = nearest_source_index(x_hat, {c0, c1}, {all, all});
  CHECK(map.at(0, 0) == 0);
  CHECK(map.at(1, 0) == 0);
}

TEST_CASE("nearest_source_index single neighbor and infeasible pixels") {
  Frame x_hat(3, 3, 0.5);
  Frame c0(3, 3, 0.1);
  FenceMask vis(3, 3, true);
  vis.set(1, 1, false);
  const SourceIndexMap map = nearest_source_index(x_hat, {c0}, {vis});
  CHECK(map.at(0, 0) == 0);
  CHECK(map.at(1, 1) == SENTINEL_NONE);
}

TEST_CASE("nearest_source_index respects feasibility everywhere") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  const int w = 12, h = 12;
  Frame x_hat = testutil::frame_from_grid(testutil::random_grid(w, h, 70));
  std::vector<Frame> cands;
  std::vector<FenceMask> vis;
  for (int k = 0; k < 4; ++k) {
    cands.push_back(testutil::frame_from_grid(testutil::random_grid(w, h, 80 + k)));
    FenceMask v(w, h);
    for (std::size_t i = 0; i < v.size(); ++i) v.set(i, d(rng) < 0.6);
    vis.push_back(v);
  }
  const SourceIndexMap map = nearest_source_index(x_hat, cands, vis);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int idx = map.at(x, y);
      if (idx != SENTINEL_NONE) CHECK(vis[static_cast<std::size_t>(idx)].at(x, y));
    }
}

TEST_CASE("recover_and_composite preserves non-fence pixels bit-exactly") {
  const Frame target = testutil::frame_from_grid(testutil::random_grid(10, 10, 33));
  FenceMask mask(10, 10);
  for (int x = 0; x < 10; ++x) mask.set(x, 4, true);
  const Frame neighbor = testutil::frame_from_grid(testutil::random_grid(10, 10, 34));
  SourceIndexMap map(10, 10);
  for (auto& i : map.indices) i = 0;
  auto [result, holes] = recover_and_composite(target, mask, map, {neighbor});
  CHECK(holes.count_true() == 0);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) {
        if (mask.at(x, y))
          CHECK(result.at(x, y, c) == neighbor.at(x, y, c));
        else
          CHECK(result.at(x, y, c) == target.at(x, y, c));
      }
}

TEST_CASE("recover_and_composite empty mask is the identity") {
  const Frame target = testutil::frame_from_grid(testutil::random_grid(8, 8, 35));
  auto [result, holes] =
      recover_and_composite(target, FenceMask(8, 8), SourceIndexMap(8, 8), {});
  CHECK(result.data() == target.data());
  CHECK(holes.count_true() == 0);
}

TEST_CASE("recover_and_composite marks unsourced fence pixels as holes") {
  const Frame target = testutil::frame_from_grid(testutil::random_grid(8, 8, 36));
  FenceMask mask(8, 8);
  mask.set(2, 2, true);
  mask.set(5, 5, true);
  SourceIndexMap map(8, 8);  // all SENTINEL_NONE
  auto [result, holes] = recover_and_composite(target, mask, map, {});
  CHECK(holes.count_true() == 2);
  CHECK(holes.at(2, 2));
  for (int c = 0; c < 3; ++c) CHECK(result.at(2, 2, c) == target.at(2, 2, c));
}

// ---------------------------------------------------------------------------
// inpainting

TEST_CASE("inpaint with empty holes grid is a no-op") {
  const Frame f = testutil::frame_from_grid(testutil::random_grid(8, 8, 40));
  const Frame out = inpaint_fast_marching(f, FenceMask(8, 8), 3);
  CHECK(out.data() == f.data());
}

TEST_CASE("inpaint single hole surrounded by a constant fills with it") {
  Frame f(9, 9, 0.6);
  f.set_pixel(4, 4, {0.0, 0.0, 0.0});
  FenceMask holes(9, 9);
  holes.set(4, 4, true);
  const Frame out = inpaint_fast_marching(f, holes, 3);
  for (int c = 0; c < 3; ++c) CHECK(out.at(4, 4, c) == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("inpaint across a linear gradient approximates the ramp") {
  const int w = 21, h = 9;
  Frame f(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = x / double(w - 1);
      f.set_pixel(x, y, {v, v, v});
    }
  FenceMask holes(w, h);
  for (int x = 9; x <= 11; ++x) holes.set(x, 4, true);
  const Frame out = inpaint_fast_marching(f, holes, 4);
  for (int x = 9; x <= 11; ++x)
    CHECK(std::abs(out.at(x, 4, 0) - x / double(w - 1)) < 0.05);
}

TEST_CASE("inpaint rejects an all-hole image") {
  CHECK_THROWS_AS(inpaint_fast_marching(Frame(6, 6), FenceMask(6, 6, true), 3), AllHoles);
}

// ---------------------------------------------------------------------------
// orchestration

TEST_CASE("neighbor window selection") {
  using defence::detail::neighbor_window;
  CHECK(neighbor_window(10, 5, 4) == std::vector<int>{3, 4, 6, 7});
  CHECK(neighbor_window(10, 0, 4) == std::vector<int>{1, 2, 3, 4});
  CHECK(neighbor_window(10, 9, 2) == std::vector<int>{7, 8});
  CHECK(neighbor_window(1, 0, 4).empty());
}

TEST_CASE("temporal weights are reciprocal and normalized") {
  const auto w = temporal_weights({-2, -1, 1, 2});
  CHECK(w[1] == doctest::Approx(w[2]));
  CHECK(w[0] == doctest::Approx(0.5 * w[1]));
  CHECK(w[0] + w[1] + w[2] + w[3] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("defence_frame is the identity on a fence-free sequence") {
  const Frame f = testutil::frame_from_grid(testutil::smooth_texture(32, 32, 55));
  std::vector<Frame> frames(5, f);
  std::vector<SoftMask> masks(5, SoftMask(32, 32, 0.0));
  RefineParams refine;
  FlowParams flow;
  FusionParams fusion;
  fusion.n = 4;
  const Frame out = defence_frame(frames, masks, 2, refine, flow, fusion);
  CHECK(out.data() == frames[2].data());
}

TEST_CASE("defence_frame rejects an empty neighbor window") {
  std::vector<Frame> frames{Frame(32, 32, 0.5)};
  std::vector<SoftMask> masks{SoftMask(32, 32, 0.0)};
  CHECK_THROWS_AS(defence_frame(frames, masks, 0, {}, {}, {}), NeighborWindowEmpty);
}

TEST_CASE("zero-parallax fence leaves holes for inpainting") {
  // Static scene, static fence: no neighbor ever sees behind the fence.
  const Frame base = testutil::frame_from_grid(testutil::smooth_texture(48, 48, 60));
  FenceMask fence(48, 48);
  for (int y = 0; y < 48; ++y) fence.set(24, y, true);
  Frame fenced = base;
  for (int y = 0; y < 48; ++y) fenced.set_pixel(24, y, {0.1, 0.1, 0.1});
  SoftMask soft(48, 48);
  for (std::size_t i = 0; i < soft.size(); ++i) soft[i] = fence.get(i) ? 1.0 : 0.0;

  std::vector<Frame> frames(5, fenced);
  std::vector<SoftMask> masks(5, soft);
  RefineParams refine;
  FlowParams flow;
  FusionParams fusion;
  fusion.n = 4;
  const Frame out = defence_frame(frames, masks, 2, refine, flow, fusion);
  // Output is inpainted, not the fence color, and differs from truth only
  // where the fence was.
  double max_fence_dev_from_fence_color = 0.0;
  for (int y = 4; y < 44; ++y)
    max_fence_dev_from_fence_color =
        std::max(max_fence_dev_from_fence_color, std::abs(out.at(24, y, 0) - 0.1));
  CHECK(max_fence_dev_from_fence_color > 0.05);
}
