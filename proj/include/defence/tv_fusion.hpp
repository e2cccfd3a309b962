#pragma once

// Multi-frame content recovery. A TV-L1 model fuses the flow-warped
// neighbors into a clean estimate, a per-pixel nearest-source search
// picks the neighbor whose real pixel best matches that estimate, the
// chosen pixels replace the fence region, and fast-marching inpainting
// fills whatever no neighbor ever saw.

#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "defence/core.hpp"
#include "defence/mask_refine.hpp"
#include "defence/optical_flow.hpp"
#include "defence/registration.hpp"

namespace defence {

inline constexpr int SENTINEL_NONE = -1;

struct FusionParams {
  int n = 6;                    // contiguous neighbor frames, 4-8 typical
  double lambda_fusion = 0.0005;
  int prox_max_passes = 50;
  double prox_tolerance = 1e-5;
  bool renormalize_weights = true;  // per-pixel renormalization over visible frames
  int inpaint_radius = 5;

  void validate() const {
    if (n < 1) throw InvalidSpec("FusionParams: n must be >= 1");
    if (lambda_fusion < 0.0) throw InvalidSpec("FusionParams: lambda_fusion must be >= 0");
    if (inpaint_radius < 1) throw InvalidSpec("FusionParams: inpaint_radius must be >= 1");
  }
};

struct SourceIndexMap {
  int width = 0, height = 0;
  std::vector<int> indices;  // neighbor index in [0,n) or SENTINEL_NONE

  SourceIndexMap() = default;
  SourceIndexMap(int w, int h)
      : width(w), height(h),
        indices(static_cast<std::size_t>(w) * h, SENTINEL_NONE) {}

  int at(int x, int y) const { return indices[static_cast<std::size_t>(y) * width + x]; }
  int& at(int x, int y) { return indices[static_cast<std::size_t>(y) * width + x]; }
};

// ---------------------------------------------------------------------------
// Proximal TV

/// Exact minimizer of 1/2 ||x - signal||^2 + lambda * sum |x_{i+1} - x_i|,
/// the taut-string solution, computed by Condat's direct algorithm.
inline std::vector<double> prox_tv_1d(const std::vector<double>& signal, double lambda) {
  const int n = static_cast<int>(signal.size());
  std::vector<double> x(signal.size());
  if (n == 0) return x;
  if (n == 1 || lambda <= 0.0) return signal;

  const double* y = signal.data();
  int k = 0, k0 = 0, km = 0, kp = 0;
  double vmin = y[0] - lambda, vmax = y[0] + lambda;
  double umin = lambda, umax = -lambda;

  for (;;) {
    if (k == n - 1) {
      if (umin < 0.0) {
        do x[k0++] = vmin; while (k0 <= km);
        k = km = k0;
        vmin = y[k];
        umin = lambda;
        umax = y[k] + lambda - vmax;
      } else if (umax > 0.0) {
        do x[k0++] = vmax; while (k0 <= kp);
        k = kp = k0;
        vmax = y[k];
        umax = -lambda;
        umin = y[k] - lambda - vmin;
      } else {
        const double v = vmin + umin / (k - k0 + 1);
        while (k0 <= k) x[k0++] = v;
        return x;
      }
      if (k == n - 1) {  // segment collapsed to the final sample
        x[k] = vmin + umin;
        return x;
      }
      continue;
    }
    if (y[k + 1] + umin < vmin - lambda) {
      // The string must jump down: freeze the current segment at vmin.
      do x[k0++] = vmin; while (k0 <= km);
      k = km = kp = k0;
      vmin = y[k];
      vmax = y[k] + 2.0 * lambda;
      umin = lambda;
      umax = -lambda;
    } else if (y[k + 1] + umax > vmax + lambda) {
      // Jump up: freeze at vmax.
      do x[k0++] = vmax; while (k0 <= kp);
      k = km = kp = k0;
      vmin = y[k] - 2.0 * lambda;
      vmax = y[k];
      umin = lambda;
      umax = -lambda;
    } else {
      ++k;
      umin += y[k] - vmin;
      umax += y[k] - vmax;
      if (umin >= lambda) {
        vmin += (umin - lambda) / (k - k0 + 1);
        umin = lambda;
        km = k;
      }
      if (umax <= -lambda) {
        vmax += (umax + lambda) / (k - k0 + 1);
        umax = -lambda;
        kp = k;
      }
    }
  }
}

/// Anisotropic 2D TV prox approximated by Dykstra's alternation between
/// the exact row prox and the exact column prox.
inline Grid prox_tv_2d(const Grid& image, double lambda, const FusionParams& params = {}) {
  if (lambda <= 0.0) return image;
  const int w = image.width(), h = image.height();
  Grid x = image;
  Grid p(w, h), q(w, h);  // Dykstra correction variables
  std::vector<double> line;

  for (int pass = 0; pass < params.prox_max_passes; ++pass) {
    const Grid prev = x;
    // Rows.
    Grid y(w, h);
    line.resize(w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) line[c] = x.at(c, r) + p.at(c, r);
      const auto sol = prox_tv_1d(line, lambda);
      for (int c = 0; c < w; ++c) {
        y.at(c, r) = sol[c];
        p.at(c, r) = line[c] - sol[c];
      }
    }
    // Columns.
    line.resize(h);
    for (int c = 0; c < w; ++c) {
      for (int r = 0; r < h; ++r) line[r] = y.at(c, r) + q.at(c, r);
      const auto sol = prox_tv_1d(line, lambda);
      for (int r = 0; r < h; ++r) {
        x.at(c, r) = sol[r];
        q.at(c, r) = line[r] - sol[r];
      }
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      num += (x[i] - prev[i]) * (x[i] - prev[i]);
      den += prev[i] * prev[i];
    }
    if (std::sqrt(num) <= params.prox_tolerance * (std::sqrt(den) + 1e-12)) break;
  }
  return x;
}

/// Objective of the fusion denoising model on one channel.
inline double tv_objective(const Grid& x, const Grid& data, double lambda) {
  double obj = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    obj += 0.5 * (x[i] - data[i]) * (x[i] - data[i]);
  for (int y = 0; y < x.height(); ++y)
    for (int xx = 0; xx < x.width(); ++xx) {
      if (xx + 1 < x.width()) obj += lambda * std::abs(x.at(xx + 1, y) - x.at(xx, y));
      if (y + 1 < x.height()) obj += lambda * std::abs(x.at(xx, y + 1) - x.at(xx, y));
    }
  return obj;
}

// ---------------------------------------------------------------------------
// Fusion

namespace detail {

// Fill flagged pixels with the value of the nearest unflagged pixel
// (multi-source BFS, 8-neighborhood).
inline void fill_nearest(Frame& frame, const FenceMask& flagged) {
  const int w = frame.width(), h = frame.height();
  std::vector<int> source(static_cast<std::size_t>(w) * h, -1);
  std::queue<int> queue;
  for (int i = 0; i < w * h; ++i)
    if (!flagged.get(i)) {
      source[i] = i;
      queue.push(i);
    }
  if (queue.empty()) return;  // nothing known, caller handles via uncovered grid
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop();
    const int x = i % w, y = i / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        const int j = ny * w + nx;
        if (source[j] < 0) {
          source[j] = source[i];
          queue.push(j);
        }
      }
  }
  for (int i = 0; i < w * h; ++i)
    if (flagged.get(i) && source[i] >= 0 && source[i] != i) {
      const int sx = source[i] % w, sy = source[i] / w;
      frame.set_pixel(i % w, i / w, frame.pixel(sx, sy));
    }
}

}  // namespace detail

/// Weights 1/|k-o| over the neighbor window, normalized to unit sum.
inline std::vector<double> temporal_weights(const std::vector<int>& temporal_distances) {
  std::vector<double> w(temporal_distances.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (temporal_distances[i] == 0)
      throw InvalidSpec("temporal_weights: zero temporal distance");
    w[i] = 1.0 / std::abs(temporal_distances[i]);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

/// Weighted mean of the visible warped neighbors followed by the TV prox,
/// per channel. `warped_nonfence[k]` must be true exactly where neighbor k
/// contributed an in-bounds, non-fence sample. Pixels no neighbor covers
/// are flagged in the uncovered grid and bridged with the nearest covered
/// value so the prox sees finite data.
inline std::pair<Frame, FenceMask> fuse_weighted_mean(
    const std::vector<Frame>& warped_neighbors,
    const std::vector<FenceMask>& warped_nonfence,
    const std::vector<double>& weights, const FusionParams& params) {
  params.validate();
  if (warped_neighbors.empty()) throw EmptyInput("fuse_weighted_mean: no neighbors");
  if (warped_neighbors.size() != warped_nonfence.size() ||
      warped_neighbors.size() != weights.size())
    throw DimensionMismatch("fuse_weighted_mean: list length mismatch");
  const int w = warped_neighbors[0].width(), h = warped_neighbors[0].height();
  for (std::size_t k = 0; k < warped_neighbors.size(); ++k)
    if (warped_neighbors[k].width() != w || warped_neighbors[k].height() != h ||
        warped_nonfence[k].width() != w || warped_nonfence[k].height() != h)
      throw DimensionMismatch("fuse_weighted_mean: neighbor size mismatch");

  Frame data(w, h);
  FenceMask uncovered(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double mass = 0.0;
      std::array<double, 3> acc{0.0, 0.0, 0.0};
      for (std::size_t k = 0; k < warped_neighbors.size(); ++k) {
        if (!warped_nonfence[k].at(x, y)) continue;
        mass += weights[k];
        for (int c = 0; c < 3; ++c)
          acc[c] += weights[k] * warped_neighbors[k].at(x, y, c);
      }
      if (mass <= 0.0) {
        uncovered.set(x, y, true);
      } else {
        const double norm = params.renormalize_weights ? mass : 1.0;
        for (int c = 0; c < 3; ++c) data.at(x, y, c) = acc[c] / norm;
      }
    }
  detail::fill_nearest(data, uncovered);

  Frame x_hat(w, h);
  for (int c = 0; c < 3; ++c) {
    Grid channel(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) channel.at(x, y) = data.at(x, y, c);
    const Grid denoised = prox_tv_2d(channel, params.lambda_fusion, params);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) x_hat.at(x, y, c) = denoised.at(x, y);
  }
  return {std::move(x_hat), std::move(uncovered)};
}

/// Per pixel, the feasible neighbor (valid and non-fence after warping)
/// whose RGB is nearest to the fused estimate. Ties go to the smallest
/// temporal distance, then the smallest index. SENTINEL_NONE where no
/// neighbor is feasible.
inline SourceIndexMap nearest_source_index(
    const Frame& x_hat, const std::vector<Frame>& warped_neighbors,
    const std::vector<FenceMask>& warped_nonfence,
    const std::vector<int>& temporal_distances = {}) {
  const int w = x_hat.width(), h = x_hat.height();
  if (warped_neighbors.size() != warped_nonfence.size())
    throw DimensionMismatch("nearest_source_index: list length mismatch");
  for (std::size_t k = 0; k < warped_neighbors.size(); ++k)
    if (warped_neighbors[k].width() != w || warped_neighbors[k].height() != h ||
        warped_nonfence[k].width() != w || warped_nonfence[k].height() != h)
      throw DimensionMismatch("nearest_source_index: neighbor size mismatch");

  auto tdist = [&](std::size_t k) {
    return k < temporal_distances.size() ? std::abs(temporal_distances[k])
                                         : static_cast<int>(k) + 1;
  };

  SourceIndexMap map(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int best = SENTINEL_NONE;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < warped_neighbors.size(); ++k) {
        if (!warped_nonfence[k].at(x, y)) continue;
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double d = x_hat.at(x, y, c) - warped_neighbors[k].at(x, y, c);
          d2 += d * d;
        }
        const bool better =
            d2 < best_d2 ||
            (d2 == best_d2 && best >= 0 && tdist(k) < tdist(static_cast<std::size_t>(best)));
        if (best == SENTINEL_NONE || better) {
          best = static_cast<int>(k);
          best_d2 = d2;
        }
      }
      map.at(x, y) = best;
    }
  return map;
}

/// Non-fence pixels come verbatim from the target; fence pixels take the
/// RGB of the neighbor the index map names. Fence pixels with no source
/// keep the target value and are flagged in the holes grid.
inline std::pair<Frame, FenceMask> recover_and_composite(
    const Frame& target, const FenceMask& refined_mask,
    const SourceIndexMap& index_map, const std::vector<Frame>& warped_neighbors) {
  const int w = target.width(), h = target.height();
  if (refined_mask.width() != w || refined_mask.height() != h ||
      index_map.width != w || index_map.height != h)
    throw DimensionMismatch("recover_and_composite: size mismatch");

  Frame result = target;
  FenceMask holes(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!refined_mask.at(x, y)) continue;
      const int idx = index_map.at(x, y);
      if (idx == SENTINEL_NONE) {
        holes.set(x, y, true);
      } else {
        result.set_pixel(x, y, warped_neighbors[static_cast<std::size_t>(idx)].pixel(x, y));
      }
    }
  return {std::move(result), std::move(holes)};
}

// ---------------------------------------------------------------------------
// Fast-marching inpainting (Telea)

namespace detail {

struct FmmNode {
  double t;
  int x, y;
  bool operator>(const FmmNode& o) const { return t > o.t; }
};

inline double eikonal_solve(const Grid& t, const std::vector<std::uint8_t>& known,
                            int x, int y) {
  const int w = t.width(), h = t.height();
  auto val = [&](int xx, int yy) {
    if (xx < 0 || xx >= w || yy < 0 || yy >= h) return std::numeric_limits<double>::infinity();
    if (!known[static_cast<std::size_t>(yy) * w + xx]) return std::numeric_limits<double>::infinity();
    return t.at(xx, yy);
  };
  const double tx = std::min(val(x - 1, y), val(x + 1, y));
  const double ty = std::min(val(x, y - 1), val(x, y + 1));
  if (!std::isfinite(tx) && !std::isfinite(ty)) return std::numeric_limits<double>::infinity();
  if (!std::isfinite(tx)) return ty + 1.0;
  if (!std::isfinite(ty)) return tx + 1.0;
  const double d = 2.0 - (tx - ty) * (tx - ty);
  if (d < 0.0) return std::min(tx, ty) + 1.0;
  return 0.5 * (tx + ty + std::sqrt(d));
}

}  // namespace detail

/// Telea fast-marching inpainting: hole pixels filled in ascending
/// distance-from-boundary order, each as a weighted average of known
/// pixels within `radius`, weighted by marching direction, distance and
/// level-set proximity.
inline Frame inpaint_fast_marching(const Frame& frame, const FenceMask& holes, int radius) {
  if (radius < 1) throw InvalidSpec("inpaint_fast_marching: radius must be >= 1");
  const int w = frame.width(), h = frame.height();
  if (holes.width() != w || holes.height() != h)
    throw DimensionMismatch("inpaint_fast_marching: size mismatch");
  if (holes.count_true() == holes.size())
    throw AllHoles("inpaint_fast_marching: every pixel is a hole");
  if (holes.count_true() == 0) return frame;

  Frame out = frame;
  Grid dist(w, h, 0.0);
  std::vector<std::uint8_t> known(static_cast<std::size_t>(w) * h, 0);
  for (int i = 0; i < w * h; ++i) known[i] = holes.get(i) ? 0 : 1;

  // Narrow band: hole pixels adjacent to known ones.
  std::priority_queue<detail::FmmNode, std::vector<detail::FmmNode>,
                      std::greater<detail::FmmNode>> band;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (known[static_cast<std::size_t>(y) * w + x]) continue;
      bool boundary = false;
      for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const int nx = x + dx, ny = y + dy;
        if (nx >= 0 && nx < w && ny >= 0 && ny < h &&
            known[static_cast<std::size_t>(ny) * w + nx]) {
          boundary = true;
          break;
        }
      }
      if (boundary) band.push({1.0, x, y});
    }

  auto grad_t = [&](int x, int y) {
    auto v = [&](int xx, int yy) {
      xx = std::clamp(xx, 0, w - 1);
      yy = std::clamp(yy, 0, h - 1);
      return dist.at(xx, yy);
    };
    return std::pair{0.5 * (v(x + 1, y) - v(x - 1, y)),
                     0.5 * (v(x, y + 1) - v(x, y - 1))};
  };

  while (!band.empty()) {
    const auto node = band.top();
    band.pop();
    const std::size_t idx = static_cast<std::size_t>(node.y) * w + node.x;
    if (known[idx]) continue;

    // Inpaint this pixel from the known disk around it.
    const auto [nx_t, ny_t] = grad_t(node.x, node.y);
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    double wsum = 0.0;
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > radius * radius) continue;
        const int qx = node.x + dx, qy = node.y + dy;
        if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
        if (!known[static_cast<std::size_t>(qy) * w + qx]) continue;
        const double rx = node.x - qx, ry = node.y - qy;
        const double len2 = rx * rx + ry * ry;
        if (len2 == 0.0) continue;
        const double len = std::sqrt(len2);
        double dir = (rx * nx_t + ry * ny_t) / len;
        if (std::abs(dir) < 1e-6) dir = 1e-6;
        const double dst = 1.0 / len2;
        const double lev = 1.0 / (1.0 + std::abs(node.t - dist.at(qx, qy)));
        const double weight = std::abs(dir) * dst * lev;
        for (int c = 0; c < 3; ++c) acc[c] += weight * out.at(qx, qy, c);
        wsum += weight;
      }
    if (wsum > 0.0) {
      for (int c = 0; c < 3; ++c)
        out.at(node.x, node.y, c) = std::clamp(acc[c] / wsum, 0.0, 1.0);
    }
    known[idx] = 1;
    dist.at(node.x, node.y) = node.t;

    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int qx = node.x + dx, qy = node.y + dy;
      if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
      if (known[static_cast<std::size_t>(qy) * w + qx]) continue;
      const double t = detail::eikonal_solve(dist, known, qx, qy);
      if (std::isfinite(t)) band.push({t, qx, qy});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace detail {

/// The n frames nearest the target, split as evenly as possible before
/// and after, truncated at the sequence ends. Returned as frame indices.
inline std::vector<int> neighbor_window(int frame_count, int target, int n) {
  std::vector<int> out;
  int before = target - 1, after = target + 1;
  bool take_before = true;
  while (static_cast<int>(out.size()) < n && (before >= 0 || after < frame_count)) {
    if (take_before) {
      if (before >= 0) out.push_back(before--);
      else if (after < frame_count) out.push_back(after++);
    } else {
      if (after < frame_count) out.push_back(after++);
      else if (before >= 0) out.push_back(before--);
    }
    take_before = !take_before;
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline FenceMask binarize(const SoftMask& soft, double threshold) {
  FenceMask mask(soft.width(), soft.height());
  for (std::size_t i = 0; i < mask.size(); ++i) mask.set(i, soft[i] >= threshold);
  return mask;
}

inline SoftMask mask_to_soft(const FenceMask& mask) {
  SoftMask soft(mask.width(), mask.height());
  for (std::size_t i = 0; i < soft.size(); ++i) soft[i] = mask.get(i) ? 1.0 : 0.0;
  return soft;
}

/// Refined mask for frame `index`: phase-correlation transforms to its m
/// nearest neighbors, then the temporal-refinement rule.
inline FenceMask refine_frame_mask(const std::vector<Frame>& frames,
                                   const std::vector<SoftMask>& soft_masks,
                                   const std::vector<Grid>& grays, int index,
                                   const RefineParams& refine) {
  const FenceMask binary = binarize(soft_masks[static_cast<std::size_t>(index)], refine.mu);
  const auto window =
      neighbor_window(static_cast<int>(frames.size()), index, refine.m);
  std::vector<SoftMask> neighbor_softs;
  std::vector<Translation> transforms;
  for (int k : window) {
    Translation t;
    try {
      // Shift that maps neighbor content onto the target.
      const Translation shift = phase_correlate(grays[static_cast<std::size_t>(k)],
                                                grays[static_cast<std::size_t>(index)]);
      t = shift;
    } catch (const DegenerateInput&) {
      t = Translation{0.0, 0.0};  // flat frames carry no motion evidence
    }
    neighbor_softs.push_back(soft_masks[static_cast<std::size_t>(k)]);
    transforms.push_back(t);
  }
  return refine_mask(soft_masks[static_cast<std::size_t>(index)], binary,
                     neighbor_softs, transforms, refine);
}

}  // namespace detail

/// Recovery with no neighbor information at all: inpaint the whole fence
/// region of the target. The comparison baseline for evaluation.
inline Frame inpaint_only(const Frame& target, const FenceMask& mask, int radius = 5) {
  if (mask.count_true() == 0) return target;
  return inpaint_fast_marching(target, mask, radius);
}

/// Full per-frame pipeline: temporal mask refinement, occlusion-aware flow
/// per neighbor, fusion, nearest-source recovery, compositing and the
/// inpainting fallback.
inline Frame defence_frame(const std::vector<Frame>& frames,
                           const std::vector<SoftMask>& soft_masks,
                           int target_index, const RefineParams& refine,
                           const FlowParams& flow, const FusionParams& fusion) {
  refine.validate();
  flow.validate();
  fusion.validate();
  if (frames.size() != soft_masks.size())
    throw DimensionMismatch("defence_frame: frames/masks count mismatch");
  if (target_index < 0 || target_index >= static_cast<int>(frames.size()))
    throw InvalidSpec("defence_frame: target_index out of range");

  const auto window = detail::neighbor_window(
      static_cast<int>(frames.size()), target_index, fusion.n);
  if (window.empty())
    throw NeighborWindowEmpty("defence_frame: no neighbors within the n-window");

  std::vector<Grid> grays;
  grays.reserve(frames.size());
  for (const auto& f : frames) grays.push_back(to_grayscale(f));

  const Frame& target = frames[static_cast<std::size_t>(target_index)];
  const FenceMask target_mask =
      detail::refine_frame_mask(frames, soft_masks, grays, target_index, refine);

  if (target_mask.count_true() == 0) return target;

  std::vector<Frame> warped_neighbors;
  std::vector<FenceMask> warped_nonfence;
  std::vector<int> temporal_distances;
  for (int k : window) {
    const Frame& neighbor = frames[static_cast<std::size_t>(k)];
    const FenceMask neighbor_mask =
        detail::refine_frame_mask(frames, soft_masks, grays, k, refine);

    // The target's fence mask zeroes the data term directly; the
    // neighbor's mask is applied inside the solver through the evolving
    // flow, so fence-to-fence matches never pull the estimate.
    const FlowField f =
        estimate_flow(target, neighbor, target_mask, flow, nullptr, &neighbor_mask);
    auto [warped, validity] = warp_frame(neighbor, f);

    // Feasible = warped in bounds with a sample completely clear of the
    // neighbor's fence (any bilinear overlap with a fence pixel rejects).
    FenceMask nonfence(target.width(), target.height());
    const SoftMask neighbor_soft = detail::mask_to_soft(neighbor_mask);
    for (int y = 0; y < target.height(); ++y)
      for (int x = 0; x < target.width(); ++x) {
        if (!validity.at(x, y)) continue;
        const auto [mv, ok] = sample_bilinear(
            neighbor_soft, x + f.u.at(x, y), y + f.v.at(x, y));
        nonfence.set(x, y, ok && mv <= 0.0);
      }

    warped_neighbors.push_back(std::move(warped));
    warped_nonfence.push_back(std::move(nonfence));
    temporal_distances.push_back(k - target_index);
  }

  const auto weights = temporal_weights(temporal_distances);
  auto [x_hat, uncovered] =
      fuse_weighted_mean(warped_neighbors, warped_nonfence, weights, fusion);
  (void)uncovered;
  const SourceIndexMap index_map =
      nearest_source_index(x_hat, warped_neighbors, warped_nonfence, temporal_distances);
  auto [result, holes] =
      recover_and_composite(target, target_mask, index_map, warped_neighbors);
  if (holes.count_true() > 0)
    result = inpaint_fast_marching(result, holes, fusion.inpaint_radius);
  result.clamp01();
  return result;
}

}  // namespace defence
