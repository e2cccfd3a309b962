#pragma once

// Temporal refinement of per-frame fence predictions: warp neighbor
// predictions onto the target, average, threshold, OR with the target
// mask, then close small gaps morphologically.

#include <vector>

#include "defence/core.hpp"
#include "defence/registration.hpp"

namespace defence {

struct RefineParams {
  int m = 5;                // neighboring frames used
  double mu = 0.5;          // threshold on the averaged prediction
  int close_radius = 1;     // disk radius for morphological closing
  int close_iterations = 1;

  void validate() const {
    if (m < 0) throw InvalidSpec("RefineParams: m must be >= 0");
    if (!(mu > 0.0 && mu <= 1.0)) throw InvalidSpec("RefineParams: mu must be in (0,1]");
    if (close_radius < 0) throw InvalidSpec("RefineParams: close_radius must be >= 0");
  }
};

namespace detail {

inline std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dx, dy);
  return offs;
}

inline FenceMask dilate(const FenceMask& mask,
                        const std::vector<std::pair<int, int>>& offs) {
  FenceMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      for (auto [dx, dy] : offs) {
        const int nx = x + dx, ny = y + dy;
        if (nx >= 0 && nx < mask.width() && ny >= 0 && ny < mask.height())
          out.set(nx, ny, true);
      }
    }
  return out;
}

inline FenceMask erode(const FenceMask& mask,
                       const std::vector<std::pair<int, int>>& offs) {
  FenceMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      bool all = true;
      for (auto [dx, dy] : offs) {
        const int nx = x + dx, ny = y + dy;
        // Outside the grid counts as true so closing can seal border gaps.
        if (nx >= 0 && nx < mask.width() && ny >= 0 && ny < mask.height() &&
            !mask.at(nx, ny)) {
          all = false;
          break;
        }
      }
      out.set(x, y, all);
    }
  return out;
}

}  // namespace detail

/// Dilation then erosion with a disk structuring element; radius 0 is the
/// identity.
inline FenceMask morph_close(const FenceMask& mask, int radius, int iterations = 1) {
  if (radius < 0) throw InvalidSpec("morph_close: radius must be >= 0");
  if (radius == 0 || iterations <= 0) return mask;
  const auto offs = detail::disk_offsets(radius);
  FenceMask out = mask;
  for (int i = 0; i < iterations; ++i)
    out = detail::erode(detail::dilate(out, offs), offs);
  return out;
}

/// Refined binary mask P' for the target frame. `transforms[k]` is the
/// translation that aligns neighbor k's prediction with the target (the
/// warp is applied to the soft scores before averaging). With an empty
/// neighbor set the target mask is closed and returned unchanged.
inline FenceMask refine_mask(const SoftMask& target_soft,
                             const FenceMask& target_binary,
                             const std::vector<SoftMask>& neighbor_softs,
                             const std::vector<Translation>& transforms,
                             const RefineParams& params) {
  params.validate();
  if (neighbor_softs.size() != transforms.size())
    throw DimensionMismatch("refine_mask: neighbor/transform count mismatch");
  if (static_cast<int>(neighbor_softs.size()) > params.m && params.m > 0)
    throw DimensionMismatch("refine_mask: more neighbors than params.m");
  if (target_soft.width() != target_binary.width() ||
      target_soft.height() != target_binary.height())
    throw DimensionMismatch("refine_mask: target soft/binary size mismatch");

  const int w = target_binary.width(), h = target_binary.height();

  if (neighbor_softs.empty())
    return morph_close(target_binary, params.close_radius, params.close_iterations);

  Grid accum(w, h);
  for (std::size_t k = 0; k < neighbor_softs.size(); ++k) {
    if (neighbor_softs[k].width() != w || neighbor_softs[k].height() != h)
      throw DimensionMismatch("refine_mask: neighbor mask size mismatch");
    const SoftMask warped = warp_by_translation(neighbor_softs[k], transforms[k]);
    for (std::size_t i = 0; i < accum.size(); ++i) accum[i] += warped[i];
  }
  const double inv_m = 1.0 / static_cast<double>(neighbor_softs.size());

  FenceMask refined(w, h);
  for (std::size_t i = 0; i < refined.size(); ++i)
    refined.set(i, target_binary.get(i) || accum[i] * inv_m >= params.mu);
  return morph_close(refined, params.close_radius, params.close_iterations);
}

}  // namespace defence
