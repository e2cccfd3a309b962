#pragma once

// Evaluation metrics: mask precision/recall/F-measure and
// region-restricted PSNR.

#include <cmath>
#include <limits>
#include <optional>

#include "defence/core.hpp"

namespace defence {

struct MaskScores {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

inline double f_measure(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

inline MaskScores mask_prf(const FenceMask& predicted, const FenceMask& ground_truth) {
  if (!predicted.same_size(ground_truth))
    throw DimensionMismatch("mask_prf: size mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted.get(i), g = ground_truth.get(i);
    if (p && g) ++tp;
    else if (p && !g) ++fp;
    else if (!p && g) ++fn;
  }
  if (tp + fn == 0) throw EmptyGroundTruth("mask_prf: ground truth has no fence pixels");
  MaskScores s;
  s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
  s.recall = static_cast<double>(tp) / (tp + fn);
  s.f_measure = f_measure(s.precision, s.recall);
  return s;
}

/// PSNR in dB with peak 1.0; infinity when the frames match exactly over
/// the region.
inline double psnr(const Frame& result, const Frame& reference,
                   const std::optional<FenceMask>& region = std::nullopt) {
  if (!result.same_size(reference)) throw DimensionMismatch("psnr: size mismatch");
  if (region && (region->width() != result.width() || region->height() != result.height()))
    throw DimensionMismatch("psnr: region size mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < result.height(); ++y)
    for (int x = 0; x < result.width(); ++x) {
      if (region && !region->at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = result.at(x, y, c) - reference.at(x, y, c);
        sum += d * d;
      }
      ++count;
    }
  if (count == 0) throw EmptyRegion("psnr: empty region");
  const double mse = sum / (count * 3.0);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace defence
