#pragma once

// Deterministic synthetic fenced-video generator. Backgrounds are
// periodic procedural textures so translated sampling never runs off the
// data; fence masks are rasterized analytically at each frame's phase
// offset, which makes the ground truth pixel-exact.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "defence/core.hpp"

namespace defence {

enum class BackgroundKind { SmoothNoise, Gradient, Checker };
enum class FencePattern { RectangularGrid, DiamondLattice };

struct FenceSpec {
  FencePattern pattern = FencePattern::RectangularGrid;
  int wire_width = 2;
  int cell_size = 16;
  double rotation_deg = 0.0;
  std::array<double, 3> color{0.35, 0.35, 0.35};
  double irregularity = 0.0;  // jitter amplitude in pixels

  void validate() const {
    if (wire_width < 1) throw InvalidSpec("FenceSpec: wire_width must be >= 1");
    if (cell_size <= 2 * wire_width)
      throw InvalidSpec("FenceSpec: cell_size must exceed 2 x wire_width");
  }
};

struct SceneSpec {
  int width = 96;
  int height = 96;
  int frame_count = 5;
  BackgroundKind background = BackgroundKind::SmoothNoise;
  Translation background_motion{2.0, 0.0};  // per-frame, constant velocity
  Translation fence_motion{0.0, 0.0};
  FenceSpec fence;
  std::uint32_t rng_seed = 1;

  void validate() const {
    if (width <= 0 || height <= 0) throw InvalidSpec("SceneSpec: bad dimensions");
    if (frame_count < 1) throw InvalidSpec("SceneSpec: frame_count must be >= 1");
    if (!std::isfinite(background_motion.dx) || !std::isfinite(background_motion.dy) ||
        !std::isfinite(fence_motion.dx) || !std::isfinite(fence_motion.dy))
      throw InvalidSpec("SceneSpec: motion must be finite");
    fence.validate();
  }
};

namespace detail {

// Periodic value-noise lattice, bilinearly interpolated and octave-summed.
// Band-limited by construction, which keeps registration and flow well
// posed on the fixtures.
class PeriodicNoise {
 public:
  PeriodicNoise(std::uint32_t seed, int lattice = 16) : lattice_(lattice) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    values_.resize(static_cast<std::size_t>(lattice_) * lattice_);
    for (double& v : values_) v = dist(rng);
  }

  double at(double x, double y) const {
    const double gx = x - lattice_ * std::floor(x / lattice_);
    const double gy = y - lattice_ * std::floor(y / lattice_);
    const int x0 = static_cast<int>(gx) % lattice_;
    const int y0 = static_cast<int>(gy) % lattice_;
    const int x1 = (x0 + 1) % lattice_;
    const int y1 = (y0 + 1) % lattice_;
    const double fx = gx - std::floor(gx);
    const double fy = gy - std::floor(gy);
    const double sfx = fx * fx * (3.0 - 2.0 * fx);
    const double sfy = fy * fy * (3.0 - 2.0 * fy);
    const double top = lerp(v(x0, y0), v(x1, y0), sfx);
    const double bot = lerp(v(x0, y1), v(x1, y1), sfx);
    return lerp(top, bot, sfy);
  }

 private:
  static double lerp(double a, double b, double t) { return a + (b - a) * t; }
  double v(int x, int y) const {
    return values_[static_cast<std::size_t>(y) * lattice_ + x];
  }
  int lattice_;
  std::vector<double> values_;
};

/// Continuous periodic background texture value at world coordinates.
inline std::array<double, 3> background_at(const SceneSpec& spec,
                                           const PeriodicNoise& noise_r,
                                           const PeriodicNoise& noise_g,
                                           const PeriodicNoise& noise_b,
                                           double x, double y) {
  switch (spec.background) {
    case BackgroundKind::SmoothNoise: {
      const double scale = 12.0;  // world pixels per lattice cell
      return {0.15 + 0.7 * noise_r.at(x / scale, y / scale),
              0.15 + 0.7 * noise_g.at(x / scale, y / scale),
              0.15 + 0.7 * noise_b.at(x / scale, y / scale)};
    }
    case BackgroundKind::Gradient: {
      const double px = x / spec.width - std::floor(x / spec.width);
      const double py = y / spec.height - std::floor(y / spec.height);
      return {px, py, 0.5 * (px + py)};
    }
    case BackgroundKind::Checker: {
      const int cell = 8;
      const int cx = static_cast<int>(std::floor(x / cell));
      const int cy = static_cast<int>(std::floor(y / cell));
      const double v = ((cx + cy) % 2 + 2) % 2 == 0 ? 0.2 : 0.8;
      return {v, v, v};
    }
  }
  return {0.0, 0.0, 0.0};
}

/// Fence membership test at continuous coordinates with a phase offset.
inline bool fence_at(const FenceSpec& spec, const PeriodicNoise& jitter_x,
                     const PeriodicNoise& jitter_y, double x, double y,
                     double offset_x, double offset_y) {
  double px = x - offset_x, py = y - offset_y;
  double rot = spec.rotation_deg;
  if (spec.pattern == FencePattern::DiamondLattice) rot += 45.0;
  if (rot != 0.0) {
    const double rad = rot * M_PI / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double rx = c * px + s * py;
    const double ry = -s * px + c * py;
    px = rx;
    py = ry;
  }
  if (spec.irregularity > 0.0) {
    px += spec.irregularity * (2.0 * jitter_x.at(x / 9.0, y / 9.0) - 1.0);
    py += spec.irregularity * (2.0 * jitter_y.at(x / 9.0, y / 9.0) - 1.0);
  }
  const double c = spec.cell_size;
  const double mx = px - c * std::floor(px / c);
  const double my = py - c * std::floor(py / c);
  return mx < spec.wire_width || my < spec.wire_width;
}

}  // namespace detail

/// Deterministic rasterized lattice mask (phase offset 0).
inline FenceMask generate_fence_mask(const FenceSpec& spec, int width, int height,
                                     std::uint32_t seed = 1) {
  spec.validate();
  if (width <= 0 || height <= 0) throw InvalidSpec("generate_fence_mask: bad dimensions");
  detail::PeriodicNoise jx(seed * 2654435761u + 11), jy(seed * 2654435761u + 29);
  FenceMask mask(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      mask.set(x, y, detail::fence_at(spec, jx, jy, x, y, 0.0, 0.0));
  return mask;
}

struct Scene {
  std::vector<Frame> fenced_frames;
  std::vector<Frame> clean_frames;
  std::vector<FenceMask> masks;
};

/// Clean frame t samples the background at offset t x background_motion;
/// the fence mask shifts by t x fence_motion; the fenced frame composites
/// the fence color where the mask is true.
inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  detail::PeriodicNoise nr(spec.rng_seed), ng(spec.rng_seed + 101), nb(spec.rng_seed + 211);
  detail::PeriodicNoise jx(spec.rng_seed * 2654435761u + 11),
      jy(spec.rng_seed * 2654435761u + 29);

  Scene scene;
  for (int t = 0; t < spec.frame_count; ++t) {
    const double bx = t * spec.background_motion.dx;
    const double by = t * spec.background_motion.dy;
    const double fx = t * spec.fence_motion.dx;
    const double fy = t * spec.fence_motion.dy;

    Frame clean(spec.width, spec.height);
    Frame fenced(spec.width, spec.height);
    FenceMask mask(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        const auto rgb = detail::background_at(spec, nr, ng, nb, x + bx, y + by);
        clean.set_pixel(x, y, rgb);
        const bool f = detail::fence_at(spec.fence, jx, jy, x, y, fx, fy);
        mask.set(x, y, f);
        fenced.set_pixel(x, y, f ? spec.fence.color : rgb);
      }
    scene.clean_frames.push_back(std::move(clean));
    scene.fenced_frames.push_back(std::move(fenced));
    scene.masks.push_back(std::move(mask));
  }
  return scene;
}

}  // namespace defence
