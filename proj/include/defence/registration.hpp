#pragma once

// Translation estimation between frames via FFT phase correlation, plus
// translation warping of soft masks. Adjacent video frames move little,
// so a translation-only model is used throughout.

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "defence/core.hpp"

namespace defence {

namespace detail {

// fftw plan creation/destruction is not thread safe; execution of a
// private plan is.
inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  fftw_complex* p = nullptr;
  explicit FftwBuffer(std::size_t n) {
    p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
};

inline void fft2d(fftw_complex* in, fftw_complex* out, int w, int h, int sign) {
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    plan = fftw_plan_dft_2d(h, w, in, out, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan);
  }
}

// Parabola through (-1,ym), (0,y0), (+1,yp); offset of the vertex in [-0.5,0.5].
inline double parabolic_offset(double ym, double y0, double yp) {
  const double denom = ym - 2.0 * y0 + yp;
  if (std::abs(denom) < 1e-15) return 0.0;
  double off = 0.5 * (ym - yp) / denom;
  return std::clamp(off, -0.5, 0.5);
}

}  // namespace detail

struct PhaseCorrelateOptions {
  bool hann_window = false;   // inputs are same-scene crops; off by default
  double epsilon = 1e-12;     // spectral normalization guard
};

/// Estimates the translation t such that `moving` equals `reference`
/// circularly shifted by t. Integer peak is located on the inverse
/// cross-power surface, unwrapped to a signed shift, then refined per
/// axis with a parabolic fit.
inline Translation phase_correlate(const Grid& reference, const Grid& moving,
                                   const PhaseCorrelateOptions& opts = {}) {
  if (!reference.same_size(moving))
    throw DimensionMismatch("phase_correlate: grids differ in size");
  const int w = reference.width(), h = reference.height();
  if (w < 8 || h < 8)
    throw InputTooSmall("phase_correlate: requires width, height >= 8");

  auto is_constant = [](const Grid& g) {
    const auto [mn, mx] = std::minmax_element(g.data().begin(), g.data().end());
    return *mx - *mn == 0.0;
  };
  if (is_constant(reference) || is_constant(moving))
    throw DegenerateInput("phase_correlate: constant input grid");

  const std::size_t n = static_cast<std::size_t>(w) * h;
  detail::FftwBuffer a(n), b(n), corr(n);
  for (std::size_t i = 0; i < n; ++i) {
    double wa = 1.0;
    if (opts.hann_window) {
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      wa = (0.5 - 0.5 * std::cos(2.0 * M_PI * x / (w - 1))) *
           (0.5 - 0.5 * std::cos(2.0 * M_PI * y / (h - 1)));
    }
    a.p[i][0] = reference[i] * wa;
    a.p[i][1] = 0.0;
    b.p[i][0] = moving[i] * wa;
    b.p[i][1] = 0.0;
  }
  detail::fft2d(a.p, a.p, w, h, FFTW_FORWARD);
  detail::fft2d(b.p, b.p, w, h, FFTW_FORWARD);

  // Normalized cross-power spectrum conj(A) * B.
  for (std::size_t i = 0; i < n; ++i) {
    const std::complex<double> A(a.p[i][0], a.p[i][1]);
    const std::complex<double> B(b.p[i][0], b.p[i][1]);
    const std::complex<double> R = std::conj(A) * B;
    const double mag = std::abs(R);
    const std::complex<double> Rn = R / (mag + opts.epsilon);
    corr.p[i][0] = Rn.real();
    corr.p[i][1] = Rn.imag();
  }
  detail::fft2d(corr.p, corr.p, w, h, FFTW_BACKWARD);

  std::size_t peak = 0;
  double peak_val = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (corr.p[i][0] > peak_val) {
      peak_val = corr.p[i][0];
      peak = i;
    }
  }
  const int px = static_cast<int>(peak % w);
  const int py = static_cast<int>(peak / w);

  auto surf = [&](int x, int y) {
    x = ((x % w) + w) % w;
    y = ((y % h) + h) % h;
    return corr.p[static_cast<std::size_t>(y) * w + x][0];
  };
  const double offx =
      detail::parabolic_offset(surf(px - 1, py), surf(px, py), surf(px + 1, py));
  const double offy =
      detail::parabolic_offset(surf(px, py - 1), surf(px, py), surf(px, py + 1));

  // Unwrap to a signed shift in (-W/2, W/2] x (-H/2, H/2].
  double dx = px + offx;
  double dy = py + offy;
  if (dx > w / 2.0) dx -= w;
  if (dy > h / 2.0) dy -= h;
  return {dx, dy};
}

/// output(x,y) = bilinear sample of `mask` at (x-dx, y-dy); samples that
/// fall outside the grid score 0.
inline SoftMask warp_by_translation(const SoftMask& mask, const Translation& t) {
  SoftMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const auto [v, ok] = sample_bilinear(mask, x - t.dx, y - t.dy);
      out.at(x, y) = ok ? v : 0.0;
    }
  }
  return out;
}

}  // namespace defence
