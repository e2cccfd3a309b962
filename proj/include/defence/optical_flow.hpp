#pragma once

// Occlusion-aware coarse-to-fine optical flow. The data term is an L1
// penalty on the warped brightness difference, switched off on fence
// pixels so their motion comes from the regularizer alone; the
// regularizer is anisotropic TV on each flow component. Each pyramid
// level runs a few warping rounds; each round linearizes the data term
// and solves the resulting reweighted least squares problem with SOR
// sweeps in a fixed raster order (the solver is deterministic).

#include <cmath>
#include <vector>

#include "defence/core.hpp"

namespace defence {

struct FlowParams {
  double lambda = 0.0005;        // weight of the regularization term
  double pyramid_scale = 0.5;    // size ratio per level
  int min_dimension = 16;        // stop the pyramid before min(W,H) drops below
  int outer_warps_per_level = 3;
  int irls_iterations = 5;
  int sor_iterations = 30;
  double sor_omega = 1.9;        // relaxation factor, (0,2)
  double irls_epsilon = 1e-3;    // Charbonnier smoothing constant
  bool median_filter = true;     // 3x3 median on the flow between warps

  void validate() const {
    if (!(lambda > 0.0)) throw InvalidSpec("FlowParams: lambda must be > 0");
    if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0))
      throw InvalidSpec("FlowParams: pyramid_scale must be in (0,1)");
    if (!(sor_omega > 0.0 && sor_omega < 2.0))
      throw InvalidSpec("FlowParams: sor_omega must be in (0,2)");
    if (!(irls_epsilon > 0.0)) throw InvalidSpec("FlowParams: irls_epsilon must be > 0");
    if (min_dimension < 4) throw InvalidSpec("FlowParams: min_dimension must be >= 4");
  }
};

struct Pyramid {
  std::vector<Grid> levels;  // level 0 finest
};

namespace detail {

inline Grid gaussian_smooth(const Grid& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = in.width(), h = in.height();
  Grid tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xi = std::clamp(x + i, 0, w - 1);
        acc += kernel[i + radius] * in.at(xi, y);
      }
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yi = std::clamp(y + i, 0, h - 1);
        acc += kernel[i + radius] * tmp.at(x, yi);
      }
      out.at(x, y) = acc;
    }
  return out;
}

inline Grid resize_bilinear(const Grid& in, int w, int h) {
  Grid out(w, h);
  const double sx = static_cast<double>(in.width()) / w;
  const double sy = static_cast<double>(in.height()) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double srcx = std::clamp((x + 0.5) * sx - 0.5, 0.0, in.width() - 1.0);
      const double srcy = std::clamp((y + 0.5) * sy - 0.5, 0.0, in.height() - 1.0);
      out.at(x, y) = sample_bilinear(in, srcx, srcy).first;
    }
  return out;
}

// Mask downsampling with "any true in footprint" semantics: a level pixel
// is fence if any full-resolution pixel of its footprint is.
inline FenceMask downsample_mask(const FenceMask& full, int w, int h) {
  FenceMask out(w, h);
  const double sx = static_cast<double>(full.width()) / w;
  const double sy = static_cast<double>(full.height()) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int x0 = static_cast<int>(std::floor(x * sx));
      const int y0 = static_cast<int>(std::floor(y * sy));
      const int x1 = std::min(full.width(), static_cast<int>(std::ceil((x + 1) * sx)));
      const int y1 = std::min(full.height(), static_cast<int>(std::ceil((y + 1) * sy)));
      bool any = false;
      for (int yy = y0; yy < y1 && !any; ++yy)
        for (int xx = x0; xx < x1; ++xx)
          if (full.at(xx, yy)) { any = true; break; }
      out.set(x, y, any);
    }
  return out;
}

inline Grid median3x3(const Grid& in) {
  const int w = in.width(), h = in.height();
  Grid out(w, h);
  double window[9];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = std::clamp(x + dx, 0, w - 1);
          const int ny = std::clamp(y + dy, 0, h - 1);
          window[n++] = in.at(nx, ny);
        }
      std::nth_element(window, window + 4, window + 9);
      out.at(x, y) = window[4];
    }
  return out;
}

// One linearized inner problem at a pyramid level: minimize over (du,dv)
//   sum wd * (It + Ix du + Iy dv)^2
// + lambda * sum [wux (dx(u+du))^2 + wuy (dy(u+du))^2 + wvx (...) + wvy (...)]
// with forward differences and Neumann boundaries. Weights are fixed for
// the solve; IRLS refreshes them between solves.
struct LinearizedSystem {
  int width = 0, height = 0;
  double lambda = 0.0;
  Grid wd;         // data weight per pixel (0 on fence / invalid pixels)
  Grid ix, iy, it; // spatial and temporal derivatives
  Grid wux, wuy, wvx, wvy;  // smoothness weights per forward-difference edge
  Grid u, v;       // current flow the increments add onto
};

// Deterministic SOR sweeps in raster order. du, dv are updated in place.
inline void solve_increment_sor(const LinearizedSystem& sys, Grid& du, Grid& dv,
                                int iterations, double omega) {
  const int w = sys.width, h = sys.height;
  const double lam = sys.lambda;
  for (int it = 0; it < iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Edge weights touching (x,y): right, left, down, up.
        const double wur = x + 1 < w ? sys.wux.at(x, y) : 0.0;
        const double wul = x > 0 ? sys.wux.at(x - 1, y) : 0.0;
        const double wud = y + 1 < h ? sys.wuy.at(x, y) : 0.0;
        const double wuu = y > 0 ? sys.wuy.at(x, y - 1) : 0.0;
        const double wvr = x + 1 < w ? sys.wvx.at(x, y) : 0.0;
        const double wvl = x > 0 ? sys.wvx.at(x - 1, y) : 0.0;
        const double wvd = y + 1 < h ? sys.wvy.at(x, y) : 0.0;
        const double wvu = y > 0 ? sys.wvy.at(x, y - 1) : 0.0;

        const double wd = sys.wd.at(x, y);
        const double ix = sys.ix.at(x, y), iy = sys.iy.at(x, y);
        const double itv = sys.it.at(x, y);
        const double u0 = sys.u.at(x, y), v0 = sys.v.at(x, y);

        // Neighbor totals of the combined flow u+du at current iterate.
        auto uc = [&](int xx, int yy) { return sys.u.at(xx, yy) + du.at(xx, yy); };
        auto vc = [&](int xx, int yy) { return sys.v.at(xx, yy) + dv.at(xx, yy); };

        double su = 0.0, wsumu = wur + wul + wud + wuu;
        if (x + 1 < w) su += wur * uc(x + 1, y);
        if (x > 0) su += wul * uc(x - 1, y);
        if (y + 1 < h) su += wud * uc(x, y + 1);
        if (y > 0) su += wuu * uc(x, y - 1);
        double sv = 0.0, wsumv = wvr + wvl + wvd + wvu;
        if (x + 1 < w) sv += wvr * vc(x + 1, y);
        if (x > 0) sv += wvl * vc(x - 1, y);
        if (y + 1 < h) sv += wvd * vc(x, y + 1);
        if (y > 0) sv += wvu * vc(x, y - 1);

        // du update with dv held at its current value.
        {
          const double denom = wd * ix * ix + lam * wsumu + 1e-12;
          const double rhs = -wd * ix * (itv + iy * dv.at(x, y)) +
                             lam * (su - wsumu * u0);
          const double gs = rhs / denom;
          du.at(x, y) = (1.0 - omega) * du.at(x, y) + omega * gs;
        }
        {
          const double denom = wd * iy * iy + lam * wsumv + 1e-12;
          const double rhs = -wd * iy * (itv + ix * du.at(x, y)) +
                             lam * (sv - wsumv * v0);
          const double gs = rhs / denom;
          dv.at(x, y) = (1.0 - omega) * dv.at(x, y) + omega * gs;
        }
      }
    }
  }
}

inline double charbonnier_weight(double r, double eps) {
  return 1.0 / std::sqrt(r * r + eps * eps);
}

}  // namespace detail

/// Level 0 is the input; each coarser level is the previous level
/// Gaussian-smoothed and resampled by pyramid_scale.
inline Pyramid build_pyramid(const Grid& image, const FlowParams& params) {
  params.validate();
  if (std::min(image.width(), image.height()) < params.min_dimension)
    throw InputTooSmall("build_pyramid: image smaller than min_dimension");
  Pyramid pyr;
  pyr.levels.push_back(image);
  const double sigma = 1.0 / std::sqrt(2.0 * params.pyramid_scale);
  for (;;) {
    const Grid& prev = pyr.levels.back();
    const int nw = static_cast<int>(std::lround(prev.width() * params.pyramid_scale));
    const int nh = static_cast<int>(std::lround(prev.height() * params.pyramid_scale));
    if (std::min(nw, nh) < params.min_dimension) break;
    pyr.levels.push_back(detail::resize_bilinear(detail::gaussian_smooth(prev, sigma), nw, nh));
  }
  return pyr;
}

/// warped(x,y) = bilinear sample of `neighbor` at (x+u, y+v); validity is
/// false where the sample left the frame.
inline std::pair<Frame, FenceMask> warp_frame(const Frame& neighbor, const FlowField& flow) {
  if (neighbor.width() != flow.width() || neighbor.height() != flow.height())
    throw DimensionMismatch("warp_frame: frame/flow size mismatch");
  Frame warped(neighbor.width(), neighbor.height());
  FenceMask validity(neighbor.width(), neighbor.height());
  for (int y = 0; y < neighbor.height(); ++y)
    for (int x = 0; x < neighbor.width(); ++x) {
      const auto s = sample_bilinear(neighbor, x + flow.u.at(x, y), y + flow.v.at(x, y));
      if (s.valid) warped.set_pixel(x, y, s.rgb);
      validity.set(x, y, s.valid);
    }
  return {std::move(warped), std::move(validity)};
}

/// Discretized objective of the flow model: masked L1 brightness constancy
/// plus anisotropic TV of both flow components. Used by the solver's
/// monotonicity diagnostics and by tests.
inline double flow_energy(const Grid& target, const Grid& neighbor,
                          const FenceMask& fence, const FlowField& flow,
                          double lambda) {
  const int w = target.width(), h = target.height();
  double data = 0.0, reg = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!fence.at(x, y)) {
        const auto [val, ok] =
            sample_bilinear(neighbor, x + flow.u.at(x, y), y + flow.v.at(x, y));
        if (ok) data += std::abs(val - target.at(x, y));
      }
      if (x + 1 < w) {
        reg += std::abs(flow.u.at(x + 1, y) - flow.u.at(x, y));
        reg += std::abs(flow.v.at(x + 1, y) - flow.v.at(x, y));
      }
      if (y + 1 < h) {
        reg += std::abs(flow.u.at(x, y + 1) - flow.u.at(x, y));
        reg += std::abs(flow.v.at(x, y + 1) - flow.v.at(x, y));
      }
    }
  return data + lambda * reg;
}

struct FlowDiagnostics {
  std::vector<double> finest_level_energy;  // after each outer warp, level 0
};

/// Dense flow mapping target coordinates into neighbor coordinates.
/// `combined_fence` pixels contribute no data cost. When `neighbor_fence`
/// is given, the data term is additionally switched off wherever the
/// current flow samples a fence pixel of the neighbor, which keeps the
/// fence-to-fence match from competing with the background motion.
inline FlowField estimate_flow(const Frame& target, const Frame& neighbor,
                               const FenceMask& combined_fence,
                               const FlowParams& params,
                               FlowDiagnostics* diag = nullptr,
                               const FenceMask* neighbor_fence = nullptr) {
  params.validate();
  if (!target.same_size(neighbor) || target.width() != combined_fence.width() ||
      target.height() != combined_fence.height())
    throw DimensionMismatch("estimate_flow: input size mismatch");

  const Grid gray_t = to_grayscale(target);
  const Grid gray_n = to_grayscale(neighbor);
  const Pyramid pyr_t = build_pyramid(gray_t, params);
  const Pyramid pyr_n = build_pyramid(gray_n, params);
  const int n_levels = static_cast<int>(pyr_t.levels.size());

  Grid u, v;
  for (int level = n_levels - 1; level >= 0; --level) {
    const Grid& lt = pyr_t.levels[level];
    const Grid& ln = pyr_n.levels[level];
    const int w = lt.width(), h = lt.height();
    const FenceMask fence = detail::downsample_mask(combined_fence, w, h);
    Grid nfence_soft;
    if (neighbor_fence) {
      const FenceMask nf = detail::downsample_mask(*neighbor_fence, w, h);
      nfence_soft = Grid(w, h);
      for (std::size_t i = 0; i < nf.size(); ++i)
        nfence_soft[i] = nf.get(i) ? 1.0 : 0.0;
    }

    if (level == n_levels - 1) {
      u = Grid(w, h);
      v = Grid(w, h);
    } else {
      // Upsample and rescale the coarser flow.
      const double rx = static_cast<double>(w) / u.width();
      const double ry = static_cast<double>(h) / u.height();
      Grid nu = detail::resize_bilinear(u, w, h);
      Grid nv = detail::resize_bilinear(v, w, h);
      for (auto& x : nu.data()) x *= rx;
      for (auto& x : nv.data()) x *= ry;
      u = std::move(nu);
      v = std::move(nv);
    }

    for (int outer = 0; outer < params.outer_warps_per_level; ++outer) {
      // Warp the neighbor by the current flow and linearize. A pixel whose
      // sample touches the neighbor's fence is excluded from the data term
      // for this round, the same as a fence pixel of the target.
      Grid warped(w, h);
      FenceMask valid(w, h);
      FenceMask fence_eff = fence;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double sx = x + u.at(x, y), sy = y + v.at(x, y);
          const auto [val, ok] = sample_bilinear(ln, sx, sy);
          warped.at(x, y) = ok ? val : lt.at(x, y);
          valid.set(x, y, ok);
          if (neighbor_fence && ok && sample_bilinear(nfence_soft, sx, sy).first > 0.0)
            fence_eff.set(x, y, true);
        }

      detail::LinearizedSystem sys;
      sys.width = w;
      sys.height = h;
      sys.lambda = params.lambda;
      sys.wd = Grid(w, h);
      sys.ix = Grid(w, h);
      sys.iy = Grid(w, h);
      sys.it = Grid(w, h);
      sys.wux = Grid(w, h);
      sys.wuy = Grid(w, h);
      sys.wvx = Grid(w, h);
      sys.wvy = Grid(w, h);
      sys.u = u;
      sys.v = v;

      // Central-difference derivatives of the warped neighbor, blended with
      // the target's for stability.
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
          const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
          const double gx_w = (warped.at(xp, y) - warped.at(xm, y)) / (xp - xm);
          const double gy_w = (warped.at(x, yp) - warped.at(x, ym)) / (yp - ym);
          const double gx_t = (lt.at(xp, y) - lt.at(xm, y)) / (xp - xm);
          const double gy_t = (lt.at(x, yp) - lt.at(x, ym)) / (yp - ym);
          sys.ix.at(x, y) = 0.5 * (gx_w + gx_t);
          sys.iy.at(x, y) = 0.5 * (gy_w + gy_t);
          sys.it.at(x, y) = warped.at(x, y) - lt.at(x, y);
        }

      Grid du(w, h), dv(w, h);
      for (int irls = 0; irls < params.irls_iterations; ++irls) {
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            if (fence_eff.at(x, y) || !valid.at(x, y)) {
              sys.wd.at(x, y) = 0.0;
            } else {
              const double r = sys.it.at(x, y) + sys.ix.at(x, y) * du.at(x, y) +
                               sys.iy.at(x, y) * dv.at(x, y);
              sys.wd.at(x, y) = detail::charbonnier_weight(r, params.irls_epsilon);
            }
            if (x + 1 < w) {
              const double ru = u.at(x + 1, y) + du.at(x + 1, y) - u.at(x, y) - du.at(x, y);
              const double rv = v.at(x + 1, y) + dv.at(x + 1, y) - v.at(x, y) - dv.at(x, y);
              sys.wux.at(x, y) = detail::charbonnier_weight(ru, params.irls_epsilon);
              sys.wvx.at(x, y) = detail::charbonnier_weight(rv, params.irls_epsilon);
            }
            if (y + 1 < h) {
              const double ru = u.at(x, y + 1) + du.at(x, y + 1) - u.at(x, y) - du.at(x, y);
              const double rv = v.at(x, y + 1) + dv.at(x, y + 1) - v.at(x, y) - dv.at(x, y);
              sys.wuy.at(x, y) = detail::charbonnier_weight(ru, params.irls_epsilon);
              sys.wvy.at(x, y) = detail::charbonnier_weight(rv, params.irls_epsilon);
            }
          }
        detail::solve_increment_sor(sys, du, dv, params.sor_iterations, params.sor_omega);
      }

      for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] += du[i];
        v[i] += dv[i];
        if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
          throw NonFiniteState("estimate_flow: solver iterate became non-finite");
      }
      if (params.median_filter) {
        u = detail::median3x3(u);
        v = detail::median3x3(v);
      }
      if (diag && level == 0) {
        FlowField f;
        f.u = u;
        f.v = v;
        diag->finest_level_energy.push_back(
            flow_energy(lt, ln, fence, f, params.lambda));
      }
    }
  }

  FlowField flow;
  flow.u = std::move(u);
  flow.v = std::move(v);
  return flow;
}

}  // namespace defence
