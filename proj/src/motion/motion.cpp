#include "segprop/motion.hpp"

#include <algorithm>
#include <cmath>


namespace segprop {

void FlowParams::validate() const {
  if (pyramid_levels < 1) {
    throw ParameterError("pyramid_levels must be >= 1");
  }
  if (window_radius < 1) {
    throw ParameterError("window_radius must be >= 1");
  }
  if (iterations_per_level < 1) {
    throw ParameterError("iterations_per_level must be >= 1");
  }
  if (!(min_eigen_threshold >= 0.0)) {
    throw ParameterError("min_eigen_threshold must be >= 0");
  }
}

namespace {

// Separable [1 2 1]/4 blur with clamped borders followed by 2x decimation;
// coarse pixel i sits on fine pixel 2i.
Frame downsample(const Frame& in) {
  const int h = in.height();
  const int w = in.width();
  const int ch = in.channels();
  std::vector<float> horiz(in.data().size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0);
      const int xr = std::min(x + 1, w - 1);
      for (int c = 0; c < ch; ++c) {
        horiz[(static_cast<std::size_t>(y) * w + x) * ch + c] =
            0.25f * in.at(y, xl, c) + 0.5f * in.at(y, x, c) +
            0.25f * in.at(y, xr, c);
      }
    }
  }
  auto at = [&](int y, int x, int c) {
    return horiz[(static_cast<std::size_t>(y) * w + x) * ch + c];
  };
  const int hc = (h + 1) / 2;
  const int wc = (w + 1) / 2;
  Frame out(hc, wc, ch);
  for (int y = 0; y < hc; ++y) {
    const int fy = 2 * y;
    const int yu = std::max(fy - 1, 0);
    const int yd = std::min(fy + 1, h - 1);
    for (int x = 0; x < wc; ++x) {
      for (int c = 0; c < ch; ++c) {
        out.at(y, x, c) = std::clamp(0.25f * at(yu, 2 * x, c) +
                                         0.5f * at(fy, 2 * x, c) +
                                         0.25f * at(yd, 2 * x, c),
                                     0.0f, 1.0f);
      }
    }
  }
  return out;
}

MotionField upsample_flow(const MotionField& coarse, int h, int w) {
  MotionField fine(h, w);
  const int hc = coarse.height();
  const int wc = coarse.width();
  for (int y = 0; y < h; ++y) {
    const double sy = std::min(y / 2.0, static_cast<double>(hc - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, hc - 1);
    const double ay = sy - y0;
    for (int x = 0; x < w; ++x) {
      const double sx = std::min(x / 2.0, static_cast<double>(wc - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, wc - 1);
      const double ax = sx - x0;
      auto lerp = [&](auto get) {
        const double top = get(y0, x0) + ax * (get(y0, x1) - get(y0, x0));
        const double bot = get(y1, x0) + ax * (get(y1, x1) - get(y1, x0));
        return top + ay * (bot - top);
      };
      fine.u(y, x) = static_cast<float>(
          2.0 * lerp([&](int yy, int xx) { return coarse.u(yy, xx); }));
      fine.v(y, x) = static_cast<float>(
          2.0 * lerp([&](int yy, int xx) { return coarse.v(yy, xx); }));
    }
  }
  return fine;
}

// Bilinear sample of channel c at (sx, sy); the caller keeps the position
// inside [0, w-1] x [0, h-1].
inline double sample(const Frame& f, double sx, double sy, int c) {
  const int x0 = std::min(static_cast<int>(sx), f.width() - 1);
  const int y0 = std::min(static_cast<int>(sy), f.height() - 1);
  const int x1 = std::min(x0 + 1, f.width() - 1);
  const int y1 = std::min(y0 + 1, f.height() - 1);
  const double ax = sx - x0;
  const double ay = sy - y0;
  const double top = f.at(y0, x0, c) + ax * (f.at(y0, x1, c) - f.at(y0, x0, c));
  const double bot = f.at(y1, x0, c) + ax * (f.at(y1, x1, c) - f.at(y1, x0, c));
  return top + ay * (bot - top);
}

// Refines `flow` in place at one pyramid level. Each pixel iterates on its
// own displacement d, matching the window of b around it against a sampled
// at window + d; window samples that fall outside the image are dropped.
void refine_level(const Frame& a, const Frame& b, const FlowParams& params,
                  MotionField& flow) {
  const int h = b.height();
  const int w = b.width();
  const int ch = b.channels();
  const int r = params.window_radius;
  const std::size_t n = static_cast<std::size_t>(h) * w;

  // Spatial gradients of the target frame (central differences, clamped).
  std::vector<double> ix(n * ch), iy(n * ch);
  for (int y = 0; y < h; ++y) {
    const int yu = std::max(y - 1, 0);
    const int yd = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0);
      const int xr = std::min(x + 1, w - 1);
      for (int c = 0; c < ch; ++c) {
        const std::size_t i = (static_cast<std::size_t>(y) * w + x) * ch + c;
        ix[i] = 0.5 * (static_cast<double>(b.at(y, xr, c)) - b.at(y, xl, c));
        iy[i] = 0.5 * (static_cast<double>(b.at(yd, x, c)) - b.at(yu, x, c));
      }
    }
  }

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int wy0 = std::max(y - r, 0);
    const int wy1 = std::min(y + r, h - 1);
    for (int x = 0; x < w; ++x) {
      const int wx0 = std::max(x - r, 0);
      const int wx1 = std::min(x + r, w - 1);
      double du = flow.u(y, x);
      double dv = flow.v(y, x);
      for (int iter = 0; iter < params.iterations_per_level; ++iter) {
        double gxx = 0.0, gxy = 0.0, gyy = 0.0, bx = 0.0, by = 0.0;
        int count = 0;
        for (int qy = wy0; qy <= wy1; ++qy) {
          const double sy = qy + dv;
          if (sy < 0.0 || sy > h - 1) continue;
          for (int qx = wx0; qx <= wx1; ++qx) {
            const double sx = qx + du;
            if (sx < 0.0 || sx > w - 1) continue;
            ++count;
            const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
            for (int c = 0; c < ch; ++c) {
              const double gx = ix[q * ch + c];
              const double gy = iy[q * ch + c];
              const double diff = sample(a, sx, sy, c) - b.at(qy, qx, c);
              gxx += gx * gx;
              gxy += gx * gy;
              gyy += gy * gy;
              bx += gx * diff;
              by += gy * diff;
            }
          }
        }
        if (count == 0) break;
        // Smallest eigenvalue of the mean per-channel structure tensor.
        const double norm = static_cast<double>(count) * ch;
        const double sxx = gxx / norm;
        const double sxy = gxy / norm;
        const double syy = gyy / norm;
        const double min_eig =
            0.5 * (sxx + syy) -
            std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
        if (!(min_eig >= params.min_eigen_threshold && min_eig > 0.0)) break;
        const double det = gxx * gyy - gxy * gxy;
        const double step_u = -(gyy * bx - gxy * by) / det;
        const double step_v = -(gxx * by - gxy * bx) / det;
        du += step_u;
        dv += step_v;
        if (step_u * step_u + step_v * step_v < 1e-6) break;
      }
      flow.u(y, x) = static_cast<float>(du);
      flow.v(y, x) = static_cast<float>(dv);
    }
  }
}

}  // namespace

MotionField estimate_motion(const Frame& frame_a, const Frame& frame_b,
                            const FlowParams& params) {
  params.validate();
  require_same_size(frame_a.size(), frame_b.size(), "estimate_motion");
  if (frame_a.channels() != frame_b.channels()) {
    throw ValidationError("estimate_motion: channel count mismatch (" +
                          std::to_string(frame_a.channels()) + " vs " +
                          std::to_string(frame_b.channels()) + ")");
  }
  const long long min_side = (1LL << (params.pyramid_levels - 1)) *
                             (2LL * params.window_radius + 1);
  if (std::min(frame_a.height(), frame_a.width()) < min_side) {
    throw ParameterError(
        "estimate_motion: frames of " + to_string(frame_a.size()) +
        " are too small for " + std::to_string(params.pyramid_levels) +
        " pyramid levels with window radius " +
        std::to_string(params.window_radius) + " (need min side >= " +
        std::to_string(min_side) + ")");
  }

  std::vector<Frame> pyr_a{frame_a};
  std::vector<Frame> pyr_b{frame_b};
  for (int level = 1; level < params.pyramid_levels; ++level) {
    pyr_a.push_back(downsample(pyr_a.back()));
    pyr_b.push_back(downsample(pyr_b.back()));
  }

  MotionField flow(pyr_b.back().height(), pyr_b.back().width());
  for (int level = params.pyramid_levels - 1; level >= 0; --level) {
    const Frame& b = pyr_b[level];
    if (flow.size() != b.size()) {
      flow = upsample_flow(flow, b.height(), b.width());
    }
    refine_level(pyr_a[level], b, params, flow);
  }
  return flow;
}

MotionField predict_motion(const MotionField& prev_field) {
  prev_field.validate();
  return prev_field;
}

EndpointError endpoint_error(const MotionField& estimate,
                             const MotionField& truth,
                             std::span<const std::uint8_t> mask) {
  require_same_size(estimate.size(), truth.size(), "endpoint_error");
  const std::size_t n =
      static_cast<std::size_t>(estimate.height()) * estimate.width();
  if (!mask.empty() && mask.size() != n) {
    throw ValidationError("endpoint_error: mask size mismatch");
  }
  std::vector<double> errors;
  errors.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    if (!mask.empty() && mask[p] == 0) continue;
    const double du = static_cast<double>(estimate.uv()[2 * p]) - truth.uv()[2 * p];
    const double dv =
        static_cast<double>(estimate.uv()[2 * p + 1]) - truth.uv()[2 * p + 1];
    errors.push_back(std::hypot(du, dv));
  }
  EndpointError stats;
  stats.count = errors.size();
  if (errors.empty()) return stats;
  double sum = 0.0;
  for (double e : errors) sum += e;
  stats.mean = sum / errors.size();
  std::sort(errors.begin(), errors.end());
  auto quantile = [&](double q) {
    const std::size_t idx = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(errors.size())) - 1);
    return errors[std::min(idx, errors.size() - 1)];
  };
  stats.median = quantile(0.5);
  stats.p95 = quantile(0.95);
  stats.max = errors.back();
  return stats;
}

}  // namespace segprop
