#include "segprop/warp.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace segprop {

const char* to_string(LabelWarpMode mode) {
  return mode == LabelWarpMode::kNearest ? "nearest" : "onehot_bilinear";
}

LabelWarpMode parse_label_warp_mode(const std::string& text) {
  if (text == "onehot_bilinear") return LabelWarpMode::kOneHotBilinearArgmax;
  if (text == "nearest") return LabelWarpMode::kNearest;
  throw ParameterError("unknown label warp mode '" + text +
                       "' (expected onehot_bilinear or nearest)");
}

namespace {

struct Tap {
  int x0, x1, y0, y1;
  double ax, ay;  // fractional offsets toward x1 / y1
};

// Bilinear taps for a source position already known to lie in
// [0, width-1] x [0, height-1].
Tap make_tap(double sx, double sy, int width, int height) {
  Tap t;
  t.x0 = static_cast<int>(std::floor(sx));
  t.y0 = static_cast<int>(std::floor(sy));
  t.x0 = std::clamp(t.x0, 0, width - 1);
  t.y0 = std::clamp(t.y0, 0, height - 1);
  t.x1 = std::min(t.x0 + 1, width - 1);
  t.y1 = std::min(t.y0 + 1, height - 1);
  t.ax = sx - t.x0;
  t.ay = sy - t.y0;
  return t;
}

}  // namespace

Frame warp_image(const Frame& frame, const MotionField& field) {
  require_same_size(frame.size(), field.size(), "warp_image");
  const int h = frame.height();
  const int w = frame.width();
  const int channels = frame.channels();
  Frame out(h, w, channels);
  if (h == 0 || w == 0) return out;

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp(x + static_cast<double>(field.u(y, x)),
                                   0.0, static_cast<double>(w - 1));
      const double sy = std::clamp(y + static_cast<double>(field.v(y, x)),
                                   0.0, static_cast<double>(h - 1));
      const Tap t = make_tap(sx, sy, w, h);
      for (int c = 0; c < channels; ++c) {
        const double top = frame.at(t.y0, t.x0, c) +
                           t.ax * (frame.at(t.y0, t.x1, c) -
                                   frame.at(t.y0, t.x0, c));
        const double bottom = frame.at(t.y1, t.x0, c) +
                              t.ax * (frame.at(t.y1, t.x1, c) -
                                      frame.at(t.y1, t.x0, c));
        const double value = top + t.ay * (bottom - top);
        out.at(y, x, c) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
  return out;
}

LabelMap warp_label(const LabelMap& label, const MotionField& field,
                    LabelWarpPolicy policy) {
  require_same_size(label.size(), field.size(), "warp_label");
  const int h = label.height();
  const int w = label.width();
  LabelMap out(h, w, label.num_classes(), kVoid);
  if (h == 0 || w == 0) return out;

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = x + static_cast<double>(field.u(y, x));
      const double sy = y + static_cast<double>(field.v(y, x));
      if (!(sx >= 0.0 && sx <= w - 1 && sy >= 0.0 && sy <= h - 1)) {
        continue;  // left the image: void
      }
      if (policy.mode == LabelWarpMode::kNearest) {
        const int nx = std::min(static_cast<int>(std::floor(sx + 0.5)), w - 1);
        const int ny = std::min(static_cast<int>(std::floor(sy + 0.5)), h - 1);
        out.at(y, x) = label.at(ny, nx);
        continue;
      }
      const Tap t = make_tap(sx, sy, w, h);
      const std::array<std::uint8_t, 4> ids = {
          label.at(t.y0, t.x0), label.at(t.y0, t.x1), label.at(t.y1, t.x0),
          label.at(t.y1, t.x1)};
      const std::array<double, 4> weights = {
          (1 - t.ax) * (1 - t.ay), t.ax * (1 - t.ay), (1 - t.ax) * t.ay,
          t.ax * t.ay};
      // Sum the one-hot weights per distinct id, then take the argmax with
      // the lowest id winning ties.
      std::uint8_t best = kVoid;
      double best_weight = -1.0;
      for (int i = 0; i < 4; ++i) {
        double total = 0.0;
        for (int j = 0; j < 4; ++j) {
          if (ids[j] == ids[i]) total += weights[j];
        }
        if (total > best_weight || (total == best_weight && ids[i] < best)) {
          best = ids[i];
          best_weight = total;
        }
      }
      out.at(y, x) = best;
    }
  }
  return out;
}

}  // namespace segprop
