#include <algorithm>
#include <map>
#include <tuple>

#include "segprop/core/rng.hpp"
#include "segprop/toytrain.hpp"

namespace segprop {

LabelMap boundary_noise(const LabelMap& label, int radius, std::uint64_t seed,
                        int tile) {
  if (radius < 1) throw ParameterError("boundary_noise: radius must be >= 1");
  if (tile < 1) throw ParameterError("boundary_noise: tile must be >= 1");
  const int h = label.height();
  const int w = label.width();
  auto idx = [w](int y, int x) { return static_cast<std::size_t>(y) * w + x; };

  std::vector<std::uint8_t> boundary(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t id = label.at(y, x);
      if (id == kVoid) continue;
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int i = 0; i < 4; ++i) {
        if (ny[i] < 0 || ny[i] >= h || nx[i] < 0 || nx[i] >= w) continue;
        const std::uint8_t other = label.at(ny[i], nx[i]);
        if (other != kVoid && other != id) {
          boundary[idx(y, x)] = 1;
          break;
        }
      }
    }
  }

  // 8-connected boundary components, cut into tiles. Segments are numbered
  // by first appearance in raster order of their component's flood fill.
  std::vector<int> component(boundary.size(), -1);
  std::map<std::tuple<int, int, int>, std::size_t> segment_of;
  std::vector<std::vector<std::pair<int, int>>> segments;
  int components = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!boundary[idx(y, x)] || component[idx(y, x)] >= 0) continue;
      const int comp = components++;
      std::vector<std::pair<int, int>> pixels;
      component[idx(y, x)] = comp;
      stack.assign(1, {y, x});
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        pixels.push_back({cy, cx});
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int qy = cy + dy;
            const int qx = cx + dx;
            if (qy < 0 || qy >= h || qx < 0 || qx >= w) continue;
            if (!boundary[idx(qy, qx)] || component[idx(qy, qx)] >= 0) continue;
            component[idx(qy, qx)] = comp;
            stack.push_back({qy, qx});
          }
        }
      }
      std::sort(pixels.begin(), pixels.end());
      for (const auto& [py, px] : pixels) {
        const auto key = std::make_tuple(comp, py / tile, px / tile);
        auto [it, fresh] = segment_of.try_emplace(key, segments.size());
        if (fresh) segments.emplace_back();
        segments[it->second].push_back({py, px});
      }
    }
  }

  Rng rng(seed, 0);
  LabelMap out = label;
  for (const auto& seg : segments) {
    const int r = rng.uniform_int(1, radius);
    const auto& pick = seg[rng.uniform_index(seg.size())];
    const std::uint8_t cls = label.at(pick.first, pick.second);
    for (const auto& [py, px] : seg) {
      if (label.at(py, px) != cls) continue;
      for (int qy = std::max(0, py - r); qy <= std::min(h - 1, py + r); ++qy) {
        for (int qx = std::max(0, px - r); qx <= std::min(w - 1, px + r); ++qx) {
          if (label.at(qy, qx) != kVoid) out.at(qy, qx) = cls;
        }
      }
    }
  }
  return out;
}

}  // namespace segprop
