#pragma once

#include <string>

#include "segprop/core/types.hpp"

namespace segprop {

// Categorical interpolation used when a label map is sampled at fractional
// coordinates. Ties always resolve to the lowest class id (void counts as
// id 255).
enum class LabelWarpMode {
  kOneHotBilinearArgmax,  // bilinear weights per class, per-pixel argmax
  kNearest,               // nearest source pixel
};

struct LabelWarpPolicy {
  LabelWarpMode mode = LabelWarpMode::kOneHotBilinearArgmax;
};

const char* to_string(LabelWarpMode mode);
LabelWarpMode parse_label_warp_mode(const std::string& text);

// Backward bilinear warp: output(x, y) = input(x + u, y + v). Source
// coordinates outside the image are clamped to the edge.
Frame warp_image(const Frame& frame, const MotionField& field);

// Same sampling positions as warp_image, but source positions outside the
// image [0, W-1] x [0, H-1] produce kVoid instead of clamping.
LabelMap warp_label(const LabelMap& label, const MotionField& field,
                    LabelWarpPolicy policy = {});

}  // namespace segprop
