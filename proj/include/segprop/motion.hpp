#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segprop/core/types.hpp"

namespace segprop {

// Pyramidal iterative Lucas-Kanade parameters.
struct FlowParams {
  int pyramid_levels = 4;
  int window_radius = 7;
  int iterations_per_level = 3;
  // Smallest eigenvalue of the per-pixel structure tensor (averaged over the
  // window and channels) below which a pixel keeps the coarser estimate.
  double min_eigen_threshold = 1e-4;

  void validate() const;
};

// Dense motion between two frames in backward convention: the result
// satisfies warp_image(frame_a, field) ~= frame_b. Both endpoints are
// observed ("reconstruction" mode).
//
// Throws ValidationError on size/channel mismatch and ParameterError when
// min(H, W) < 2^(levels-1) * (2 * radius + 1).
MotionField estimate_motion(const Frame& frame_a, const Frame& frame_b,
                            const FlowParams& params = {});

// Past-only ("prediction") motion: the field for t -> t+1 is the field that
// was observed for t-1 -> t (constant-motion extrapolation).
MotionField predict_motion(const MotionField& prev_field);

// Endpoint error statistics over the pixels where `mask` is non-zero (all
// pixels when `mask` is empty).
struct EndpointError {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};
EndpointError endpoint_error(const MotionField& estimate,
                             const MotionField& truth,
                             std::span<const std::uint8_t> mask = {});

// Motion file: little-endian float32 magic 202021.25, int32 width, int32
// height, then H*W interleaved (u, v) float32 pairs, row-major.
inline constexpr float kMotionFileMagic = 202021.25f;

void save_motion(const MotionField& field, const std::filesystem::path& path);
MotionField load_motion(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_motion(const MotionField& field);
MotionField decode_motion(std::span<const std::uint8_t> bytes,
                          const std::string& source_name = "motion data");

}  // namespace segprop
