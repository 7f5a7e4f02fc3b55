#pragma once

#include <bitset>
#include <span>
#include <vector>

#include "segprop/core/types.hpp"

namespace segprop {

using ClassMask = std::bitset<256>;

/// Per-pixel set of admissible classes for boundary label relaxation.
///
/// A pixel is valid when its own label is not void; a valid pixel's mask
/// always contains its own label. Invalid pixels carry an empty mask and are
/// ignored by the losses below.
class NeighborSetMap {
 public:
  NeighborSetMap() = default;
  NeighborSetMap(int height, int width, int num_classes);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  Size size() const { return {height_, width_}; }
  std::size_t pixels() const { return masks_.size(); }

  const ClassMask& mask(std::size_t p) const { return masks_[p]; }
  ClassMask& mask(std::size_t p) { return masks_[p]; }
  bool valid(std::size_t p) const { return valid_[p] != 0; }
  void set_valid(std::size_t p, bool valid) { valid_[p] = valid ? 1 : 0; }

  friend bool operator==(const NeighborSetMap&, const NeighborSetMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<ClassMask> masks_;
  std::vector<std::uint8_t> valid_;
};

// N(p) = non-void labels inside the window x window square centred on p,
// clipped at the image border. `window` must be odd and >= 1.
NeighborSetMap boundary_neighbor_sets(const LabelMap& label, int window = 3);

// The singleton sets {label(p)}; relaxed_loss over these is plain
// cross-entropy.
NeighborSetMap singleton_sets(const LabelMap& label);

struct LossResult {
  double mean = 0.0;                // over valid pixels; 0 when none
  std::vector<double> per_pixel;    // H*W, 0 at invalid pixels
  std::size_t valid_pixels = 0;
};

// Per-pixel kernels on a single K-vector of logits.
//   relaxed:  -log sum_{c in N} softmax(z)_c
//             = logsumexp(z) - logsumexp(z restricted to N)
//   gradient: dL/dz_j = P_j - [j in N] * P_j / S, S = sum_{c in N} P_c,
//             evaluated as P_j - [j in N] * softmax_N(z)_j so that S never
//             underflows.
double relaxed_pixel_loss(std::span<const double> logits, const ClassMask& set);
void relaxed_pixel_grad(std::span<const double> logits, const ClassMask& set,
                        std::span<double> grad);
double cross_entropy_pixel_loss(std::span<const double> logits, int target);
void cross_entropy_pixel_grad(std::span<const double> logits, int target,
                              std::span<double> grad);

// Image-level losses with mean reduction over valid pixels. The gradients
// are of the mean loss, so every valid pixel's row is scaled by
// 1 / valid_pixels; invalid rows are zero.
LossResult relaxed_loss(const Logits& logits, const NeighborSetMap& sets);
Logits relaxed_loss_grad(const Logits& logits, const NeighborSetMap& sets);
LossResult cross_entropy_loss(const Logits& logits, const LabelMap& label);
Logits cross_entropy_grad(const Logits& logits, const LabelMap& label);

}  // namespace segprop
