#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "segprop/core/types.hpp"

namespace segprop {

/// K x K counts, rows = ground truth, columns = prediction, plus one extra
/// column for pixels predicted as void (a miss for every class). Ground-truth
/// void pixels are never counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0);

  int num_classes() const { return num_classes_; }
  std::uint64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * (num_classes_ + 1) + pred];
  }
  // Pixels of ground-truth class `gt` that were predicted void.
  std::uint64_t void_predictions(int gt) const { return at(gt, num_classes_); }
  std::uint64_t total() const;

  void accumulate(const LabelMap& pred, const LabelMap& gt);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::uint64_t& cell(int gt, int pred) {
    return counts_[static_cast<std::size_t>(gt) * (num_classes_ + 1) + pred];
  }

  int num_classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct ClassIou {
  int class_id = 0;
  double iou = 0.0;
  std::uint64_t true_positive = 0;
  std::uint64_t false_positive = 0;
  std::uint64_t false_negative = 0;
};

struct MiouResult {
  std::vector<ClassIou> per_class;  // classes with TP + FP + FN > 0 only
  std::optional<double> mean;       // empty when no class is present
};

// IoU_c = TP / (TP + FP + FN); absent classes are left out of the mean.
MiouResult miou(const ConfusionMatrix& matrix);

// Per-pixel -sum_c p_c ln p_c (0 ln 0 = 0). Validates the probability map.
std::vector<double> entropy_map(const ProbMap& probs);

using SegmentationModel = std::function<Logits(const Frame&)>;

// Bilinear resize with half-pixel centres (identity when the size is kept).
Frame resize_frame(const Frame& frame, Size size);
Logits resize_logits(const Logits& logits, Size size);
Frame flip_horizontal(const Frame& frame);
Logits flip_horizontal(const Logits& logits);

// Runs `model` at every scale (frame resized by the scale, logits resized
// back), and, if `flip`, once more per scale on the mirrored frame with the
// logits mirrored back. All logit tensors are averaged, then one softmax.
ProbMap multiscale_flip_inference(const SegmentationModel& model,
                                  const Frame& frame,
                                  std::span<const double> scales, bool flip);

}  // namespace segprop
