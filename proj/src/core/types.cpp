#include "segprop/core/types.hpp"

#include <algorithm>
#include <cmath>

namespace segprop {

std::string to_string(Size s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width);
}

void require_same_size(Size a, Size b, const std::string& what) {
  if (a != b) {
    throw ValidationError(what + ": dimension mismatch (" + to_string(a) +
                          " vs " + to_string(b) + ")");
  }
}

namespace {

void check_dims(int height, int width) {
  if (height < 0 || width < 0) {
    throw ValidationError("negative dimensions " + std::to_string(height) +
                          "x" + std::to_string(width));
  }
}

std::size_t area(int height, int width) {
  return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
}

}  // namespace

Frame::Frame(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width);
  if (channels != 1 && channels != 3) {
    throw ValidationError("frame channels must be 1 or 3, got " +
                          std::to_string(channels));
  }
  data_.assign(area(height, width) * channels, 0.0f);
}

Frame::Frame(int height, int width, int channels, std::vector<float> data)
    : Frame(height, width, channels) {
  if (data.size() != data_.size()) {
    throw ValidationError("frame data length " + std::to_string(data.size()) +
                          " != " + std::to_string(data_.size()));
  }
  for (float value : data) {
    if (!std::isfinite(value) || value < 0.0f || value > 1.0f) {
      throw ValidationError("frame value out of [0,1]: " +
                            std::to_string(value));
    }
  }
  data_ = std::move(data);
}

LabelMap::LabelMap(int height, int width, int num_classes, std::uint8_t fill)
    : height_(height), width_(width), num_classes_(num_classes) {
  check_dims(height, width);
  if (num_classes < 1 || num_classes > kMaxClasses) {
    throw ValidationError("num_classes must be in [1, 255], got " +
                          std::to_string(num_classes));
  }
  data_.assign(area(height, width), fill);
}

LabelMap::LabelMap(int height, int width, int num_classes,
                   std::vector<std::uint8_t> data)
    : LabelMap(height, width, num_classes) {
  if (data.size() != data_.size()) {
    throw ValidationError("label data length " + std::to_string(data.size()) +
                          " != " + std::to_string(data_.size()));
  }
  data_ = std::move(data);
  validate();
}

void LabelMap::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const std::uint8_t value = data_[i];
    if (value != kVoid && value >= num_classes_) {
      throw ValidationError("label value " + std::to_string(value) +
                            " at pixel " + std::to_string(i) +
                            " is not a class id (K=" +
                            std::to_string(num_classes_) + ") or void");
    }
  }
}

std::size_t LabelMap::count(std::uint8_t value) const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), value));
}

MotionField::MotionField(int height, int width)
    : height_(height), width_(width) {
  check_dims(height, width);
  uv_.assign(area(height, width) * 2, 0.0f);
}

MotionField::MotionField(int height, int width, std::vector<float> uv)
    : MotionField(height, width) {
  if (uv.size() != uv_.size()) {
    throw ValidationError("motion data length " + std::to_string(uv.size()) +
                          " != " + std::to_string(uv_.size()));
  }
  uv_ = std::move(uv);
  validate();
}

MotionField MotionField::constant(int height, int width, float u, float v) {
  MotionField field(height, width);
  for (std::size_t i = 0; i < field.uv_.size(); i += 2) {
    field.uv_[i] = u;
    field.uv_[i + 1] = v;
  }
  return field;
}

void MotionField::validate() const {
  for (float value : uv_) {
    if (!std::isfinite(value)) {
      throw ValidationError("motion field contains a non-finite value");
    }
  }
}

namespace detail {

ScoreMap::ScoreMap(int height, int width, int num_classes)
    : height_(height), width_(width), num_classes_(num_classes) {
  check_dims(height, width);
  if (num_classes < 1) {
    throw ValidationError("score map needs at least one class");
  }
  data_.assign(area(height, width) * num_classes, 0.0);
}

ScoreMap::ScoreMap(int height, int width, int num_classes,
                   std::vector<double> data)
    : ScoreMap(height, width, num_classes) {
  if (data.size() != data_.size()) {
    throw ValidationError("score data length " + std::to_string(data.size()) +
                          " != " + std::to_string(data_.size()));
  }
  data_ = std::move(data);
}

}  // namespace detail

void ProbMap::validate() const {
  for (std::size_t p = 0; p < pixels(); ++p) {
    const double* probs = pixel(p);
    double sum = 0.0;
    for (int c = 0; c < num_classes_; ++c) {
      if (!(probs[c] >= 0.0)) {
        throw ValidationError("probability map has a negative or NaN entry at "
                              "pixel " + std::to_string(p));
      }
      sum += probs[c];
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError("probabilities at pixel " + std::to_string(p) +
                            " sum to " + std::to_string(sum));
    }
  }
}

ProbMap softmax(const Logits& logits) {
  ProbMap probs(logits.height(), logits.width(), logits.num_classes());
  const int k = logits.num_classes();
  for (std::size_t p = 0; p < logits.pixels(); ++p) {
    const double* z = logits.pixel(p);
    double* out = probs.pixel(p);
    const double m = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
      out[c] = std::exp(z[c] - m);
      sum += out[c];
    }
    for (int c = 0; c < k; ++c) out[c] /= sum;
  }
  return probs;
}

}  // namespace segprop
