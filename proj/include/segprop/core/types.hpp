#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace segprop {

// Label value reserved for do-not-care pixels (Cityscapes trainId style).
inline constexpr std::uint8_t kVoid = 255;
inline constexpr int kMaxClasses = 255;

// Error hierarchy. Every loader and operator reports failures by throwing one
// of these; messages carry the offending path / value where there is one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};
class ValidationError : public Error {
 public:
  using Error::Error;
};
class ParameterError : public Error {
 public:
  using Error::Error;
};

struct Size {
  int height = 0;
  int width = 0;
  friend bool operator==(const Size&, const Size&) = default;
};

std::string to_string(Size s);

// Throws ValidationError naming `what` when the two sizes differ.
void require_same_size(Size a, Size b, const std::string& what);

/// Image with values in [0,1], row-major, channels interleaved.
class Frame {
 public:
  Frame() = default;
  Frame(int height, int width, int channels);
  Frame(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Size size() const { return {height_, width_}; }

  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }
  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Categorical map; values are in [0, num_classes) or kVoid.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int height, int width, int num_classes, std::uint8_t fill = kVoid);
  LabelMap(int height, int width, int num_classes,
           std::vector<std::uint8_t> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  Size size() const { return {height_, width_}; }

  std::uint8_t at(int y, int x) const { return data_[index(y, x)]; }
  std::uint8_t& at(int y, int x) { return data_[index(y, x)]; }

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  // Throws ValidationError listing the first offending value.
  void validate() const;
  std::size_t count(std::uint8_t value) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel displacement in backward-sampling convention: the output pixel
/// (x, y) of a warp reads the source at (x + u, y + v).
class MotionField {
 public:
  MotionField() = default;
  MotionField(int height, int width);
  MotionField(int height, int width, std::vector<float> uv);
  static MotionField constant(int height, int width, float u, float v);

  int height() const { return height_; }
  int width() const { return width_; }
  Size size() const { return {height_, width_}; }

  float u(int y, int x) const { return uv_[index(y, x)]; }
  float v(int y, int x) const { return uv_[index(y, x) + 1]; }
  float& u(int y, int x) { return uv_[index(y, x)]; }
  float& v(int y, int x) { return uv_[index(y, x) + 1]; }

  // Interleaved (u, v), row-major.
  const std::vector<float>& uv() const { return uv_; }
  std::vector<float>& uv() { return uv_; }

  void validate() const;

  friend bool operator==(const MotionField&, const MotionField&) = default;

 private:
  std::size_t index(int y, int x) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 2;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> uv_;
};

namespace detail {

// H x W x K doubles, class channel fastest.
class ScoreMap {
 public:
  ScoreMap() = default;
  ScoreMap(int height, int width, int num_classes);
  ScoreMap(int height, int width, int num_classes, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  Size size() const { return {height_, width_}; }
  std::size_t pixels() const {
    return static_cast<std::size_t>(height_) * width_;
  }

  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }
  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }

  // The K scores of pixel `p` (row-major pixel index).
  const double* pixel(std::size_t p) const {
    return data_.data() + p * num_classes_;
  }
  double* pixel(std::size_t p) { return data_.data() + p * num_classes_; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const ScoreMap&, const ScoreMap&) = default;

 protected:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * num_classes_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<double> data_;
};

}  // namespace detail

/// Unnormalized class scores.
class Logits : public detail::ScoreMap {
 public:
  using ScoreMap::ScoreMap;
  friend bool operator==(const Logits&, const Logits&) = default;
};

/// Per-pixel class distribution: entries >= 0, channels sum to 1 +- 1e-6.
class ProbMap : public detail::ScoreMap {
 public:
  using ScoreMap::ScoreMap;
  void validate() const;
  friend bool operator==(const ProbMap&, const ProbMap&) = default;
};

// Per-pixel softmax with max subtraction.
ProbMap softmax(const Logits& logits);

}  // namespace segprop
