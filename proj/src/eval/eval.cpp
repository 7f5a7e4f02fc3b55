#include "segprop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace segprop {

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 0 || num_classes > kMaxClasses) {
    throw ValidationError("confusion matrix: invalid class count");
  }
  counts_.assign(static_cast<std::size_t>(num_classes) * (num_classes + 1), 0);
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  require_same_size(pred.size(), gt.size(), "accumulate_confusion");
  if (pred.num_classes() != num_classes_ || gt.num_classes() != num_classes_) {
    throw ValidationError("accumulate_confusion: K mismatch (matrix " +
                          std::to_string(num_classes_) + ", pred " +
                          std::to_string(pred.num_classes()) + ", gt " +
                          std::to_string(gt.num_classes()) + ")");
  }
  const auto& p = pred.data();
  const auto& g = gt.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == kVoid) continue;
    ++cell(g[i], p[i] == kVoid ? num_classes_ : p[i]);
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    throw ValidationError("confusion matrix merge: K mismatch");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

MiouResult miou(const ConfusionMatrix& matrix) {
  MiouResult result;
  const int k = matrix.num_classes();
  double sum = 0.0;
  for (int c = 0; c < k; ++c) {
    ClassIou entry;
    entry.class_id = c;
    entry.true_positive = matrix.at(c, c);
    for (int other = 0; other <= k; ++other) {
      if (other != c) entry.false_negative += matrix.at(c, other);
    }
    for (int other = 0; other < k; ++other) {
      if (other != c) entry.false_positive += matrix.at(other, c);
    }
    const std::uint64_t denom =
        entry.true_positive + entry.false_positive + entry.false_negative;
    if (denom == 0) continue;
    entry.iou = static_cast<double>(entry.true_positive) /
                static_cast<double>(denom);
    sum += entry.iou;
    result.per_class.push_back(entry);
  }
  if (!result.per_class.empty()) {
    result.mean = sum / static_cast<double>(result.per_class.size());
  }
  return result;
}

std::vector<double> entropy_map(const ProbMap& probs) {
  probs.validate();
  std::vector<double> out(probs.pixels(), 0.0);
  const int k = probs.num_classes();
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    const double* q = probs.pixel(p);
    double h = 0.0;
    for (int c = 0; c < k; ++c) {
      if (q[c] > 0.0) h -= q[c] * std::log(q[c]);
    }
    out[p] = std::max(h, 0.0);
  }
  return out;
}

namespace {

struct Axis {
  std::vector<int> i0, i1;
  std::vector<double> a;
};

// Half-pixel-centre source coordinates for an `in` -> `out` resize.
Axis make_axis(int in, int out) {
  Axis axis;
  axis.i0.resize(out);
  axis.i1.resize(out);
  axis.a.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double s = std::clamp((o + 0.5) * scale - 0.5, 0.0,
                                static_cast<double>(in - 1));
    axis.i0[o] = static_cast<int>(std::floor(s));
    axis.i1[o] = std::min(axis.i0[o] + 1, in - 1);
    axis.a[o] = s - axis.i0[o];
  }
  return axis;
}

template <typename Get, typename Set>
void resample(int in_h, int in_w, int out_h, int out_w, int channels, Get get,
              Set set) {
  const Axis ax = make_axis(in_w, out_w);
  const Axis ay = make_axis(in_h, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v00 = get(ay.i0[y], ax.i0[x], c);
        const double v01 = get(ay.i0[y], ax.i1[x], c);
        const double v10 = get(ay.i1[y], ax.i0[x], c);
        const double v11 = get(ay.i1[y], ax.i1[x], c);
        const double top = v00 + ax.a[x] * (v01 - v00);
        const double bot = v10 + ax.a[x] * (v11 - v10);
        set(y, x, c, top + ay.a[y] * (bot - top));
      }
    }
  }
}

}  // namespace

Frame resize_frame(const Frame& frame, Size size) {
  if (size.height < 1 || size.width < 1) {
    throw ParameterError("resize to an empty size");
  }
  Frame out(size.height, size.width, frame.channels());
  resample(frame.height(), frame.width(), size.height, size.width,
           frame.channels(),
           [&](int y, int x, int c) { return frame.at(y, x, c); },
           [&](int y, int x, int c, double v) {
             out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
           });
  return out;
}

Logits resize_logits(const Logits& logits, Size size) {
  if (size.height < 1 || size.width < 1) {
    throw ParameterError("resize to an empty size");
  }
  Logits out(size.height, size.width, logits.num_classes());
  resample(logits.height(), logits.width(), size.height, size.width,
           logits.num_classes(),
           [&](int y, int x, int c) { return logits.at(y, x, c); },
           [&](int y, int x, int c, double v) { out.at(y, x, c) = v; });
  return out;
}

Frame flip_horizontal(const Frame& frame) {
  Frame out(frame.height(), frame.width(), frame.channels());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      for (int c = 0; c < frame.channels(); ++c) {
        out.at(y, frame.width() - 1 - x, c) = frame.at(y, x, c);
      }
    }
  }
  return out;
}

Logits flip_horizontal(const Logits& logits) {
  Logits out(logits.height(), logits.width(), logits.num_classes());
  for (int y = 0; y < logits.height(); ++y) {
    for (int x = 0; x < logits.width(); ++x) {
      for (int c = 0; c < logits.num_classes(); ++c) {
        out.at(y, logits.width() - 1 - x, c) = logits.at(y, x, c);
      }
    }
  }
  return out;
}

ProbMap multiscale_flip_inference(const SegmentationModel& model,
                                  const Frame& frame,
                                  std::span<const double> scales, bool flip) {
  if (scales.empty()) throw ParameterError("at least one scale is required");
  for (double s : scales) {
    if (!(s > 0.0)) throw ParameterError("scales must be positive");
  }
  const Size full = frame.size();
  std::optional<Logits> sum;
  int passes = 0;
  auto add = [&](const Logits& logits) {
    if (sum && logits.num_classes() != sum->num_classes()) {
      throw ValidationError("model returned K=" +
                            std::to_string(logits.num_classes()) +
                            " after K=" + std::to_string(sum->num_classes()));
    }
    const Logits back =
        logits.size() == full ? logits : resize_logits(logits, full);
    if (!sum) {
      sum = back;
    } else {
      for (std::size_t i = 0; i < sum->data().size(); ++i) {
        sum->data()[i] += back.data()[i];
      }
    }
    ++passes;
  };
  for (double s : scales) {
    const Size scaled{std::max(1, static_cast<int>(std::lround(full.height * s))),
                      std::max(1, static_cast<int>(std::lround(full.width * s)))};
    const Frame input = scaled == full ? frame : resize_frame(frame, scaled);
    add(model(input));
    if (flip) add(flip_horizontal(model(flip_horizontal(input))));
  }
  for (double& v : sum->data()) v /= passes;
  return softmax(*sum);
}

}  // namespace segprop
