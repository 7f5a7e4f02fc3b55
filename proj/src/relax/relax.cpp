#include "segprop/relax.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace segprop {

NeighborSetMap::NeighborSetMap(int height, int width, int num_classes)
    : height_(height), width_(width), num_classes_(num_classes) {
  if (num_classes < 1 || num_classes > kMaxClasses) {
    throw ValidationError("num_classes must be in [1, 255]");
  }
  const std::size_t n = static_cast<std::size_t>(height) * width;
  masks_.assign(n, ClassMask{});
  valid_.assign(n, 0);
}

NeighborSetMap boundary_neighbor_sets(const LabelMap& label, int window) {
  if (window < 1 || window % 2 == 0) {
    throw ParameterError("neighbor window must be odd and >= 1, got " +
                         std::to_string(window));
  }
  const int h = label.height();
  const int w = label.width();
  const int r = window / 2;
  NeighborSetMap sets(h, w, label.num_classes());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      if (label.at(y, x) == kVoid) continue;
      ClassMask mask;
      for (int yy = std::max(y - r, 0); yy <= std::min(y + r, h - 1); ++yy) {
        for (int xx = std::max(x - r, 0); xx <= std::min(x + r, w - 1); ++xx) {
          const std::uint8_t id = label.at(yy, xx);
          if (id != kVoid) mask.set(id);
        }
      }
      sets.mask(p) = mask;
      sets.set_valid(p, true);
    }
  }
  return sets;
}

NeighborSetMap singleton_sets(const LabelMap& label) {
  NeighborSetMap sets(label.height(), label.width(), label.num_classes());
  for (std::size_t p = 0; p < label.data().size(); ++p) {
    const std::uint8_t id = label.data()[p];
    if (id == kVoid) continue;
    sets.mask(p).set(id);
    sets.set_valid(p, true);
  }
  return sets;
}

namespace {

// log sum_{c in set} exp(z_c), max-shifted. Empty set gives -inf.
double logsumexp(std::span<const double> z, const ClassMask* set) {
  const int k = static_cast<int>(z.size());
  double m = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    if (set == nullptr || set->test(c)) m = std::max(m, z[c]);
  }
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (int c = 0; c < k; ++c) {
    if (set == nullptr || set->test(c)) sum += std::exp(z[c] - m);
  }
  return m + std::log(sum);
}

// Softmax over the classes in `set` (all classes when null); zero elsewhere.
void restricted_softmax(std::span<const double> z, const ClassMask* set,
                        std::span<double> out) {
  const int k = static_cast<int>(z.size());
  double m = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    if (set == nullptr || set->test(c)) m = std::max(m, z[c]);
  }
  double sum = 0.0;
  for (int c = 0; c < k; ++c) {
    out[c] = (set == nullptr || set->test(c)) ? std::exp(z[c] - m) : 0.0;
    sum += out[c];
  }
  for (int c = 0; c < k; ++c) out[c] /= sum;
}

bool covers_all(const ClassMask& set, std::size_t k) {
  return set.count() == k && (k == 256 || (set >> k).none());
}

void check_set(const ClassMask& set, std::size_t k) {
  if (set.none()) {
    throw ValidationError("relaxed loss: empty class set at a valid pixel");
  }
  if (k < 256 && (set >> k).any()) {
    throw ValidationError("relaxed loss: class set references a class >= K");
  }
}

}  // namespace

double relaxed_pixel_loss(std::span<const double> logits, const ClassMask& set) {
  check_set(set, logits.size());
  if (covers_all(set, logits.size())) return 0.0;
  const double loss = logsumexp(logits, nullptr) - logsumexp(logits, &set);
  return std::max(loss, 0.0);
}

void relaxed_pixel_grad(std::span<const double> logits, const ClassMask& set,
                        std::span<double> grad) {
  check_set(set, logits.size());
  const std::size_t k = logits.size();
  if (covers_all(set, k)) {
    std::fill(grad.begin(), grad.begin() + k, 0.0);
    return;
  }
  std::array<double, 256> restricted;
  restricted_softmax(logits, nullptr, grad);
  restricted_softmax(logits, &set, std::span<double>(restricted.data(), k));
  for (std::size_t c = 0; c < k; ++c) grad[c] -= restricted[c];
}

double cross_entropy_pixel_loss(std::span<const double> logits, int target) {
  return std::max(logsumexp(logits, nullptr) - logits[target], 0.0);
}

void cross_entropy_pixel_grad(std::span<const double> logits, int target,
                              std::span<double> grad) {
  restricted_softmax(logits, nullptr, grad);
  grad[target] -= 1.0;
}

namespace {

void check_shapes(const Logits& logits, Size size, int num_classes,
                  const char* what) {
  require_same_size(logits.size(), size, what);
  if (logits.num_classes() != num_classes) {
    throw ValidationError(std::string(what) + ": logits have K=" +
                          std::to_string(logits.num_classes()) +
                          " but labels use K=" + std::to_string(num_classes));
  }
}

template <typename PixelLoss>
LossResult reduce_loss(const Logits& logits, PixelLoss&& pixel_loss) {
  LossResult result;
  const std::size_t n = logits.pixels();
  const std::size_t k = static_cast<std::size_t>(logits.num_classes());
  result.per_pixel.assign(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(n); ++p) {
    std::span<const double> z(logits.pixel(p), k);
    valid[p] = pixel_loss(static_cast<std::size_t>(p), z, result.per_pixel[p]);
  }
  // Sequential reduction keeps the mean independent of the thread count.
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    if (valid[p]) {
      sum += result.per_pixel[p];
      ++result.valid_pixels;
    }
  }
  result.mean = result.valid_pixels > 0 ? sum / result.valid_pixels : 0.0;
  return result;
}

template <typename PixelGrad>
Logits reduce_grad(const Logits& logits, std::size_t valid_pixels,
                   PixelGrad&& pixel_grad) {
  Logits grad(logits.height(), logits.width(), logits.num_classes());
  if (valid_pixels == 0) return grad;
  const std::size_t n = logits.pixels();
  const std::size_t k = static_cast<std::size_t>(logits.num_classes());
  const double scale = 1.0 / static_cast<double>(valid_pixels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(n); ++p) {
    std::span<const double> z(logits.pixel(p), k);
    std::span<double> g(grad.pixel(p), k);
    if (pixel_grad(static_cast<std::size_t>(p), z, g)) {
      for (double& v : g) v *= scale;
    }
  }
  return grad;
}

// Validates every set up front (kernels run inside OpenMP regions, which
// must not throw) and returns the number of valid pixels.
std::size_t check_sets(const NeighborSetMap& sets) {
  const auto k = static_cast<std::size_t>(sets.num_classes());
  std::size_t count = 0;
  for (std::size_t p = 0; p < sets.pixels(); ++p) {
    if (!sets.valid(p)) continue;
    check_set(sets.mask(p), k);
    ++count;
  }
  return count;
}

}  // namespace

LossResult relaxed_loss(const Logits& logits, const NeighborSetMap& sets) {
  check_shapes(logits, sets.size(), sets.num_classes(), "relaxed_loss");
  check_sets(sets);
  return reduce_loss(logits, [&](std::size_t p, std::span<const double> z,
                                 double& out) {
    if (!sets.valid(p)) return false;
    out = relaxed_pixel_loss(z, sets.mask(p));
    return true;
  });
}

Logits relaxed_loss_grad(const Logits& logits, const NeighborSetMap& sets) {
  check_shapes(logits, sets.size(), sets.num_classes(), "relaxed_loss_grad");
  return reduce_grad(logits, check_sets(sets),
                     [&](std::size_t p, std::span<const double> z,
                         std::span<double> g) {
                       if (!sets.valid(p)) return false;
                       relaxed_pixel_grad(z, sets.mask(p), g);
                       return true;
                     });
}

LossResult cross_entropy_loss(const Logits& logits, const LabelMap& label) {
  check_shapes(logits, label.size(), label.num_classes(), "cross_entropy_loss");
  return reduce_loss(logits, [&](std::size_t p, std::span<const double> z,
                                 double& out) {
    const std::uint8_t id = label.data()[p];
    if (id == kVoid) return false;
    out = cross_entropy_pixel_loss(z, id);
    return true;
  });
}

Logits cross_entropy_grad(const Logits& logits, const LabelMap& label) {
  check_shapes(logits, label.size(), label.num_classes(), "cross_entropy_grad");
  const std::size_t valid = label.data().size() - label.count(kVoid);
  return reduce_grad(logits, valid,
                     [&](std::size_t p, std::span<const double> z,
                         std::span<double> g) {
                       const std::uint8_t id = label.data()[p];
                       if (id == kVoid) return false;
                       cross_entropy_pixel_grad(z, id, g);
                       return true;
                     });
}

}  // namespace segprop
