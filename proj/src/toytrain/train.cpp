#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "segprop/core/image_io.hpp"
#include "segprop/core/rng.hpp"
#include "segprop/eval.hpp"
#include "segprop/relax.hpp"
#include "segprop/toytrain.hpp"

namespace segprop {

const char* to_string(LossKind loss) {
  return loss == LossKind::kOneHot ? "onehot" : "relaxed";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "onehot") return LossKind::kOneHot;
  if (text == "relaxed") return LossKind::kRelaxed;
  throw ParameterError("unknown loss '" + text + "' (expected onehot|relaxed)");
}

double poly_lr(int epoch, int max_epoch, double lr0, double power) {
  if (max_epoch < 1) throw ParameterError("poly_lr: max_epoch must be >= 1");
  if (epoch < 0 || epoch > max_epoch) {
    throw ParameterError("poly_lr: epoch " + std::to_string(epoch) +
                         " outside [0, " + std::to_string(max_epoch) + "]");
  }
  return lr0 * std::pow(1.0 - static_cast<double>(epoch) / max_epoch, power);
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ParameterError("lr0 must be > 0");
  if (!(power >= 0.0) || !std::isfinite(power)) {
    throw ParameterError("power must be >= 0");
  }
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batches_per_epoch < 1) throw ParameterError("batches_per_epoch must be >= 1");
  if (batch_pixels < 1) throw ParameterError("batch_pixels must be >= 1");
  if (relax_window < 1 || relax_window % 2 == 0) {
    throw ParameterError("relax_window must be odd and >= 1");
  }
}

// ---------------------------------------------------------------------------
// Features

namespace {
constexpr int kStatRadius = 2;  // 5x5 window
}  // namespace

int feature_dim(int channels, FeatureSet set) {
  return channels + (set.coordinates ? 2 : 0) +
         (set.window_stats ? 2 * channels : 0) + 1;
}

std::vector<std::string> feature_names(int channels, FeatureSet set) {
  std::vector<std::string> names;
  for (int c = 0; c < channels; ++c) names.push_back("color" + std::to_string(c));
  if (set.coordinates) {
    names.push_back("x");
    names.push_back("y");
  }
  if (set.window_stats) {
    for (int c = 0; c < channels; ++c) names.push_back("mean" + std::to_string(c));
    for (int c = 0; c < channels; ++c) names.push_back("std" + std::to_string(c));
  }
  names.push_back("bias");
  return names;
}

std::vector<double> extract_features(const Frame& frame, FeatureSet set) {
  const int h = frame.height();
  const int w = frame.width();
  const int ch = frame.channels();
  const int d = feature_dim(ch, set);
  std::vector<double> out(static_cast<std::size_t>(h) * w * d);

  // Integral images of v and v^2 per channel, (h+1) x (w+1).
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<double> s1(stride * (h + 1) * ch, 0.0);
  std::vector<double> s2(stride * (h + 1) * ch, 0.0);
  auto at = [&](std::vector<double>& s, int y, int x, int c) -> double& {
    return s[(static_cast<std::size_t>(y) * stride + x) * ch + c];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        const double v = frame.at(y, x, c);
        at(s1, y + 1, x + 1, c) =
            v + at(s1, y, x + 1, c) + at(s1, y + 1, x, c) - at(s1, y, x, c);
        at(s2, y + 1, x + 1, c) =
            v * v + at(s2, y, x + 1, c) + at(s2, y + 1, x, c) - at(s2, y, x, c);
      }
    }
  }

  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - kStatRadius);
    const int y1 = std::min(h, y + kStatRadius + 1);
    const double ny = h > 1 ? 2.0 * y / (h - 1) - 1.0 : 0.0;
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - kStatRadius);
      const int x1 = std::min(w, x + kStatRadius + 1);
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      double* f = out.data() + (static_cast<std::size_t>(y) * w + x) * d;
      int k = 0;
      for (int c = 0; c < ch; ++c) f[k++] = frame.at(y, x, c);
      if (set.coordinates) {
        f[k++] = w > 1 ? 2.0 * x / (w - 1) - 1.0 : 0.0;
        f[k++] = ny;
      }
      if (set.window_stats) {
        std::array<double, 3> mean{};
        for (int c = 0; c < ch; ++c) {
          const double sum = at(s1, y1, x1, c) - at(s1, y0, x1, c) -
                             at(s1, y1, x0, c) + at(s1, y0, x0, c);
          mean[c] = sum / n;
          f[k++] = mean[c];
        }
        for (int c = 0; c < ch; ++c) {
          const double sq = at(s2, y1, x1, c) - at(s2, y0, x1, c) -
                            at(s2, y1, x0, c) + at(s2, y0, x0, c);
          f[k++] = std::sqrt(std::max(sq / n - mean[c] * mean[c], 0.0));
        }
      }
      f[k++] = 1.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classifier

namespace {

void score(const std::vector<double>& weights, int k, int d, const double* f,
           double* z) {
  for (int c = 0; c < k; ++c) {
    const double* wc = weights.data() + static_cast<std::size_t>(c) * d;
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += wc[j] * f[j];
    z[c] = acc;
  }
}

void check_model(const PixelClassifier& model, const Frame& frame) {
  if (frame.channels() != model.channels) {
    throw ValidationError("classifier expects " +
                          std::to_string(model.channels) +
                          " channels, frame has " +
                          std::to_string(frame.channels()));
  }
  if (model.weights.size() !=
      static_cast<std::size_t>(model.num_classes) * model.dim()) {
    throw ValidationError("classifier weight count does not match K x D");
  }
}

}  // namespace

Logits PixelClassifier::logits(const Frame& frame) const {
  check_model(*this, frame);
  const std::vector<double> f = extract_features(frame, features);
  Logits out(frame.height(), frame.width(), num_classes);
  const int d = dim();
  const auto n = static_cast<std::ptrdiff_t>(out.pixels());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    score(weights, num_classes, d, f.data() + p * d, out.pixel(p));
  }
  return out;
}

LabelMap PixelClassifier::predict(const Frame& frame) const {
  const Logits z = logits(frame);
  LabelMap out(frame.height(), frame.width(), num_classes, 0);
  for (std::size_t p = 0; p < z.pixels(); ++p) {
    const double* row = z.pixel(p);
    out.data()[p] = static_cast<std::uint8_t>(
        std::max_element(row, row + num_classes) - row);
  }
  return out;
}

std::string classifier_to_json(const PixelClassifier& model) {
  nlohmann::ordered_json j;
  j["num_classes"] = model.num_classes;
  j["channels"] = model.channels;
  j["coordinates"] = model.features.coordinates;
  j["window_stats"] = model.features.window_stats;
  j["features"] = feature_names(model.channels, model.features);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  const int d = model.dim();
  for (int c = 0; c < model.num_classes; ++c) {
    rows.push_back(std::vector<double>(
        model.weights.begin() + static_cast<std::ptrdiff_t>(c) * d,
        model.weights.begin() + static_cast<std::ptrdiff_t>(c + 1) * d));
  }
  j["weights"] = rows;
  return j.dump();
}

PixelClassifier classifier_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("classifier: ") + e.what());
  }
  const std::set<std::string> known{"num_classes", "channels", "coordinates",
                                    "window_stats", "features", "weights"};
  if (!j.is_object()) throw FormatError("classifier: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw FormatError("classifier: unknown key '" + key + "'");
  }
  PixelClassifier model;
  try {
    model.num_classes = j.at("num_classes").get<int>();
    model.channels = j.at("channels").get<int>();
    model.features.coordinates = j.value("coordinates", true);
    model.features.window_stats = j.value("window_stats", true);
    if (model.num_classes < 1 || model.num_classes > kMaxClasses ||
        (model.channels != 1 && model.channels != 3)) {
      throw FormatError("classifier: bad num_classes or channels");
    }
    const auto& rows = j.at("weights");
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(model.num_classes)) {
      throw FormatError("classifier: expected num_classes weight rows");
    }
    for (const auto& row : rows) {
      const auto values = row.get<std::vector<double>>();
      if (values.size() != static_cast<std::size_t>(model.dim())) {
        throw FormatError("classifier: weight row has " +
                          std::to_string(values.size()) + " entries, expected " +
                          std::to_string(model.dim()));
      }
      model.weights.insert(model.weights.end(), values.begin(), values.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("classifier: ") + e.what());
  }
  return model;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void check_data(const LabelledImages& data, const char* what) {
  if (data.frames.empty()) {
    throw ParameterError(std::string(what) + ": no images");
  }
  if (data.frames.size() != data.labels.size()) {
    throw ParameterError(std::string(what) + ": frame and label counts differ");
  }
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    require_same_size(data.frames[i].size(), data.labels[i].size(),
                      std::string(what) + " image " + std::to_string(i));
    if (data.frames[i].channels() != data.frames[0].channels()) {
      throw ValidationError(std::string(what) + ": mixed channel counts");
    }
    if (data.labels[i].num_classes() != data.labels[0].num_classes()) {
      throw ValidationError(std::string(what) + ": mixed class counts");
    }
  }
}

struct PixelRef {
  std::uint32_t image;
  std::uint32_t pixel;
};

}  // namespace

double evaluate_miou(const PixelClassifier& model, const LabelledImages& data) {
  check_data(data, "evaluate_miou");
  ConfusionMatrix matrix(model.num_classes);
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    matrix.accumulate(model.predict(data.frames[i]), data.labels[i]);
  }
  return miou(matrix).mean.value_or(0.0);
}

TrainResult train_pixel_classifier(const LabelledImages& data,
                                   const TrainConfig& config,
                                   const LabelledImages* validation) {
  config.validate();
  check_data(data, "training set");
  if (validation) check_data(*validation, "validation set");

  const std::size_t n_images = data.frames.size();
  const int k = data.labels[0].num_classes();
  const int channels = data.frames[0].channels();
  const int d = feature_dim(channels, config.features);
  const bool relaxed = config.loss == LossKind::kRelaxed;

  std::vector<std::vector<double>> features(n_images);
  std::vector<NeighborSetMap> sets(relaxed ? n_images : 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_images); ++i) {
    features[i] = extract_features(data.frames[i], config.features);
    if (relaxed) sets[i] = boundary_neighbor_sets(data.labels[i], config.relax_window);
  }

  std::vector<PixelRef> usable;
  for (std::size_t i = 0; i < n_images; ++i) {
    const auto& labels = data.labels[i].data();
    for (std::size_t p = 0; p < labels.size(); ++p) {
      if (labels[p] != kVoid) {
        usable.push_back({static_cast<std::uint32_t>(i),
                          static_cast<std::uint32_t>(p)});
      }
    }
  }
  if (usable.empty()) throw ParameterError("training set has no labelled pixels");

  TrainResult result;
  PixelClassifier& model = result.model;
  model.num_classes = k;
  model.channels = channels;
  model.features = config.features;
  model.weights.assign(static_cast<std::size_t>(k) * d, 0.0);

  std::vector<double> grad(model.weights.size());
  std::vector<double> z(k), g(k);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = poly_lr(epoch, config.epochs, config.lr0, config.power);
    Rng rng(config.seed, static_cast<std::uint64_t>(epoch));
    double epoch_loss = 0.0;
    for (int batch = 0; batch < config.batches_per_epoch; ++batch) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (int b = 0; b < config.batch_pixels; ++b) {
        const PixelRef ref = usable[rng.uniform_index(usable.size())];
        const double* f = features[ref.image].data() +
                          static_cast<std::size_t>(ref.pixel) * d;
        score(model.weights, k, d, f, z.data());
        if (relaxed) {
          const ClassMask& set = sets[ref.image].mask(ref.pixel);
          batch_loss += relaxed_pixel_loss(z, set);
          relaxed_pixel_grad(z, set, g);
        } else {
          const int target = data.labels[ref.image].data()[ref.pixel];
          batch_loss += cross_entropy_pixel_loss(z, target);
          cross_entropy_pixel_grad(z, target, g);
        }
        for (int c = 0; c < k; ++c) {
          if (g[c] == 0.0) continue;
          double* row = grad.data() + static_cast<std::size_t>(c) * d;
          for (int j = 0; j < d; ++j) row[j] += g[c] * f[j];
        }
      }
      batch_loss /= config.batch_pixels;
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(batch) + " (lr " +
                              std::to_string(lr) + ")");
      }
      epoch_loss += batch_loss;
      const double step = lr / config.batch_pixels;
      for (std::size_t i = 0; i < grad.size(); ++i) {
        model.weights[i] -= step * grad[i];
      }
      if (!std::all_of(model.weights.begin(), model.weights.end(),
                       [](double v) { return std::isfinite(v); })) {
        throw DivergenceError("training diverged: non-finite weights at epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(batch) + " (lr " +
                              std::to_string(lr) + ")");
      }
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.loss = epoch_loss / config.batches_per_epoch;
    if (validation) entry.val_miou = evaluate_miou(model, *validation);
    result.log.push_back(entry);
  }
  return result;
}

TrainResult train_pixel_classifier(const DatasetManifest& manifest,
                                   int num_classes, const TrainConfig& config,
                                   const LabelledImages* validation) {
  const std::size_t n = manifest.entries.size();
  LabelledImages data;
  data.frames.resize(n);
  data.labels.resize(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      data.frames[i] = load_frame(manifest.frame_path(i));
      data.labels[i] = load_label(manifest.label_path(i), num_classes);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      throw IoError("manifest entry " + std::to_string(i) + " (origin " +
                    manifest.entries[i].origin + "): " + errors[i]);
    }
  }
  return train_pixel_classifier(data, config, validation);
}

std::string format_epoch_line(const EpochLog& entry) {
  nlohmann::ordered_json j;
  j["epoch"] = entry.epoch;
  j["lr"] = entry.lr;
  j["loss"] = entry.loss;
  j["val_miou"] = entry.val_miou ? nlohmann::ordered_json(*entry.val_miou)
                                 : nlohmann::ordered_json(nullptr);
  return j.dump();
}

}  // namespace segprop
