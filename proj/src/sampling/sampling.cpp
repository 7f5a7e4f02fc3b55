#include "segprop/sampling.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "segprop/core/image_io.hpp"
#include "segprop/core/rng.hpp"

namespace segprop {

std::vector<int> CentroidIndex::classes() const {
  std::vector<int> out;
  for (const auto& [cls, list] : by_class) {
    if (!list.empty()) out.push_back(cls);
  }
  return out;
}

std::size_t CentroidIndex::total() const {
  std::size_t n = 0;
  for (const auto& [cls, list] : by_class) n += list.size();
  return n;
}

std::map<int, std::vector<Centroid>> compute_class_centroids(
    const LabelMap& label) {
  const int h = label.height();
  const int w = label.width();
  std::map<int, std::vector<Centroid>> out;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(h) * w, 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t id = label.at(y, x);
      if (id == kVoid || seen[static_cast<std::size_t>(y) * w + x]) continue;
      double sum_row = 0.0;
      double sum_col = 0.0;
      std::size_t area = 0;
      stack.assign(1, {y, x});
      seen[static_cast<std::size_t>(y) * w + x] = 1;
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        sum_row += cy;
        sum_col += cx;
        ++area;
        const int ny[4] = {cy - 1, cy + 1, cy, cy};
        const int nx[4] = {cx, cx, cx - 1, cx + 1};
        for (int i = 0; i < 4; ++i) {
          if (ny[i] < 0 || ny[i] >= h || nx[i] < 0 || nx[i] >= w) continue;
          const std::size_t q = static_cast<std::size_t>(ny[i]) * w + nx[i];
          if (seen[q] || label.at(ny[i], nx[i]) != id) continue;
          seen[q] = 1;
          stack.push_back({ny[i], nx[i]});
        }
      }
      out[id].push_back({sum_row / area, sum_col / area, area});
    }
  }
  return out;
}

namespace {

void add_entry(CentroidIndex& index, std::size_t entry_id,
               const LabelMap& label,
               const std::optional<std::set<int>>& class_filter) {
  index.entry_sizes.push_back(label.size());
  for (auto& [cls, list] : compute_class_centroids(label)) {
    if (class_filter && !class_filter->contains(cls)) continue;
    auto& bucket = index.by_class[cls];
    for (const Centroid& c : list) bucket.push_back({entry_id, c});
  }
}

}  // namespace

CentroidIndex build_centroid_index(
    const std::vector<LabelMap>& labels,
    const std::optional<std::set<int>>& class_filter) {
  CentroidIndex index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    add_entry(index, i, labels[i], class_filter);
  }
  return index;
}

CentroidIndex build_centroid_index(
    const DatasetManifest& manifest, int num_classes,
    const std::optional<std::set<int>>& class_filter) {
  const std::size_t n = manifest.entries.size();
  std::vector<LabelMap> labels(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      labels[i] = load_label(manifest.label_path(i), num_classes);
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
  return build_centroid_index(labels, class_filter);
}

std::vector<CropSpec> sample_crops(const CentroidIndex& index,
                                   const CropPlanConfig& config) {
  if (config.epoch_size < 1) throw ParameterError("epoch_size must be >= 1");
  if (!(config.uniform_fraction >= 0.0 && config.uniform_fraction <= 1.0)) {
    throw ParameterError("uniform_fraction must be in [0, 1]");
  }
  if (config.crop_size < 1) throw ParameterError("crop_size must be >= 1");
  if (index.entry_sizes.empty()) {
    throw ParameterError("sample_crops: the index covers no entries");
  }
  for (std::size_t i = 0; i < index.entry_sizes.size(); ++i) {
    const Size s = index.entry_sizes[i];
    if (config.crop_size > std::min(s.height, s.width)) {
      throw ParameterError("crop_size " + std::to_string(config.crop_size) +
                           " exceeds the smaller side of entry " +
                           std::to_string(i) + " (" + to_string(s) + ")");
    }
  }
  const auto centroid_count = static_cast<std::size_t>(std::ceil(
      config.uniform_fraction * static_cast<double>(config.epoch_size)));
  const std::vector<int> classes = index.classes();
  if (centroid_count > 0 && classes.empty()) {
    throw ParameterError(
        "sample_crops: empty centroid index with uniform_fraction > 0");
  }

  Rng rng(config.seed, config.epoch);
  const int size = config.crop_size;
  std::vector<CropSpec> crops;
  crops.reserve(config.epoch_size);

  for (std::size_t i = 0; i < centroid_count; ++i) {
    const int cls = classes[i % classes.size()];
    const auto& list = index.by_class.at(cls);
    const IndexedCentroid& pick = list[rng.uniform_index(list.size())];
    const Size s = index.entry_sizes[pick.entry_id];
    const int top = static_cast<int>(std::floor(pick.centroid.row - size / 2.0 + 0.5));
    const int left = static_cast<int>(std::floor(pick.centroid.col - size / 2.0 + 0.5));
    CropSpec crop;
    crop.entry_id = pick.entry_id;
    crop.row = std::clamp(top, 0, s.height - size);
    crop.col = std::clamp(left, 0, s.width - size);
    crop.size = size;
    crop.origin = CropOrigin::kCentroid;
    crop.class_id = cls;
    crops.push_back(crop);
  }
  for (std::size_t i = centroid_count; i < config.epoch_size; ++i) {
    CropSpec crop;
    crop.entry_id = rng.uniform_index(index.entry_sizes.size());
    const Size s = index.entry_sizes[crop.entry_id];
    crop.row = rng.uniform_int(0, s.height - size);
    crop.col = rng.uniform_int(0, s.width - size);
    crop.size = size;
    crop.origin = CropOrigin::kRandom;
    crops.push_back(crop);
  }
  rng.shuffle(std::span<CropSpec>(crops));
  return crops;
}

const char* to_string(CropOrigin origin) {
  return origin == CropOrigin::kCentroid ? "centroid" : "random";
}

std::string format_crop_line(const CropSpec& crop) {
  nlohmann::ordered_json j;
  j["entry"] = crop.entry_id;
  j["row"] = crop.row;
  j["col"] = crop.col;
  j["size"] = crop.size;
  j["origin"] = to_string(crop.origin);
  if (crop.origin == CropOrigin::kCentroid) j["class"] = crop.class_id;
  return j.dump();
}

}  // namespace segprop
