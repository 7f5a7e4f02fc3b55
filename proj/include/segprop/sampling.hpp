#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "segprop/core/manifest.hpp"
#include "segprop/core/types.hpp"

namespace segprop {

struct Centroid {
  double row = 0.0;
  double col = 0.0;
  std::size_t area = 0;  // pixels in the component
};

struct IndexedCentroid {
  std::size_t entry_id = 0;
  Centroid centroid;
};

/// Class id -> every recorded component centroid of that class.
struct CentroidIndex {
  std::map<int, std::vector<IndexedCentroid>> by_class;
  std::vector<Size> entry_sizes;  // image size per manifest entry

  std::vector<int> classes() const;
  std::size_t total() const;
};

enum class CropOrigin { kRandom, kCentroid };

struct CropSpec {
  std::size_t entry_id = 0;
  int row = 0;  // top-left
  int col = 0;
  int size = 0;
  CropOrigin origin = CropOrigin::kRandom;
  int class_id = -1;  // set for centroid crops

  friend bool operator==(const CropSpec&, const CropSpec&) = default;
};

// Connected components of each non-void class (4-connectivity), one
// area-weighted mean pixel coordinate per component. Components are listed
// in raster order of their first pixel.
std::map<int, std::vector<Centroid>> compute_class_centroids(
    const LabelMap& label);

// Indexes every manifest entry. When `class_filter` is set only those
// classes are recorded. IO errors are rethrown with the entry id.
CentroidIndex build_centroid_index(
    const DatasetManifest& manifest, int num_classes,
    const std::optional<std::set<int>>& class_filter = std::nullopt);
// Same, from in-memory labels (entry id = position in `labels`).
CentroidIndex build_centroid_index(
    const std::vector<LabelMap>& labels,
    const std::optional<std::set<int>>& class_filter = std::nullopt);

struct CropPlanConfig {
  int crop_size = 0;
  std::size_t epoch_size = 1;
  double uniform_fraction = 0.5;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;  // selects an independent random stream
};

// ceil(uniform_fraction * epoch_size) centroid crops, classes taken
// round-robin over the indexed classes (ascending id) with a uniformly drawn
// centroid of that class; the rest are uniform random placements over a
// uniformly drawn entry. Centroid crops are centred on the centroid and then
// clamped inside the image. The final list is shuffled. Everything is drawn
// from Rng(seed, epoch) in a fixed order.
std::vector<CropSpec> sample_crops(const CentroidIndex& index,
                                   const CropPlanConfig& config);

const char* to_string(CropOrigin origin);
std::string format_crop_line(const CropSpec& crop);

}  // namespace segprop
