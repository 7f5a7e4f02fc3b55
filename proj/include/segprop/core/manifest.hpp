#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace segprop {

enum class Source { kGroundTruth, kSynthesized };

// How a synthesized sample pairs its frame with its propagated label.
enum class Pairing { kJoint, kLabelOnly };

const char* to_string(Source source);
const char* to_string(Pairing pairing);
Pairing parse_pairing(const std::string& text);

struct ManifestEntry {
  std::string frame;
  std::string label;
  Source source = Source::kGroundTruth;
  int step = 0;  // signed propagation distance; 0 for ground truth
  std::string origin;
  std::optional<Pairing> pairing;  // written only for synthesized entries

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Ordered list of frame/label pairs. Relative paths resolve against `root`.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::string& relative) const;
  std::filesystem::path frame_path(std::size_t i) const {
    return resolve(entries[i].frame);
  }
  std::filesystem::path label_path(std::size_t i) const {
    return resolve(entries[i].label);
  }
};

// One JSON object per line:
//   {"frame":"..","label":"..","source":"gt"|"synth","step":N,"origin":".."}
// with an optional trailing "pairing":"joint"|"label_only". Blank lines are
// skipped. Malformed lines throw FormatError naming the line number.
std::string format_manifest_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(const std::string& line, int line_number);

// The manifest root defaults to the file's parent directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

}  // namespace segprop
