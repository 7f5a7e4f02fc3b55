#include "segprop/core/manifest.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "segprop/core/types.hpp"

namespace segprop {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Source source) {
  return source == Source::kGroundTruth ? "gt" : "synth";
}

const char* to_string(Pairing pairing) {
  return pairing == Pairing::kJoint ? "joint" : "label_only";
}

Pairing parse_pairing(const std::string& text) {
  if (text == "joint") return Pairing::kJoint;
  if (text == "label_only") return Pairing::kLabelOnly;
  throw ParameterError("unknown pairing '" + text +
                       "' (expected joint or label_only)");
}

std::filesystem::path DatasetManifest::resolve(
    const std::string& relative) const {
  std::filesystem::path p(relative);
  return p.is_absolute() ? p : root / p;
}

std::string format_manifest_line(const ManifestEntry& entry) {
  ordered_json j;
  j["frame"] = entry.frame;
  j["label"] = entry.label;
  j["source"] = to_string(entry.source);
  j["step"] = entry.step;
  j["origin"] = entry.origin;
  if (entry.pairing) j["pairing"] = to_string(*entry.pairing);
  return j.dump();
}

ManifestEntry parse_manifest_line(const std::string& line, int line_number) {
  const std::string where = "manifest line " + std::to_string(line_number);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError(where + ": expected a JSON object");

  static const std::set<std::string> kKnown = {"frame", "label", "source",
                                               "step", "origin", "pairing"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.contains(key)) {
      throw FormatError(where + ": unknown key '" + key + "'");
    }
  }
  auto string_field = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw FormatError(where + ": missing string field '" + key + "'");
    }
    return j[key].get<std::string>();
  };

  ManifestEntry entry;
  entry.frame = string_field("frame");
  entry.label = string_field("label");
  entry.origin = string_field("origin");
  const std::string source = string_field("source");
  if (source == "gt") {
    entry.source = Source::kGroundTruth;
  } else if (source == "synth") {
    entry.source = Source::kSynthesized;
  } else {
    throw FormatError(where + ": source must be \"gt\" or \"synth\"");
  }
  if (!j.contains("step") || !j["step"].is_number_integer()) {
    throw FormatError(where + ": missing integer field 'step'");
  }
  entry.step = j["step"].get<int>();
  if (entry.source == Source::kGroundTruth && entry.step != 0) {
    throw FormatError(where + ": ground-truth entries must have step 0");
  }
  if (j.contains("pairing")) {
    if (!j["pairing"].is_string()) {
      throw FormatError(where + ": pairing must be a string");
    }
    try {
      entry.pairing = parse_pairing(j["pairing"].get<std::string>());
    } catch (const ParameterError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return entry;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.root = path.parent_path();
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    manifest.entries.push_back(parse_manifest_line(line, line_number));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const ManifestEntry& entry : manifest.entries) {
    out << format_manifest_line(entry) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace segprop
