#include "segprop/propagate.hpp"

#include <exception>
#include <fstream>
#include <map>
#include <optional>

#include <json.hpp>

#include "segprop/core/image_io.hpp"

namespace segprop {

const char* to_string(Direction d) {
  switch (d) {
    case Direction::kForward: return "forward";
    case Direction::kBackward: return "backward";
    case Direction::kBoth: return "both";
  }
  return "?";
}

const char* to_string(MotionMode m) {
  switch (m) {
    case MotionMode::kReconstruction: return "reconstruction";
    case MotionMode::kPrediction: return "prediction";
    case MotionMode::kExternal: return "external";
  }
  return "?";
}

const char* to_string(Accumulation a) {
  return a == Accumulation::kAccumulated ? "accumulated" : "non_accumulated";
}

Direction parse_direction(const std::string& text) {
  if (text == "forward") return Direction::kForward;
  if (text == "backward") return Direction::kBackward;
  if (text == "both") return Direction::kBoth;
  throw ParameterError("unknown direction '" + text + "'");
}

MotionMode parse_motion_mode(const std::string& text) {
  if (text == "reconstruction") return MotionMode::kReconstruction;
  if (text == "prediction") return MotionMode::kPrediction;
  if (text == "external") return MotionMode::kExternal;
  throw ParameterError("unknown motion mode '" + text + "'");
}

Accumulation parse_accumulation(const std::string& text) {
  if (text == "accumulated") return Accumulation::kAccumulated;
  if (text == "non_accumulated") return Accumulation::kNonAccumulated;
  throw ParameterError("unknown accumulation '" + text + "'");
}

void PropagationConfig::validate() const {
  if (k < 0) throw ParameterError("k must be >= 0");
  flow.validate();
}

PropagatedSample propagate_step(const Frame& frame, const LabelMap& label,
                                const MotionField& field, Pairing pairing,
                                LabelWarpPolicy policy,
                                const Frame* real_future) {
  require_same_size(frame.size(), label.size(), "propagate_step frame/label");
  require_same_size(frame.size(), field.size(), "propagate_step frame/motion");
  PropagatedSample out;
  out.label = warp_label(label, field, policy);
  if (pairing == Pairing::kJoint) {
    out.frame = warp_image(frame, field);
  } else {
    if (real_future == nullptr) {
      throw ParameterError("label-only pairing needs the real future frame");
    }
    require_same_size(frame.size(), real_future->size(),
                      "propagate_step real future frame");
    out.frame = *real_future;
  }
  return out;
}

void check_sequence_length(std::size_t num_frames, int gt_index,
                           const PropagationConfig& config) {
  const int n = static_cast<int>(num_frames);
  if (gt_index < 0 || gt_index >= n) {
    throw ParameterError("ground-truth index " + std::to_string(gt_index) +
                         " outside a sequence of " + std::to_string(n) +
                         " frames");
  }
  if (config.k == 0) return;
  auto need = [&](int index) {
    if (index < 0 || index >= n) {
      throw ParameterError("sequence too short: frame " +
                           std::to_string(index) + " needed (sequence has " +
                           std::to_string(n) + " frames, ground truth at " +
                           std::to_string(gt_index) + ", k=" +
                           std::to_string(config.k) + ")");
    }
  };
  const bool label_only = config.pairing == Pairing::kLabelOnly;
  for (int sign : {+1, -1}) {
    if (sign > 0 && !config.forward()) continue;
    if (sign < 0 && !config.backward()) continue;
    const int last = gt_index + sign * config.k;
    switch (config.motion_mode) {
      case MotionMode::kReconstruction:
        need(last);
        break;
      case MotionMode::kPrediction:
        need(gt_index - sign);
        need(last - sign);
        break;
      case MotionMode::kExternal:
        break;
    }
    if (label_only) need(last);
  }
}

StepMotion make_step_motion(std::span<const Frame> frames, int gt_index,
                            const PropagationConfig& config,
                            std::vector<std::filesystem::path> forward_files,
                            std::vector<std::filesystem::path> backward_files) {
  if (config.motion_mode == MotionMode::kExternal) {
    if (config.forward() &&
        forward_files.size() < static_cast<std::size_t>(config.k)) {
      throw ParameterError("external motion: " + std::to_string(config.k) +
                           " forward motion files required, got " +
                           std::to_string(forward_files.size()));
    }
    if (config.backward() &&
        backward_files.size() < static_cast<std::size_t>(config.k)) {
      throw ParameterError("external motion: " + std::to_string(config.k) +
                           " backward motion files required, got " +
                           std::to_string(backward_files.size()));
    }
    return [fwd = std::move(forward_files),
            bwd = std::move(backward_files)](int step) {
      const auto& files = step > 0 ? fwd : bwd;
      const std::size_t j = static_cast<std::size_t>(step > 0 ? step : -step);
      return load_motion(files.at(j - 1));
    };
  }
  const MotionMode mode = config.motion_mode;
  const FlowParams flow = config.flow;
  return [frames, gt_index, mode, flow](int step) {
    const int sign = step > 0 ? 1 : -1;
    // Real frame index for the synthesized step s.
    auto at = [&](int s) -> const Frame& {
      return frames[static_cast<std::size_t>(gt_index + sign * s)];
    };
    const int j = step * sign;
    if (mode == MotionMode::kReconstruction) {
      return estimate_motion(at(j - 1), at(j), flow);
    }
    return predict_motion(estimate_motion(at(j - 2), at(j - 1), flow));
  };
}

std::vector<PropagatedSample> propagate_sequence(
    std::span<const Frame> frames, const LabelMap& gt_label, int gt_index,
    const PropagationConfig& config, const StepMotion& motion) {
  config.validate();
  check_sequence_length(frames.size(), gt_index, config);
  const Frame& gt_frame = frames[static_cast<std::size_t>(gt_index)];
  require_same_size(gt_frame.size(), gt_label.size(),
                    "propagate_sequence frame/label");

  std::vector<PropagatedSample> out;
  for (int sign : {+1, -1}) {
    if (sign > 0 && !config.forward()) continue;
    if (sign < 0 && !config.backward()) continue;
    Frame frame = gt_frame;
    LabelMap label = gt_label;
    for (int j = 1; j <= config.k; ++j) {
      const int step = sign * j;
      const MotionField field = motion(step);
      const int real_index = gt_index + step;
      const bool have_real =
          real_index >= 0 && real_index < static_cast<int>(frames.size());
      PropagatedSample sample = propagate_step(
          frame, label, field, config.pairing, config.label_policy,
          have_real ? &frames[static_cast<std::size_t>(real_index)] : nullptr);
      sample.step = step;
      // The chain always continues from the synthesized label; for joint
      // pairing it also continues from the synthesized frame.
      label = sample.label;
      if (config.pairing == Pairing::kJoint) frame = sample.frame;
      out.push_back(std::move(sample));
    }
  }
  return out;
}

std::vector<PropagatedSample> propagate_sequence(
    std::span<const Frame> frames, const LabelMap& gt_label, int gt_index,
    const PropagationConfig& config) {
  return propagate_sequence(frames, gt_label, gt_index, config,
                            make_step_motion(frames, gt_index, config));
}

std::vector<int> dataset_steps(const PropagationConfig& config) {
  std::vector<int> steps;
  const int k = config.k;
  if (k == 0) return {0};
  if (config.accumulation == Accumulation::kAccumulated) {
    if (config.backward()) {
      for (int j = k; j >= 1; --j) steps.push_back(-j);
    }
    steps.push_back(0);
    if (config.forward()) {
      for (int j = 1; j <= k; ++j) steps.push_back(j);
    }
  } else {
    if (config.backward()) steps.push_back(-k);
    steps.push_back(0);
    if (config.forward()) steps.push_back(k);
  }
  return steps;
}

namespace {

std::filesystem::path absolute_normal(const std::filesystem::path& p) {
  return std::filesystem::absolute(p).lexically_normal();
}

std::string manifest_path(const std::filesystem::path& file,
                          const std::filesystem::path& root) {
  const std::filesystem::path rel =
      absolute_normal(file).lexically_proximate(absolute_normal(root));
  return rel.generic_string();
}

std::vector<std::filesystem::path> resolve_all(
    const nlohmann::json& list, const std::filesystem::path& base,
    const std::string& where) {
  std::vector<std::filesystem::path> out;
  if (!list.is_array()) throw FormatError(where + ": expected an array");
  for (const auto& item : list) {
    if (!item.is_string()) throw FormatError(where + ": expected strings");
    std::filesystem::path p(item.get<std::string>());
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

std::string step_tag(int step) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%+03d", step);
  return buf;
}

}  // namespace

std::vector<FrameSequence> load_sequences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sequence file " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<FrameSequence> out;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + " line " +
                              std::to_string(line_number);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("origin") || !j["origin"].is_string() ||
        !j.contains("frames") || !j.contains("gt_index") ||
        !j["gt_index"].is_number_integer()) {
      throw FormatError(where + ": needs origin, frames and gt_index");
    }
    FrameSequence seq;
    seq.origin = j["origin"].get<std::string>();
    seq.frames = resolve_all(j["frames"], base, where);
    seq.gt_index = j["gt_index"].get<int>();
    if (j.contains("motion_forward")) {
      seq.motion_forward = resolve_all(j["motion_forward"], base, where);
    }
    if (j.contains("motion_backward")) {
      seq.motion_backward = resolve_all(j["motion_backward"], base, where);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void save_sequences(const std::vector<FrameSequence>& sequences,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write sequence file " + path.string());
  const std::filesystem::path base =
      path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  auto list = [&](const std::vector<std::filesystem::path>& paths) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) arr.push_back(manifest_path(p, base));
    return arr;
  };
  for (const FrameSequence& seq : sequences) {
    nlohmann::ordered_json j;
    j["origin"] = seq.origin;
    j["frames"] = list(seq.frames);
    j["gt_index"] = seq.gt_index;
    if (!seq.motion_forward.empty()) j["motion_forward"] = list(seq.motion_forward);
    if (!seq.motion_backward.empty()) {
      j["motion_backward"] = list(seq.motion_backward);
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

BuildResult build_augmented_dataset(const DatasetManifest& gt_manifest,
                                    const std::vector<FrameSequence>& sequences,
                                    const PropagationConfig& config,
                                    int num_classes,
                                    const std::filesystem::path& out_dir) {
  config.validate();
  std::map<std::string, const FrameSequence*> by_origin;
  for (const FrameSequence& seq : sequences) by_origin[seq.origin] = &seq;
  if (config.k > 0) std::filesystem::create_directories(out_dir);

  const std::vector<int> steps = dataset_steps(config);
  const std::size_t m = gt_manifest.entries.size();

  // Per-entry output slots, filled in parallel and concatenated in order.
  std::vector<std::vector<ManifestEntry>> produced(m);
  std::vector<std::optional<SkippedEntry>> skipped(m);
  std::vector<std::exception_ptr> errors(m);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    const ManifestEntry& gt = gt_manifest.entries[i];
    try {
      if (config.k == 0 || gt.source != Source::kGroundTruth) {
        produced[i].push_back(gt);
        continue;
      }
      auto it = by_origin.find(gt.origin);
      if (it == by_origin.end()) {
        skipped[i] = SkippedEntry{static_cast<std::size_t>(i), gt.origin,
                                  "no frame sequence for origin"};
        continue;
      }
      const FrameSequence& seq = *it->second;
      try {
        check_sequence_length(seq.frames.size(), seq.gt_index, config);
      } catch (const ParameterError& e) {
        skipped[i] =
            SkippedEntry{static_cast<std::size_t>(i), gt.origin, e.what()};
        continue;
      }
      std::vector<Frame> frames;
      frames.reserve(seq.frames.size());
      for (const auto& p : seq.frames) frames.push_back(load_frame(p));
      const LabelMap label =
          load_label(gt_manifest.label_path(static_cast<std::size_t>(i)),
                     num_classes);
      const StepMotion motion = make_step_motion(
          frames, seq.gt_index, config, seq.motion_forward,
          seq.motion_backward);
      const std::vector<PropagatedSample> samples =
          propagate_sequence(frames, label, seq.gt_index, config, motion);

      for (int step : steps) {
        if (step == 0) {
          produced[i].push_back(gt);
          continue;
        }
        const PropagatedSample* sample = nullptr;
        for (const auto& s : samples) {
          if (s.step == step) sample = &s;
        }
        const std::string stem = gt.origin + "_s" + step_tag(step);
        const std::filesystem::path label_file = out_dir / (stem + "_label.png");
        save_label(sample->label, label_file);
        std::filesystem::path frame_file;
        if (config.pairing == Pairing::kJoint) {
          frame_file = out_dir / (stem + "_frame.png");
          save_frame(sample->frame, frame_file);
        } else {
          frame_file = seq.frames[static_cast<std::size_t>(seq.gt_index + step)];
        }
        ManifestEntry entry;
        entry.frame = manifest_path(frame_file, gt_manifest.root);
        entry.label = manifest_path(label_file, gt_manifest.root);
        entry.source = Source::kSynthesized;
        entry.step = step;
        entry.origin = gt.origin;
        entry.pairing = config.pairing;
        produced[i].push_back(std::move(entry));
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }

  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  BuildResult result;
  result.manifest.root = gt_manifest.root;
  for (std::size_t i = 0; i < m; ++i) {
    if (skipped[i]) {
      result.skipped.push_back(*skipped[i]);
      continue;
    }
    for (auto& entry : produced[i]) {
      result.manifest.entries.push_back(std::move(entry));
    }
  }
  return result;
}

DatasetManifest rebase_manifest(const DatasetManifest& manifest,
                                const std::filesystem::path& new_root) {
  DatasetManifest out;
  out.root = new_root;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    ManifestEntry entry = manifest.entries[i];
    if (!std::filesystem::path(entry.frame).is_absolute()) {
      entry.frame = manifest_path(manifest.frame_path(i), new_root);
    }
    if (!std::filesystem::path(entry.label).is_absolute()) {
      entry.label = manifest_path(manifest.label_path(i), new_root);
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

}  // namespace segprop
