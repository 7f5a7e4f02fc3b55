#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "segprop/motion.hpp"
#include "segprop/propagate.hpp"
#include "segprop/study.hpp"
#include "segprop/toytrain.hpp"

namespace segprop {

using Json = nlohmann::ordered_json;

struct SamplingOptions {
  int crop_size = 32;
  std::size_t epoch_size = 64;
  double uniform_fraction = 0.5;
  std::uint64_t epoch = 0;
  std::optional<std::set<int>> classes;  // restrict centroid recording
};

struct EvalOptions {
  std::vector<double> scales{1.0};
  bool flip = false;
};

/// Everything a CLI run can be configured with. A config file may give any
/// subset of the keys below; omitted keys keep their defaults and unknown
/// keys are an error.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = OpenMP default
  int num_classes = 19;
  FlowParams flow;
  PropagationConfig propagation;
  SceneParams scene;
  TrainConfig train;
  SamplingOptions sampling;
  EvalOptions eval;
  int noise_radius = 0;
  StudyConfig study;
};

Json to_json(const FlowParams& p);
Json to_json(const SceneParams& p);
Json to_json(const TrainConfig& c);
Json to_json(const PropagationConfig& c);
Json to_json(const SamplingOptions& o);
Json to_json(const EvalOptions& o);
Json study_config_to_json(const StudyConfig& c);
Json to_json(const RunConfig& c);

// Each overlays the keys present in `j` onto `out`. Throws ParameterError
// naming the path ("train.lr0") of an unknown key or a value of the wrong
// type.
void from_json(const Json& j, FlowParams& out, const std::string& path = "flow");
void from_json(const Json& j, SceneParams& out, const std::string& path = "scene");
void from_json(const Json& j, TrainConfig& out, const std::string& path = "train");
void from_json(const Json& j, PropagationConfig& out,
               const std::string& path = "propagation");
void from_json(const Json& j, SamplingOptions& out,
               const std::string& path = "sampling");
void from_json(const Json& j, EvalOptions& out, const std::string& path = "eval");
void study_config_from_json(const Json& j, StudyConfig& out,
                            const std::string& path = "study");
void from_json(const Json& j, RunConfig& out);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace segprop
