#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segprop/core/manifest.hpp"
#include "segprop/motion.hpp"
#include "segprop/propagate.hpp"
#include "segprop/toytrain.hpp"
#include "segprop/warp.hpp"

namespace segprop {

// Where boundary noise enters the training labels: only the annotation
// before propagation, or every label the classifier is trained on
// (annotation and each synthesized label, drawn independently).
enum class NoiseStage { kAnnotation, kTrainingLabels };
const char* to_string(NoiseStage stage);
NoiseStage parse_noise_stage(const std::string& text);

/// Grid {LP, JP} x {prediction, reconstruction} x k in [0, k_max] x
/// {one-hot, relaxed}, one toy training run per cell and seed.
struct StudyConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9};
  int k_max = 5;
  SceneParams scene;       // template; seed, palette_seed and length are set per run
  int train_scenes = 4;    // labelled clips per seed, ground truth mid-clip
  int test_scenes = 4;     // clean held-out clips per seed
  int test_frames = 3;     // frames per held-out clip
  int noise_radius = 2;    // boundary noise radius (0 = off)
  NoiseStage noise_stage = NoiseStage::kTrainingLabels;
  FlowParams flow;
  LabelWarpPolicy label_policy;
  TrainConfig train;

  StudyConfig();
  void validate() const;
};

struct StudyCell {
  Pairing pairing = Pairing::kJoint;
  MotionMode motion = MotionMode::kReconstruction;
  int k = 0;
  LossKind loss = LossKind::kOneHot;
  // One slot per configured seed; empty where the run failed.
  std::vector<std::optional<double>> miou;
  std::vector<std::string> errors;  // "seed N: message"
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double median = 0.0;
  std::size_t runs = 0;  // successful seeds
};

struct StudyReport {
  StudyConfig config;
  std::vector<StudyCell> cells;  // pairing, motion, k, loss order

  const StudyCell& cell(Pairing pairing, MotionMode motion, int k,
                        LossKind loss) const;
};

StudyReport run_study(const StudyConfig& config);

// One JSON record per line: a "config" record followed by one "cell" record
// per grid cell.
std::string format_study_jsonl(const StudyReport& report);
// Mean +- sample std per row, one column per k, then the ordering checks.
std::string format_study_table(const StudyReport& report);

struct StudyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Directional checks on cell medians:
//   JP >= LP            prediction motion, one-hot, k = 1..3
//   recon >= pred       joint pairing, one-hot, k = 1..3
//   relaxed >= one-hot  joint pairing, reconstruction, k = 0..k_max
//   gap(3) >= gap(1)    median over seeds of (relaxed - one-hot), joint,
//                       reconstruction
std::vector<StudyCheck> study_checks(const StudyReport& report);

double median_of(std::vector<double> values);

}  // namespace segprop
