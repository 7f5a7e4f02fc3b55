#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "segprop/core/manifest.hpp"
#include "segprop/core/types.hpp"
#include "segprop/motion.hpp"
#include "segprop/warp.hpp"

namespace segprop {

enum class Direction { kForward, kBackward, kBoth };
enum class MotionMode { kReconstruction, kPrediction, kExternal };
enum class Accumulation { kAccumulated, kNonAccumulated };

const char* to_string(Direction d);
const char* to_string(MotionMode m);
const char* to_string(Accumulation a);
Direction parse_direction(const std::string& text);
MotionMode parse_motion_mode(const std::string& text);
Accumulation parse_accumulation(const std::string& text);

struct PropagationConfig {
  int k = 1;
  Direction direction = Direction::kBoth;
  Pairing pairing = Pairing::kJoint;
  MotionMode motion_mode = MotionMode::kReconstruction;
  Accumulation accumulation = Accumulation::kNonAccumulated;
  FlowParams flow;
  LabelWarpPolicy label_policy;

  bool forward() const { return direction != Direction::kBackward; }
  bool backward() const { return direction != Direction::kForward; }
  void validate() const;
};

struct PropagatedSample {
  Frame frame;
  LabelMap label;
  int step = 0;  // +j forward, -j backward
};

// JOINT warps frame and label with the same field. LABEL_ONLY warps only the
// label and pairs it with `real_future` (required in that mode).
PropagatedSample propagate_step(const Frame& frame, const LabelMap& label,
                                const MotionField& field, Pairing pairing,
                                LabelWarpPolicy policy = {},
                                const Frame* real_future = nullptr);

// Supplies the field that carries step |j|-1 to step j (j signed).
using StepMotion = std::function<MotionField(int step)>;

// Motion for step j measured on real frames around `gt_index`:
//   reconstruction: estimate(frame[t+j-1], frame[t+j]) (mirrored for j < 0)
//   prediction:     predict_motion(estimate(frame[t+j-2], frame[t+j-1]))
//   external:       load_motion(forward_files[j-1] / backward_files[-j-1])
StepMotion make_step_motion(std::span<const Frame> frames, int gt_index,
                            const PropagationConfig& config,
                            std::vector<std::filesystem::path> forward_files = {},
                            std::vector<std::filesystem::path> backward_files = {});

// Frames needed around the ground-truth index. Throws ParameterError naming
// the missing index when the sequence is too short.
void check_sequence_length(std::size_t num_frames, int gt_index,
                           const PropagationConfig& config);

// Auto-regressive propagation: step j applies the step-j field to the
// step-(j-1) synthesized frame and label. Output holds +1..+k followed by
// -1..-k (for the enabled directions).
std::vector<PropagatedSample> propagate_sequence(
    std::span<const Frame> frames, const LabelMap& gt_label, int gt_index,
    const PropagationConfig& config, const StepMotion& motion);
std::vector<PropagatedSample> propagate_sequence(
    std::span<const Frame> frames, const LabelMap& gt_label, int gt_index,
    const PropagationConfig& config);

// The steps that enter an augmented dataset for one ground-truth sample,
// ascending: accumulated -> -k..k, non-accumulated -> {-k, 0, k}.
std::vector<int> dataset_steps(const PropagationConfig& config);

/// Video frames surrounding one labelled frame.
struct FrameSequence {
  std::string origin;
  std::vector<std::filesystem::path> frames;
  int gt_index = 0;
  // Only used in external motion mode.
  std::vector<std::filesystem::path> motion_forward;
  std::vector<std::filesystem::path> motion_backward;
};

// Sequence index file: one JSON object per line,
//   {"origin":"..","frames":[..],"gt_index":N,
//    "motion_forward":[..],"motion_backward":[..]}
// (motion lists optional). Relative paths resolve against the file's folder.
std::vector<FrameSequence> load_sequences(const std::filesystem::path& path);
void save_sequences(const std::vector<FrameSequence>& sequences,
                    const std::filesystem::path& path);

struct SkippedEntry {
  std::size_t entry_index = 0;
  std::string origin;
  std::string reason;
};

struct BuildResult {
  DatasetManifest manifest;
  std::vector<SkippedEntry> skipped;
};

// Propagates every ground-truth entry of `gt_manifest` (matched to a
// sequence by origin id) and writes synthesized PNGs to `out_dir`. The
// returned manifest keeps the input root; GT entries are copied verbatim and
// synthesized paths are written relative to that root. Entries whose
// sequence is missing or too short are skipped and reported.
BuildResult build_augmented_dataset(const DatasetManifest& gt_manifest,
                                    const std::vector<FrameSequence>& sequences,
                                    const PropagationConfig& config,
                                    int num_classes,
                                    const std::filesystem::path& out_dir);

// Rewrites relative paths so the manifest can be saved under `new_root`.
DatasetManifest rebase_manifest(const DatasetManifest& manifest,
                                const std::filesystem::path& new_root);

}  // namespace segprop
