#include <gtest/gtest.h>

#include "segprop/core/image_io.hpp"
#include "segprop/core/manifest.hpp"
#include "segprop/propagate.hpp"
#include "segprop/toytrain.hpp"
#include "segprop/warp.hpp"
#include "test_util.hpp"

namespace segprop {
namespace {

using testing::TempDir;

PropagationConfig config_of(int k, Accumulation acc,
                            Pairing pairing = Pairing::kJoint,
                            MotionMode motion = MotionMode::kReconstruction) {
  PropagationConfig c;
  c.k = k;
  c.accumulation = acc;
  c.pairing = pairing;
  c.motion_mode = motion;
  c.flow = FlowParams{3, 3, 3, 1e-4};
  return c;
}

TEST(DatasetStepsTest, AccumulatedAndNonAccumulated) {
  EXPECT_EQ(dataset_steps(config_of(5, Accumulation::kAccumulated)),
            (std::vector<int>{-5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(dataset_steps(config_of(3, Accumulation::kNonAccumulated)),
            (std::vector<int>{-3, 0, 3}));
  EXPECT_EQ(dataset_steps(config_of(0, Accumulation::kAccumulated)),
            (std::vector<int>{0}));
  PropagationConfig fwd = config_of(2, Accumulation::kAccumulated);
  fwd.direction = Direction::kForward;
  EXPECT_EQ(dataset_steps(fwd), (std::vector<int>{0, 1, 2}));
}

TEST(DatasetStepsTest, EntryCountLawForAllK) {
  for (int k = 1; k <= 8; ++k) {
    EXPECT_EQ(dataset_steps(config_of(k, Accumulation::kAccumulated)).size(),
              static_cast<std::size_t>(2 * k + 1));
    EXPECT_EQ(dataset_steps(config_of(k, Accumulation::kNonAccumulated)).size(), 3u);
  }
}

TEST(PropagateStepTest, JointWarpsBothWithTheSameField) {
  Rng rng(1);
  const Frame f = testing::random_frame(rng, 8, 9, 3);
  const LabelMap l = testing::random_label(rng, 8, 9, 4);
  MotionField m(8, 9);
  for (auto& v : m.uv()) v = static_cast<float>(rng.uniform(-1.5, 1.5));
  const PropagatedSample s = propagate_step(f, l, m, Pairing::kJoint);
  EXPECT_EQ(s.frame, warp_image(f, m));
  EXPECT_EQ(s.label, warp_label(l, m));
}

TEST(PropagateStepTest, LabelOnlyPairsWithTheRealFrame) {
  Rng rng(2);
  const Frame f = testing::random_frame(rng, 8, 9, 3);
  const Frame future = testing::random_frame(rng, 8, 9, 3);
  const LabelMap l = testing::random_label(rng, 8, 9, 4);
  const MotionField m = MotionField::constant(8, 9, 1.0f, 0.0f);
  const PropagatedSample s = propagate_step(f, l, m, Pairing::kLabelOnly, {}, &future);
  EXPECT_EQ(s.frame, future);
  EXPECT_EQ(s.label, warp_label(l, m));
  EXPECT_THROW(propagate_step(f, l, m, Pairing::kLabelOnly), ParameterError);
}

// Frames of a clip whose content translates by (dx, dy) per frame.
std::vector<Frame> translating_clip(int n, int h, int w, int dx, int dy) {
  Rng rng(3);
  const Frame base = testing::random_frame(rng, h, w, 1);
  std::vector<Frame> frames;
  for (int t = 0; t < n; ++t) {
    frames.push_back(warp_image(
        base, MotionField::constant(h, w, static_cast<float>(-dx * t),
                                    static_cast<float>(-dy * t))));
  }
  return frames;
}

TEST(PropagateSequenceTest, AutoRegressiveChainMatchesRepeatedWarp) {
  const int h = 10, w = 12;
  const auto frames = translating_clip(7, h, w, 1, 0);
  Rng rng(4);
  const LabelMap gt = testing::random_label(rng, h, w, 5);
  PropagationConfig c = config_of(3, Accumulation::kAccumulated);
  const MotionField fwd = MotionField::constant(h, w, -1.0f, 0.0f);
  const MotionField bwd = MotionField::constant(h, w, 1.0f, 0.0f);
  const StepMotion motion = [&](int step) { return step > 0 ? fwd : bwd; };
  const auto samples = propagate_sequence(frames, gt, 3, c, motion);
  ASSERT_EQ(samples.size(), 6u);
  std::vector<int> steps;
  for (const auto& s : samples) steps.push_back(s.step);
  EXPECT_EQ(steps, (std::vector<int>{1, 2, 3, -1, -2, -3}));
  LabelMap expect = gt;
  Frame frame = frames[3];
  for (int j = 1; j <= 3; ++j) {
    expect = warp_label(expect, fwd);
    frame = warp_image(frame, fwd);
    EXPECT_EQ(samples[j - 1].label, expect);
    EXPECT_EQ(samples[j - 1].frame, frame);
  }
  // Integer shift oracle for the third forward step: out(x) = gt(x - 3).
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      EXPECT_EQ(samples[2].label.at(y, x), x >= 3 ? gt.at(y, x - 3) : kVoid);
    }
  }
}

TEST(PropagateSequenceTest, VoidCountNonDecreasingOnTranslatingScenes) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SceneParams p;
    p.num_frames = 11;
    p.background_u = 1.3;
    p.background_v = 0.4;
    p.seed = seed;
    const Scene s = synth_scene(p);
    PropagationConfig c = config_of(5, Accumulation::kAccumulated);
    const StepMotion motion = [&](int step) {
      return step > 0 ? ground_truth_motion(s, 5 + step - 1, 5 + step)
                      : ground_truth_motion(s, 5 + step + 1, 5 + step);
    };
    const auto samples = propagate_sequence(s.frames, s.labels[5], 5, c, motion);
    for (int dir : {+1, -1}) {
      std::size_t prev = s.labels[5].count(kVoid);
      for (int j = 1; j <= 5; ++j) {
        for (const auto& smp : samples) {
          if (smp.step != dir * j) continue;
          const std::size_t now = smp.label.count(kVoid);
          EXPECT_GE(now, prev) << "seed " << seed << " step " << smp.step;
          prev = now;
        }
      }
    }
  }
}

TEST(StepMotionTest, ReconstructionAndPredictionUseRealFrames) {
  SceneParams p;
  p.num_frames = 7;
  p.seed = 5;
  const Scene s = synth_scene(p);
  const FlowParams fp{3, 3, 3, 1e-4};
  PropagationConfig rec = config_of(2, Accumulation::kAccumulated);
  const StepMotion r = make_step_motion(s.frames, 3, rec);
  EXPECT_EQ(r(2), estimate_motion(s.frames[4], s.frames[5], fp));
  EXPECT_EQ(r(-1), estimate_motion(s.frames[3], s.frames[2], fp));
  PropagationConfig pred = rec;
  pred.motion_mode = MotionMode::kPrediction;
  const StepMotion q = make_step_motion(s.frames, 3, pred);
  EXPECT_EQ(q(1), estimate_motion(s.frames[2], s.frames[3], fp));
  EXPECT_EQ(q(-2), estimate_motion(s.frames[3], s.frames[2], fp));
}

TEST(StepMotionTest, ExternalFilesAreLoadedPerStep) {
  TempDir dir;
  const MotionField a = MotionField::constant(4, 4, 0.5f, 0.0f);
  const MotionField b = MotionField::constant(4, 4, -0.5f, 1.0f);
  save_motion(a, dir / "f1.flo");
  save_motion(b, dir / "b1.flo");
  PropagationConfig c = config_of(1, Accumulation::kAccumulated);
  c.motion_mode = MotionMode::kExternal;
  const StepMotion m = make_step_motion({}, 0, c, {dir / "f1.flo"}, {dir / "b1.flo"});
  EXPECT_EQ(m(1), a);
  EXPECT_EQ(m(-1), b);
  c.k = 2;
  EXPECT_THROW(make_step_motion({}, 0, c, {dir / "f1.flo"}, {dir / "b1.flo"}),
               ParameterError);
}

TEST(SequenceLengthTest, ReportsMissingFrames) {
  PropagationConfig c = config_of(2, Accumulation::kAccumulated);
  EXPECT_NO_THROW(check_sequence_length(5, 2, c));
  EXPECT_THROW(check_sequence_length(4, 2, c), ParameterError);
  EXPECT_THROW(check_sequence_length(5, 1, c), ParameterError);
  // Forward prediction at step 1 needs frame t-1 as context.
  c.direction = Direction::kForward;
  EXPECT_NO_THROW(check_sequence_length(5, 0, c));
  c.motion_mode = MotionMode::kPrediction;
  EXPECT_THROW(check_sequence_length(5, 0, c), ParameterError);
  EXPECT_NO_THROW(check_sequence_length(5, 1, c));
  EXPECT_THROW(check_sequence_length(5, 9, c), ParameterError);
}

TEST(PropagationConfigTest, NamesRoundTripAndValidate) {
  for (auto d : {Direction::kForward, Direction::kBackward, Direction::kBoth}) {
    EXPECT_EQ(parse_direction(to_string(d)), d);
  }
  for (auto m : {MotionMode::kReconstruction, MotionMode::kPrediction, MotionMode::kExternal}) {
    EXPECT_EQ(parse_motion_mode(to_string(m)), m);
  }
  for (auto a : {Accumulation::kAccumulated, Accumulation::kNonAccumulated}) {
    EXPECT_EQ(parse_accumulation(to_string(a)), a);
  }
  for (auto p : {Pairing::kJoint, Pairing::kLabelOnly}) EXPECT_EQ(parse_pairing(to_string(p)), p);
  EXPECT_THROW(parse_direction("sideways"), ParameterError);
  PropagationConfig c;
  c.k = -1;
  EXPECT_THROW(c.validate(), ParameterError);
}

// Writes `count` synthetic clips and returns (gt manifest, sequences).
std::pair<DatasetManifest, std::vector<FrameSequence>> make_dataset(
    const std::filesystem::path& dir, int count, int frames) {
  DatasetManifest gt;
  gt.root = dir;
  std::vector<FrameSequence> sequences;
  for (int i = 0; i < count; ++i) {
    SceneParams p;
    p.num_frames = frames;
    p.seed = 100 + i;
    const std::string prefix = "clip" + std::to_string(i);
    const SceneFiles files = write_scene(synth_scene(p), dir / prefix, prefix, frames / 2);
    const DatasetManifest one = load_manifest(files.gt_manifest);
    ManifestEntry e = one.entries[0];
    e.frame = (prefix + "/") + e.frame;
    e.label = (prefix + "/") + e.label;
    gt.entries.push_back(e);
    for (auto& s : load_sequences(files.sequences)) sequences.push_back(s);
  }
  return {gt, sequences};
}

TEST(BuildTest, AccumulatedK5OnFourSamplesGives44Entries) {
  TempDir dir;
  auto [gt, seqs] = make_dataset(dir.path(), 4, 11);
  const BuildResult r = build_augmented_dataset(
      gt, seqs, config_of(5, Accumulation::kAccumulated), 4, dir / "out");
  EXPECT_TRUE(r.skipped.empty());
  EXPECT_EQ(r.manifest.entries.size(), 44u);
  std::size_t synth = 0;
  for (std::size_t i = 0; i < r.manifest.entries.size(); ++i) {
    const auto& e = r.manifest.entries[i];
    if (e.source == Source::kSynthesized) {
      ++synth;
      EXPECT_EQ(e.pairing, Pairing::kJoint);
      EXPECT_TRUE(std::filesystem::exists(r.manifest.frame_path(i)));
      EXPECT_TRUE(std::filesystem::exists(r.manifest.label_path(i)));
    } else {
      EXPECT_FALSE(e.pairing.has_value());
    }
  }
  EXPECT_EQ(synth, 40u);
}

TEST(BuildTest, NonAccumulatedK3GivesThreePerSample) {
  TempDir dir;
  auto [gt, seqs] = make_dataset(dir.path(), 2, 7);
  const BuildResult r = build_augmented_dataset(
      gt, seqs, config_of(3, Accumulation::kNonAccumulated), 4, dir / "out");
  ASSERT_EQ(r.manifest.entries.size(), 6u);
  EXPECT_EQ(r.manifest.entries[0].step, -3);
  EXPECT_EQ(r.manifest.entries[1].step, 0);
  EXPECT_EQ(r.manifest.entries[2].step, 3);
}

TEST(BuildTest, KZeroCopiesTheInput) {
  TempDir dir;
  auto [gt, seqs] = make_dataset(dir.path(), 2, 5);
  const BuildResult r = build_augmented_dataset(
      gt, seqs, config_of(0, Accumulation::kAccumulated), 4, dir / "out");
  EXPECT_EQ(r.manifest.entries, gt.entries);
}

TEST(BuildTest, ShortOrMissingSequencesAreSkippedAndReported) {
  TempDir dir;
  auto [gt, seqs] = make_dataset(dir.path(), 3, 5);
  seqs.erase(seqs.begin() + 1);  // clip1 has no sequence
  const BuildResult r = build_augmented_dataset(
      gt, seqs, config_of(3, Accumulation::kAccumulated), 4, dir / "out");
  // k = 3 needs 7 frames around the middle of a 5-frame clip: all skipped.
  EXPECT_EQ(r.skipped.size(), 3u);
  EXPECT_TRUE(r.manifest.entries.empty());
  const BuildResult r2 = build_augmented_dataset(
      gt, seqs, config_of(2, Accumulation::kAccumulated), 4, dir / "out2");
  ASSERT_EQ(r2.skipped.size(), 1u);
  EXPECT_EQ(r2.skipped[0].origin, "clip1");
  EXPECT_EQ(r2.skipped[0].entry_index, 1u);
  EXPECT_EQ(r2.manifest.entries.size(), 2u * 5u);
}

TEST(BuildTest, LabelOnlyReferencesRealFrames) {
  TempDir dir;
  auto [gt, seqs] = make_dataset(dir.path(), 1, 7);
  const BuildResult r = build_augmented_dataset(
      gt, seqs, config_of(2, Accumulation::kAccumulated, Pairing::kLabelOnly), 4,
      dir / "out");
  ASSERT_EQ(r.manifest.entries.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& e = r.manifest.entries[i];
    if (e.source != Source::kSynthesized) continue;
    EXPECT_EQ(e.pairing, Pairing::kLabelOnly);
    EXPECT_EQ(r.manifest.frame_path(i).lexically_normal(),
              seqs[0].frames[3 + e.step].lexically_normal());
  }
}

TEST(BuildTest, DeterministicBytes) {
  TempDir dir;
  auto [gt, seqs] = make_dataset(dir.path(), 2, 7);
  const auto c = config_of(2, Accumulation::kAccumulated, Pairing::kJoint,
                           MotionMode::kPrediction);
  PropagationConfig c1 = c;
  c1.k = 1;
  const BuildResult a = build_augmented_dataset(gt, seqs, c1, 4, dir / "a");
  const BuildResult b = build_augmented_dataset(gt, seqs, c1, 4, dir / "b");
  save_manifest(rebase_manifest(a.manifest, dir / "a"), dir / "a/m.jsonl");
  save_manifest(rebase_manifest(b.manifest, dir / "b"), dir / "b/m.jsonl");
  EXPECT_EQ(testing::read_bytes(dir / "a/m.jsonl"), testing::read_bytes(dir / "b/m.jsonl"));
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    EXPECT_EQ(testing::read_bytes(entry.path()),
              testing::read_bytes(dir / "b" / entry.path().filename()));
  }
}

TEST(RebaseTest, PathsResolveToTheSameFiles) {
  DatasetManifest m;
  m.root = "/data/root";
  m.entries.push_back({"frames/a.png", "/abs/l.png", Source::kGroundTruth, 0, "o", {}});
  const DatasetManifest r = rebase_manifest(m, "/data/other/dir");
  EXPECT_EQ(r.entries[0].frame, "../../root/frames/a.png");
  EXPECT_EQ(r.entries[0].label, "/abs/l.png");
  EXPECT_EQ(r.frame_path(0).lexically_normal(), m.frame_path(0).lexically_normal());
}

}  // namespace
}  // namespace segprop
