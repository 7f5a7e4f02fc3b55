#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "segprop/core/image_io.hpp"
#include "segprop/core/logits_io.hpp"
#include "segprop/core/manifest.hpp"
#include "segprop/propagate.hpp"
#include "test_util.hpp"

namespace segprop {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun cli(const testing::TempDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + SEGPROP_CLI + "\" " + args + " >\"" +
                          out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_file(out);
  r.err = testing::read_file(err);
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// Small frames need a shallow pyramid.
const char* kSmallConfig =
    R"({"flow": {"pyramid_levels": 2, "window_radius": 3, "iterations_per_level": 3}})";

// Four synthetic clips of 11 frames (annotation at index 5), merged into one
// ground-truth manifest and one sequence index with absolute paths.
struct Dataset {
  fs::path config, gt_manifest, sequences;
};

Dataset make_dataset(const testing::TempDir& dir) {
  Dataset d;
  d.config = dir / "config.json";
  std::ofstream(d.config) << kSmallConfig;
  DatasetManifest merged;
  merged.root = dir.path();
  std::vector<FrameSequence> sequences;
  for (int i = 0; i < 4; ++i) {
    const fs::path clip = dir / ("clip" + std::to_string(i));
    const CliRun r = cli(dir, "--config \"" + d.config.string() + "\" --seed " +
                               std::to_string(10 + i) + " --out \"" + clip.string() +
                               "\" synth --frames 11 --gt-index 5 --prefix c" +
                               std::to_string(i));
    EXPECT_EQ(r.code, 0) << r.err;
    const DatasetManifest gt = load_manifest(clip / "gt_manifest.jsonl");
    for (std::size_t e = 0; e < gt.entries.size(); ++e) {
      ManifestEntry entry = gt.entries[e];
      entry.frame = gt.frame_path(e).string();
      entry.label = gt.label_path(e).string();
      merged.entries.push_back(entry);
    }
    for (const FrameSequence& s : load_sequences(clip / "sequences.jsonl")) {
      sequences.push_back(s);
    }
  }
  d.gt_manifest = dir / "gt.jsonl";
  d.sequences = dir / "sequences.jsonl";
  save_manifest(merged, d.gt_manifest);
  save_sequences(sequences, d.sequences);
  return d;
}

std::string build_args(const Dataset& d, const fs::path& out, const std::string& extra) {
  return "--config \"" + d.config.string() + "\" --out \"" + out.string() +
         "\" build --manifest \"" + d.gt_manifest.string() + "\" --sequences \"" +
         d.sequences.string() + "\" --num-classes 4 " + extra;
}

TEST(CliTest, HelpListsFlagsAndCommands) {
  testing::TempDir dir;
  const CliRun top = cli(dir, "--help");
  EXPECT_EQ(top.code, 0);
  for (const char* s : {"--config", "--seed", "--threads", "--out", "--print-config", "flow",
                        "propagate", "build", "loss", "sample-plan", "eval", "entropy",
                        "synth", "train-toy", "study"}) {
    EXPECT_NE(top.out.find(s), std::string::npos) << s;
  }
  const CliRun build = cli(dir, "build --help");
  for (const char* s : {"--k", "--direction", "--pairing", "--motion", "--accumulation",
                        "--label-interp", "--manifest"}) {
    EXPECT_NE(build.out.find(s), std::string::npos) << s;
  }
  EXPECT_NE(cli(dir, "").code, 0);
}

TEST(CliTest, PrintConfigRoundTrips) {
  testing::TempDir dir;
  const CliRun a = cli(dir, "--seed 5 --print-config");
  ASSERT_EQ(a.code, 0) << a.err;
  { std::ofstream(dir / "a.json") << a.out; }
  const CliRun b = cli(dir, "--config \"" + (dir / "a.json").string() + "\" --print-config");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(Json::parse(a.out)["seed"], 5);
}

TEST(CliTest, BadConfigsFail) {
  testing::TempDir dir;
  { std::ofstream(dir / "bad.json") << R"({"train": {"learning_rate": 1}})"; }
  const CliRun unknown = cli(dir, "--config \"" + (dir / "bad.json").string() + "\" --print-config");
  EXPECT_NE(unknown.code, 0);
  EXPECT_NE(unknown.err.find("train.learning_rate"), std::string::npos) << unknown.err;
  const CliRun missing = cli(dir, "--config \"" + (dir / "nope.json").string() + "\" --print-config");
  EXPECT_NE(missing.code, 0);
  EXPECT_NE(cli(dir, "build --manifest \"" + (dir / "nope.jsonl").string() + "\"").code, 0);
  EXPECT_NE(cli(dir, "--print-config build --manifest x --pairing sideways").code, 0);
}

TEST(CliTest, BuildScalingPairingAndIdempotence) {
  testing::TempDir dir;
  const Dataset d = make_dataset(dir);

  const fs::path acc = dir / "acc";
  const CliRun r = cli(dir, build_args(d, acc, "--k 5 --accumulation accumulated"));
  ASSERT_EQ(r.code, 0) << r.err;
  const DatasetManifest m = load_manifest(acc / "manifest.jsonl");
  EXPECT_EQ(m.entries.size(), 44u);
  std::size_t synth = 0;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    EXPECT_TRUE(fs::exists(m.frame_path(i))) << m.entries[i].frame;
    EXPECT_TRUE(fs::exists(m.label_path(i))) << m.entries[i].label;
    if (m.entries[i].source == Source::kSynthesized) {
      ++synth;
      EXPECT_EQ(m.entries[i].pairing, Pairing::kJoint);
    }
  }
  EXPECT_EQ(synth, 40u);
  EXPECT_TRUE(lines(testing::read_file(acc / "skipped.jsonl")).empty());

  // Same inputs into the same directory: identical bytes.
  const std::string first = testing::read_file(acc / "manifest.jsonl");
  const auto label_bytes = testing::read_bytes(m.label_path(1));
  ASSERT_EQ(cli(dir, build_args(d, acc, "--k 5 --accumulation accumulated")).code, 0);
  EXPECT_EQ(testing::read_file(acc / "manifest.jsonl"), first);
  EXPECT_EQ(testing::read_bytes(m.label_path(1)), label_bytes);

  const fs::path non = dir / "non";
  ASSERT_EQ(cli(dir, build_args(d, non, "--k 3")).code, 0);
  EXPECT_EQ(load_manifest(non / "manifest.jsonl").entries.size(), 12u);

  const fs::path lp = dir / "lp";
  ASSERT_EQ(cli(dir, build_args(d, lp, "--k 2 --pairing label_only")).code, 0);
  const DatasetManifest lpm = load_manifest(lp / "manifest.jsonl");
  for (const auto& e : lpm.entries) {
    if (e.source == Source::kSynthesized) EXPECT_EQ(e.pairing, Pairing::kLabelOnly);
  }

  const fs::path zero = dir / "zero";
  ASSERT_EQ(cli(dir, build_args(d, zero, "--k 0")).code, 0);
  const DatasetManifest in = load_manifest(d.gt_manifest);
  const DatasetManifest out = load_manifest(zero / "manifest.jsonl");
  ASSERT_EQ(out.entries.size(), in.entries.size());
  for (std::size_t i = 0; i < in.entries.size(); ++i) {
    EXPECT_EQ(fs::weakly_canonical(out.frame_path(i)), fs::weakly_canonical(in.frame_path(i)));
    EXPECT_EQ(fs::weakly_canonical(out.label_path(i)), fs::weakly_canonical(in.label_path(i)));
    EXPECT_EQ(out.entries[i].source, Source::kGroundTruth);
  }
}

TEST(CliTest, PropagateWritesChainAndManifest) {
  testing::TempDir dir;
  const Dataset d = make_dataset(dir);
  const DatasetManifest gt = load_manifest(d.gt_manifest);
  const fs::path out = dir / "prop";
  const CliRun r = cli(dir, "--config \"" + d.config.string() + "\" --out \"" + out.string() +
                             "\" propagate --sequences \"" + d.sequences.string() +
                             "\" --origin c1 --label \"" + gt.label_path(1).string() +
                             "\" --num-classes 4 --k 2");
  ASSERT_EQ(r.code, 0) << r.err;
  const DatasetManifest m = load_manifest(out / "manifest.jsonl");
  // Every step of the chain: the annotation plus 2 per side.
  EXPECT_EQ(m.entries.size(), 5u);
  EXPECT_TRUE(fs::exists(out / "propagate.config.json"));
}

TEST(CliTest, TrainEvalEntropyLossAndSamplePlan) {
  testing::TempDir dir;
  const Dataset d = make_dataset(dir);
  const std::string cfg = "--config \"" + d.config.string() + "\" ";
  const fs::path train = dir / "train";
  const CliRun t = cli(dir, cfg + "--out \"" + train.string() + "\" train-toy --manifest \"" +
                             d.gt_manifest.string() + "\" --val \"" + d.gt_manifest.string() +
                             "\" --num-classes 4 --epochs 3");
  ASSERT_EQ(t.code, 0) << t.err;
  ASSERT_TRUE(fs::exists(train / "weights.json"));
  EXPECT_EQ(lines(testing::read_file(train / "train_log.jsonl")).size(), 3u);

  const fs::path ev = dir / "eval";
  const CliRun e = cli(dir, "--out \"" + ev.string() + "\" eval --gt \"" + d.gt_manifest.string() +
                             "\" --model \"" + (train / "weights.json").string() + "\"");
  ASSERT_EQ(e.code, 0) << e.err;
  const auto records = lines(testing::read_file(ev / "eval.jsonl"));
  ASSERT_FALSE(records.empty());
  const Json summary = Json::parse(records.back());
  ASSERT_TRUE(summary.contains("miou"));
  EXPECT_GE(summary["miou"].get<double>(), 0.0);
  EXPECT_LE(summary["miou"].get<double>(), 1.0);

  // Perfect prediction scores exactly 1.
  const fs::path self = dir / "self";
  const CliRun s = cli(dir, "--out \"" + self.string() + "\" eval --gt \"" + d.gt_manifest.string() +
                             "\" --pred \"" + d.gt_manifest.string() + "\" --num-classes 4");
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(Json::parse(lines(testing::read_file(self / "eval.jsonl")).back())["miou"], 1.0);

  const DatasetManifest gt = load_manifest(d.gt_manifest);
  const fs::path ent = dir / "ent";
  const CliRun h = cli(dir, "--out \"" + ent.string() + "\" entropy --model \"" +
                             (train / "weights.json").string() + "\" --frame \"" +
                             gt.frame_path(0).string() + "\"");
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_TRUE(fs::exists(ent / "entropy.png"));

  // Uniform logits: entropy ln K everywhere, a saturated PNG.
  save_logits(Logits(8, 8, 4), dir / "flat.lgt");
  const fs::path flat = dir / "flat";
  ASSERT_EQ(cli(dir, "--out \"" + flat.string() + "\" entropy --logits \"" +
                         (dir / "flat.lgt").string() + "\"")
                .code,
            0);
  const Json er = Json::parse(lines(testing::read_file(flat / "entropy.jsonl")).front());
  EXPECT_NEAR(er["mean_entropy"].get<double>(), std::log(4.0), 1e-9);
  const LabelMap saturated = load_label(flat / "entropy.png", 255);
  for (std::uint8_t v : saturated.data()) EXPECT_EQ(v, 255);

  Rng rng(3);
  save_logits(testing::random_logits(rng, 8, 8, 4), dir / "z.lgt");
  save_label(testing::blocky_label(rng, 8, 8, 4), dir / "l.png");
  for (const char* kind : {"relaxed", "onehot"}) {
    const fs::path lo = dir / kind;
    const CliRun l = cli(dir, "--out \"" + lo.string() + "\" loss --logits \"" +
                               (dir / "z.lgt").string() + "\" --label \"" +
                               (dir / "l.png").string() + "\" --kind " + kind + " --map map.png");
    ASSERT_EQ(l.code, 0) << l.err;
    const Json rec = Json::parse(lines(testing::read_file(lo / "loss.jsonl")).front());
    EXPECT_GE(rec["loss"].get<double>(), 0.0);
    EXPECT_TRUE(fs::exists(lo / "map.png"));
  }

  const fs::path plan = dir / "plan";
  const std::string plan_args = "--seed 4 --out \"" + plan.string() +
                                "\" sample-plan --manifest \"" + d.gt_manifest.string() +
                                "\" --num-classes 4 --crop-size 16 --epoch-size 10";
  ASSERT_EQ(cli(dir, plan_args).code, 0);
  const std::string crops = testing::read_file(plan / "crops.jsonl");
  EXPECT_EQ(lines(crops).size(), 10u);
  ASSERT_EQ(cli(dir, plan_args).code, 0);
  EXPECT_EQ(testing::read_file(plan / "crops.jsonl"), crops);
}

}  // namespace
}  // namespace segprop
