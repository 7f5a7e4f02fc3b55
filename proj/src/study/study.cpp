#include "segprop/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "segprop/config.hpp"
#include "segprop/core/rng.hpp"

namespace segprop {

StudyConfig::StudyConfig() {
  scene.height = 64;
  scene.width = 64;
  scene.num_shapes = 4;
  scene.num_classes = 4;
  scene.min_radius = 6.0;
  scene.max_radius = 12.0;
  scene.min_speed = 0.5;
  scene.max_speed = 1.5;
  scene.min_accel = 0.2;
  scene.max_accel = 0.5;
  scene.texture_amplitude = 0.15;
  scene.texture_noise = 0.01;
  scene.palette_separation = 0.3;
  flow.pyramid_levels = 3;
  flow.window_radius = 3;
  flow.iterations_per_level = 3;
  train.lr0 = 5.0;
  train.epochs = 60;
  train.batches_per_epoch = 20;
  train.batch_pixels = 1024;
  train.features.coordinates = false;
}

void StudyConfig::validate() const {
  if (seeds.empty()) throw ParameterError("study: at least one seed is required");
  if (k_max < 0) throw ParameterError("study: k_max must be >= 0");
  if (train_scenes < 1 || test_scenes < 1 || test_frames < 1) {
    throw ParameterError("study: scene counts must be >= 1");
  }
  if (noise_radius < 0) throw ParameterError("study: noise_radius must be >= 0");
  SceneParams probe = scene;
  probe.num_frames = 2 * k_max + 1;
  probe.validate();
  flow.validate();
  train.validate();
}

const StudyCell& StudyReport::cell(Pairing pairing, MotionMode motion, int k,
                                   LossKind loss) const {
  for (const StudyCell& c : cells) {
    if (c.pairing == pairing && c.motion == motion && c.k == k && c.loss == loss) {
      return c;
    }
  }
  throw ParameterError("study report has no cell for k=" + std::to_string(k));
}

const char* to_string(NoiseStage stage) {
  return stage == NoiseStage::kAnnotation ? "annotation" : "training_labels";
}

NoiseStage parse_noise_stage(const std::string& text) {
  if (text == "annotation") return NoiseStage::kAnnotation;
  if (text == "training_labels") return NoiseStage::kTrainingLabels;
  throw ParameterError("unknown noise stage '" + text +
                       "' (expected annotation|training_labels)");
}

double median_of(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

constexpr Pairing kPairings[] = {Pairing::kLabelOnly, Pairing::kJoint};
constexpr MotionMode kModes[] = {MotionMode::kPrediction,
                                 MotionMode::kReconstruction};
constexpr LossKind kLosses[] = {LossKind::kOneHot, LossKind::kRelaxed};

std::uint64_t derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (tag << 32) ^ index);
}

struct Clip {
  Scene scene;
  LabelMap noisy_gt;    // the annotation used for training at step 0
  LabelMap propagate;   // the annotation propagated to other steps
};

// Cell key -> mIoU for one seed.
using SeedResults = std::map<std::tuple<int, int, int, int>, double>;
using SeedErrors = std::map<std::tuple<int, int, int, int>, std::string>;

std::tuple<int, int, int, int> key(Pairing p, MotionMode m, int k, LossKind l) {
  return {static_cast<int>(p), static_cast<int>(m), k, static_cast<int>(l)};
}

void run_seed(const StudyConfig& config, std::uint64_t seed,
              SeedResults& results, SeedErrors& errors) {
  const int gt_index = config.k_max;
  std::vector<Clip> clips;
  for (int i = 0; i < config.train_scenes; ++i) {
    SceneParams p = config.scene;
    p.seed = derive(seed, 1, i);
    p.palette_seed = seed;
    p.num_frames = 2 * config.k_max + 1;
    Clip clip;
    clip.scene = synth_scene(p);
    const LabelMap& gt = clip.scene.labels[gt_index];
    clip.noisy_gt = config.noise_radius > 0
                        ? boundary_noise(gt, config.noise_radius, derive(seed, 2, i))
                        : gt;
    clip.propagate =
        config.noise_stage == NoiseStage::kAnnotation ? clip.noisy_gt : gt;
    clips.push_back(std::move(clip));
  }
  LabelledImages test;
  for (int i = 0; i < config.test_scenes; ++i) {
    SceneParams p = config.scene;
    p.seed = derive(seed, 3, i);
    p.palette_seed = seed;
    p.num_frames = config.test_frames;
    Scene s = synth_scene(p);
    for (int t = 0; t < config.test_frames; ++t) {
      test.frames.push_back(std::move(s.frames[t]));
      test.labels.push_back(std::move(s.labels[t]));
    }
  }

  TrainConfig train = config.train;
  train.seed = derive(seed, 4, config.train.seed);

  auto train_and_score = [&](const LabelledImages& data, Pairing p, MotionMode m,
                             int k) {
    for (LossKind loss : kLosses) {
      const auto cell = key(p, m, k, loss);
      try {
        train.loss = loss;
        const TrainResult r = train_pixel_classifier(data, train);
        results[cell] = evaluate_miou(r.model, test);
      } catch (const std::exception& e) {
        errors[cell] = e.what();
      }
    }
  };

  LabelledImages base;
  for (const Clip& clip : clips) {
    base.frames.push_back(clip.scene.frames[gt_index]);
    base.labels.push_back(clip.noisy_gt);
  }
  // k = 0 trains on the annotated frames only, the same for every row.
  train_and_score(base, kPairings[0], kModes[0], 0);
  for (Pairing p : kPairings) {
    for (MotionMode m : kModes) {
      for (LossKind loss : kLosses) {
        const auto from = key(kPairings[0], kModes[0], 0, loss);
        const auto to = key(p, m, 0, loss);
        if (results.contains(from)) results[to] = results[from];
        if (errors.contains(from)) errors[to] = errors[from];
      }
    }
  }
  if (config.k_max == 0) return;

  for (MotionMode m : kModes) {
    // Motion depends on the mode only, so it is shared by both pairings.
    std::vector<std::map<int, MotionField>> cache(clips.size());
    for (Pairing p : kPairings) {
      std::vector<std::vector<PropagatedSample>> chains(clips.size());
      std::string chain_error;
      try {
        for (std::size_t i = 0; i < clips.size(); ++i) {
          PropagationConfig pc;
          pc.k = config.k_max;
          pc.direction = Direction::kBoth;
          pc.pairing = p;
          pc.motion_mode = m;
          pc.flow = config.flow;
          pc.label_policy = config.label_policy;
          const std::vector<Frame>& frames = clips[i].scene.frames;
          const StepMotion estimate = make_step_motion(frames, gt_index, pc);
          auto& memo = cache[i];
          const StepMotion cached = [&memo, estimate](int step) {
            auto it = memo.find(step);
            if (it == memo.end()) it = memo.emplace(step, estimate(step)).first;
            return it->second;
          };
          chains[i] = propagate_sequence(frames, clips[i].propagate, gt_index, pc,
                                         cached);
        }
      } catch (const std::exception& e) {
        chain_error = e.what();
      }
      for (int k = 1; k <= config.k_max; ++k) {
        if (!chain_error.empty()) {
          for (LossKind loss : kLosses) errors[key(p, m, k, loss)] = chain_error;
          continue;
        }
        PropagationConfig steps_of;
        steps_of.k = k;
        steps_of.accumulation = Accumulation::kNonAccumulated;
        const std::vector<int> steps = dataset_steps(steps_of);
        LabelledImages data;
        for (std::size_t i = 0; i < clips.size(); ++i) {
          for (int step : steps) {
            if (step == 0) {
              data.frames.push_back(clips[i].scene.frames[gt_index]);
              data.labels.push_back(clips[i].noisy_gt);
              continue;
            }
            for (const PropagatedSample& s : chains[i]) {
              if (s.step != step) continue;
              data.frames.push_back(s.frame);
              const bool noisy = config.noise_stage == NoiseStage::kTrainingLabels &&
                                 config.noise_radius > 0;
              data.labels.push_back(
                  noisy ? boundary_noise(s.label, config.noise_radius,
                                         derive(seed, 5, i * 64 + (step + 32)))
                        : s.label);
            }
          }
        }
        train_and_score(data, p, m, k);
      }
    }
  }
}

double sample_stddev(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

StudyReport run_study(const StudyConfig& config) {
  config.validate();
  const std::size_t n = config.seeds.size();
  std::vector<SeedResults> results(n);
  std::vector<SeedErrors> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n); ++s) {
    try {
      run_seed(config, config.seeds[s], results[s], errors[s]);
    } catch (const std::exception& e) {
      // Scene synthesis failed: every cell of this seed is a failure.
      for (Pairing p : kPairings)
        for (MotionMode m : kModes)
          for (int k = 0; k <= config.k_max; ++k)
            for (LossKind l : kLosses) errors[s][key(p, m, k, l)] = e.what();
    }
  }

  StudyReport report;
  report.config = config;
  for (Pairing p : kPairings) {
    for (MotionMode m : kModes) {
      for (int k = 0; k <= config.k_max; ++k) {
        for (LossKind l : kLosses) {
          StudyCell cell;
          cell.pairing = p;
          cell.motion = m;
          cell.k = k;
          cell.loss = l;
          std::vector<double> ok;
          for (std::size_t s = 0; s < n; ++s) {
            const auto it = results[s].find(key(p, m, k, l));
            if (it != results[s].end()) {
              cell.miou.push_back(it->second);
              ok.push_back(it->second);
            } else {
              cell.miou.push_back(std::nullopt);
              const auto e = errors[s].find(key(p, m, k, l));
              cell.errors.push_back(
                  "seed " + std::to_string(config.seeds[s]) + ": " +
                  (e != errors[s].end() ? e->second : "no result"));
            }
          }
          cell.runs = ok.size();
          if (!ok.empty()) {
            double sum = 0.0;
            for (double v : ok) sum += v;
            cell.mean = sum / static_cast<double>(ok.size());
            cell.stddev = sample_stddev(ok, cell.mean);
            cell.median = median_of(ok);
          } else {
            cell.mean = cell.stddev = cell.median = std::nan("");
          }
          report.cells.push_back(std::move(cell));
        }
      }
    }
  }
  return report;
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

const char* pairing_tag(Pairing p) { return p == Pairing::kJoint ? "JP" : "LP"; }
const char* motion_tag(MotionMode m) {
  return m == MotionMode::kPrediction ? "pred" : "recon";
}

// Per-seed paired differences (relaxed - one-hot) where both runs succeeded.
std::vector<double> paired_gap(const StudyReport& r, Pairing p, MotionMode m, int k) {
  const StudyCell& a = r.cell(p, m, k, LossKind::kRelaxed);
  const StudyCell& b = r.cell(p, m, k, LossKind::kOneHot);
  std::vector<double> out;
  for (std::size_t s = 0; s < a.miou.size(); ++s) {
    if (a.miou[s] && b.miou[s]) out.push_back(*a.miou[s] - *b.miou[s]);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string format_study_jsonl(const StudyReport& report) {
  std::ostringstream out;
  nlohmann::ordered_json head;
  head["record"] = "config";
  head["config"] = study_config_to_json(report.config);
  out << head.dump() << '\n';
  for (const StudyCell& c : report.cells) {
    nlohmann::ordered_json j;
    j["record"] = "cell";
    j["pairing"] = to_string(c.pairing);
    j["motion"] = to_string(c.motion);
    j["k"] = c.k;
    j["loss"] = to_string(c.loss);
    j["seeds"] = report.config.seeds;
    nlohmann::ordered_json values = nlohmann::ordered_json::array();
    for (const auto& v : c.miou) values.push_back(v ? number_or_null(*v) : nullptr);
    j["miou"] = values;
    j["runs"] = c.runs;
    j["mean"] = number_or_null(c.mean);
    j["std"] = number_or_null(c.stddev);
    j["median"] = number_or_null(c.median);
    j["errors"] = c.errors;
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string format_study_table(const StudyReport& report) {
  std::ostringstream out;
  const int k_max = report.config.k_max;
  out << "toy mIoU, mean +- sample std over " << report.config.seeds.size()
      << " seeds (median in brackets)\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-22s", "row");
  out << buf;
  for (int k = 0; k <= k_max; ++k) {
    std::snprintf(buf, sizeof(buf), " | %-24s", ("k=" + std::to_string(k)).c_str());
    out << buf;
  }
  out << '\n';
  for (Pairing p : kPairings) {
    for (MotionMode m : kModes) {
      for (LossKind l : kLosses) {
        const std::string row = std::string(pairing_tag(p)) + " " + motion_tag(m) +
                                " " + to_string(l);
        std::snprintf(buf, sizeof(buf), "%-22s", row.c_str());
        out << buf;
        for (int k = 0; k <= k_max; ++k) {
          const StudyCell& c = report.cell(p, m, k, l);
          std::string text = c.runs == 0
                                 ? std::string("failed")
                                 : fmt(c.mean) + " +- " + fmt(c.stddev) + " [" +
                                       fmt(c.median) + "]";
          if (!c.errors.empty() && c.runs > 0) text += "*";
          std::snprintf(buf, sizeof(buf), " | %-24s", text.c_str());
          out << buf;
        }
        out << '\n';
      }
    }
  }
  out << "\nchecks\n";
  for (const StudyCheck& check : study_checks(report)) {
    out << (check.passed ? "  PASS " : "  FAIL ") << check.name << ": "
        << check.detail << '\n';
  }
  bool any_failure = false;
  for (const StudyCell& c : report.cells) {
    for (const std::string& e : c.errors) {
      if (!any_failure) out << "\nfailed runs (* in the table)\n";
      any_failure = true;
      out << "  " << pairing_tag(c.pairing) << ' ' << motion_tag(c.motion)
          << " k=" << c.k << ' ' << to_string(c.loss) << ": " << e << '\n';
    }
  }
  return out.str();
}

std::vector<StudyCheck> study_checks(const StudyReport& report) {
  std::vector<StudyCheck> checks;
  const int k_max = report.config.k_max;
  auto compare = [&](const std::string& name, const StudyCell& hi,
                     const StudyCell& lo) {
    StudyCheck c;
    c.name = name;
    c.passed = hi.runs > 0 && lo.runs > 0 && hi.median >= lo.median;
    c.detail = fmt(hi.median) + " vs " + fmt(lo.median);
    checks.push_back(c);
  };
  for (int k = 1; k <= std::min(3, k_max); ++k) {
    compare("JP >= LP (pred, onehot, k=" + std::to_string(k) + ")",
            report.cell(Pairing::kJoint, MotionMode::kPrediction, k, LossKind::kOneHot),
            report.cell(Pairing::kLabelOnly, MotionMode::kPrediction, k,
                        LossKind::kOneHot));
  }
  for (int k = 1; k <= std::min(3, k_max); ++k) {
    compare("recon >= pred (JP, onehot, k=" + std::to_string(k) + ")",
            report.cell(Pairing::kJoint, MotionMode::kReconstruction, k,
                        LossKind::kOneHot),
            report.cell(Pairing::kJoint, MotionMode::kPrediction, k, LossKind::kOneHot));
  }
  for (int k = 0; k <= k_max; ++k) {
    compare("relaxed >= onehot (JP, recon, k=" + std::to_string(k) + ")",
            report.cell(Pairing::kJoint, MotionMode::kReconstruction, k,
                        LossKind::kRelaxed),
            report.cell(Pairing::kJoint, MotionMode::kReconstruction, k,
                        LossKind::kOneHot));
  }
  if (k_max >= 3) {
    const auto g1 = paired_gap(report, Pairing::kJoint, MotionMode::kReconstruction, 1);
    const auto g3 = paired_gap(report, Pairing::kJoint, MotionMode::kReconstruction, 3);
    StudyCheck c;
    c.name = "gap(k=3) >= gap(k=1) (JP, recon)";
    const double m1 = median_of(g1);
    const double m3 = median_of(g3);
    c.passed = !g1.empty() && !g3.empty() && m3 >= m1;
    c.detail = fmt(m3) + " vs " + fmt(m1);
    checks.push_back(c);
  }
  return checks;
}

}  // namespace segprop
