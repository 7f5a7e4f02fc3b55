// segprop command-line front end. One subcommand per invocation; every
// subcommand writes its outputs under --out and logs the resolved config.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segprop/config.hpp"
#include "segprop/core/image_io.hpp"
#include "segprop/core/logits_io.hpp"
#include "segprop/core/manifest.hpp"
#include "segprop/core/parallel.hpp"
#include "segprop/core/rng.hpp"
#include "segprop/eval.hpp"
#include "segprop/motion.hpp"
#include "segprop/propagate.hpp"
#include "segprop/relax.hpp"
#include "segprop/sampling.hpp"
#include "segprop/study.hpp"
#include "segprop/toytrain.hpp"
#include "segprop/warp.hpp"

namespace fs = std::filesystem;
using namespace segprop;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

// --- option plumbing -------------------------------------------------------

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "out";
  bool print_config = false;
};

struct PropagationFlags {
  std::optional<int> k;
  std::optional<std::string> direction;
  std::optional<std::string> pairing;
  std::optional<std::string> motion;
  std::optional<std::string> accumulation;
  std::optional<std::string> label_interp;

  void add(CLI::App* app) {
    app->add_option("--k", k, "propagation length per direction");
    app->add_option("--direction", direction, "forward | backward | both");
    app->add_option("--pairing", pairing, "joint | label_only");
    app->add_option("--motion", motion,
                    "reconstruction | prediction | external");
    app->add_option("--accumulation", accumulation,
                    "accumulated | non_accumulated");
    app->add_option("--label-interp", label_interp,
                    "onehot_bilinear | nearest");
  }

  void apply(PropagationConfig& c) const {
    if (k) c.k = *k;
    if (direction) c.direction = parse_direction(*direction);
    if (pairing) c.pairing = parse_pairing(*pairing);
    if (motion) c.motion_mode = parse_motion_mode(*motion);
    if (accumulation) c.accumulation = parse_accumulation(*accumulation);
    if (label_interp) c.label_policy.mode = parse_label_warp_mode(*label_interp);
  }
};

struct Context {
  RunConfig config;
  fs::path out;
};

// Defaults, then the config file, then command-line overrides. A global seed
// (flag or top-level "seed" key) also drives the scene and training seeds.
RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig config;
  bool seed_given = false;
  if (!g.config_path.empty()) {
    Json j;
    try {
      j = Json::parse(read_text(g.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("config " + g.config_path + ": " + e.what());
    }
    from_json(j, config);
    seed_given = j.is_object() && j.contains("seed");
  }
  if (g.seed) {
    config.seed = *g.seed;
    seed_given = true;
    const std::size_t n = config.study.seeds.size();
    config.study.seeds.clear();
    for (std::size_t i = 0; i < n; ++i) config.study.seeds.push_back(*g.seed + i);
  }
  if (seed_given) {
    config.scene.seed = config.seed;
    config.train.seed = config.seed;
  }
  if (g.threads) config.threads = *g.threads;
  return config;
}

void log_config(const Context& ctx, const std::string& command) {
  Json j;
  j["command"] = command;
  j["config"] = to_json(ctx.config);
  std::cerr << "[segprop] resolved config: " << j.dump() << '\n';
  fs::create_directories(ctx.out);
  write_text(ctx.out / (command + ".config.json"), j.dump(2) + "\n");
}

void write_jsonl(const fs::path& path, const std::vector<Json>& records) {
  std::string text;
  for (const Json& r : records) text += r.dump() + "\n";
  write_text(path, text);
}

LabelMap argmax_labels(const ProbMap& probs) {
  LabelMap out(probs.height(), probs.width(), probs.num_classes(), 0);
  const int k = probs.num_classes();
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    const double* row = probs.pixel(p);
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out.data()[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

PixelClassifier load_classifier(const fs::path& path) {
  return classifier_from_json(read_text(path));
}

std::string iou_table(const MiouResult& result) {
  std::ostringstream os;
  os << "class |    IoU |         TP |         FP |         FN\n";
  for (const ClassIou& c : result.per_class) {
    char line[128];
    std::snprintf(line, sizeof line, "%5d | %6.4f | %10llu | %10llu | %10llu\n",
                  c.class_id, c.iou,
                  static_cast<unsigned long long>(c.true_positive),
                  static_cast<unsigned long long>(c.false_positive),
                  static_cast<unsigned long long>(c.false_negative));
    os << line;
  }
  os << "mIoU: " << (result.mean ? fmt("%.4f", *result.mean) : "n/a") << " over "
     << result.per_class.size() << " classes\n";
  return os.str();
}

// --- subcommands -----------------------------------------------------------

struct FlowArgs {
  std::string a, b, reference, output = "motion.flo";
};

void cmd_flow(const Context& ctx, const FlowArgs& args) {
  const Frame a = load_frame(args.a);
  const Frame b = load_frame(args.b);
  const MotionField field = estimate_motion(a, b, ctx.config.flow);
  save_motion(field, ctx.out / args.output);

  Json record;
  record["type"] = "flow";
  record["output"] = args.output;
  record["height"] = field.height();
  record["width"] = field.width();
  double sum = 0.0;
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      sum += std::hypot(field.u(y, x), field.v(y, x));
    }
  }
  record["mean_magnitude"] =
      sum / std::max<double>(1.0, static_cast<double>(field.uv().size() / 2));
  std::cout << "motion " << (ctx.out / args.output).string() << "  "
            << field.width() << "x" << field.height() << "  mean |d| "
            << fmt("%.4f", record["mean_magnitude"].get<double>()) << " px\n";
  if (!args.reference.empty()) {
    const EndpointError epe = endpoint_error(field, load_motion(args.reference));
    record["epe_mean"] = epe.mean;
    record["epe_median"] = epe.median;
    record["epe_p95"] = epe.p95;
    record["epe_max"] = epe.max;
    std::cout << "EPE   mean " << fmt("%.4f", epe.mean) << "  median "
              << fmt("%.4f", epe.median) << "  p95 " << fmt("%.4f", epe.p95)
              << "  max " << fmt("%.4f", epe.max) << "\n";
  }
  write_jsonl(ctx.out / "flow.jsonl", {record});
}

struct PropagateArgs {
  std::string sequences, label, origin;
  std::optional<int> num_classes;
};

std::string step_stem(const std::string& origin, int step) {
  char tag[16];
  std::snprintf(tag, sizeof tag, "%+03d", step);
  return origin + "_s" + tag;
}

void cmd_propagate(const Context& ctx, const PropagateArgs& args) {
  const PropagationConfig& config = ctx.config.propagation;
  const int num_classes = args.num_classes.value_or(ctx.config.num_classes);
  const std::vector<FrameSequence> sequences = load_sequences(args.sequences);
  const FrameSequence* seq = nullptr;
  for (const auto& s : sequences) {
    if (args.origin.empty() || s.origin == args.origin) {
      seq = &s;
      break;
    }
  }
  if (seq == nullptr) {
    throw ParameterError("no sequence with origin '" + args.origin + "' in " +
                         args.sequences);
  }
  check_sequence_length(seq->frames.size(), seq->gt_index, config);
  std::vector<Frame> frames;
  for (const auto& p : seq->frames) frames.push_back(load_frame(p));
  const LabelMap label = load_label(args.label, num_classes);
  const StepMotion motion = make_step_motion(frames, seq->gt_index, config,
                                             seq->motion_forward,
                                             seq->motion_backward);
  const std::vector<PropagatedSample> samples =
      propagate_sequence(frames, label, seq->gt_index, config, motion);

  DatasetManifest manifest;
  manifest.root = ctx.out;
  ManifestEntry gt;
  gt.frame = fs::absolute(seq->frames[seq->gt_index]).lexically_normal().string();
  gt.label = fs::absolute(args.label).lexically_normal().string();
  gt.origin = seq->origin;
  manifest.entries.push_back(gt);
  for (const PropagatedSample& s : samples) {
    const std::string stem = step_stem(seq->origin, s.step);
    ManifestEntry e;
    e.label = stem + "_label.png";
    save_label(s.label, ctx.out / e.label);
    if (config.pairing == Pairing::kJoint) {
      e.frame = stem + "_frame.png";
      save_frame(s.frame, ctx.out / e.frame);
    } else {
      e.frame = fs::absolute(seq->frames[seq->gt_index + s.step])
                    .lexically_normal()
                    .string();
    }
    e.source = Source::kSynthesized;
    e.step = s.step;
    e.origin = seq->origin;
    e.pairing = config.pairing;
    manifest.entries.push_back(std::move(e));
  }
  save_manifest(manifest, ctx.out / "manifest.jsonl");
  std::cout << "propagated '" << seq->origin << "' k=" << config.k << " ("
            << to_string(config.pairing) << ", "
            << to_string(config.motion_mode) << "): " << samples.size()
            << " samples, manifest " << (ctx.out / "manifest.jsonl").string()
            << "\n";
}

struct BuildArgs {
  std::string manifest, sequences;
  std::optional<int> num_classes;
};

void cmd_build(const Context& ctx, const BuildArgs& args) {
  const PropagationConfig& config = ctx.config.propagation;
  const int num_classes = args.num_classes.value_or(ctx.config.num_classes);
  const DatasetManifest gt = load_manifest(args.manifest);
  const std::vector<FrameSequence> sequences =
      args.sequences.empty() ? std::vector<FrameSequence>{}
                             : load_sequences(args.sequences);
  const BuildResult result = build_augmented_dataset(
      gt, sequences, config, num_classes, ctx.out / "synth");
  save_manifest(rebase_manifest(result.manifest, ctx.out),
                ctx.out / "manifest.jsonl");
  std::vector<Json> skipped;
  for (const SkippedEntry& s : result.skipped) {
    Json j;
    j["entry"] = s.entry_index;
    j["origin"] = s.origin;
    j["reason"] = s.reason;
    skipped.push_back(j);
    std::cerr << "[segprop] skipped entry " << s.entry_index << " ("
              << s.origin << "): " << s.reason << '\n';
  }
  write_jsonl(ctx.out / "skipped.jsonl", skipped);
  std::size_t synth = 0;
  for (const auto& e : result.manifest.entries) {
    if (e.source == Source::kSynthesized) ++synth;
  }
  std::cout << "input entries   " << gt.entries.size() << "\n"
            << "skipped         " << result.skipped.size() << "\n"
            << "output entries  " << result.manifest.entries.size() << " ("
            << synth << " synthesized)\n"
            << "manifest        " << (ctx.out / "manifest.jsonl").string()
            << "\n";
}

struct LossArgs {
  std::string logits, label, kind = "relaxed", map;
  std::optional<int> window;
};

void cmd_loss(const Context& ctx, const LossArgs& args) {
  const Logits logits = load_logits(args.logits);
  const LabelMap label = load_label(args.label, logits.num_classes());
  const LossKind kind = parse_loss_kind(args.kind);
  const int window = args.window.value_or(ctx.config.train.relax_window);
  const LossResult result =
      kind == LossKind::kRelaxed
          ? relaxed_loss(logits, boundary_neighbor_sets(label, window))
          : cross_entropy_loss(logits, label);
  Json record;
  record["type"] = "loss";
  record["kind"] = to_string(kind);
  if (kind == LossKind::kRelaxed) record["window"] = window;
  record["loss"] = result.mean;
  record["valid_pixels"] = result.valid_pixels;
  write_jsonl(ctx.out / "loss.jsonl", {record});
  std::cout << to_string(kind) << " loss " << fmt("%.6f", result.mean) << " over "
            << result.valid_pixels << " valid pixels\n";
  if (!args.map.empty()) {
    const double peak =
        result.per_pixel.empty()
            ? 0.0
            : *std::max_element(result.per_pixel.begin(), result.per_pixel.end());
    save_gray_png(result.per_pixel, logits.size(), peak > 0.0 ? peak : 1.0,
                  ctx.out / args.map);
    std::cout << "loss map " << (ctx.out / args.map).string()
              << " (white = " << fmt("%.4f", peak) << ")\n";
  }
}

struct SamplePlanArgs {
  std::string manifest;
  std::optional<int> num_classes, crop_size;
  std::optional<std::size_t> epoch_size;
  std::optional<double> uniform_fraction;
  std::optional<std::uint64_t> epoch;
  std::vector<int> classes;
};

void cmd_sample_plan(Context& ctx, const SamplePlanArgs& args) {
  SamplingOptions& o = ctx.config.sampling;
  if (args.crop_size) o.crop_size = *args.crop_size;
  if (args.epoch_size) o.epoch_size = *args.epoch_size;
  if (args.uniform_fraction) o.uniform_fraction = *args.uniform_fraction;
  if (args.epoch) o.epoch = *args.epoch;
  if (!args.classes.empty()) {
    o.classes = std::set<int>(args.classes.begin(), args.classes.end());
  }
  log_config(ctx, "sample-plan");
  const int num_classes = args.num_classes.value_or(ctx.config.num_classes);
  const DatasetManifest manifest = load_manifest(args.manifest);
  const CentroidIndex index = build_centroid_index(manifest, num_classes, o.classes);
  CropPlanConfig plan;
  plan.crop_size = o.crop_size;
  plan.epoch_size = o.epoch_size;
  plan.uniform_fraction = o.uniform_fraction;
  plan.seed = ctx.config.seed;
  plan.epoch = o.epoch;
  const std::vector<CropSpec> crops = sample_crops(index, plan);
  std::string text;
  std::size_t centroid = 0;
  for (const CropSpec& c : crops) {
    text += format_crop_line(c) + "\n";
    if (c.origin == CropOrigin::kCentroid) ++centroid;
  }
  write_text(ctx.out / "crops.jsonl", text);
  std::cout << "crops " << crops.size() << " (" << centroid << " centroid, "
            << crops.size() - centroid << " random) over "
            << index.classes().size() << " indexed classes, "
            << index.total() << " centroids\n";
}

struct EvalArgs {
  std::string pred, gt, model;
  std::optional<int> num_classes;
  bool save_pred = false;
};

void cmd_eval(const Context& ctx, const EvalArgs& args) {
  const DatasetManifest gt = load_manifest(args.gt);
  ConfusionMatrix matrix;
  if (!args.model.empty()) {
    const PixelClassifier model = load_classifier(args.model);
    const SegmentationModel fn = [&](const Frame& f) { return model.logits(f); };
    matrix = ConfusionMatrix(model.num_classes);
    DatasetManifest preds;
    preds.root = ctx.out;
    if (args.save_pred) fs::create_directories(ctx.out / "pred");
    for (std::size_t i = 0; i < gt.entries.size(); ++i) {
      const Frame frame = load_frame(gt.frame_path(i));
      const LabelMap truth = load_label(gt.label_path(i), model.num_classes);
      const LabelMap pred = argmax_labels(multiscale_flip_inference(
          fn, frame, ctx.config.eval.scales, ctx.config.eval.flip));
      matrix.accumulate(pred, truth);
      if (args.save_pred) {
        char name[32];
        std::snprintf(name, sizeof name, "pred/%05zu.png", i);
        save_label(pred, ctx.out / name);
        ManifestEntry e = gt.entries[i];
        e.frame = fs::absolute(gt.frame_path(i)).lexically_normal().string();
        e.label = name;
        preds.entries.push_back(std::move(e));
      }
    }
    if (args.save_pred) save_manifest(preds, ctx.out / "pred_manifest.jsonl");
  } else {
    if (args.pred.empty()) throw ParameterError("eval needs --pred or --model");
    const int k = args.num_classes.value_or(ctx.config.num_classes);
    const DatasetManifest pred = load_manifest(args.pred);
    if (pred.entries.size() != gt.entries.size()) {
      throw ValidationError("pred manifest has " +
                            std::to_string(pred.entries.size()) +
                            " entries, gt manifest has " +
                            std::to_string(gt.entries.size()));
    }
    matrix = ConfusionMatrix(k);
    for (std::size_t i = 0; i < gt.entries.size(); ++i) {
      matrix.accumulate(load_label(pred.label_path(i), k),
                        load_label(gt.label_path(i), k));
    }
  }
  const MiouResult result = miou(matrix);
  std::vector<Json> records;
  for (const ClassIou& c : result.per_class) {
    Json j;
    j["type"] = "class";
    j["class"] = c.class_id;
    j["iou"] = c.iou;
    j["tp"] = c.true_positive;
    j["fp"] = c.false_positive;
    j["fn"] = c.false_negative;
    records.push_back(j);
  }
  Json summary;
  summary["type"] = "summary";
  summary["miou"] = result.mean ? Json(*result.mean) : Json(nullptr);
  summary["classes"] = result.per_class.size();
  summary["images"] = gt.entries.size();
  summary["pixels"] = matrix.total();
  records.push_back(summary);
  write_jsonl(ctx.out / "eval.jsonl", records);
  std::cout << iou_table(result);
}

struct EntropyArgs {
  std::string logits, model, frame, output = "entropy.png";
};

void cmd_entropy(const Context& ctx, const EntropyArgs& args) {
  ProbMap probs;
  if (!args.logits.empty()) {
    probs = softmax(load_logits(args.logits));
  } else if (!args.model.empty() && !args.frame.empty()) {
    const PixelClassifier model = load_classifier(args.model);
    const SegmentationModel fn = [&](const Frame& f) { return model.logits(f); };
    probs = multiscale_flip_inference(fn, load_frame(args.frame),
                                      ctx.config.eval.scales, ctx.config.eval.flip);
  } else {
    throw ParameterError("entropy needs --logits or --model with --frame");
  }
  const std::vector<double> h = entropy_map(probs);
  const double scale = std::log(static_cast<double>(probs.num_classes()));
  save_gray_png(h, probs.size(), scale > 0.0 ? scale : 1.0, ctx.out / args.output);
  double sum = 0.0;
  for (double v : h) sum += v;
  Json record;
  record["type"] = "entropy";
  record["output"] = args.output;
  record["num_classes"] = probs.num_classes();
  record["mean_entropy"] = h.empty() ? 0.0 : sum / static_cast<double>(h.size());
  record["normalizer"] = scale;
  write_jsonl(ctx.out / "entropy.jsonl", {record});
  std::cout << "entropy map " << (ctx.out / args.output).string() << "  mean "
            << fmt("%.4f", record["mean_entropy"].get<double>()) << " nats (white = ln "
            << probs.num_classes() << ")\n";
}

struct SynthArgs {
  std::optional<int> frames, gt_index, noise_radius;
  std::string prefix = "scene";
};

void cmd_synth(Context& ctx, const SynthArgs& args) {
  SceneParams& p = ctx.config.scene;
  if (args.frames) p.num_frames = *args.frames;
  if (args.noise_radius) ctx.config.noise_radius = *args.noise_radius;
  log_config(ctx, "synth");
  Scene scene = synth_scene(p);
  const int gt_index = args.gt_index.value_or(p.num_frames / 2);
  if (gt_index < 0 || gt_index >= p.num_frames) {
    throw ParameterError("--gt-index out of range");
  }
  if (ctx.config.noise_radius > 0) {
    for (std::size_t t = 0; t < scene.labels.size(); ++t) {
      scene.labels[t] = boundary_noise(scene.labels[t], ctx.config.noise_radius,
                                       splitmix64(p.seed ^ splitmix64(t + 1)));
    }
  }
  const SceneFiles files = write_scene(scene, ctx.out, args.prefix, gt_index);
  std::cout << "scene " << p.width << "x" << p.height << ", " << p.num_frames
            << " frames, " << scene.shapes.size() << " shapes, "
            << p.num_classes << " classes\n"
            << "manifest     " << files.manifest.string() << "\n"
            << "gt manifest  " << files.gt_manifest.string() << "\n"
            << "sequences    " << files.sequences.string() << "\n";
}

struct TrainArgs {
  std::string manifest, val;
  std::optional<int> num_classes, epochs;
  std::optional<std::string> loss;
};

void cmd_train_toy(Context& ctx, const TrainArgs& args) {
  TrainConfig& t = ctx.config.train;
  if (args.loss) t.loss = parse_loss_kind(*args.loss);
  if (args.epochs) t.epochs = *args.epochs;
  if (args.num_classes) ctx.config.num_classes = *args.num_classes;
  log_config(ctx, "train-toy");
  const int k = ctx.config.num_classes;
  std::optional<LabelledImages> val;
  if (!args.val.empty()) {
    const DatasetManifest m = load_manifest(args.val);
    val.emplace();
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      val->frames.push_back(load_frame(m.frame_path(i)));
      val->labels.push_back(load_label(m.label_path(i), k));
    }
  }
  const TrainResult result = train_pixel_classifier(
      load_manifest(args.manifest), k, t, val ? &*val : nullptr);
  write_text(ctx.out / "weights.json", classifier_to_json(result.model) + "\n");
  std::string log;
  std::cout << "epoch |       lr |     loss | val mIoU\n";
  for (const EpochLog& e : result.log) {
    log += format_epoch_line(e) + "\n";
    char line[96];
    std::snprintf(line, sizeof line, "%5d | %8.5f | %8.5f | ", e.epoch, e.lr,
                  e.loss);
    std::cout << line << (e.val_miou ? fmt("%.4f", *e.val_miou) : "-") << "\n";
  }
  write_text(ctx.out / "train_log.jsonl", log);
  std::cout << "weights " << (ctx.out / "weights.json").string() << "\n";
}

void cmd_study(const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const StudyReport report = run_study(ctx.config.study);
  const std::string table = format_study_table(report);
  write_text(ctx.out / "study.jsonl", format_study_jsonl(report));
  write_text(ctx.out / "study_table.txt", table);
  std::cout << table;
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "[segprop] study finished in " << fmt("%.1f", seconds) << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segprop: video propagation, boundary relaxation and evaluation tools"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON config file (unknown keys rejected)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global seed (default 0)");
  app.add_option("--threads", g.threads, "worker threads (0 = OpenMP default)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_flag("--print-config", g.print_config,
               "print the resolved config as JSON and exit");

  FlowArgs flow;
  auto* flow_cmd = app.add_subcommand("flow", "dense motion between two frames");
  flow_cmd->add_option("frame_a", flow.a, "first frame (PNG)")->required();
  flow_cmd->add_option("frame_b", flow.b, "second frame (PNG)")->required();
  flow_cmd->add_option("--reference", flow.reference, "ground-truth motion file for an EPE report");
  flow_cmd->add_option("--output", flow.output, "motion file name under --out")
      ->capture_default_str();

  PropagateArgs prop;
  PropagationFlags prop_flags;
  auto* prop_cmd = app.add_subcommand("propagate", "propagate one labelled frame along its clip");
  prop_cmd->add_option("--sequences", prop.sequences, "sequence index (JSONL)")->required();
  prop_cmd->add_option("--label", prop.label, "label PNG of the ground-truth frame")->required();
  prop_cmd->add_option("--origin", prop.origin, "sequence origin id (default: first)");
  prop_cmd->add_option("--num-classes", prop.num_classes, "number of classes");
  prop_flags.add(prop_cmd);

  BuildArgs build;
  PropagationFlags build_flags;
  auto* build_cmd = app.add_subcommand("build", "build an augmented dataset manifest");
  build_cmd->add_option("--manifest", build.manifest, "ground-truth manifest (JSONL)")->required();
  build_cmd->add_option("--sequences", build.sequences, "sequence index (JSONL)");
  build_cmd->add_option("--num-classes", build.num_classes, "number of classes");
  build_flags.add(build_cmd);

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("loss", "evaluate the one-hot or relaxed loss");
  loss_cmd->add_option("--logits", loss.logits, "logits file (LGT1)")->required();
  loss_cmd->add_option("--label", loss.label, "label PNG")->required();
  loss_cmd->add_option("--kind", loss.kind, "relaxed | onehot")->capture_default_str();
  loss_cmd->add_option("--window", loss.window, "relaxation window (odd)");
  loss_cmd->add_option("--map", loss.map, "write a normalized per-pixel loss PNG under --out");

  SamplePlanArgs plan;
  auto* plan_cmd = app.add_subcommand("sample-plan", "class-uniform crop plan for one epoch");
  plan_cmd->add_option("--manifest", plan.manifest, "dataset manifest (JSONL)")->required();
  plan_cmd->add_option("--num-classes", plan.num_classes, "number of classes");
  plan_cmd->add_option("--crop-size", plan.crop_size, "crop side in pixels");
  plan_cmd->add_option("--epoch-size", plan.epoch_size, "crops per epoch");
  plan_cmd->add_option("--uniform-fraction", plan.uniform_fraction, "share of centroid crops");
  plan_cmd->add_option("--epoch", plan.epoch, "epoch index (random stream)");
  plan_cmd->add_option("--classes", plan.classes, "restrict centroid classes")->delimiter(',');

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "per-class IoU and mIoU");
  eval_cmd->add_option("--gt", ev.gt, "ground-truth manifest")->required();
  eval_cmd->add_option("--pred", ev.pred, "prediction manifest (entries paired by position)");
  eval_cmd->add_option("--model", ev.model, "toy weights; predicts the gt frames instead of --pred");
  eval_cmd->add_option("--num-classes", ev.num_classes, "number of classes (with --pred)");
  eval_cmd->add_flag("--save-pred", ev.save_pred, "with --model, also write prediction PNGs");

  EntropyArgs ent;
  auto* ent_cmd = app.add_subcommand("entropy", "per-pixel prediction entropy map");
  ent_cmd->add_option("--logits", ent.logits, "logits file (LGT1)");
  ent_cmd->add_option("--model", ent.model, "toy weights");
  ent_cmd->add_option("--frame", ent.frame, "frame PNG for --model");
  ent_cmd->add_option("--output", ent.output, "PNG name under --out")->capture_default_str();

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "write a synthetic moving scene as a dataset");
  syn_cmd->add_option("--frames", syn.frames, "number of frames");
  syn_cmd->add_option("--gt-index", syn.gt_index, "labelled frame (default: middle)");
  syn_cmd->add_option("--noise-radius", syn.noise_radius, "boundary noise on written labels");
  syn_cmd->add_option("--prefix", syn.prefix, "file prefix / origin id")->capture_default_str();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train-toy", "train the per-pixel toy classifier");
  tr_cmd->add_option("--manifest", tr.manifest, "training manifest")->required();
  tr_cmd->add_option("--val", tr.val, "validation manifest");
  tr_cmd->add_option("--num-classes", tr.num_classes, "number of classes");
  tr_cmd->add_option("--epochs", tr.epochs, "training epochs");
  tr_cmd->add_option("--loss", tr.loss, "onehot | relaxed");

  auto* study_cmd = app.add_subcommand("study", "LP/JP x prediction/reconstruction x k x loss grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    Context ctx;
    ctx.config = resolve_config(g);
    prop_flags.apply(ctx.config.propagation);
    build_flags.apply(ctx.config.propagation);
    ctx.config.propagation.flow = ctx.config.flow;
    if (g.print_config) {
      std::cout << to_json(ctx.config).dump(2) << "\n";
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 1;
    }
    ctx.out = g.out;
    fs::create_directories(ctx.out);
    set_num_threads(ctx.config.threads);

    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    // Commands that fold their own flags into the config log it themselves.
    const bool self_logged = name == "sample-plan" || name == "synth" || name == "train-toy";
    if (!self_logged) log_config(ctx, name);

    if (cmd == flow_cmd) cmd_flow(ctx, flow);
    else if (cmd == prop_cmd) cmd_propagate(ctx, prop);
    else if (cmd == build_cmd) cmd_build(ctx, build);
    else if (cmd == loss_cmd) cmd_loss(ctx, loss);
    else if (cmd == plan_cmd) cmd_sample_plan(ctx, plan);
    else if (cmd == eval_cmd) cmd_eval(ctx, ev);
    else if (cmd == ent_cmd) cmd_entropy(ctx, ent);
    else if (cmd == syn_cmd) cmd_synth(ctx, syn);
    else if (cmd == tr_cmd) cmd_train_toy(ctx, tr);
    else if (cmd == study_cmd) cmd_study(ctx);
  } catch (const std::exception& e) {
    std::cerr << "segprop: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
