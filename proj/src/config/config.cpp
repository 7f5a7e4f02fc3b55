#include "segprop/config.hpp"

#include <fstream>
#include <sstream>

namespace segprop {

namespace {

// Reads keys of one JSON object, remembering which were consumed so that
// anything left over can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ParameterError(path_ + ": expected a JSON object");
  }

  template <typename T>
  void field(const char* key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ParameterError(where(key) + ": " + e.what());
    }
  }

  template <typename T, typename Parse>
  void enumeration(const char* key, T& out, Parse parse) {
    std::string text;
    field(key, text);
    if (!j_.contains(key)) return;
    try {
      out = parse(text);
    } catch (const Error& e) {
      throw ParameterError(where(key) + ": " + e.what());
    }
  }

  template <typename Fn>
  void object(const char* key, Fn fn) {
    known_.insert(key);
    if (j_.contains(key)) fn(j_.at(key), where(key));
  }

  void done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.contains(key)) {
        throw ParameterError("unknown config key '" + where(key) + "'");
      }
    }
  }

 private:
  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> known_;
};

}  // namespace

Json to_json(const FlowParams& p) {
  Json j;
  j["pyramid_levels"] = p.pyramid_levels;
  j["window_radius"] = p.window_radius;
  j["iterations_per_level"] = p.iterations_per_level;
  j["min_eigen_threshold"] = p.min_eigen_threshold;
  return j;
}

void from_json(const Json& j, FlowParams& out, const std::string& path) {
  ObjectReader r(j, path);
  r.field("pyramid_levels", out.pyramid_levels);
  r.field("window_radius", out.window_radius);
  r.field("iterations_per_level", out.iterations_per_level);
  r.field("min_eigen_threshold", out.min_eigen_threshold);
  r.done();
}

Json to_json(const SceneParams& p) {
  Json j;
  j["height"] = p.height;
  j["width"] = p.width;
  j["channels"] = p.channels;
  j["num_frames"] = p.num_frames;
  j["num_shapes"] = p.num_shapes;
  j["num_classes"] = p.num_classes;
  j["min_radius"] = p.min_radius;
  j["max_radius"] = p.max_radius;
  j["min_speed"] = p.min_speed;
  j["max_speed"] = p.max_speed;
  j["min_accel"] = p.min_accel;
  j["max_accel"] = p.max_accel;
  j["background_u"] = p.background_u;
  j["background_v"] = p.background_v;
  j["texture_amplitude"] = p.texture_amplitude;
  j["texture_noise"] = p.texture_noise;
  j["palette_separation"] = p.palette_separation;
  j["seed"] = p.seed;
  j["palette_seed"] = p.palette_seed;
  return j;
}

void from_json(const Json& j, SceneParams& out, const std::string& path) {
  ObjectReader r(j, path);
  r.field("height", out.height);
  r.field("width", out.width);
  r.field("channels", out.channels);
  r.field("num_frames", out.num_frames);
  r.field("num_shapes", out.num_shapes);
  r.field("num_classes", out.num_classes);
  r.field("min_radius", out.min_radius);
  r.field("max_radius", out.max_radius);
  r.field("min_speed", out.min_speed);
  r.field("max_speed", out.max_speed);
  r.field("min_accel", out.min_accel);
  r.field("max_accel", out.max_accel);
  r.field("background_u", out.background_u);
  r.field("background_v", out.background_v);
  r.field("texture_amplitude", out.texture_amplitude);
  r.field("texture_noise", out.texture_noise);
  r.field("palette_separation", out.palette_separation);
  r.field("seed", out.seed);
  r.field("palette_seed", out.palette_seed);
  r.done();
}

Json to_json(const TrainConfig& c) {
  Json j;
  j["lr0"] = c.lr0;
  j["power"] = c.power;
  j["epochs"] = c.epochs;
  j["batches_per_epoch"] = c.batches_per_epoch;
  j["batch_pixels"] = c.batch_pixels;
  j["loss"] = to_string(c.loss);
  j["relax_window"] = c.relax_window;
  j["features"] = {{"coordinates", c.features.coordinates},
                   {"window_stats", c.features.window_stats}};
  j["seed"] = c.seed;
  return j;
}

void from_json(const Json& j, TrainConfig& out, const std::string& path) {
  ObjectReader r(j, path);
  r.field("lr0", out.lr0);
  r.field("power", out.power);
  r.field("epochs", out.epochs);
  r.field("batches_per_epoch", out.batches_per_epoch);
  r.field("batch_pixels", out.batch_pixels);
  r.enumeration("loss", out.loss, parse_loss_kind);
  r.field("relax_window", out.relax_window);
  r.object("features", [&](const Json& v, const std::string& p) {
    ObjectReader f(v, p);
    f.field("coordinates", out.features.coordinates);
    f.field("window_stats", out.features.window_stats);
    f.done();
  });
  r.field("seed", out.seed);
  r.done();
}

Json to_json(const PropagationConfig& c) {
  Json j;
  j["k"] = c.k;
  j["direction"] = to_string(c.direction);
  j["pairing"] = to_string(c.pairing);
  j["motion"] = to_string(c.motion_mode);
  j["accumulation"] = to_string(c.accumulation);
  j["label_interpolation"] = to_string(c.label_policy.mode);
  return j;
}

void from_json(const Json& j, PropagationConfig& out, const std::string& path) {
  ObjectReader r(j, path);
  r.field("k", out.k);
  r.enumeration("direction", out.direction, parse_direction);
  r.enumeration("pairing", out.pairing, parse_pairing);
  r.enumeration("motion", out.motion_mode, parse_motion_mode);
  r.enumeration("accumulation", out.accumulation, parse_accumulation);
  r.enumeration("label_interpolation", out.label_policy.mode,
                parse_label_warp_mode);
  r.done();
}

Json to_json(const SamplingOptions& o) {
  Json j;
  j["crop_size"] = o.crop_size;
  j["epoch_size"] = o.epoch_size;
  j["uniform_fraction"] = o.uniform_fraction;
  j["epoch"] = o.epoch;
  j["classes"] = o.classes ? Json(*o.classes) : Json(nullptr);
  return j;
}

void from_json(const Json& j, SamplingOptions& out, const std::string& path) {
  ObjectReader r(j, path);
  r.field("crop_size", out.crop_size);
  r.field("epoch_size", out.epoch_size);
  r.field("uniform_fraction", out.uniform_fraction);
  r.field("epoch", out.epoch);
  r.object("classes", [&](const Json& v, const std::string& where) {
    if (v.is_null()) {
      out.classes.reset();
      return;
    }
    try {
      out.classes = v.get<std::set<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParameterError(where + ": " + e.what());
    }
  });
  r.done();
}

Json to_json(const EvalOptions& o) {
  Json j;
  j["scales"] = o.scales;
  j["flip"] = o.flip;
  return j;
}

void from_json(const Json& j, EvalOptions& out, const std::string& path) {
  ObjectReader r(j, path);
  r.field("scales", out.scales);
  r.field("flip", out.flip);
  r.done();
}

Json study_config_to_json(const StudyConfig& c) {
  Json j;
  j["seeds"] = c.seeds;
  j["k_max"] = c.k_max;
  j["scene"] = to_json(c.scene);
  j["train_scenes"] = c.train_scenes;
  j["test_scenes"] = c.test_scenes;
  j["test_frames"] = c.test_frames;
  j["noise_radius"] = c.noise_radius;
  j["noise_stage"] = to_string(c.noise_stage);
  j["flow"] = to_json(c.flow);
  j["label_interpolation"] = to_string(c.label_policy.mode);
  j["train"] = to_json(c.train);
  return j;
}

void study_config_from_json(const Json& j, StudyConfig& out,
                            const std::string& path) {
  ObjectReader r(j, path);
  r.field("seeds", out.seeds);
  r.field("k_max", out.k_max);
  r.object("scene", [&](const Json& v, const std::string& p) { from_json(v, out.scene, p); });
  r.field("train_scenes", out.train_scenes);
  r.field("test_scenes", out.test_scenes);
  r.field("test_frames", out.test_frames);
  r.field("noise_radius", out.noise_radius);
  r.enumeration("noise_stage", out.noise_stage, parse_noise_stage);
  r.object("flow", [&](const Json& v, const std::string& p) { from_json(v, out.flow, p); });
  r.enumeration("label_interpolation", out.label_policy.mode, parse_label_warp_mode);
  r.object("train", [&](const Json& v, const std::string& p) { from_json(v, out.train, p); });
  r.done();
}

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["num_classes"] = c.num_classes;
  j["flow"] = to_json(c.flow);
  j["propagation"] = to_json(c.propagation);
  j["scene"] = to_json(c.scene);
  j["train"] = to_json(c.train);
  j["sampling"] = to_json(c.sampling);
  j["eval"] = to_json(c.eval);
  j["noise_radius"] = c.noise_radius;
  j["study"] = study_config_to_json(c.study);
  return j;
}

void from_json(const Json& j, RunConfig& out) {
  ObjectReader r(j, "");
  r.field("seed", out.seed);
  r.field("threads", out.threads);
  r.field("num_classes", out.num_classes);
  r.object("flow", [&](const Json& v, const std::string& p) { from_json(v, out.flow, p); });
  r.object("propagation",
           [&](const Json& v, const std::string& p) { from_json(v, out.propagation, p); });
  r.object("scene", [&](const Json& v, const std::string& p) { from_json(v, out.scene, p); });
  r.object("train", [&](const Json& v, const std::string& p) { from_json(v, out.train, p); });
  r.object("sampling",
           [&](const Json& v, const std::string& p) { from_json(v, out.sampling, p); });
  r.object("eval", [&](const Json& v, const std::string& p) { from_json(v, out.eval, p); });
  r.field("noise_radius", out.noise_radius);
  r.object("study",
           [&](const Json& v, const std::string& p) { study_config_from_json(v, out.study, p); });
  r.done();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Json j;
  try {
    j = Json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  RunConfig config;
  from_json(j, config);
  return config;
}

}  // namespace segprop
