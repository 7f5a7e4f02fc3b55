#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "segprop/core/image_io.hpp"
#include "segprop/core/rng.hpp"
#include "segprop/motion.hpp"
#include "segprop/propagate.hpp"
#include "segprop/toytrain.hpp"

namespace segprop {

void SceneParams::validate() const {
  auto fail = [](const std::string& what) { throw ParameterError("scene: " + what); };
  if (height < 1 || width < 1) fail("empty frame size");
  if (channels != 1 && channels != 3) fail("channels must be 1 or 3");
  if (num_frames < 1) fail("num_frames must be >= 1");
  if (num_shapes < 0) fail("num_shapes must be >= 0");
  if (num_classes < 2 || num_classes > kMaxClasses) {
    fail("num_classes must be in [2, 255]");
  }
  if (!(min_radius > 0.0) || !(max_radius >= min_radius)) {
    fail("need 0 < min_radius <= max_radius");
  }
  if (num_shapes > 0 && 2.0 * max_radius + 1.0 > std::min(height, width)) {
    fail("shapes of radius " + std::to_string(max_radius) +
         " do not fit a " + std::to_string(height) + "x" +
         std::to_string(width) + " frame");
  }
  if (!(min_speed >= 0.0) || !(max_speed >= min_speed)) {
    fail("need 0 <= min_speed <= max_speed");
  }
  if (!(min_accel >= 0.0) || !(max_accel >= min_accel)) {
    fail("need 0 <= min_accel <= max_accel");
  }
  if (!std::isfinite(background_u) || !std::isfinite(background_v)) {
    fail("background motion must be finite");
  }
  if (!(texture_amplitude >= 0.0) || !(texture_noise >= 0.0)) {
    fail("texture amplitude and noise must be >= 0");
  }
  if (!(palette_separation >= 0.0)) fail("palette_separation must be >= 0");
}

namespace {

// A smooth colour pattern: base colour plus two oriented sinusoids.
struct Texture {
  std::array<double, 3> base{};
  std::array<double, 2> ky{}, kx{}, phase{};
  std::array<std::array<double, 3>, 2> weight{};

  double sample(double ly, double lx, int c) const {
    double v = base[c];
    for (int i = 0; i < 2; ++i) {
      v += weight[i][c] * std::sin(ky[i] * ly + kx[i] * lx + phase[i]);
    }
    return v;
  }
};

Texture make_texture(Rng& rng, double amplitude) {
  Texture t;
  for (double& b : t.base) b = rng.uniform(0.25, 0.75);
  for (int i = 0; i < 2; ++i) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double wavelength = rng.uniform(8.0, 16.0);
    t.ky[i] = 2.0 * std::numbers::pi * std::sin(angle) / wavelength;
    t.kx[i] = 2.0 * std::numbers::pi * std::cos(angle) / wavelength;
    t.phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (double& w : t.weight[i]) w = 0.5 * amplitude * rng.uniform(0.5, 1.0);
  }
  return t;
}

bool inside(const SceneShape& s, double dy, double dx) {
  if (s.ellipse) {
    const double qy = dy / s.radius_y;
    const double qx = dx / s.radius_x;
    return qy * qy + qx * qx <= 1.0;
  }
  return std::abs(dy) <= s.radius_y && std::abs(dx) <= s.radius_x;
}

// Index of the front-most shape covering (y, x) at time t, or -1.
int owner(const std::vector<SceneShape>& shapes, int y, int x, double t) {
  for (int i = static_cast<int>(shapes.size()) - 1; i >= 0; --i) {
    const SceneShape& s = shapes[i];
    if (inside(s, y - s.centre_y(t), x - s.centre_x(t))) return i;
  }
  return -1;
}

}  // namespace

Scene synth_scene(const SceneParams& params) {
  params.validate();
  const int h = params.height;
  const int w = params.width;
  const int channels = params.channels;

  Rng palette(params.palette_seed, 0x7a1e77e);
  std::vector<Texture> class_texture;
  auto distance = [](const Texture& a, const Texture& b) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) d2 += (a.base[c] - b.base[c]) * (a.base[c] - b.base[c]);
    return std::sqrt(d2);
  };
  for (int c = 0; c < params.num_classes; ++c) {
    // Keep the candidate farthest from the classes so far if no draw meets
    // the separation within the attempt budget.
    Texture best;
    double best_gap = -1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
      Texture t = make_texture(palette, params.texture_amplitude);
      double gap = std::numeric_limits<double>::infinity();
      for (const Texture& other : class_texture) gap = std::min(gap, distance(t, other));
      if (gap > best_gap) {
        best = t;
        best_gap = gap;
      }
      if (gap >= params.palette_separation) break;
    }
    class_texture.push_back(best);
  }

  Rng layout(params.seed, 0);
  Scene scene;
  for (int i = 0; i < params.num_shapes; ++i) {
    SceneShape s;
    s.ellipse = layout.uniform() < 0.5;
    s.class_id = 1 + i % (params.num_classes - 1);
    s.radius_y = layout.uniform(params.min_radius, params.max_radius);
    s.radius_x = layout.uniform(params.min_radius, params.max_radius);
    s.y0 = layout.uniform(s.radius_y, h - 1 - s.radius_y);
    s.x0 = layout.uniform(s.radius_x, w - 1 - s.radius_x);
    const double speed = layout.uniform(params.min_speed, params.max_speed);
    const double heading = layout.uniform(0.0, 2.0 * std::numbers::pi);
    s.vy = speed * std::sin(heading);
    s.vx = speed * std::cos(heading);
    const double accel = layout.uniform(params.min_accel, params.max_accel);
    const double accel_dir = layout.uniform(0.0, 2.0 * std::numbers::pi);
    s.ay = accel * std::sin(accel_dir);
    s.ax = accel * std::cos(accel_dir);
    scene.shapes.push_back(s);
  }

  for (int t = 0; t < params.num_frames; ++t) {
    Frame frame(h, w, channels);
    LabelMap label(h, w, params.num_classes, 0);
    Rng noise(params.seed, 0x100 + static_cast<std::uint64_t>(t));
    const double bg_y = params.background_v * t;
    const double bg_x = params.background_u * t;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int i = owner(scene.shapes, y, x, t);
        const Texture* tex = &class_texture[0];
        double ly = y - bg_y;
        double lx = x - bg_x;
        if (i >= 0) {
          const SceneShape& s = scene.shapes[i];
          tex = &class_texture[s.class_id];
          ly = y - s.centre_y(t);
          lx = x - s.centre_x(t);
          label.at(y, x) = static_cast<std::uint8_t>(s.class_id);
        }
        for (int c = 0; c < channels; ++c) {
          double v = tex->sample(ly, lx, c);
          if (params.texture_noise > 0.0) v += params.texture_noise * noise.normal();
          frame.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    scene.frames.push_back(std::move(frame));
    scene.labels.push_back(std::move(label));
  }
  scene.background_u = params.background_u;
  scene.background_v = params.background_v;
  scene.motion.push_back(MotionField(h, w));
  for (int t = 1; t < params.num_frames; ++t) {
    scene.motion.push_back(ground_truth_motion(scene, t - 1, t));
  }
  return scene;
}

MotionField ground_truth_motion(const Scene& scene, int from, int to) {
  const int n = static_cast<int>(scene.frames.size());
  if (from < 0 || from >= n || to < 0 || to >= n) {
    throw ParameterError("ground_truth_motion: frame index out of range");
  }
  const int h = scene.frames[0].height();
  const int w = scene.frames[0].width();
  MotionField field(h, w);
  const double bg_u = scene.background_u * (from - to);
  const double bg_v = scene.background_v * (from - to);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = owner(scene.shapes, y, x, to);
      if (i < 0) {
        field.u(y, x) = static_cast<float>(bg_u);
        field.v(y, x) = static_cast<float>(bg_v);
      } else {
        const SceneShape& s = scene.shapes[i];
        field.u(y, x) = static_cast<float>(s.centre_x(from) - s.centre_x(to));
        field.v(y, x) = static_cast<float>(s.centre_y(from) - s.centre_y(to));
      }
    }
  }
  return field;
}

SceneFiles write_scene(const Scene& scene, const std::filesystem::path& dir,
                       const std::string& prefix, int gt_index) {
  namespace fs = std::filesystem;
  const int n = static_cast<int>(scene.frames.size());
  if (gt_index < 0 || gt_index >= n) {
    throw ParameterError("write_scene: gt_index " + std::to_string(gt_index) +
                         " outside a clip of " + std::to_string(n) + " frames");
  }
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "labels");
  fs::create_directories(dir / "motion");
  auto name = [&](const char* stem, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%03d%s", stem, index, ext);
    return std::string(buf);
  };

  DatasetManifest all{dir, {}};
  DatasetManifest gt{dir, {}};
  FrameSequence seq;
  seq.origin = prefix;
  seq.gt_index = gt_index;
  for (int t = 0; t < n; ++t) {
    const std::string frame_rel = "frames/" + name(prefix.c_str(), t, ".png");
    const std::string label_rel = "labels/" + name(prefix.c_str(), t, ".png");
    save_frame(scene.frames[t], dir / frame_rel);
    save_label(scene.labels[t], dir / label_rel);
    ManifestEntry e;
    e.frame = frame_rel;
    e.label = label_rel;
    e.origin = prefix + "_f" + name("", t, "");
    all.entries.push_back(e);
    if (t == gt_index) {
      e.origin = prefix;
      gt.entries.push_back(e);
    }
    seq.frames.push_back(dir / frame_rel);
  }
  for (int j = 1; gt_index + j < n; ++j) {
    const std::string rel = "motion/" + name((prefix + "_fwd").c_str(), j, ".flo");
    save_motion(ground_truth_motion(scene, gt_index + j - 1, gt_index + j), dir / rel);
    seq.motion_forward.push_back(dir / rel);
  }
  for (int j = 1; gt_index - j >= 0; ++j) {
    const std::string rel = "motion/" + name((prefix + "_bwd").c_str(), j, ".flo");
    save_motion(ground_truth_motion(scene, gt_index - j + 1, gt_index - j), dir / rel);
    seq.motion_backward.push_back(dir / rel);
  }

  SceneFiles files{dir / "manifest.jsonl", dir / "gt_manifest.jsonl",
                   dir / "sequences.jsonl"};
  save_manifest(all, files.manifest);
  save_manifest(gt, files.gt_manifest);
  save_sequences({seq}, files.sequences);
  return files;
}

}  // namespace segprop
