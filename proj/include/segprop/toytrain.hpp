#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segprop/core/manifest.hpp"
#include "segprop/core/types.hpp"

namespace segprop {

// ---------------------------------------------------------------------------
// Synthetic moving scenes

struct SceneParams {
  int height = 64;
  int width = 64;
  int channels = 3;
  int num_frames = 5;
  int num_shapes = 3;
  int num_classes = 4;  // class 0 is the background, shapes use 1..K-1
  // Shape half-extent range in pixels.
  double min_radius = 6.0;
  double max_radius = 12.0;
  // Initial speed and acceleration magnitudes; directions are uniform.
  double min_speed = 0.5;
  double max_speed = 1.5;
  double min_accel = 0.0;
  double max_accel = 0.0;
  // Constant background pan in px/frame (a camera translation).
  double background_u = 0.0;
  double background_v = 0.0;
  // Amplitude of the smooth texture pattern and of per-frame sensor noise.
  double texture_amplitude = 0.15;
  double texture_noise = 0.0;
  // Minimum Euclidean distance between class base colours (rejection
  // sampled; 0 disables the constraint).
  double palette_separation = 0.2;
  // Layout, motion and noise come from `seed`; class colours and textures
  // from `palette_seed`, so scenes with different seeds can share a look.
  std::uint64_t seed = 0;
  std::uint64_t palette_seed = 0;

  void validate() const;
};

struct SceneShape {
  bool ellipse = true;
  int class_id = 1;
  double radius_y = 0.0;
  double radius_x = 0.0;
  double y0 = 0.0, x0 = 0.0;  // centre at frame 0
  double vy = 0.0, vx = 0.0;  // velocity at frame 0
  double ay = 0.0, ax = 0.0;  // constant acceleration

  double centre_y(double t) const { return y0 + vy * t + 0.5 * ay * t * t; }
  double centre_x(double t) const { return x0 + vx * t + 0.5 * ax * t * t; }
};

struct Scene {
  std::vector<SceneShape> shapes;  // back to front
  std::vector<Frame> frames;
  std::vector<LabelMap> labels;
  // motion[t] carries frame t-1 to frame t: warp_image(frames[t-1],
  // motion[t]) ~= frames[t]. motion[0] is zero.
  std::vector<MotionField> motion;
  double background_u = 0.0;  // px/frame
  double background_v = 0.0;
};

// Textured shapes over a textured background. Textures are smooth functions
// of object-local coordinates, so they move exactly with their objects;
// labels are the crisp inside test at pixel centres.
Scene synth_scene(const SceneParams& params);

// Exact backward-convention motion taking frame `from` to frame `to` of a
// scene: warp_image(frames[from], field) ~= frames[to].
MotionField ground_truth_motion(const Scene& scene, int from, int to);

// Writes frames/ and labels/ PNGs and three index files:
//   manifest.jsonl     every frame as a ground-truth entry ("<prefix>_fNNN")
//   gt_manifest.jsonl  only frame `gt_index`, origin "<prefix>"
//   sequences.jsonl    the whole clip for origin "<prefix>", with exact
//                      per-step motion files under motion/
struct SceneFiles {
  std::filesystem::path manifest;
  std::filesystem::path gt_manifest;
  std::filesystem::path sequences;
};
SceneFiles write_scene(const Scene& scene, const std::filesystem::path& dir,
                       const std::string& prefix, int gt_index);

// ---------------------------------------------------------------------------
// Annotation noise

// Random dilation / erosion along class boundaries. Boundary pixels (non-void
// with a differently labelled non-void 4-neighbour) are grouped into
// segments: 8-connected components cut by a `tile` x `tile` grid. Each
// segment draws a radius r in [1, radius] and one of its classes, and that
// class is painted over every non-void pixel within Chebyshev distance r of
// the segment's pixels of that class. Void pixels are never touched.
LabelMap boundary_noise(const LabelMap& label, int radius, std::uint64_t seed,
                        int tile = 8);

// ---------------------------------------------------------------------------
// Per-pixel linear classifier

enum class LossKind { kOneHot, kRelaxed };
const char* to_string(LossKind loss);
LossKind parse_loss_kind(const std::string& text);

// lr0 * (1 - epoch / max_epoch)^power. Throws ParameterError outside
// 0 <= epoch <= max_epoch.
double poly_lr(int epoch, int max_epoch, double lr0, double power);

// Colour and a constant bias are always present; the rest can be switched
// off.
struct FeatureSet {
  bool coordinates = true;   // normalized (x, y) in [-1, 1]
  bool window_stats = true;  // per-channel mean and std over a 5x5 window

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

struct TrainConfig {
  double lr0 = 0.002;
  double power = 1.0;
  int epochs = 30;
  int batches_per_epoch = 20;
  int batch_pixels = 256;
  LossKind loss = LossKind::kOneHot;
  int relax_window = 3;  // neighbourhood for the relaxed loss
  FeatureSet features;
  std::uint64_t seed = 0;

  void validate() const;
};

// Feature order: colour channels, then (x, y), window means, window standard
// deviations (when enabled), then the constant 1.
int feature_dim(int channels, FeatureSet set = {});
std::vector<std::string> feature_names(int channels, FeatureSet set = {});
// H*W*D row-major.
std::vector<double> extract_features(const Frame& frame, FeatureSet set = {});

struct PixelClassifier {
  int num_classes = 0;
  int channels = 0;
  FeatureSet features;
  std::vector<double> weights;  // K x D, row-major

  int dim() const { return feature_dim(channels, features); }
  Logits logits(const Frame& frame) const;
  LabelMap predict(const Frame& frame) const;  // argmax, lowest id on ties

  friend bool operator==(const PixelClassifier&, const PixelClassifier&) = default;
};

std::string classifier_to_json(const PixelClassifier& model);
PixelClassifier classifier_from_json(const std::string& text);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;                 // mean minibatch loss
  std::optional<double> val_miou;    // when a validation set is given
};

struct TrainResult {
  PixelClassifier model;
  std::vector<EpochLog> log;
};

struct LabelledImages {
  std::vector<Frame> frames;
  std::vector<LabelMap> labels;
};

// Raised when a minibatch loss becomes non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Minibatch SGD from zero weights. Every batch draws `batch_pixels` pixels
// uniformly (with replacement) among the usable pixels of all images, using
// Rng(seed, epoch). One-hot uses cross-entropy on non-void pixels; relaxed
// uses the neighbour sets of each label map.
TrainResult train_pixel_classifier(const LabelledImages& data,
                                   const TrainConfig& config,
                                   const LabelledImages* validation = nullptr);
TrainResult train_pixel_classifier(const DatasetManifest& manifest,
                                   int num_classes, const TrainConfig& config,
                                   const LabelledImages* validation = nullptr);

// Mean IoU of `model` on the given images (0 when no class is present).
double evaluate_miou(const PixelClassifier& model, const LabelledImages& data);

std::string format_epoch_line(const EpochLog& entry);

}  // namespace segprop
