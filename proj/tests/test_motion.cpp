#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "segprop/core/parallel.hpp"
#include "segprop/motion.hpp"
#include "segprop/toytrain.hpp"
#include "segprop/warp.hpp"
#include "test_util.hpp"

namespace segprop {
namespace {

// Smooth multi-scale pattern sampled at (x - tx, y - ty): an exact oracle
// for a global sub-pixel translation.
Frame smooth_pattern(int h, int w, double tx, double ty) {
  Frame f(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double X = x - tx, Y = y - ty;
      const double v = 0.5 + 0.18 * std::sin(0.21 * X + 0.4) * std::cos(0.17 * Y) +
                       0.12 * std::sin(0.05 * X - 0.07 * Y + 1.0) +
                       0.1 * std::cos(0.45 * X + 0.31 * Y);
      f.at(y, x) = static_cast<float>(v);
    }
  }
  return f;
}

TEST(MotionTest, IdenticalFramesGiveZeroField) {
  Rng rng(1);
  const Frame f = testing::random_frame(rng, 64, 64, 3);
  const MotionField m = estimate_motion(f, f, FlowParams{3, 3, 3, 1e-4});
  for (float v : m.uv()) ASSERT_EQ(v, 0.0f);
}

TEST(MotionTest, RecoversGlobalSubpixelTranslation) {
  // b(x) = a(x - t)  =>  backward field u = -t everywhere.
  const double tx = 2.3, ty = -1.6;
  const Frame a = smooth_pattern(96, 96, 0.0, 0.0);
  const Frame b = smooth_pattern(96, 96, tx, ty);
  const MotionField m = estimate_motion(a, b, FlowParams{3, 5, 5, 1e-5});
  const MotionField truth = MotionField::constant(96, 96, static_cast<float>(-tx),
                                                  static_cast<float>(-ty));
  // Ignore a border where content enters the view.
  std::vector<std::uint8_t> mask(96 * 96, 0);
  for (int y = 8; y < 88; ++y) {
    for (int x = 8; x < 88; ++x) mask[y * 96 + x] = 1;
  }
  const EndpointError epe = endpoint_error(m, truth, mask);
  EXPECT_LT(epe.median, 0.05);
  EXPECT_LT(epe.p95, 0.2);
}

TEST(MotionTest, TranslatingSceneMedianEpeBelowTwoTenthsPixel) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SceneParams p;
    p.height = p.width = 128;
    p.background_u = 0.6;
    p.background_v = -0.4;
    p.seed = seed;
    const Scene s = synth_scene(p);
    for (int t = 1; t < p.num_frames; ++t) {
      const MotionField est = estimate_motion(s.frames[t - 1], s.frames[t]);
      const EndpointError epe = endpoint_error(est, s.motion[t]);
      EXPECT_LT(epe.median, 0.2) << "seed " << seed << " t " << t;
    }
  }
}

TEST(MotionTest, EstimateWarpsFirstFrameOntoSecond) {
  const Frame a = smooth_pattern(64, 64, 0.0, 0.0);
  const Frame b = smooth_pattern(64, 64, 1.0, 0.5);
  const MotionField m = estimate_motion(a, b, FlowParams{3, 3, 5, 1e-5});
  const Frame warped = warp_image(a, m);
  double err = 0.0;
  int n = 0;
  for (int y = 6; y < 58; ++y) {
    for (int x = 6; x < 58; ++x) {
      err += std::abs(warped.at(y, x) - b.at(y, x));
      ++n;
    }
  }
  EXPECT_LT(err / n, 2e-3);
}

TEST(MotionTest, ResultDoesNotDependOnThreadCount) {
  SceneParams p;
  p.seed = 9;
  const Scene s = synth_scene(p);
  const FlowParams fp{3, 3, 3, 1e-4};
  set_num_threads(1);
  const MotionField one = estimate_motion(s.frames[0], s.frames[1], fp);
  set_num_threads(4);
  const MotionField four = estimate_motion(s.frames[0], s.frames[1], fp);
  set_num_threads(0);
  EXPECT_EQ(one, four);
}

TEST(MotionTest, PyramidMinimumSizeRule) {
  const Frame small(60, 80, 1);
  // 2^(3-1) * (2*7+1) = 60: exactly enough.
  EXPECT_NO_THROW(estimate_motion(small, small, FlowParams{3, 7, 1, 1e-4}));
  EXPECT_THROW(estimate_motion(small, small, FlowParams{4, 7, 1, 1e-4}),
               ParameterError);
  EXPECT_THROW(estimate_motion(Frame(64, 64, 1), Frame(64, 64, 3), FlowParams{1, 1, 1, 0}),
               ValidationError);
  EXPECT_THROW(estimate_motion(Frame(64, 64, 1), Frame(64, 63, 1), FlowParams{1, 1, 1, 0}),
               ValidationError);
  EXPECT_THROW(FlowParams({0, 1, 1, 0}).validate(), ParameterError);
  EXPECT_THROW(FlowParams({1, 1, 1, -1}).validate(), ParameterError);
}

TEST(MotionTest, PredictionReusesThePreviousField) {
  Rng rng(2);
  MotionField prev(5, 6);
  for (auto& v : prev.uv()) v = static_cast<float>(rng.normal());
  EXPECT_EQ(predict_motion(prev), prev);
}

TEST(EndpointErrorTest, MatchesBruteForceStatistics) {
  Rng rng(3);
  MotionField a(7, 9), b(7, 9);
  for (auto& v : a.uv()) v = static_cast<float>(rng.normal());
  for (auto& v : b.uv()) v = static_cast<float>(rng.normal());
  std::vector<std::uint8_t> mask(63);
  for (auto& m : mask) m = rng.uniform() < 0.6;
  std::vector<double> e;
  for (int p = 0; p < 63; ++p) {
    if (!mask[p]) continue;
    const double du = a.uv()[2 * p] - static_cast<double>(b.uv()[2 * p]);
    const double dv = a.uv()[2 * p + 1] - static_cast<double>(b.uv()[2 * p + 1]);
    e.push_back(std::sqrt(du * du + dv * dv));
  }
  std::sort(e.begin(), e.end());
  double mean = 0.0;
  for (double x : e) mean += x;
  mean /= e.size();
  const EndpointError got = endpoint_error(a, b, mask);
  EXPECT_EQ(got.count, e.size());
  EXPECT_NEAR(got.mean, mean, 1e-12);
  EXPECT_NEAR(got.max, e.back(), 1e-12);
  // Lower median (nearest-rank).
  EXPECT_NEAR(got.median, e[(e.size() + 1) / 2 - 1], 1e-12);
  EXPECT_THROW(endpoint_error(a, MotionField(7, 8)), ValidationError);
}

}  // namespace
}  // namespace segprop
