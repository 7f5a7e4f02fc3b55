#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "segprop/warp.hpp"
#include "test_util.hpp"

namespace segprop {
namespace {

// Dense one-hot reference: accumulate bilinear weight into a 256-bin
// histogram over the four neighbours, then scan ids upward so the lowest id
// wins any tie. Returns the winner and the margin over the runner-up.
std::pair<std::uint8_t, double> reference_onehot(const LabelMap& l, double sx,
                                                 double sy) {
  const int w = l.width(), h = l.height();
  std::array<double, 256> hist{};
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0, fy = sy - y0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double wt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
      if (wt == 0.0) continue;
      hist[l.at(std::min(y0 + dy, h - 1), std::min(x0 + dx, w - 1))] += wt;
    }
  }
  int best = 0;
  for (int id = 1; id < 256; ++id) {
    if (hist[id] > hist[best]) best = id;
  }
  double second = 0.0;
  for (int id = 0; id < 256; ++id) {
    if (id != best) second = std::max(second, hist[id]);
  }
  return {static_cast<std::uint8_t>(best), hist[best] - second};
}

TEST(WarpTest, ZeroFieldIsIdentity) {
  Rng rng(1);
  const Frame f = testing::random_frame(rng, 12, 17, 3);
  const LabelMap l = testing::random_label(rng, 12, 17, 19, 0.1);
  const MotionField zero(12, 17);
  EXPECT_EQ(warp_image(f, zero), f);
  EXPECT_EQ(warp_label(l, zero), l);
  EXPECT_EQ(warp_label(l, zero, {LabelWarpMode::kNearest}), l);
}

TEST(WarpTest, IntegerTranslationIsAnExactShift) {
  Rng rng(2);
  const int h = 15, w = 20;
  const Frame f = testing::random_frame(rng, h, w, 3);
  const LabelMap l = testing::random_label(rng, h, w, 7, 0.05);
  for (int dy = -4; dy <= 4; dy += 2) {
    for (int dx = -5; dx <= 5; dx += 5) {
      const MotionField m = MotionField::constant(h, w, static_cast<float>(dx),
                                                  static_cast<float>(dy));
      const Frame wf = warp_image(f, m);
      const LabelMap wl = warp_label(l, m);
      const LabelMap wn = warp_label(l, m, {LabelWarpMode::kNearest});
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int sy = y + dy, sx = x + dx;
          const bool inside = sy >= 0 && sy < h && sx >= 0 && sx < w;
          const std::uint8_t expect = inside ? l.at(sy, sx) : kVoid;
          ASSERT_EQ(wl.at(y, x), expect) << dx << "," << dy;
          ASSERT_EQ(wn.at(y, x), expect);
          const int cy = std::clamp(sy, 0, h - 1), cx = std::clamp(sx, 0, w - 1);
          for (int c = 0; c < 3; ++c) ASSERT_EQ(wf.at(y, x, c), f.at(cy, cx, c));
        }
      }
    }
  }
}

TEST(WarpTest, FrameMatchesReferenceBilinear) {
  Rng rng(3);
  const int h = 10, w = 13;
  const Frame f = testing::random_frame(rng, h, w, 1);
  MotionField m(h, w);
  for (auto& v : m.uv()) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  const Frame out = warp_image(f, m);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp(x + static_cast<double>(m.u(y, x)), 0.0, w - 1.0);
      const double sy = std::clamp(y + static_cast<double>(m.v(y, x)), 0.0, h - 1.0);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double ax = sx - x0, ay = sy - y0;
      const double ref = (1 - ax) * (1 - ay) * f.at(y0, x0) + ax * (1 - ay) * f.at(y0, x1) +
                         (1 - ax) * ay * f.at(y1, x0) + ax * ay * f.at(y1, x1);
      EXPECT_NEAR(out.at(y, x), ref, 1e-6);
    }
  }
}

TEST(WarpTest, OneHotBilinearMatchesDenseReference) {
  Rng rng(4);
  int compared = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 12, w = 12;
    const LabelMap l = testing::random_label(rng, h, w, 5, 0.15);
    MotionField m(h, w);
    for (auto& v : m.uv()) v = static_cast<float>(rng.uniform(-2.5, 2.5));
    const LabelMap out = warp_label(l, m);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double sx = x + static_cast<double>(m.u(y, x));
        const double sy = y + static_cast<double>(m.v(y, x));
        if (sx < 0 || sx > w - 1 || sy < 0 || sy > h - 1) {
          EXPECT_EQ(out.at(y, x), kVoid);
          continue;
        }
        const auto [id, margin] = reference_onehot(l, sx, sy);
        if (margin < 1e-9) continue;  // float-order ties checked separately
        EXPECT_EQ(out.at(y, x), id);
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 1000);
}

TEST(WarpTest, TiesResolveToLowestIdAndVoidCountsAs255) {
  // Half-way between two columns: equal weight on both sides.
  LabelMap l(1, 2, 5, std::vector<std::uint8_t>{3, 1});
  const MotionField half = MotionField::constant(1, 2, 0.5f, 0.0f);
  EXPECT_EQ(warp_label(l, half).at(0, 0), 1);
  LabelMap with_void(1, 2, 5, std::vector<std::uint8_t>{kVoid, 4});
  EXPECT_EQ(warp_label(with_void, half).at(0, 0), 4);
  // A majority of void still wins.
  LabelMap v3(2, 2, 5, std::vector<std::uint8_t>{kVoid, kVoid, kVoid, 2});
  const MotionField quarter = MotionField::constant(2, 2, 0.5f, 0.5f);
  EXPECT_EQ(warp_label(v3, quarter).at(0, 0), kVoid);
}

TEST(WarpTest, LeavingTheImageGivesVoidForLabelsAndClampForFrames) {
  Frame f(1, 3, 1, std::vector<float>{0.1f, 0.2f, 0.3f});
  LabelMap l(1, 3, 4, std::vector<std::uint8_t>{0, 1, 2});
  const MotionField m = MotionField::constant(1, 3, 0.25f, 0.0f);
  const Frame wf = warp_image(f, m);
  const LabelMap wl = warp_label(l, m);
  EXPECT_EQ(wl.at(0, 2), kVoid);
  EXPECT_FLOAT_EQ(wf.at(0, 2), 0.3f);
  EXPECT_EQ(wl.at(0, 0), 0);
  EXPECT_NEAR(wf.at(0, 0), 0.125, 1e-6);
}

TEST(WarpTest, OutputClassesComeFromTheFourNeighbours) {
  // Property: a warped label never invents a class absent from the source
  // pixel's 2x2 neighbourhood.
  Rng rng(5);
  const LabelMap l = testing::random_label(rng, 16, 16, 19, 0.1);
  MotionField m(16, 16);
  for (auto& v : m.uv()) v = static_cast<float>(rng.uniform(-4.0, 4.0));
  const LabelMap out = warp_label(l, m);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (out.at(y, x) == kVoid) continue;
      const double sx = x + static_cast<double>(m.u(y, x));
      const double sy = y + static_cast<double>(m.v(y, x));
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      bool found = false;
      for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
          found |= l.at(std::min(y0 + dy, 15), std::min(x0 + dx, 15)) == out.at(y, x);
        }
      }
      EXPECT_TRUE(found);
    }
  }
}

TEST(WarpTest, SizeMismatchThrows) {
  EXPECT_THROW(warp_image(Frame(2, 2, 1), MotionField(2, 3)), ValidationError);
  EXPECT_THROW(warp_label(LabelMap(2, 2, 3), MotionField(3, 2)), ValidationError);
}

TEST(WarpTest, ModeNamesRoundTrip) {
  for (auto mode : {LabelWarpMode::kOneHotBilinearArgmax, LabelWarpMode::kNearest}) {
    EXPECT_EQ(parse_label_warp_mode(to_string(mode)), mode);
  }
  EXPECT_THROW(parse_label_warp_mode("bicubic"), ParameterError);
}

}  // namespace
}  // namespace segprop
