#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "msreg/imaging.hpp"
#include "msreg/sgbm.hpp"
#include "msreg/synthgen.hpp"

namespace msreg {
namespace {

RgbImage solid(int w, int h, Rgb8 c) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) std::copy(c.begin(), c.end(), img.pixel(x, y));
  return img;
}

/// Integer-shifted copy: out(x) = in(x + shift), edges clamped.
GrayImage shift_columns(const GrayImage& in, int shift) {
  GrayImage out(in.rows(), in.cols());
  for (int y = 0; y < in.rows(); ++y)
    for (int x = 0; x < in.cols(); ++x) out(y, x) = in(y, std::clamp<int>(x + shift, 0, in.cols() - 1));
  return out;
}

GrayImage flat_texture(int w, int h) { return to_grayscale(make_texture(3, w, h)); }

TEST(Grayscale, WhiteBlackRed) {
  EXPECT_EQ(to_grayscale(solid(2, 2, {255, 255, 255}))(0, 0), 255);
  EXPECT_EQ(to_grayscale(solid(2, 2, {0, 0, 0}))(1, 1), 0);
  EXPECT_EQ(to_grayscale(solid(2, 2, {255, 0, 0}))(0, 1), static_cast<int>(std::lround(0.299 * 255)));
}

TEST(Grayscale, RejectsMalformedBuffer) {
  RgbImage img(2, 2);
  img.data.pop_back();
  EXPECT_THROW(to_grayscale(img), Error);
}

TEST(MedianFilter, UniformFixedPoint) {
  DisparityMap d(7, 5);
  d.values().setConstant(3.0);
  const auto out = median_filter_disparity(d, 3);
  EXPECT_TRUE((out.values() == 3.0).all());
}

TEST(MedianFilter, AbsorbsSingleOutlier) {
  DisparityMap d(5, 5);
  d.values().setConstant(5.0);
  d(2, 2) = 50.0;
  EXPECT_DOUBLE_EQ(median_filter_disparity(d, 3)(2, 2), 5.0);
}

TEST(MedianFilter, AllInvalidStaysInvalid) {
  DisparityMap d(4, 4);
  EXPECT_EQ(median_filter_disparity(d, 3).valid_count(), 0u);
}

TEST(MedianFilter, RejectsEvenWindow) {
  DisparityMap d(4, 4);
  EXPECT_THROW(median_filter_disparity(d, 2), Error);
}

TEST(Sgbm, IdenticalImagesGiveZero) {
  const GrayImage img = flat_texture(96, 64);
  const auto d = compute_disparity(img, img, SgbmParams{});
  ASSERT_GT(d.valid_count(), 0u);
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (d.valid(x, y)) EXPECT_NEAR(d(x, y), 0.0, 1e-9);
}

/// Fraction of interior valid pixels within `tol` of `expected`.
double interior_fraction(const DisparityMap& d, double expected, double tol, int margin) {
  std::size_t valid = 0, good = 0;
  for (int y = margin; y < d.height() - margin; ++y) {
    for (int x = margin; x < d.width() - margin; ++x) {
      if (!d.valid(x, y)) continue;
      ++valid;
      if (std::abs(d(x, y) - expected) <= tol) ++good;
    }
  }
  return valid == 0 ? 0.0 : static_cast<double>(good) / valid;
}

TEST(Sgbm, ConstantShiftRecovered) {
  const GrayImage left = flat_texture(128, 64);
  const GrayImage right = shift_columns(left, 5);
  const auto d = compute_disparity(left, right, SgbmParams{});
  EXPECT_GT(d.valid_count(), d.values().size() / 2);
  EXPECT_EQ(interior_fraction(d, 5.0, 0.5, 24), 1.0);
}

TEST(Sgbm, SwappedEyesNegateDisparity) {
  const GrayImage left = flat_texture(128, 64);
  const GrayImage right = shift_columns(left, 5);
  SgbmParams params;
  params.min_disparity = -(params.disparity_range - 1);
  const auto d = compute_disparity(right, left, params);
  EXPECT_GT(d.valid_count(), d.values().size() / 2);
  EXPECT_EQ(interior_fraction(d, -5.0, 0.5, 24), 1.0);
}

TEST(Sgbm, OutputWithinSearchRange) {
  const auto scene = make_skull_surface(11);
  const auto pair = render_stereo(scene);
  SgbmParams params;
  params.min_disparity = 2;
  params.disparity_range = 16;
  const auto d = compute_disparity(to_grayscale(pair.left), to_grayscale(pair.right), params);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.valid(x, y)) continue;
      EXPECT_GE(d(x, y), params.min_disparity);
      EXPECT_LT(d(x, y), params.min_disparity + params.disparity_range);
    }
  }
}

TEST(Sgbm, Deterministic) {
  const auto pair = render_stereo(make_skull_surface(5));
  const auto a = compute_disparity(to_grayscale(pair.left), to_grayscale(pair.right), SgbmParams{});
  const auto b = compute_disparity(to_grayscale(pair.left), to_grayscale(pair.right), SgbmParams{});
  EXPECT_TRUE(a.values().isNaN().cwiseEqual(b.values().isNaN()).all());
  EXPECT_TRUE((a.values() == b.values() || a.values().isNaN()).all());
}

TEST(Sgbm, ShiftCovarianceOnInterior) {
  const auto pair = render_stereo(make_skull_surface(9));
  const GrayImage left = to_grayscale(pair.left), right = to_grayscale(pair.right);
  const int k = 7;
  const auto base = compute_disparity(left, right, SgbmParams{});
  const auto moved = compute_disparity(shift_columns(left, k), shift_columns(right, k), SgbmParams{});
  std::size_t compared = 0;
  for (int y = 16; y < base.height() - 16; ++y) {
    for (int x = 80; x < base.width() - 80; ++x) {
      if (!base.valid(x + k, y) || !moved.valid(x, y)) continue;
      EXPECT_NEAR(moved(x, y), base(x + k, y), 0.25);
      ++compared;
    }
  }
  EXPECT_GT(compared, 10000u);
}

TEST(Sgbm, RecoversSyntheticSceneDisparity) {
  const auto scene = make_skull_surface(21);
  const auto pair = render_stereo(scene);
  const auto d = compute_disparity(to_grayscale(pair.left), to_grayscale(pair.right), SgbmParams{});
  std::size_t valid = 0, good = 0;
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.valid(x, y) || !pair.valid(y, x)) continue;
      ++valid;
      if (std::abs(d(x, y) - scene.disparity(x, y)) <= 1.0) ++good;
    }
  }
  ASSERT_GT(valid, 0u);
  EXPECT_GE(static_cast<double>(good) / valid, 0.95);
}

TEST(Sgbm, RejectsBadParams) {
  const GrayImage img = flat_texture(32, 32);
  SgbmParams p;
  p.census_window = 4;
  EXPECT_THROW(compute_disparity(img, img, p), Error);
  p = {};
  p.penalty_large = p.penalty_small;
  EXPECT_THROW(compute_disparity(img, img, p), Error);
  p = {};
  p.path_count = 6;
  EXPECT_THROW(compute_disparity(img, img, p), Error);
  EXPECT_THROW(compute_disparity(img, flat_texture(32, 16), SgbmParams{}), Error);
}

}  // namespace
}  // namespace msreg
