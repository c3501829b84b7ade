#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "msreg/projection.hpp"
#include "msreg/synthgen.hpp"

namespace msreg {
namespace {

CalibrationParams bench_calibration() {
  CalibrationParams c;
  c.h_rho = 10.0;
  c.d_e = 500.0;
  c.p_rho_x = c.p_rho_y = 0.077;
  c.c_x = 320.0;
  c.c_y = 240.0;
  return c;
}

TEST(ReconstructPoint, PrincipalPointZeroDisparity) {
  const auto c = bench_calibration();
  const Eigen::Vector3d p = reconstruct_point(Eigen::Vector2d(c.c_x, c.c_y), 0.0, c);
  EXPECT_EQ(p, Eigen::Vector3d(0, 0, 500.0));
}

TEST(ReconstructPoint, DirectSubstitution) {
  const auto c = bench_calibration();
  const Eigen::Vector3d p = reconstruct_point(Eigen::Vector2d(c.c_x + 100, c.c_y), 5.0, c);
  EXPECT_NEAR(p.x(), 7.7, 1e-12);
  EXPECT_NEAR(p.y(), 0.0, 1e-12);
  EXPECT_NEAR(p.z(), 500.5, 1e-12);
}

TEST(ReconstructPoint, InvalidDisparityThrows) {
  EXPECT_THROW(reconstruct_point(Eigen::Vector2d(0, 0), DisparityMap::kInvalid, bench_calibration()), Error);
}

TEST(ReconstructPoint, AffineInDisparity) {
  const auto c = bench_calibration();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d px(u(rng) + 300, u(rng) + 200);
    const double h = u(rng), step = 0.25 * (i + 1);
    const double z0 = reconstruct_point(px, h, c).z();
    const double z1 = reconstruct_point(px, h + step, c).z();
    const double z2 = reconstruct_point(px, h + 2 * step, c).z();
    EXPECT_NEAR(z2 - 2 * z1 + z0, 0.0, 1e-12);
  }
}

TEST(ReconstructPoint, LateralMetricConsistency) {
  const auto c = bench_calibration();
  for (int k : {1, 7, 130}) {
    const auto a = reconstruct_point(Eigen::Vector2d(10, 50), 3.0, c);
    const auto b = reconstruct_point(Eigen::Vector2d(10 + k, 50), 3.0, c);
    EXPECT_NEAR(b.x() - a.x(), k * c.p_rho_x, 1e-12);
  }
}

TEST(ReconstructPoint, ProjectRoundTrip) {
  const auto c = bench_calibration();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d p(u(rng), u(rng), 500 + 0.25 * u(rng));
    const Eigen::Vector3d q = project_point(p, c);
    EXPECT_LE((reconstruct_point(Eigen::Vector2d(q.x(), q.y()), q.z(), c) - p).norm(), 1e-9);
  }
}

TEST(ReconstructPoint, ScalarTemplate) {
  const auto c = bench_calibration();
  const Eigen::Vector3f p = reconstruct_point(Eigen::Vector2f(420.f, 240.f), 5.f, c);
  EXPECT_NEAR(p.x(), 7.7f, 1e-4f);
}

TEST(ReconstructCloud, AllInvalidIsEmpty) {
  DisparityMap d(8, 6);
  EXPECT_TRUE(reconstruct_cloud(d, RgbImage(8, 6), bench_calibration()).empty());
}

TEST(ReconstructCloud, ConstantDisparityPlane) {
  const auto c = bench_calibration();
  DisparityMap d(9, 7);
  d.values().setConstant(4.0);
  const auto cloud = reconstruct_cloud(d, RgbImage(9, 7), c);
  ASSERT_EQ(cloud.size(), 63u);
  for (const auto& p : cloud.points) EXPECT_DOUBLE_EQ(p.z(), c.d_e + 4.0 / c.h_rho);
}

TEST(ReconstructCloud, CardinalityEqualsValidPixels) {
  DisparityMap d(10, 10);
  std::mt19937_64 rng(2);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      if (rng() % 3) d(x, y) = 1.0 + (rng() % 5);
  const auto cloud = reconstruct_cloud(d, RgbImage(10, 10), bench_calibration());
  EXPECT_EQ(cloud.size(), d.valid_count());
  ASSERT_EQ(cloud.pixels.size(), cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) EXPECT_TRUE(d.valid(cloud.pixels[i].x(), cloud.pixels[i].y()));
}

TEST(ReconstructCloud, DimensionMismatchThrows) {
  DisparityMap d(8, 6);
  EXPECT_THROW(reconstruct_cloud(d, RgbImage(8, 5), bench_calibration()), Error);
}

TEST(ReconstructCloud, SyntheticHeightFieldRecovered) {
  const auto scene = make_skull_surface(3);
  const auto cloud = reconstruct_cloud(scene.disparity, scene.texture, scene.calib);
  ASSERT_EQ(cloud.size(), scene.disparity.valid_count());
  double sq = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& px = cloud.pixels[i];
    const double dz = cloud.points[i].z() - scene.height(px.y(), px.x());
    sq += dz * dz;
  }
  EXPECT_LE(std::sqrt(sq / cloud.size()), 0.05);
}

TEST(PinholeDepth, DirectSubstitution) {
  const PinholeFitParams p{1000.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(pinhole_depth(10.0, p), 100.0);
  EXPECT_DOUBLE_EQ(pinhole_depth(20.0, p), 50.0);
}

TEST(PinholeDepth, DecreasingBeyondPole) {
  const PinholeFitParams p{800.0, 3.0, 20.0};
  double prev = pinhole_depth(3.5, p);
  for (double h = 4.0; h < 60.0; h += 0.5) {
    const double z = pinhole_depth(h, p);
    EXPECT_LT(z, prev);
    prev = z;
  }
}

CalibrationParams optical_calibration() {
  CalibrationParams c = bench_calibration();
  c.optical.half_convergence = deg2rad(7.0);
  c.optical.magnification = 0.175;
  c.optical.baseline = 135.0;
  return c;
}

TEST(OrthographicDepth, ZeroDisparity) {
  const double phi = deg2rad(7.0);
  const double expected = 135.0 * std::cos(phi) / (2 * std::sin(phi));
  EXPECT_NEAR(orthographic_depth(0.0, optical_calibration()), expected, 1e-9);
  EXPECT_NEAR(expected, 549.7, 0.05);
}

TEST(OrthographicDepth, ConstantSlope) {
  const auto c = optical_calibration();
  const double slope = orthographic_depth(1.0, c) - orthographic_depth(0.0, c);
  for (double h = -20; h < 20; h += 3.7) {
    EXPECT_NEAR(orthographic_depth(h + 1, c) - orthographic_depth(h, c), slope, 1e-9);
  }
}

TEST(OrthographicDepth, ImpliedDepthResponse) {
  // dz/dh of the orthographic model is P_rho_x / (2 sin phi), so h_rho is its inverse.
  const auto c = optical_calibration();
  const double slope = orthographic_depth(1.0, c) - orthographic_depth(0.0, c);
  EXPECT_NEAR(implied_depth_response(deg2rad(7.0), c.p_rho_x), 1.0 / slope, 1e-9);
  EXPECT_NEAR(implied_depth_response(deg2rad(7.0), 1.0), 2 * std::sin(deg2rad(7.0)), 1e-15);
}

TEST(OrthographicDepth, MissingOpticsThrow) {
  EXPECT_THROW(orthographic_depth(0.0, bench_calibration()), Error);
}

TEST(Calibration, ValidateRejectsNonPositiveScales) {
  auto c = bench_calibration();
  c.h_rho = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = bench_calibration();
  c.p_rho_y = -1.0;
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace msreg
