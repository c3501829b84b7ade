#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "msreg/calibration.hpp"
#include "msreg/evaluation.hpp"
#include "msreg/projection.hpp"
#include "msreg/synthgen.hpp"

namespace msreg {
namespace {

TEST(SkullSurface, SameSeedSameScene) {
  const auto a = make_skull_surface(7), b = make_skull_surface(7);
  EXPECT_TRUE((a.height == b.height).all());
  EXPECT_EQ(a.texture, b.texture);
  EXPECT_TRUE((a.labels.classes == b.labels.classes).all());
  const auto c = make_skull_surface(8);
  EXPECT_FALSE((a.height == c.height).all());
}

TEST(SkullSurface, SixFeatureClassesPlusUndefined) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto s = make_skull_surface(seed);
    std::set<int> ids(s.labels.classes.data(), s.labels.classes.data() + s.labels.classes.size());
    EXPECT_EQ(ids, (std::set<int>{0, 1, 2, 3, 4, 5, 6})) << seed;
  }
}

TEST(SkullSurface, NormalVariationAtLeastTwentyDegrees) {
  const auto s = make_skull_surface(5);
  const auto& c = s.calib;
  double max_angle = 0.0;
  std::vector<Eigen::Vector3d> normals;
  for (int y = 0; y < s.labels.height(); y += 8)
    for (int x = 0; x < s.labels.width(); x += 8)
      normals.push_back(s.geometry.normal((x - c.c_x) * c.p_rho_x, (y - c.c_y) * c.p_rho_y));
  for (const auto& a : normals) {
    EXPECT_LT(a.z(), 0.0);
    for (const auto& b : normals) max_angle = std::max(max_angle, std::acos(std::clamp(a.dot(b), -1.0, 1.0)));
  }
  EXPECT_GE(rad2deg(max_angle), 20.0);
}

TEST(SkullSurface, DisparityIsExactInverseOfLinearModel) {
  const auto s = make_skull_surface(6);
  for (int y = 0; y < s.disparity.height(); ++y)
    for (int x = 0; x < s.disparity.width(); ++x)
      ASSERT_EQ(s.disparity(x, y), s.calib.h_rho * (s.height(y, x) - s.calib.d_e));
}

TEST(SkullSurface, ClosureThroughReconstruction) {
  const auto s = make_skull_surface(6);
  const auto cloud = reconstruct_cloud(s.disparity, s.texture, s.calib);
  double worst = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    worst = std::max(worst, std::abs(cloud.points[i].z() - s.height(cloud.pixels[i].y(), cloud.pixels[i].x())));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(SkullSurface, TextureMeetsContrastFloor) {
  const auto tex = make_texture(4, 320, 240, 30.0);
  for (int by = 0; by + 8 <= 240; by += 8) {
    for (int bx = 0; bx + 8 <= 320; bx += 8) {
      int lo = 255, hi = 0;
      for (int y = by; y < by + 8; ++y)
        for (int x = bx; x < bx + 8; ++x) {
          lo = std::min<int>(lo, tex.pixel(x, y)[0]);
          hi = std::max<int>(hi, tex.pixel(x, y)[0]);
        }
      EXPECT_GE(hi - lo, 30) << bx << "," << by;
    }
  }
}

TEST(RenderStereo, FlatSceneIsUniformShift) {
  const int h0 = 6;
  const auto s = make_flat_scene(2, 64, 32, h0);
  const auto pair = render_stereo(s);
  for (int y = 0; y < 32; ++y) {
    for (int x = h0; x < 64; ++x) {
      EXPECT_EQ(pair.right.rgb(x - h0, y), pair.left.rgb(x, y));
      EXPECT_EQ(pair.valid(y, x), 1);
    }
    for (int x = 0; x < h0; ++x) EXPECT_EQ(pair.valid(y, x), 0);
  }
}

TEST(RenderStereo, DisparityBeyondWidthThrows) {
  const auto s = make_flat_scene(2, 16, 8, 20.0);
  EXPECT_THROW(render_stereo(s), Error);
}

TEST(StepLog, NoiselessFitRecoversResponse) {
  for (double h_rho : {1.0, 3.165, 12.0}) {
    const auto log = make_step_log(h_rho, 0.0, 21, 0.5, 0.0, 10, 1);
    EXPECT_NEAR(std::get<LinearModel>(fit_linear(log).params).h_rho, h_rho, 1e-9 * h_rho);
  }
}

TEST(StepLog, StepProtocolShape) {
  const auto log = make_step_log(3.165, 0.0, 21, 0.5, 0.05, 10, 1);
  ASSERT_EQ(log.size(), 21u);
  EXPECT_DOUBLE_EQ(log.front().z_true, 0.0);
  EXPECT_DOUBLE_EQ(log.back().z_true, 10.0);
  for (const auto& s : log) EXPECT_EQ(s.repeats, 10);
}

TEST(StepLog, ResolutionProtocolShape) {
  const auto log = make_step_log(3.165, 0.0, 21, 0.05, 0.05, 10, 1);
  ASSERT_EQ(log.size(), 21u);
  EXPECT_NEAR(log.back().z_true, 1.0, 1e-12);
  EXPECT_NEAR(log[1].z_true, 0.05, 1e-12);
}

TEST(PerturbPose, IdentityWithoutNoiseIsExact) {
  PerturbOptions opts;
  opts.seed = 3;
  const auto pair = perturb_pose(make_skull_surface(3), RigidTransformd::identity(), 0.0, 0.0, opts);
  EXPECT_TRUE(pair.truth == RigidTransformd::identity());
  ASSERT_FALSE(pair.cloud_b.empty());
  const auto scene = make_skull_surface(3);
  for (std::size_t i = 0; i < pair.cloud_b.size(); i += 97) {
    const auto& p = pair.cloud_b.points[i];
    EXPECT_NEAR(p.z(), scene.geometry.depth(p.x(), p.y()), 1e-9);
  }
}

TEST(PerturbPose, MislabelsExactFraction) {
  PerturbOptions opts;
  opts.seed = 4;
  const auto scene = make_skull_surface(4);
  const auto clean = perturb_pose(scene, RigidTransformd::identity(), 0.0, 0.0, opts);
  const auto dirty = perturb_pose(scene, RigidTransformd::identity(), 0.0, 0.1, opts);
  ASSERT_EQ(clean.cloud_b.size(), dirty.cloud_b.size());
  std::size_t flipped = 0;
  const auto palette = LabelPalette::standard();
  for (std::size_t i = 0; i < clean.cloud_b.size(); ++i) {
    if (clean.cloud_b.labels[i] != dirty.cloud_b.labels[i]) {
      ++flipped;
      EXPECT_NE(dirty.cloud_b.labels[i], palette.undefined_id());
    }
    EXPECT_EQ(dirty.cloud_b.colors[i], palette.at(dirty.cloud_b.labels[i]).rgb);
  }
  EXPECT_EQ(flipped, static_cast<std::size_t>(std::llround(0.1 * clean.cloud_b.size())));
}

TEST(PerturbPose, ModelMovedByDelta) {
  const RigidTransformd delta(rotation_about_z(deg2rad(10.0)), Eigen::Vector3d(3.0, 0.0, 0.0));
  PerturbOptions opts;
  opts.seed = 5;
  const auto pair = perturb_pose(make_skull_surface(5), delta, 0.0, 0.0, opts);
  EXPECT_TRUE(pair.truth == delta);
  const auto scene = make_skull_surface(5);
  for (std::size_t i = 0; i < pair.cloud_a.size(); i += 53) {
    const Eigen::Vector3d model = delta.inverse() * pair.cloud_a.points[i];
    EXPECT_NEAR(model.z(), scene.geometry.depth(model.x(), model.y()), 1e-9);
  }
}

TEST(PosedScene, RasterMatchesTransformedGeometry) {
  const RigidTransformd pose(rotation_about_z(deg2rad(12.0)), Eigen::Vector3d(0.8, -0.4, 0.3));
  const auto s = render_posed_scene(9, SkullParams{}, pose);
  const auto cloud = reconstruct_cloud(s.disparity, s.texture, s.calib);
  for (std::size_t i = 0; i < cloud.size(); i += 101) {
    const Eigen::Vector3d model = pose.inverse() * cloud.points[i];
    EXPECT_NEAR(model.z(), s.geometry.depth(model.x(), model.y()), 1e-9);
  }
}

TEST(PosedScene, TiltedPoseRejected) {
  const RigidTransformd tilt(Eigen::AngleAxisd(0.1, Eigen::Vector3d::UnitX()).toRotationMatrix(), Eigen::Vector3d::Zero());
  EXPECT_THROW(render_posed_scene(1, SkullParams{}, tilt), Error);
}

TEST(RandomPose, WithinBounds) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = random_inplane_pose(s, 5.0, 15.0, s % 2 == 0);
    EXPECT_LE(p.translation().norm(), 5.0 + 1e-12);
    EXPECT_LE(std::abs(rad2deg(inplane_angle(p.rotation()))), 15.0 + 1e-9);
    EXPECT_NEAR(p.rotation()(2, 2), 1.0, 1e-12);
    if (s % 2 == 0) EXPECT_EQ(p.translation().z(), 0.0);
  }
}

TEST(Perspective, DominanceAtBenchConfiguration) {
  const double phi = deg2rad(7.0);
  const auto c = perspective_dominance(500.0, phi, 135.0, 20.8, 5.0);
  EXPECT_NEAR(c.reference, 500.0 * std::cos(phi) + 67.5 * std::sin(phi), 1e-9);
  EXPECT_NEAR(c.reference, 503.0, 2.0);
  EXPECT_NEAR(c.max_variation, 20.8 * std::sin(phi) + 5.0 * std::cos(phi), 1e-12);
  // The corner of the volume is a sample, so the sampled maximum is exact.
  EXPECT_NEAR(c.max_relative_error, c.max_variation / c.reference, 1e-12);
  EXPECT_LT(c.max_relative_error, 0.03);
}

TEST(Perspective, FullFieldOfViewStillDominated) {
  // 41.54 mm field and 10 mm depth of field taken as one-sided extents.
  const auto c = perspective_dominance(500.0, deg2rad(7.0), 135.0, 41.54, 10.0);
  EXPECT_NEAR(c.max_variation, 15.0, 0.1);
  EXPECT_GT(c.reference / c.max_variation, 30.0);
}

TEST(CornerObservation, GridShape) {
  const auto obs = make_corner_observation(7, 9, 0.5, 0.077, 0.077, 0.0, 1);
  EXPECT_EQ(obs.corners.size(), 63u);
  EXPECT_NEAR((obs.corners[1] - obs.corners[0]).x(), 0.5 / 0.077, 1e-9);
}

}  // namespace
}  // namespace msreg
