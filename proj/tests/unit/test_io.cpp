#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "msreg/cloud_io.hpp"
#include "msreg/image_io.hpp"
#include "msreg/kdtree.hpp"
#include "msreg/serialization.hpp"
#include "msreg/synthgen.hpp"

namespace msreg {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("msreg_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

using ImageIo = TempDir;
using CloudIo = TempDir;
using JsonIo = TempDir;

TEST_F(ImageIo, PngRoundTrip) {
  const auto tex = make_texture(1, 40, 30);
  write_png(dir_ / "t.png", tex);
  EXPECT_EQ(read_png_rgb(dir_ / "t.png"), tex);
  const GrayImage g = to_grayscale(tex);
  write_png(dir_ / "g.png", g);
  EXPECT_TRUE((read_png_gray(dir_ / "g.png") == g).all());
}

TEST_F(ImageIo, PfmRoundTripKeepsInvalid) {
  DisparityMap d(5, 4);
  d(1, 2) = 3.25;
  d(4, 3) = -1.5;
  write_pfm(dir_ / "d.pfm", d);
  const auto back = read_pfm(dir_ / "d.pfm");
  ASSERT_EQ(back.width(), 5);
  ASSERT_EQ(back.height(), 4);
  EXPECT_EQ(back(1, 2), 3.25);
  EXPECT_EQ(back(4, 3), -1.5);
  EXPECT_EQ(back.valid_count(), 2u);
}

TEST_F(ImageIo, PfmHeaderIsLittleEndianGreyscale) {
  DisparityMap d(3, 2);
  write_pfm(dir_ / "d.pfm", d);
  std::ifstream in(dir_ / "d.pfm", std::ios::binary);
  std::string magic, dims, scale;
  std::getline(in, magic);
  std::getline(in, dims);
  std::getline(in, scale);
  EXPECT_EQ(magic, "Pf");
  EXPECT_EQ(dims, "3 2");
  EXPECT_LT(std::stod(scale), 0.0);
}

TEST_F(ImageIo, MissingFileIsIoError) {
  try {
    read_png_rgb(dir_ / "nope.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
    EXPECT_NE(std::string(e.what()).find("nope.png"), std::string::npos);
  }
}

TEST_F(ImageIo, GarbageIsFormatError) {
  std::ofstream(dir_ / "bad.pfm") << "P6\n1 1\n255\n";
  try {
    read_pfm(dir_ / "bad.pfm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
  }
}

TEST_F(CloudIo, PlyRoundTripWithLabels) {
  LabeledCloud c;
  c.push_back({1.5, -2.25, 3.0}, Rgb8{1, 2, 3}, 4);
  c.push_back({0.0, 0.125, -7.5}, Rgb8{255, 0, 128}, 0);
  write_ply(dir_ / "c.ply", c, true);
  const auto back = read_ply(dir_ / "c.ply");
  EXPECT_EQ(back.points, c.points);
  EXPECT_EQ(back.colors, c.colors);
  EXPECT_EQ(back.labels, c.labels);
}

TEST_F(CloudIo, PlyIsAsciiWithDeclaredProperties) {
  LabeledCloud c;
  c.push_back({1, 2, 3}, Rgb8{1, 2, 3});
  std::ostringstream os;
  write_ply(os, c, false);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("ply\nformat ascii 1.0\n", 0), 0u);
  EXPECT_NE(s.find("property float x"), std::string::npos);
  EXPECT_NE(s.find("property uchar red"), std::string::npos);
  EXPECT_EQ(s.find("label"), std::string::npos);
}

TEST_F(JsonIo, CalibrationRoundTripFlatKeys) {
  auto c = synthetic_calibration(320, 240);
  c.d_e = 500.0;
  const Json j = to_json(c);
  for (const char* key : {"h_rho", "P_rho_x", "P_rho_y", "c_x", "c_y", "d_e"}) EXPECT_TRUE(j.contains(key)) << key;
  write_json(dir_ / "calib.json", j);
  EXPECT_EQ(calibration_from_json(read_json(dir_ / "calib.json")), c);
}

TEST_F(JsonIo, TransformRoundTripRowMajor) {
  const RigidTransformd t(rotation_about_z(0.3), Eigen::Vector3d(1, 2, 3));
  const Json j = to_json(t);
  EXPECT_EQ(j.at("matrix").size(), 4u);
  EXPECT_DOUBLE_EQ(j.at("matrix")[0][3].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j.at("matrix")[3][3].get<double>(), 1.0);
  // Parsing re-projects onto SO(3), which may move the last bit.
  const auto back = transform_from_json(j);
  EXPECT_LE((back.matrix() - t.matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(JsonIo, NonRigidMatrixRejected) {
  Json j = to_json(RigidTransformd::identity());
  j["matrix"][0][0] = 2.0;
  EXPECT_THROW(transform_from_json(j), Error);
}

TEST_F(JsonIo, PaletteRoundTrip) {
  const auto p = LabelPalette::standard();
  const auto back = palette_from_json(to_json(p));
  ASSERT_EQ(back.entries().size(), p.entries().size());
  for (const auto& [id, e] : p.entries()) {
    EXPECT_EQ(back.at(id).rgb, e.rgb);
    EXPECT_EQ(back.at(id).role, e.role);
  }
}

TEST_F(JsonIo, CornersRoundTrip) {
  const auto obs = make_corner_observation(3, 4, 0.5, 0.077, 0.077, 0.1, 2);
  const auto back = corners_from_json(to_json(obs));
  EXPECT_EQ(back.rows, 3);
  EXPECT_EQ(back.cols, 4);
  EXPECT_EQ(back.square_size, 0.5);
  EXPECT_EQ(back.corners, obs.corners);
}

TEST_F(JsonIo, MalformedFileNamesPath) {
  std::ofstream(dir_ / "bad.json") << "{ not json";
  try {
    read_json(dir_ / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
  }
}

TEST(KdTree, MatchesBruteForce) {
  std::vector<Eigen::Vector3d> pts;
  std::uint64_t state = 12345;
  auto next = [&] {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(state >> 11) / static_cast<double>(1ULL << 53);
  };
  for (int i = 0; i < 2000; ++i) pts.emplace_back(next(), next(), next());
  const KdTree3 tree(pts);
  std::vector<KdTree3::Hit> hits;
  for (int q = 0; q < 200; ++q) {
    const Eigen::Vector3d p(next(), next(), next());
    std::vector<std::pair<double, std::uint32_t>> brute;
    for (std::uint32_t i = 0; i < pts.size(); ++i) brute.emplace_back((pts[i] - p).squaredNorm(), i);
    std::sort(brute.begin(), brute.end());
    const auto hit = tree.nearest(p);
    EXPECT_EQ(hit.index, brute[0].second);
    EXPECT_EQ(hit.dist2, brute[0].first);
    tree.knn(p, 8, hits);
    ASSERT_EQ(hits.size(), 8u);
    for (int k = 0; k < 8; ++k) EXPECT_EQ(hits[k].index, brute[k].second);
    EXPECT_FALSE(tree.nearest(p, brute[0].first * 0.5).found());
  }
}

}  // namespace
}  // namespace msreg
