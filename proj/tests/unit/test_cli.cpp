#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "commands.hpp"
#include "msreg/calibration.hpp"
#include "msreg/serialization.hpp"

namespace msreg {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("msreg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }
  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(Cli, NoCommandIsUsageError) { EXPECT_EQ(run({}), cli::kUsage); }

TEST_F(Cli, UnknownOptionIsUsageError) { EXPECT_EQ(run({"synth", "--bogus"}), cli::kUsage); }

TEST_F(Cli, MissingCalibrationNamesPath) {
  ASSERT_EQ(run({"synth", "--width", "96", "--height", "64", "--out", path("a")}), 0) << err_.str();
  fs::remove(dir_ / "a" / "calib.json");
  const int code = run({"reconstruct", "--bundle", path("a"), "--truth-disparity", "--out", path("r")});
  EXPECT_EQ(code, cli::kIo);
  EXPECT_NE(err_.str().find((dir_ / "a" / "calib.json").string()), std::string::npos) << err_.str();
}

TEST_F(Cli, MissingStepLogIsIoError) {
  EXPECT_EQ(run({"calibrate", "--steps", path("none.csv"), "--out", path("c")}), cli::kIo);
  EXPECT_NE(err_.str().find("none.csv"), std::string::npos);
}

TEST_F(Cli, SynthSameSeedByteIdentical) {
  ASSERT_EQ(run({"synth", "--seed", "7", "--width", "128", "--height", "96", "--out", path("a")}), 0);
  ASSERT_EQ(run({"synth", "--seed", "7", "--width", "128", "--height", "96", "--out", path("b")}), 0);
  for (const char* f : {"left.png", "right.png", "labels.png", "disparity.pfm", "calib.json", "pose.json", "model.ply"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(Cli, PresetsWriteTwentyOneStepLogs) {
  for (const char* preset : {"step-height-paper", "resolution-paper"}) {
    ASSERT_EQ(run({"synth", "--preset", preset, "--out", path(preset)}), 0) << err_.str();
    const auto readings = read_step_csv(dir_ / preset / "steps.csv");
    EXPECT_EQ(readings.size(), 210u) << preset;
    EXPECT_EQ(average_readings(readings).size(), 21u) << preset;
  }
}

TEST_F(Cli, CalibrateSelectsLinearOnPreset) {
  ASSERT_EQ(run({"synth", "--preset", "step-height-paper", "--out", path("s")}), 0);
  ASSERT_EQ(run({"calibrate", "--steps", path("s/steps.csv"), "--out", path("c")}), 0) << err_.str();
  const Json report = read_json(dir_ / "c" / "fit_report.json");
  EXPECT_EQ(report.at("winner").get<std::string>(), "linear");
}

TEST_F(Cli, RegisterJobsDoNotChangeTransforms) {
  ASSERT_EQ(run({"synth", "--sequence", "2", "--width", "160", "--height", "120", "--out", path("seq")}), 0)
      << err_.str();
  ASSERT_EQ(run({"register", "--sequence", path("seq"), "--truth-disparity", "--jobs", "1", "--out", path("j1")}), 0)
      << err_.str();
  ASSERT_EQ(run({"register", "--sequence", path("seq"), "--truth-disparity", "--jobs", "2", "--out", path("j2")}), 0)
      << err_.str();
  for (const char* f : {"frames/0000/transform.json", "frames/0001/transform.json", "results.json"}) {
    EXPECT_EQ(slurp(dir_ / "j1" / f), slurp(dir_ / "j2" / f)) << f;
  }
  ASSERT_EQ(run({"evaluate", "--results", path("j1"), "--reference", path("seq"), "--out", path("ev")}), 0)
      << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "ev" / "report.json"));
}

TEST_F(Cli, BenchEmitsFourRowsPerFrame) {
  ASSERT_EQ(run({"synth", "--sequence", "2", "--width", "160", "--height", "120", "--out", path("seq")}), 0);
  ASSERT_EQ(run({"bench", "--sequence", path("seq"), "--truth-disparity", "--noise", "0.05", "--out", path("b")}), 0)
      << err_.str();
  std::ifstream in(dir_ / "b" / "bench.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "frame,variant,e_t_mm,e_r_deg,latency_s");
  std::map<std::string, int> per_frame;
  std::set<std::string> variants;
  while (std::getline(in, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    ++per_frame[line.substr(0, c1)];
    variants.insert(line.substr(c1 + 1, c2 - c1 - 1));
  }
  EXPECT_EQ(per_frame, (std::map<std::string, int>{{"0", 4}, {"1", 4}}));
  EXPECT_EQ(variants, (std::set<std::string>{"R", "RCs", "RCo", "RCsCo"}));
}

TEST_F(Cli, ReplayReproducesDeterministicOutputs) {
  ASSERT_EQ(run({"synth", "--seed", "3", "--width", "96", "--height", "64", "--out", path("a")}), 0);
  const Json manifest = read_json(dir_ / "a" / "run.json");
  EXPECT_EQ(manifest.at("seed").get<std::uint64_t>(), 3u);
  EXPECT_FALSE(manifest.at("outputs").empty());
  EXPECT_EQ(run({"replay", path("a/run.json"), "--out", path("again")}), 0) << err_.str();
}

TEST_F(Cli, ReplayDetectsTamperedOutput) {
  ASSERT_EQ(run({"synth", "--seed", "3", "--width", "96", "--height", "64", "--out", path("a")}), 0);
  std::ofstream(dir_ / "a" / "pose.json") << "{}";
  EXPECT_EQ(run({"replay", path("a/run.json"), "--out", path("again")}), cli::kReplayMismatch);
  EXPECT_NE(err_.str().find("pose.json"), std::string::npos);
}

}  // namespace
}  // namespace msreg
