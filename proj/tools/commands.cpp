#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "config.hpp"
#include "msreg/calibration.hpp"
#include "msreg/cloud_io.hpp"
#include "msreg/distortion.hpp"
#include "msreg/evaluation.hpp"
#include "msreg/image_io.hpp"
#include "msreg/labeling.hpp"
#include "msreg/serialization.hpp"
#include "msreg/sgbm.hpp"
#include "msreg/synthgen.hpp"

namespace msreg::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kInvalidArgument;
    case ErrorKind::DimensionMismatch: return kDimensionMismatch;
    case ErrorKind::Io: return kIo;
    case ErrorKind::Format: return kFormat;
    case ErrorKind::Numeric: return kNumeric;
    case ErrorKind::Registration: return kRegistration;
  }
  return kInternal;
}

namespace {

const std::vector<Variant> kAllVariants{Variant::R, Variant::RCs, Variant::RCo, Variant::RCsCo};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string out = "out";

  std::string preset;
  int sequence = 0;
  int width = 320;
  int height = 240;
  double max_translation = 5.0;
  double max_rotation = 15.0;

  std::string steps;
  std::string corners;
  double significance = 0.01;
  double d_e = 0.0;

  std::string bundle;
  std::string sequence_dir;
  std::string model;
  bool truth_disparity = false;
  int median = 0;
  int jobs = 1;

  std::string results;
  std::string reference;
  std::vector<std::size_t> exclude;

  double noise = 0.0;
  double mislabel = 0.0;

  std::string manifest;
};

/// Everything a command touches, recorded into run.json.
class Run {
 public:
  Run(std::string command, std::vector<std::string> args, PipelineConfig config, fs::path out,
      std::optional<fs::path> config_path)
      : command_(std::move(command)), args_(std::move(args)), config_(std::move(config)), out_(std::move(out)),
        config_path_(std::move(config_path)) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + out_.string() + ": " + ec.message());
  }

  const PipelineConfig& config() const { return config_; }
  const fs::path& out() const { return out_; }
  fs::path path(const fs::path& rel) const { return out_ / rel; }

  void input(const fs::path& p) {
    std::lock_guard lock(mutex_);
    inputs_.push_back(p.string());
  }
  /// Records an output relative to the output directory.
  void output(const fs::path& rel, bool deterministic = true) {
    std::lock_guard lock(mutex_);
    outputs_.push_back({rel.generic_string(), deterministic});
  }

  void write_manifest() const {
    Json outputs = Json::array();
    auto sorted = outputs_;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [p, det] : sorted) outputs.push_back({{"path", p}, {"deterministic", det}});
    Json j{{"tool", "msreg"},
           {"version", kVersion},
           {"command", command_},
           {"args", args_},
           {"cwd", fs::current_path().string()},
           {"out", out_.string()},
           {"config_file", config_path_ ? Json(config_path_->string()) : Json(nullptr)},
           {"config", to_json(config_)},
           {"seed", config_.seed},
           {"inputs", inputs_},
           {"outputs", outputs}};
    write_json(out_ / "run.json", j);
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  PipelineConfig config_;
  fs::path out_;
  std::optional<fs::path> config_path_;
  std::vector<std::string> inputs_;
  std::vector<std::pair<std::string, bool>> outputs_;
  std::mutex mutex_;
};

std::string frame_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

void require(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw Error(ErrorKind::Io, std::string(what) + " not found: " + p.string());
}

LabelPalette load_palette(Run& run, const fs::path& bundle) {
  if (run.config().palette) {
    run.input(*run.config().palette);
    return palette_from_json(read_json(*run.config().palette));
  }
  if (fs::exists(bundle / "palette.json")) {
    run.input(bundle / "palette.json");
    return palette_from_json(read_json(bundle / "palette.json"));
  }
  return LabelPalette::standard();
}

CalibrationParams load_calibration(Run& run, const fs::path& bundle) {
  const fs::path p = run.config().calib ? *run.config().calib : bundle / "calib.json";
  require(p, "calibration file");
  run.input(p);
  return calibration_from_json(read_json(p));
}

LabelMask load_mask(const fs::path& path, const LabelPalette& palette) {
  LabelMask mask;
  mask.classes = read_png_gray(path);
  int count = 0;
  for (const auto& [id, e] : palette.entries()) count = std::max(count, int(id) + 1);
  mask.class_count = count;
  mask.validate();
  return mask;
}

struct ModelData {
  LabeledCloud cloud;
  ModelAnnotation annotation;
};

ModelData load_model(Run& run, const fs::path& path) {
  require(path, "model cloud");
  run.input(path);
  ModelData m;
  m.cloud = read_ply(path);
  m.annotation = m.cloud.labels;
  return m;
}

void write_model(const fs::path& path, const ModelCloud& model) {
  LabeledCloud c = model.cloud;
  c.labels = model.annotation;
  write_ply(path, c, true);
}

DisparityMap frame_disparity(Run& run, const fs::path& bundle, bool truth) {
  if (truth) {
    require(bundle / "disparity.pfm", "disparity raster");
    run.input(bundle / "disparity.pfm");
    return read_pfm(bundle / "disparity.pfm");
  }
  require(bundle / "left.png", "left image");
  require(bundle / "right.png", "right image");
  run.input(bundle / "left.png");
  run.input(bundle / "right.png");
  return compute_disparity(to_grayscale(read_png_rgb(bundle / "left.png")),
                           to_grayscale(read_png_rgb(bundle / "right.png")), run.config().sgbm);
}

struct SequenceIndex {
  fs::path model;
  std::vector<fs::path> frames;
};

SequenceIndex read_index(const fs::path& dir) {
  require(dir / "index.json", "sequence index");
  const Json j = read_json(dir / "index.json");
  SequenceIndex idx;
  idx.model = dir / j.at("model").get<std::string>();
  for (const auto& f : j.at("frames")) idx.frames.push_back(dir / f.get<std::string>());
  return idx;
}

/// Runs fn(i) for i < n on `jobs` workers; the first error is rethrown after
/// all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const int count = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> threads;
  for (int t = 1; t < count; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

RegistrationParams registration_params(const PipelineConfig& config, Variant variant, std::size_t frame) {
  RegistrationParams p = config.registration;
  p.variant = variant;
  p.ransac.rng_seed = config.seed + frame;
  return p;
}

// ---------------------------------------------------------------- synth

void cmd_synth(Run& run, const Options& o, std::ostream& out) {
  const auto& cfg = run.config();
  const std::uint64_t seed = cfg.seed;
  if (!o.preset.empty()) {
    double increment = 0.0;
    if (o.preset == "step-height-paper") {
      increment = 0.5;
    } else if (o.preset == "resolution-paper") {
      increment = 0.05;
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown preset '" + o.preset + "'");
    }
    const CalibrationParams calib = synthetic_calibration(o.width, o.height);
    const auto readings = make_step_readings(calib.h_rho, calib.d_e, 21, increment, 0.05, 10, seed);
    write_step_csv(run.path("steps.csv"), readings);
    run.output("steps.csv");
    out << "wrote " << readings.size() << " readings (21 steps x " << increment << " mm)\n";
    return;
  }

  SkullParams params;
  params.width = o.width;
  params.height = o.height;
  const LabelPalette palette = LabelPalette::standard();
  const char* bundle_files[] = {"left.png", "right.png", "labels.png", "valid.png",
                                "disparity.pfm", "calib.json", "pose.json", "palette.json"};

  if (o.sequence > 0) {
    const SyntheticScene reference = make_skull_surface(seed, params);
    write_model(run.path("model.ply"), sample_model(reference, cfg.model_spacing, 0.6, RigidTransformd::identity()));
    run.output("model.ply");
    Json frames = Json::array();
    for (int i = 0; i < o.sequence; ++i) frames.push_back("frames/" + frame_name(i));
    parallel_for(static_cast<std::size_t>(o.sequence), o.jobs, [&](std::size_t i) {
      const RigidTransformd pose =
          random_inplane_pose(seed * 1000003ULL + i, o.max_translation, o.max_rotation, true);
      const SyntheticScene scene = render_posed_scene(seed, params, pose);
      const fs::path rel = fs::path("frames") / frame_name(i);
      write_scene_bundle(run.path(rel), scene, render_stereo(scene), palette);
      for (const char* f : bundle_files) run.output(rel / f);
    });
    write_json(run.path("index.json"), Json{{"model", "model.ply"}, {"frames", frames}});
    run.output("index.json");
    out << "wrote sequence of " << o.sequence << " frames\n";
    return;
  }

  const SyntheticScene scene = make_skull_surface(seed, params);
  write_scene_bundle(run.out(), scene, render_stereo(scene), palette);
  for (const char* f : bundle_files) run.output(f);
  write_model(run.path("model.ply"), sample_model(scene, cfg.model_spacing, 0.1, RigidTransformd::identity()));
  run.output("model.ply");
  write_json(run.path("corners.json"),
             to_json(make_corner_observation(7, 9, 0.5, scene.calib.p_rho_x, scene.calib.p_rho_y, 0.1, seed)));
  run.output("corners.json");
  out << "wrote scene bundle " << o.width << "x" << o.height << "\n";
}

// ---------------------------------------------------------------- calibrate

void cmd_calibrate(Run& run, const Options& o, std::ostream& out) {
  require(o.steps, "step log");
  run.input(o.steps);
  const auto readings = read_step_csv(o.steps);
  const auto samples = average_readings(readings);
  const ModelComparison cmp = compare_models(samples, o.significance);
  write_json(run.path("fit_report.json"), to_json(cmp));
  run.output("fit_report.json");
  out << "linear R^2 " << cmp.linear.r_squared << ", rmse " << cmp.linear.rmse << " mm; pinhole R^2 "
      << cmp.pinhole.r_squared << "; selected " << to_string(cmp.winner) << "\n";

  if (!o.corners.empty()) {
    require(o.corners, "corner file");
    run.input(o.corners);
    const auto [px, py] = calibrate_pixel_size(corners_from_json(read_json(o.corners)));
    CalibrationParams calib;
    calib.h_rho = std::get<LinearModel>(cmp.linear.params).h_rho;
    calib.p_rho_x = px;
    calib.p_rho_y = py;
    calib.c_x = 0.5 * (o.width - 1);
    calib.c_y = 0.5 * (o.height - 1);
    calib.d_e = o.d_e;
    calib.validate();
    write_json(run.path("calib.json"), to_json(calib));
    run.output("calib.json");
  }
}

// ---------------------------------------------------------------- reconstruct

void cmd_reconstruct(Run& run, const Options& o, std::ostream& out) {
  const fs::path bundle = o.bundle;
  require(bundle, "bundle directory");
  const CalibrationParams calib = load_calibration(run, bundle);
  DisparityMap d = frame_disparity(run, bundle, o.truth_disparity);
  if (o.median > 1) d = median_filter_disparity(d, o.median);
  run.input(bundle / "left.png");
  const RgbImage left = read_png_rgb(bundle / "left.png");
  std::optional<LabelMask> mask;
  if (fs::exists(bundle / "labels.png")) {
    run.input(bundle / "labels.png");
    mask = load_mask(bundle / "labels.png", load_palette(run, bundle));
  }
  LabeledCloud cloud = reconstruct_cloud(d, left, calib, mask ? &*mask : nullptr);
  if (run.config().distortion) {
    run.input(*run.config().distortion_field);
    const auto field = read_field_csv(*run.config().distortion_field);
    const auto pixels = cloud.pixels;
    cloud = compensate(cloud, pixels, field);
  }
  write_pfm(run.path("disparity.pfm"), d);
  run.output("disparity.pfm");
  write_ply(run.path("cloud.ply"), cloud, mask.has_value());
  run.output("cloud.ply");
  out << "reconstructed " << cloud.size() << " points\n";
}

// ---------------------------------------------------------------- register

struct FrameInputs {
  Frame frame;
  CalibrationParams calib;
  LabelPalette palette;
};

FrameInputs load_frame(Run& run, const fs::path& bundle, bool truth) {
  require(bundle, "frame bundle");
  FrameInputs in;
  in.calib = load_calibration(run, bundle);
  in.palette = load_palette(run, bundle);
  in.frame.disparity = frame_disparity(run, bundle, truth);
  require(bundle / "left.png", "left image");
  require(bundle / "labels.png", "label mask");
  run.input(bundle / "left.png");
  run.input(bundle / "labels.png");
  in.frame.rgb = read_png_rgb(bundle / "left.png");
  in.frame.mask = load_mask(bundle / "labels.png", in.palette);
  return in;
}

Json transforms_json(const RegistrationResult& r) {
  return Json{{"refined", to_json(r.refined)}, {"init", to_json(r.init)}};
}

void cmd_register(Run& run, const Options& o, std::ostream& out) {
  if (o.bundle.empty() == o.sequence_dir.empty()) {
    throw Error(ErrorKind::InvalidArgument, "register needs exactly one of --bundle or --sequence");
  }
  if (!o.bundle.empty()) {
    const ModelData model = load_model(run, o.model.empty() ? fs::path(o.bundle) / "model.ply" : fs::path(o.model));
    const FrameInputs in = load_frame(run, o.bundle, o.truth_disparity);
    const auto result = register_frame(model.cloud, model.annotation, in.frame, in.palette, in.calib,
                                       registration_params(run.config(), run.config().variant, 0));
    write_json(run.path("transform.json"), transforms_json(result));
    run.output("transform.json");
    write_json(run.path("diagnostics.json"), to_json(result.diagnostics));
    run.output("diagnostics.json", false);
    out << "fitness " << result.diagnostics.fitness << ", rmse " << result.diagnostics.rmse << " mm\n";
    return;
  }

  const SequenceIndex idx = read_index(o.sequence_dir);
  run.input(fs::path(o.sequence_dir) / "index.json");
  const ModelData model = load_model(run, o.model.empty() ? idx.model : fs::path(o.model));
  Json frames = Json::array();
  for (std::size_t i = 0; i < idx.frames.size(); ++i) frames.push_back("frames/" + frame_name(i));
  parallel_for(idx.frames.size(), o.jobs, [&](std::size_t i) {
    const FrameInputs in = load_frame(run, idx.frames[i], o.truth_disparity);
    RegistrationResult result;
    try {
      result = register_frame(model.cloud, model.annotation, in.frame, in.palette, in.calib,
                              registration_params(run.config(), run.config().variant, i));
    } catch (const Error& e) {
      throw Error(e.kind(), "frame " + frame_name(i) + ": " + e.what());
    }
    const fs::path rel = fs::path("frames") / frame_name(i);
    fs::create_directories(run.path(rel));
    write_json(run.path(rel / "transform.json"), transforms_json(result));
    run.output(rel / "transform.json");
    write_json(run.path(rel / "diagnostics.json"), to_json(result.diagnostics));
    run.output(rel / "diagnostics.json", false);
  });
  write_json(run.path("results.json"), Json{{"variant", to_string(run.config().variant)}, {"frames", frames}});
  run.output("results.json");
  out << "registered " << idx.frames.size() << " frames\n";
}

// ---------------------------------------------------------------- evaluate

double latency_of(const fs::path& diagnostics) {
  if (!fs::exists(diagnostics)) return 0.0;
  double ms = 0.0;
  const Json j = read_json(diagnostics);
  for (const auto& s : j.at("stages")) ms += s.at("ms").get<double>();
  return ms / 1000.0;
}

Json stats_json(const ChannelStats& s) {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  return Json{{"mean", num(s.mean)}, {"std", num(s.std)}, {"median", num(s.median)},
              {"q1", num(s.q1)},     {"q3", num(s.q3)},   {"count", s.count}};
}

void cmd_evaluate(Run& run, const Options& o, std::ostream& out) {
  const fs::path results = o.results, reference = o.reference;
  require(results, "results directory");
  require(reference, "reference directory");
  std::vector<fs::path> result_dirs, reference_dirs;
  if (fs::exists(results / "results.json")) {
    run.input(results / "results.json");
    const Json listing = read_json(results / "results.json");
    for (const auto& f : listing.at("frames")) {
      result_dirs.push_back(results / f.get<std::string>());
    }
    const SequenceIndex idx = read_index(reference);
    reference_dirs = idx.frames;
  } else {
    result_dirs.push_back(results);
    reference_dirs.push_back(reference);
  }
  if (result_dirs.size() != reference_dirs.size()) {
    throw Error(ErrorKind::DimensionMismatch, "results and reference frame counts differ");
  }
  std::vector<PoseError> errors;
  std::vector<double> latencies;
  for (std::size_t i = 0; i < result_dirs.size(); ++i) {
    run.input(result_dirs[i] / "transform.json");
    run.input(reference_dirs[i] / "pose.json");
    const RigidTransformd refined = transform_from_json(read_json(result_dirs[i] / "transform.json").at("refined"));
    // pose.json maps model to camera; the registration maps camera to model.
    const RigidTransformd truth = transform_from_json(read_json(reference_dirs[i] / "pose.json")).inverse();
    errors.push_back(pose_error(refined, truth));
    latencies.push_back(latency_of(result_dirs[i] / "diagnostics.json"));
  }

  SequenceReport report;
  if (errors.size() >= 2) {
    report = sequence_statistics(errors, latencies, o.exclude);
  } else {
    report.frames = errors;
    report.latencies = latencies;
    report.mean_latency = latencies.front();
  }
  std::ofstream csv(run.path("sequence.csv"));
  if (!csv) throw Error(ErrorKind::Io, "cannot write " + run.path("sequence.csv").string());
  write_sequence_csv(csv, report);
  run.output("sequence.csv", false);

  write_json(run.path("timing.json"), Json{{"mean_latency_s", report.mean_latency}, {"latency_s", latencies}});
  run.output("timing.json", false);
  Json j{{"frames", errors.size()}, {"outliers", report.outliers}};
  if (errors.size() >= 2) {
    j["e_t_mm"] = {{"raw", stats_json(report.t_raw)}, {"retained", stats_json(report.t_retained)}};
    j["e_r_deg"] = {{"raw", stats_json(report.r_raw)}, {"retained", stats_json(report.r_retained)}};
  }
  write_json(run.path("report.json"), j);
  run.output("report.json");
  if (errors.size() >= 2) {
    out << "e_t " << report.t_retained.mean << " +- " << report.t_retained.std << " mm, e_r "
        << report.r_retained.mean << " +- " << report.r_retained.std << " deg (" << report.outliers.size()
        << " outliers)\n";
  } else {
    out << "e_t " << errors[0].e_t << " mm, e_r " << errors[0].e_r << " deg\n";
  }
}

// ---------------------------------------------------------------- bench

void cmd_bench(Run& run, const Options& o, std::ostream& out) {
  require(o.sequence_dir, "sequence directory");
  const SequenceIndex idx = read_index(o.sequence_dir);
  run.input(fs::path(o.sequence_dir) / "index.json");
  const ModelData model = load_model(run, o.model.empty() ? idx.model : fs::path(o.model));
  const std::size_t n = idx.frames.size();
  struct Row {
    PoseError error;
    double latency = 0.0;
  };
  std::vector<std::array<Row, 4>> rows(n);

  parallel_for(n, o.jobs, [&](std::size_t i) {
    const FrameInputs in = load_frame(run, idx.frames[i], o.truth_disparity);
    const RigidTransformd truth = transform_from_json(read_json(idx.frames[i] / "pose.json")).inverse();
    run.input(idx.frames[i] / "pose.json");
    const LabeledCloud cloud_a = colorize_model(model.cloud, model.annotation, in.palette);
    LabeledCloud cloud_b = mask_cloud(in.frame.disparity, in.frame.rgb, in.frame.mask, in.palette, in.calib);
    const std::uint64_t frame_seed = run.config().seed * 1000003ULL + i;
    add_point_noise(cloud_b, o.noise, frame_seed);
    mislabel_cloud(cloud_b, o.mislabel, in.palette, frame_seed ^ 0x5bd1e995u);
    for (std::size_t v = 0; v < kAllVariants.size(); ++v) {
      const auto start = std::chrono::steady_clock::now();
      RegistrationResult r;
      try {
        r = register_clouds(cloud_a, cloud_b, registration_params(run.config(), kAllVariants[v], i));
      } catch (const Error& e) {
        throw Error(e.kind(), "frame " + frame_name(i) + " variant " + to_string(kAllVariants[v]) + ": " + e.what());
      }
      rows[i][v] = {pose_error(r.refined, truth),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    }
  });

  std::ofstream csv(run.path("bench.csv"));
  if (!csv) throw Error(ErrorKind::Io, "cannot write " + run.path("bench.csv").string());
  csv << "frame,variant,e_t_mm,e_r_deg,latency_s\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < kAllVariants.size(); ++v) {
      csv << i << ',' << to_string(kAllVariants[v]) << ',' << rows[i][v].error.e_t << ',' << rows[i][v].error.e_r
          << ',' << rows[i][v].latency << '\n';
    }
  }
  csv.close();
  run.output("bench.csv", false);

  Json summary = Json::object();
  for (std::size_t v = 0; v < kAllVariants.size(); ++v) {
    std::vector<double> et, er;
    for (const auto& r : rows) {
      et.push_back(r[v].error.e_t);
      er.push_back(r[v].error.e_r);
    }
    const ChannelStats st = channel_stats(et), sr = channel_stats(er);
    summary[to_string(kAllVariants[v])] = {{"e_t_mm", stats_json(st)}, {"e_r_deg", stats_json(sr)}};
    out << std::left << std::setw(6) << to_string(kAllVariants[v]) << " median e_t " << st.median << " mm (IQR "
        << st.q3 - st.q1 << "), median e_r " << sr.median << " deg (IQR " << sr.q3 - sr.q1 << ")\n";
  }
  write_json(run.path("bench_summary.json"), summary);
  run.output("bench_summary.json");
}

// ---------------------------------------------------------------- replay

int cmd_replay(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path manifest_path = o.manifest;
  const Json m = read_json(manifest_path);
  std::vector<std::string> args = m.at("args").get<std::vector<std::string>>();
  const fs::path original = fs::path(m.at("cwd").get<std::string>()) / m.at("out").get<std::string>();
  const fs::path target = fs::absolute(o.out);
  bool replaced = false;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--out") {
      args[i + 1] = target.string();
      replaced = true;
    }
  }
  if (!replaced) {
    args.push_back("--out");
    args.push_back(target.string());
  }
  const fs::path cwd = fs::current_path();
  fs::current_path(m.at("cwd").get<std::string>());
  int code = kInternal;
  try {
    code = run(args, out, err);
  } catch (...) {
    fs::current_path(cwd);
    throw;
  }
  fs::current_path(cwd);
  if (code != kOk) return code;

  std::size_t compared = 0, mismatched = 0;
  for (const auto& entry : m.at("outputs")) {
    if (!entry.at("deterministic").get<bool>()) continue;
    const std::string rel = entry.at("path").get<std::string>();
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    ++compared;
    if (!fs::exists(target / rel) || slurp(original / rel) != slurp(target / rel)) {
      ++mismatched;
      err << "replay mismatch: " << rel << "\n";
    }
  }
  out << "replayed " << m.at("command").get<std::string>() << ": " << compared - mismatched << "/" << compared
      << " outputs identical\n";
  return mismatched == 0 ? kOk : kReplayMismatch;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stereo-microscopy depth perception and label-coloured registration"};
  app.name("msreg");
  app.require_subcommand(1);
  Options o;
  std::string seed_text;
  app.add_option("--config", o.config, "JSON pipeline configuration");
  app.add_option("--seed", seed_text, "RNG seed (overrides the config)");
  app.add_option("--variant", o.variant, "R, RCs, RCo or RCsCo");
  app.add_option("--out", o.out, "output directory");

  auto* synth = app.add_subcommand("synth", "generate synthetic scenes, sequences or step logs")->fallthrough();
  synth->add_option("--preset", o.preset, "step-height-paper or resolution-paper");
  synth->add_option("--sequence", o.sequence, "number of posed frames");
  synth->add_option("--width", o.width);
  synth->add_option("--height", o.height);
  synth->add_option("--max-translation", o.max_translation, "mm, sequence poses");
  synth->add_option("--max-rotation", o.max_rotation, "deg, sequence poses");
  synth->add_option("--jobs", o.jobs);

  auto* calibrate = app.add_subcommand("calibrate", "fit depth models to a step log")->fallthrough();
  calibrate->add_option("--steps", o.steps, "step log CSV")->required();
  calibrate->add_option("--corners", o.corners, "checkerboard corners JSON");
  calibrate->add_option("--significance", o.significance);
  calibrate->add_option("--d-e", o.d_e, "effective working distance for calib.json, mm");
  calibrate->add_option("--width", o.width);
  calibrate->add_option("--height", o.height);

  auto* reconstruct = app.add_subcommand("reconstruct", "disparity and point cloud for a bundle")->fallthrough();
  reconstruct->add_option("--bundle", o.bundle)->required();
  reconstruct->add_flag("--truth-disparity", o.truth_disparity, "use disparity.pfm instead of matching");
  reconstruct->add_option("--median", o.median, "median filter window");

  auto* reg = app.add_subcommand("register", "register a model to a bundle or a sequence")->fallthrough();
  reg->add_option("--bundle", o.bundle);
  reg->add_option("--sequence", o.sequence_dir);
  reg->add_option("--model", o.model);
  reg->add_flag("--truth-disparity", o.truth_disparity);
  reg->add_option("--jobs", o.jobs);

  auto* evaluate = app.add_subcommand("evaluate", "pose errors against reference poses")->fallthrough();
  evaluate->add_option("--results", o.results)->required();
  evaluate->add_option("--reference", o.reference)->required();
  evaluate->add_option("--exclude", o.exclude, "frame indices to exclude")->delimiter(',');

  auto* bench = app.add_subcommand("bench", "all four method variants per frame")->fallthrough();
  bench->add_option("--sequence", o.sequence_dir)->required();
  bench->add_option("--model", o.model);
  bench->add_flag("--truth-disparity", o.truth_disparity);
  bench->add_option("--noise", o.noise, "point noise added to Cloud B, mm");
  bench->add_option("--mislabel", o.mislabel, "fraction of Cloud B labels flipped");
  bench->add_option("--jobs", o.jobs);

  auto* replay = app.add_subcommand("replay", "re-run a run.json manifest and compare outputs")->fallthrough();
  replay->add_option("manifest", o.manifest)->required();

  std::vector<std::string> argv_store{"msreg"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "msreg: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (replay->parsed()) return cmd_replay(o, out, err);

    PipelineConfig config = default_config();
    std::optional<fs::path> config_path;
    if (!o.config.empty()) {
      config_path = o.config;
      if (!fs::exists(*config_path)) throw Error(ErrorKind::Io, "config file not found: " + o.config);
      config = load_config(*config_path);
    }
    if (!seed_text.empty()) {
      try {
        std::size_t used = 0;
        config.seed = std::stoull(seed_text, &used);
        if (used != seed_text.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "seed must be a non-negative integer: " + seed_text);
      }
    }
    if (!o.variant.empty()) config.variant = variant_from_string(o.variant);
    if (o.jobs < 1) throw Error(ErrorKind::InvalidArgument, "--jobs must be >= 1");

    const std::string name = app.get_subcommands().front()->get_name();
    Run r(name, args, config, o.out, config_path);
    if (synth->parsed()) cmd_synth(r, o, out);
    if (calibrate->parsed()) cmd_calibrate(r, o, out);
    if (reconstruct->parsed()) cmd_reconstruct(r, o, out);
    if (reg->parsed()) cmd_register(r, o, out);
    if (evaluate->parsed()) cmd_evaluate(r, o, out);
    if (bench->parsed()) cmd_bench(r, o, out);
    r.write_manifest();
    return kOk;
  } catch (const Error& e) {
    err << "msreg: error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "msreg: internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace msreg::cli
