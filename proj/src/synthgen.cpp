#include "msreg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "msreg/image_io.hpp"
#include "msreg/serialization.hpp"

namespace msreg {

namespace {

constexpr double kPixelSize = 0.077;           // mm
constexpr double kHalfConvergence = deg2rad(7.0);
constexpr double kBaseline = 135.0;            // mm

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

CalibrationParams synthetic_calibration(int width, int height) {
  CalibrationParams c;
  c.p_rho_x = c.p_rho_y = kPixelSize;
  c.h_rho = implied_depth_response(kHalfConvergence, kPixelSize);
  c.c_x = 0.5 * (width - 1);
  c.c_y = 0.5 * (height - 1);
  c.d_e = 0.0;
  c.optical.half_convergence = kHalfConvergence;
  c.optical.baseline = kBaseline;
  return c;
}

bool SkullGeometry::Ellipse::contains(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d d = p - center;
  const double u = std::cos(angle) * d.x() + std::sin(angle) * d.y();
  const double v = -std::sin(angle) * d.x() + std::cos(angle) * d.y();
  return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
}

SkullGeometry::SkullGeometry(std::uint64_t seed, const SkullParams& params, double s) : params_(params) {
  std::mt19937_64 rng(seed);
  bumps_.push_back({Eigen::Vector2d(uniform(rng, -0.1, 0.1) * s, uniform(rng, -0.1, 0.1) * s),
                    params.dome_amplitude * s, params.dome_sigma * s});
  double slack = 0.0;
  for (int i = 0; i < params.secondary_bumps; ++i) {
    Bump b{Eigen::Vector2d(uniform(rng, -s, s), uniform(rng, -s, s)), uniform(rng, -0.03, 0.03) * s,
           uniform(rng, 0.3, 0.5) * s};
    slack += std::abs(b.amplitude);
    bumps_.push_back(b);
  }
  base_ = params.base_depth + slack;

  bregma_ = Eigen::Vector2d(uniform(rng, -0.1, 0.1) * s, uniform(rng, -0.1, 0.1) * s);
  for (int k = 0; k < 4; ++k) {
    double heading = deg2rad(90.0 * k + uniform(rng, -10.0, 10.0));
    const double length = uniform(rng, 0.55, 0.75) * s;
    std::vector<Eigen::Vector2d> line{bregma_};
    for (int seg = 0; seg < 4; ++seg) {
      heading += deg2rad(uniform(rng, -15.0, 15.0));
      line.push_back(line.back() + 0.25 * length * Eigen::Vector2d(std::cos(heading), std::sin(heading)));
    }
    sutures_[k] = std::move(line);
  }
  for (int j = 0; j < 2; ++j) {
    const double theta = deg2rad(45.0 + 90.0 * j + uniform(rng, -10.0, 10.0));
    patches_[j] = {bregma_ + 0.5 * s * Eigen::Vector2d(std::cos(theta), std::sin(theta)),
                   uniform(rng, 0.18, 0.24) * s, uniform(rng, 0.11, 0.15) * s, uniform(rng, 0.0, kPi)};
  }
}

double SkullGeometry::suture_distance(int k, const Eigen::Vector2d& p) const {
  const auto& line = sutures_[k];
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) d = std::min(d, segment_distance(p, line[i], line[i + 1]));
  return d;
}

double SkullGeometry::depth(double x, double y) const {
  const Eigen::Vector2d p(x, y);
  double z = base_;
  for (std::size_t i = 0; i < bumps_.size(); ++i) {
    const Bump& b = bumps_[i];
    const double g = std::exp(-(p - b.center).squaredNorm() / (2.0 * b.sigma * b.sigma));
    z += i == 0 ? b.amplitude * (1.0 - g) : b.amplitude * g;
  }
  double ridge = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double d = suture_distance(k, p);
    ridge = std::max(ridge, std::exp(-d * d / (2.0 * params_.ridge_sigma * params_.ridge_sigma)));
  }
  return z - params_.ridge_height * ridge;
}

Eigen::Vector3d SkullGeometry::normal(double x, double y) const {
  constexpr double e = 1e-5;
  const double zx = (depth(x + e, y) - depth(x - e, y)) / (2 * e);
  const double zy = (depth(x, y + e) - depth(x, y - e)) / (2 * e);
  return Eigen::Vector3d(zx, zy, -1.0).normalized();
}

std::uint8_t SkullGeometry::label(double x, double y) const {
  const Eigen::Vector2d p(x, y);
  int best = -1;
  double best_d = params_.suture_half_width;
  for (int k = 0; k < 4; ++k) {
    const double d = suture_distance(k, p);
    if (d <= best_d) {
      best_d = d;
      best = k;
    }
  }
  if (best >= 0) return static_cast<std::uint8_t>(best + 1);
  for (int j = 0; j < 2; ++j) {
    if (patches_[j].contains(p)) return static_cast<std::uint8_t>(5 + j);
  }
  return 0;
}

RgbImage make_texture(std::uint64_t seed, int width, int height, double contrast_floor) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidArgument, "texture size must be positive");
  std::mt19937_64 rng(seed ^ 0x7e57u);
  std::vector<double> v(static_cast<std::size_t>(width) * height, 0.0);
  const int periods[] = {32, 16, 8, 4};
  const double weights[] = {0.35, 0.3, 0.2, 0.15};
  for (int o = 0; o < 4; ++o) {
    const int p = periods[o];
    const int gw = width / p + 2, gh = height / p + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (auto& l : lattice) l = uniform(rng, 0.0, 1.0);
    for (int y = 0; y < height; ++y) {
      const double fy = static_cast<double>(y) / p;
      const int iy = static_cast<int>(fy);
      double ty = fy - iy;
      ty = ty * ty * (3 - 2 * ty);
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / p;
        const int ix = static_cast<int>(fx);
        double tx = fx - ix;
        tx = tx * tx * (3 - 2 * tx);
        auto at = [&](int gx, int gy) { return lattice[static_cast<std::size_t>(gy) * gw + gx]; };
        const double top = at(ix, iy) + tx * (at(ix + 1, iy) - at(ix, iy));
        const double bot = at(ix, iy + 1) + tx * (at(ix + 1, iy + 1) - at(ix, iy + 1));
        v[static_cast<std::size_t>(y) * width + x] += weights[o] * (top + ty * (bot - top));
      }
    }
  }
  for (auto& x : v) x = 30.0 + 195.0 * x;

  for (int by = 0; by < height; by += 8) {
    for (int bx = 0; bx < width; bx += 8) {
      const int ex = std::min(bx + 8, width), ey = std::min(by + 8, height);
      double lo = 255.0, hi = 0.0;
      for (int y = by; y < ey; ++y) {
        for (int x = bx; x < ex; ++x) {
          lo = std::min(lo, v[static_cast<std::size_t>(y) * width + x]);
          hi = std::max(hi, v[static_cast<std::size_t>(y) * width + x]);
        }
      }
      if (hi - lo >= contrast_floor + 1.0) continue;
      const double mid = 0.5 * (lo + hi);
      const double target = std::clamp(mid, 0.5 * contrast_floor + 2.0, 253.0 - 0.5 * contrast_floor);
      const double gain = hi > lo ? (contrast_floor + 1.0) / (hi - lo) : 0.0;
      for (int y = by; y < ey; ++y) {
        for (int x = bx; x < ex; ++x) {
          double& p = v[static_cast<std::size_t>(y) * width + x];
          // A flat block gets a checker pattern instead.
          p = gain > 0.0 ? target + (p - mid) * gain
                         : target + (((x + y) & 1) ? 0.5 : -0.5) * (contrast_floor + 1.0);
        }
      }
    }
  }

  RgbImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto g = static_cast<std::uint8_t>(std::clamp(std::lround(v[static_cast<std::size_t>(y) * width + x]), 0L, 255L));
      auto* p = img.pixel(x, y);
      p[0] = p[1] = p[2] = g;
    }
  }
  return img;
}

namespace {

SyntheticScene raster_scene(std::uint64_t seed, int width, int height, const SkullGeometry& geometry,
                            bool flat, double h0, const RigidTransformd& pose = RigidTransformd::identity()) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidArgument, "scene size must be positive");
  SyntheticScene scene;
  scene.geometry = geometry;
  scene.calib = synthetic_calibration(width, height);
  scene.height.resize(height, width);
  scene.disparity = DisparityMap(width, height);
  scene.labels.classes = GrayImage::Zero(height, width);
  scene.labels.class_count = 7;
  scene.pose = pose;
  const Eigen::Matrix2d r_inv = pose.rotation().topLeftCorner<2, 2>().transpose();
  const Eigen::Vector2d t_xy = pose.translation().head<2>();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector2d cam((x - scene.calib.c_x) * scene.calib.p_rho_x, (y - scene.calib.c_y) * scene.calib.p_rho_y);
      const Eigen::Vector2d p = r_inv * (cam - t_xy);
      const double z = flat ? scene.calib.d_e + h0 / scene.calib.h_rho : geometry.depth(p.x(), p.y()) + pose.translation().z();
      scene.height(y, x) = z;
      scene.disparity(x, y) = flat ? h0 : scene.calib.h_rho * (z - scene.calib.d_e);
      if (!flat) scene.labels.classes(y, x) = geometry.label(p.x(), p.y());
    }
  }
  scene.texture = make_texture(seed, width, height);
  return scene;
}

}  // namespace

SyntheticScene make_skull_surface(std::uint64_t seed, const SkullParams& params) {
  return render_posed_scene(seed, params, RigidTransformd::identity());
}

SyntheticScene render_posed_scene(std::uint64_t seed, const SkullParams& params, const RigidTransformd& pose) {
  if (std::abs(pose.rotation()(2, 2) - 1.0) > 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "raster scenes support rotations about the viewing axis only");
  }
  const double s = 0.5 * std::min(params.width, params.height) * kPixelSize;
  const SkullGeometry geometry(seed, params, s);
  SyntheticScene scene = raster_scene(seed, params.width, params.height, geometry, false, 0.0, pose);
  scene.texture = make_texture(seed, params.width, params.height, params.contrast_floor);
  return scene;
}

SyntheticScene make_flat_scene(std::uint64_t seed, int width, int height, double h0) {
  return raster_scene(seed, width, height, SkullGeometry(), true, h0);
}

StereoPair render_stereo(const SyntheticScene& scene) {
  const RgbImage& tex = scene.texture;
  tex.validate();
  const int w = tex.width, h = tex.height;
  if (scene.disparity.width() != w || scene.disparity.height() != h) {
    throw Error(ErrorKind::DimensionMismatch, "disparity and texture sizes differ");
  }
  StereoPair out{tex, RgbImage(w, h), GrayImage::Zero(h, w)};
  std::vector<double> xr(w);
  std::vector<int> source;
  for (int y = 0; y < h; ++y) {
    source.clear();
    double running = -std::numeric_limits<double>::infinity();
    for (int x = 0; x < w; ++x) {
      const double d = scene.disparity(x, y);
      if (DisparityMap::is_invalid(d)) {
        xr[x] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (std::abs(d) >= w) throw Error(ErrorKind::InvalidArgument, "disparity exceeds the image width");
      xr[x] = x - d;
      // A left pixel is hidden when an earlier (nearer) pixel already lands
      // at or beyond its right-image position.
      if (xr[x] > running) {
        source.push_back(x);
        if (xr[x] >= 0.0 && xr[x] <= w - 1) out.valid(y, x) = 1;
        running = xr[x];
      }
    }
    std::size_t k = 0;
    for (int u = 0; u < w; ++u) {
      auto* dst = out.right.pixel(u, y);
      if (source.empty()) {
        dst[0] = dst[1] = dst[2] = 0;
        continue;
      }
      while (k + 1 < source.size() && xr[source[k + 1]] <= u) ++k;
      const int a = source[k];
      if (u <= xr[a] || k + 1 == source.size()) {
        const auto* s = tex.pixel(a, y);
        std::copy(s, s + 3, dst);
        continue;
      }
      const int b = source[k + 1];
      const double t = (u - xr[a]) / (xr[b] - xr[a]);
      const auto* sa = tex.pixel(a, y);
      const auto* sb = tex.pixel(b, y);
      for (int c = 0; c < 3; ++c) dst[c] = static_cast<std::uint8_t>(std::lround(sa[c] + t * (sb[c] - sa[c])));
    }
  }
  return out;
}

std::vector<StepReading> make_step_readings(double h_rho, double d_e, int steps, double increment,
                                            double noise_mm, int repeats, std::uint64_t seed) {
  if (steps < 3) throw Error(ErrorKind::InvalidArgument, "step log needs >= 3 steps");
  if (repeats < 1) throw Error(ErrorKind::InvalidArgument, "step log needs >= 1 repeat");
  if (!(noise_mm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<StepReading> out;
  out.reserve(static_cast<std::size_t>(steps) * repeats);
  for (int k = 0; k < steps; ++k) {
    const double z = k * increment;
    for (int r = 0; r < repeats; ++r) {
      out.push_back({z, h_rho * (z - d_e) + noise_mm * std::abs(h_rho) * noise(rng)});
    }
  }
  return out;
}

std::vector<StepSample> make_step_log(double h_rho, double d_e, int steps, double increment, double noise_mm,
                                      int repeats, std::uint64_t seed) {
  const auto readings = make_step_readings(h_rho, d_e, steps, increment, noise_mm, repeats, seed);
  return average_readings(readings);
}

CornerObservation make_corner_observation(int rows, int cols, double square_mm, double p_rho_x, double p_rho_y,
                                          double jitter_px, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  CornerObservation obs;
  obs.rows = rows;
  obs.cols = cols;
  obs.square_size = square_mm;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      obs.corners.emplace_back(40.0 + c * square_mm / p_rho_x + jitter_px * noise(rng),
                               30.0 + r * square_mm / p_rho_y + jitter_px * noise(rng));
    }
  }
  return obs;
}

LabeledCloud make_bowl_plane(int width, int height, const CalibrationParams& calib, double amplitude_mm,
                             std::vector<double>* bowl) {
  if (width < 2 || height < 1) throw Error(ErrorKind::InvalidArgument, "bowl plane needs >= 2 columns");
  std::vector<double> g(width);
  double mean_u2 = 0.0;
  for (int x = 0; x < width; ++x) {
    const double u = 2.0 * x / (width - 1) - 1.0;
    g[x] = u * u;
    mean_u2 += u * u;
  }
  mean_u2 /= width;
  for (auto& v : g) v = amplitude_mm * (v - mean_u2);
  LabeledCloud cloud;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double px = (x - calib.c_x) * calib.p_rho_x;
      const double py = (y - calib.c_y) * calib.p_rho_y;
      cloud.push_back({px, py, 5.0 + 0.02 * px - 0.01 * py + g[x]}, Rgb8{128, 128, 128});
      cloud.pixels.emplace_back(x, y);
    }
  }
  if (bowl) *bowl = std::move(g);
  return cloud;
}

ModelCloud sample_model(const SyntheticScene& scene, double spacing_mm, double margin,
                        const RigidTransformd& model_from_camera) {
  if (!(spacing_mm > 0.0)) throw Error(ErrorKind::InvalidArgument, "model spacing must be positive");
  const auto& c = scene.calib;
  const double hx = 0.5 * scene.texture.width * c.p_rho_x * (1.0 + margin);
  const double hy = 0.5 * scene.texture.height * c.p_rho_y * (1.0 + margin);
  const int nx = static_cast<int>(std::floor(hx / spacing_mm));
  const int ny = static_cast<int>(std::floor(hy / spacing_mm));
  ModelCloud m;
  for (int iy = -ny; iy <= ny; ++iy) {
    for (int ix = -nx; ix <= nx; ++ix) {
      const double x = ix * spacing_mm, y = iy * spacing_mm;
      m.cloud.push_back(model_from_camera * Eigen::Vector3d(x, y, scene.geometry.depth(x, y)), Rgb8{200, 200, 200});
      m.annotation.push_back(scene.geometry.label(x, y));
    }
  }
  return m;
}

void add_point_noise(LabeledCloud& cloud, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise must be >= 0");
  if (sigma == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& p : cloud.points) {
    const double nx = noise(rng), ny = noise(rng), nz = noise(rng);
    p += Eigen::Vector3d(nx, ny, nz);
  }
}

void mislabel_cloud(LabeledCloud& cloud, double fraction, const LabelPalette& palette, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "mislabel fraction must be in [0, 1]");
  }
  const auto ids = palette.feature_ids();
  if (ids.size() < 2) throw Error(ErrorKind::InvalidArgument, "mislabelling needs >= 2 feature classes");
  std::mt19937_64 rng(seed);
  const auto flips = static_cast<std::size_t>(std::lround(fraction * cloud.size()));
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < flips; ++i) {
    std::swap(order[i], order[i + std::uniform_int_distribution<std::size_t>(0, order.size() - 1 - i)(rng)]);
    const std::size_t p = order[i];
    std::uint8_t label = cloud.labels[p];
    while (label == cloud.labels[p]) label = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
    cloud.labels[p] = label;
    cloud.colors[p] = palette.at(label).rgb;
  }
}

PosedPair perturb_pose(const SyntheticScene& scene, const RigidTransformd& delta, double noise_sigma,
                       double mislabel_fraction, const PerturbOptions& options) {
  if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise must be >= 0");
  if (!(mislabel_fraction >= 0.0 && mislabel_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "mislabel fraction must be in [0, 1]");
  }
  const LabelPalette palette = LabelPalette::standard();
  PosedPair out;
  out.truth = delta;
  out.model = sample_model(scene, options.model_spacing, options.model_margin, delta);
  out.cloud_a = colorize_model(out.model.cloud, out.model.annotation, palette);
  out.cloud_b = mask_cloud(scene.disparity, scene.texture, scene.labels, palette, scene.calib);

  add_point_noise(out.cloud_b, noise_sigma, options.seed);
  mislabel_cloud(out.cloud_b, mislabel_fraction, palette, options.seed ^ 0x5bd1e995u);
  return out;
}

RigidTransformd random_inplane_pose(std::uint64_t seed, double max_mm, double max_deg, bool planar_translation) {
  std::mt19937_64 rng(seed);
  const double angle = deg2rad(uniform(rng, -max_deg, max_deg));
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d dir;
  do {
    const double a = n(rng), b = n(rng), c = n(rng);
    dir = Eigen::Vector3d(a, b, planar_translation ? 0.0 : c);
  } while (dir.norm() < 1e-9);
  const double mag = uniform(rng, 0.0, max_mm);
  return RigidTransformd(rotation_about_z(angle), mag * dir.normalized());
}

PerspectiveCheck perspective_dominance(double d_e, double half_convergence, double baseline, double max_dx,
                                       double max_dz, int samples) {
  if (samples < 2) throw Error(ErrorKind::InvalidArgument, "need >= 2 samples per axis");
  const double s = std::sin(half_convergence), c = std::cos(half_convergence);
  PerspectiveCheck out;
  out.reference = d_e * c + 0.5 * baseline * s;
  out.max_variation = std::abs(max_dx) * s + std::abs(max_dz) * c;
  for (int i = 0; i < samples; ++i) {
    const double dx = -max_dx + 2.0 * max_dx * i / (samples - 1);
    for (int j = 0; j < samples; ++j) {
      const double dz = -max_dz + 2.0 * max_dz * j / (samples - 1);
      const double zl = (dx + 0.5 * baseline) * s + (d_e + dz) * c;
      out.max_relative_error = std::max(out.max_relative_error, std::abs(zl - out.reference) / out.reference);
    }
  }
  return out;
}

void write_scene_bundle(const std::filesystem::path& dir, const SyntheticScene& scene, const StereoPair& pair,
                        const LabelPalette& palette) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_png(dir / "left.png", pair.left);
  write_png(dir / "right.png", pair.right);
  write_png(dir / "labels.png", scene.labels.classes);
  write_png(dir / "valid.png", pair.valid);
  write_pfm(dir / "disparity.pfm", scene.disparity);
  write_json(dir / "calib.json", to_json(scene.calib));
  write_json(dir / "pose.json", to_json(scene.pose));
  write_json(dir / "palette.json", to_json(palette));
}

}  // namespace msreg
