#include "msreg/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

namespace msreg {

const char* to_string(DepthModelKind kind) {
  return kind == DepthModelKind::Linear ? "linear" : "pinhole";
}

std::vector<StepSample> average_readings(std::span<const StepReading> readings) {
  std::vector<StepSample> out;
  std::map<double, std::size_t> slot;
  for (const auto& r : readings) {
    auto [it, inserted] = slot.try_emplace(r.z_true, out.size());
    if (inserted) {
      out.push_back({r.z_true, r.h, 1});
    } else {
      auto& s = out[it->second];
      s.h_mean += r.h;
      ++s.repeats;
    }
  }
  for (auto& s : out) s.h_mean /= s.repeats;
  return out;
}

std::vector<StepReading> read_step_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("z_true_mm,h_px", 0) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": expected header z_true_mm,h_px");
  }
  std::vector<StepReading> out;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    StepReading r;
    char comma = 0;
    if (!(ls >> r.z_true >> comma >> r.h) || comma != ',') {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": bad row");
    }
    out.push_back(r);
  }
  return out;
}

void write_step_csv(const std::filesystem::path& path, std::span<const StepReading> readings) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string());
  os << "z_true_mm,h_px\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : readings) os << r.z_true << ',' << r.h << '\n';
  if (!os) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

double FitReport::predict(double h) const {
  if (const auto* lin = std::get_if<LinearModel>(&params)) return lin->d_e + h / lin->h_rho;
  return pinhole_depth(h, std::get<PinholeFitParams>(params));
}

namespace {

void fill_statistics(FitReport& report, std::span<const StepSample> samples) {
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (const auto& s : samples) mean += s.z_true;
  mean /= n;
  double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
  report.residuals.clear();
  for (const auto& s : samples) {
    const double r = s.z_true - report.predict(s.h_mean);
    report.residuals.push_back(r);
    ss_res += r * r;
    abs_sum += std::abs(r);
    ss_tot += (s.z_true - mean) * (s.z_true - mean);
  }
  report.rmse = std::sqrt(ss_res / n);
  report.mae = abs_sum / n;
  report.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 0.0;
}

double sum_squares(const std::vector<double>& r) {
  return std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
}

}  // namespace

FitReport fit_linear(std::span<const StepSample> samples) {
  if (samples.size() < 3) {
    throw Error(ErrorKind::InvalidArgument, "linear fit needs at least 3 step samples");
  }
  const double n = static_cast<double>(samples.size());
  double mh = 0.0, mz = 0.0;
  for (const auto& s : samples) {
    mh += s.h_mean;
    mz += s.z_true;
  }
  mh /= n;
  mz /= n;
  double shh = 0.0, shz = 0.0;
  for (const auto& s : samples) {
    shh += (s.h_mean - mh) * (s.h_mean - mh);
    shz += (s.h_mean - mh) * (s.z_true - mz);
  }
  if (!(shh > 0.0)) {
    throw Error(ErrorKind::Numeric, "rank-deficient linear fit: all disparities are equal");
  }
  const double slope = shz / shh;
  if (slope == 0.0) {
    throw Error(ErrorKind::Numeric, "depth does not respond to disparity (zero slope)");
  }
  FitReport report;
  report.model = DepthModelKind::Linear;
  report.params = LinearModel{1.0 / slope, mz - slope * mh};
  fill_statistics(report, samples);
  return report;
}

FitReport fit_pinhole(std::span<const StepSample> samples, const PinholeFitOptions& options) {
  if (samples.size() < 4) {
    throw Error(ErrorKind::InvalidArgument, "pinhole fit needs at least 4 step samples");
  }
  const int n = static_cast<int>(samples.size());
  Eigen::VectorXd h(n), z(n);
  for (int i = 0; i < n; ++i) {
    h(i) = samples[i].h_mean;
    z(i) = samples[i].z_true;
  }
  const double h_min = h.minCoeff();
  const double h_max = h.maxCoeff();
  if (h_max == h_min) {
    throw Error(ErrorKind::Numeric, "rank-deficient pinhole fit: all disparities are equal");
  }

  // Initial guess: pole just below the data, then a linear solve for a and c.
  Eigen::Vector3d theta;
  {
    const double b = h_min - 1.0;
    Eigen::MatrixXd design(n, 2);
    design.col(0) = (h.array() - b).inverse().matrix();
    design.col(1).setOnes();
    const Eigen::Vector2d ac = design.colPivHouseholderQr().solve(z);
    theta << ac(0), b, ac(1);
  }

  const auto residuals = [&](const Eigen::Vector3d& t) -> Eigen::VectorXd {
    return (t(0) * (h.array() - t(1)).inverse() + t(2)).matrix() - z;
  };
  const auto pole_inside = [&](double b) { return b >= h_min && b <= h_max; };

  Eigen::VectorXd r = residuals(theta);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    Eigen::MatrixXd jac(n, 3);
    const Eigen::ArrayXd inv = (h.array() - theta(1)).inverse();
    jac.col(0) = inv.matrix();
    jac.col(1) = (theta(0) * inv.square()).matrix();
    jac.col(2).setOnes();
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = jac.transpose() * r;

    bool accepted = false;
    while (lambda < 1e20) {
      Eigen::Matrix3d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::Vector3d step = damped.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        throw Error(ErrorKind::Numeric, "pinhole fit diverged (non-finite step)");
      }
      const Eigen::Vector3d candidate = theta + step;
      if (!pole_inside(candidate(1))) {
        const Eigen::VectorXd rc = residuals(candidate);
        const double cc = rc.squaredNorm();
        if (std::isfinite(cc) && cc <= cost) {
          theta = candidate;
          r = rc;
          cost = cc;
          lambda = std::max(lambda * 0.1, 1e-12);
          accepted = true;
          if (step.norm() < options.step_tolerance * (1.0 + theta.norm())) converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No damped step reduces the cost: a stationary point.
      converged = true;
      break;
    }
    if (converged) {
      ++iter;
      break;
    }
  }
  if (!theta.allFinite()) throw Error(ErrorKind::Numeric, "pinhole fit diverged");
  if (pole_inside(theta(1))) {
    throw Error(ErrorKind::Numeric, "pinhole fit placed its pole inside the data range");
  }

  FitReport report;
  report.model = DepthModelKind::Pinhole;
  report.params = PinholeFitParams{theta(0), theta(1), theta(2)};
  report.iterations = iter;
  report.converged = converged;
  fill_statistics(report, samples);
  return report;
}

ModelComparison compare_models(std::span<const StepSample> samples, double significance) {
  ModelComparison out;
  out.linear = fit_linear(samples);
  out.pinhole = fit_pinhole(samples);
  const double n = static_cast<double>(samples.size());
  const double ss_lin = sum_squares(out.linear.residuals);
  const double ss_pin = sum_squares(out.pinhole.residuals);
  if (n > 3 && ss_pin < ss_lin) {
    const double dof = n - 3.0;
    out.f_statistic = ss_pin > 0.0 ? (ss_lin - ss_pin) / (ss_pin / dof)
                                   : std::numeric_limits<double>::infinity();
    out.p_value = std::isfinite(out.f_statistic)
                      ? boost::math::cdf(boost::math::complement(
                            boost::math::fisher_f_distribution<double>(1.0, dof), out.f_statistic))
                      : 0.0;
  }
  const bool lower = out.pinhole.rmse < out.linear.rmse;
  const bool significant = significance <= 0.0 || out.p_value < significance;
  out.winner = lower && significant ? DepthModelKind::Pinhole : DepthModelKind::Linear;
  return out;
}

std::pair<double, double> calibrate_pixel_size(const CornerObservation& obs) {
  if (obs.rows < 2 || obs.cols < 2) {
    throw Error(ErrorKind::InvalidArgument, "corner grid must be at least 2x2");
  }
  if (!(obs.square_size > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "square size must be positive");
  }
  if (obs.corners.size() != static_cast<std::size_t>(obs.rows) * obs.cols) {
    throw Error(ErrorKind::InvalidArgument, "corner count does not match grid rows x cols");
  }
  for (const auto& c : obs.corners) {
    if (!c.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite corner coordinate");
  }
  const auto at = [&](int r, int c) { return obs.corners[static_cast<std::size_t>(r) * obs.cols + c]; };
  double horizontal = 0.0, vertical = 0.0;
  for (int r = 0; r < obs.rows; ++r) {
    for (int c = 0; c + 1 < obs.cols; ++c) horizontal += (at(r, c + 1) - at(r, c)).norm();
  }
  for (int r = 0; r + 1 < obs.rows; ++r) {
    for (int c = 0; c < obs.cols; ++c) vertical += (at(r + 1, c) - at(r, c)).norm();
  }
  horizontal /= static_cast<double>(obs.rows * (obs.cols - 1));
  vertical /= static_cast<double>((obs.rows - 1) * obs.cols);
  if (!(horizontal > 0.0) || !(vertical > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "degenerate corner grid (coincident corners)");
  }
  return {obs.square_size / horizontal, obs.square_size / vertical};
}

}  // namespace msreg
