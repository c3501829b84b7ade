#include "msreg/distortion.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

namespace msreg {

DistortionField DistortionField::zero(int width) {
  if (width <= 0) throw Error(ErrorKind::InvalidArgument, "field width must be positive");
  return {width, std::vector<double>(width, 0.0)};
}

void DistortionField::validate() const {
  if (width <= 0 || per_column_residual.size() != static_cast<std::size_t>(width)) {
    throw Error(ErrorKind::InvalidArgument, "distortion field length must equal its width");
  }
  for (double v : per_column_residual) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite field entry");
  }
}

namespace {

PlaneFit least_squares_plane(std::span<const Eigen::Vector3d> points,
                             const std::vector<bool>* keep) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atz = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (keep && !(*keep)[i]) continue;
    mean += points[i];
    ++n;
  }
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "plane fit needs at least 3 points");
  mean /= static_cast<double>(n);
  // Centred coordinates keep the normal equations well conditioned.
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (keep && !(*keep)[i]) continue;
    const Eigen::Vector3d row(points[i].x() - mean.x(), points[i].y() - mean.y(), 1.0);
    ata += row * row.transpose();
    atz += row * (points[i].z() - mean.z());
  }
  Eigen::ColPivHouseholderQR<Eigen::Matrix3d> qr(ata);
  qr.setThreshold(1e-12);
  if (qr.rank() < 3) {
    throw Error(ErrorKind::Numeric, "rank-deficient plane fit (collinear points)");
  }
  const Eigen::Vector3d s = qr.solve(atz);
  PlaneFit fit;
  fit.a = s(0);
  fit.b = s(1);
  fit.c = s(2) + mean.z() - s(0) * mean.x() - s(1) * mean.y();
  double ss = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (keep && !(*keep)[i]) continue;
    const double r = fit.residual(points[i]);
    ss += r * r;
  }
  fit.inliers = n;
  fit.rmse = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

}  // namespace

PlaneFit fit_plane_robust(std::span<const Eigen::Vector3d> points) {
  const PlaneFit first = least_squares_plane(points, nullptr);
  std::vector<bool> keep(points.size());
  const double limit = 3.0 * first.rmse;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    keep[i] = std::abs(first.residual(points[i])) <= limit;
    kept += keep[i];
  }
  if (kept == points.size() || kept < 3) return first;
  return least_squares_plane(points, &keep);
}

double plane_fit_rmse(std::span<const Eigen::Vector3d> points) {
  return least_squares_plane(points, nullptr).rmse;
}

DistortionField estimate_field(const LabeledCloud& planar_cloud,
                               std::span<const Eigen::Vector2i> pixels, int width) {
  planar_cloud.validate();
  if (width <= 0) throw Error(ErrorKind::InvalidArgument, "field width must be positive");
  if (pixels.size() != planar_cloud.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one pixel index per point is required");
  }
  if (planar_cloud.size() < 3) {
    throw Error(ErrorKind::InvalidArgument, "too few points to estimate a distortion field");
  }
  std::vector<double> sums(width, 0.0);
  std::vector<int> counts(width, 0);
  int populated = 0;
  for (const auto& px : pixels) {
    if (px.x() < 0 || px.x() >= width) {
      throw Error(ErrorKind::DimensionMismatch, "pixel column outside the field width");
    }
    if (counts[px.x()]++ == 0) ++populated;
  }
  if (planar_cloud.size() < static_cast<std::size_t>(10 * populated)) {
    throw Error(ErrorKind::InvalidArgument,
                "too few points: need at least 10 per populated column on average");
  }

  const PlaneFit plane = fit_plane_robust(planar_cloud.points);
  const double limit = 3.0 * least_squares_plane(planar_cloud.points, nullptr).rmse;
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < planar_cloud.size(); ++i) {
    const double r = plane.residual(planar_cloud.points[i]);
    if (plane.inliers != planar_cloud.size() && std::abs(r) > limit) continue;
    sums[pixels[i].x()] += r;
    ++counts[pixels[i].x()];
  }

  DistortionField field = DistortionField::zero(width);
  std::vector<int> filled;
  for (int c = 0; c < width; ++c) {
    if (counts[c] > 0) {
      field.per_column_residual[c] = sums[c] / counts[c];
      filled.push_back(c);
    }
  }
  if (filled.empty()) throw Error(ErrorKind::InvalidArgument, "no inlier points remain");
  // Linear interpolation between populated columns, constant beyond the ends.
  std::size_t k = 0;
  for (int c = 0; c < width; ++c) {
    if (counts[c] > 0) continue;
    while (k < filled.size() && filled[k] < c) ++k;
    if (k == 0) {
      field.per_column_residual[c] = field.per_column_residual[filled.front()];
    } else if (k == filled.size()) {
      field.per_column_residual[c] = field.per_column_residual[filled.back()];
    } else {
      const int l = filled[k - 1], r = filled[k];
      const double t = static_cast<double>(c - l) / (r - l);
      field.per_column_residual[c] =
          (1.0 - t) * field.per_column_residual[l] + t * field.per_column_residual[r];
    }
  }
  return field;
}

LabeledCloud compensate(const LabeledCloud& cloud, std::span<const Eigen::Vector2i> pixels,
                        const DistortionField& field) {
  field.validate();
  if (pixels.size() != cloud.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one pixel index per point is required");
  }
  LabeledCloud out = cloud;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int col = pixels[i].x();
    if (col < 0 || col >= field.width) {
      throw Error(ErrorKind::DimensionMismatch,
                  "point column " + std::to_string(col) + " outside field width " +
                      std::to_string(field.width));
    }
    out.points[i].z() -= field.per_column_residual[col];
  }
  return out;
}

void write_field_csv(const std::filesystem::path& path, const DistortionField& field) {
  field.validate();
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string());
  os << "column,residual_mm\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int c = 0; c < field.width; ++c) os << c << ',' << field.per_column_residual[c] << '\n';
  if (!os) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

DistortionField read_field_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("column,residual_mm", 0) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": expected header column,residual_mm");
  }
  DistortionField field;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int col = 0;
    char comma = 0;
    double v = 0.0;
    if (!(ls >> col >> comma >> v) || comma != ',' ||
        col != static_cast<int>(field.per_column_residual.size())) {
      throw Error(ErrorKind::Format, path.string() + ": columns must be listed 0..width-1");
    }
    field.per_column_residual.push_back(v);
  }
  field.width = static_cast<int>(field.per_column_residual.size());
  field.validate();
  return field;
}

}  // namespace msreg
