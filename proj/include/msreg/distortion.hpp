#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "msreg/projection.hpp"

namespace msreg {

/// Depth residual per image column (mm). The distortion is taken to be
/// uniform along image rows, so one value per column describes it.
struct DistortionField {
  int width = 0;
  std::vector<double> per_column_residual;

  static DistortionField zero(int width);
  void validate() const;
};

/// z = a x + b y + c
struct PlaneFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double rmse = 0.0;
  std::size_t inliers = 0;

  double residual(const Eigen::Vector3d& p) const { return p.z() - (a * p.x() + b * p.y() + c); }
};

/// Least-squares plane, then one refit after dropping |r| > 3 sigma.
PlaneFit fit_plane_robust(std::span<const Eigen::Vector3d> points);

/// RMSE of the plain least-squares plane through the points.
double plane_fit_rmse(std::span<const Eigen::Vector3d> points);

/// Per-column mean deviation from the robust plane of a reconstructed planar
/// target. Empty columns are filled by linear interpolation.
DistortionField estimate_field(const LabeledCloud& planar_cloud,
                               std::span<const Eigen::Vector2i> pixels, int width);

/// Subtracts the field value of each point's source column from its z.
LabeledCloud compensate(const LabeledCloud& cloud, std::span<const Eigen::Vector2i> pixels,
                        const DistortionField& field);

/// CSV `column,residual_mm`.
void write_field_csv(const std::filesystem::path& path, const DistortionField& field);
DistortionField read_field_csv(const std::filesystem::path& path);

}  // namespace msreg
