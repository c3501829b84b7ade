#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "msreg/projection.hpp"

namespace msreg {

/// One raw disparity reading of a step-height log.
struct StepReading {
  double z_true = 0.0;  // mm, relative stage height
  double h = 0.0;       // px
};

/// Readings at one stage height averaged over repeats.
struct StepSample {
  double z_true = 0.0;  // mm
  double h_mean = 0.0;  // px
  int repeats = 1;
};

/// Groups readings by stage height (first-seen order) and averages them.
std::vector<StepSample> average_readings(std::span<const StepReading> readings);

/// CSV with header `z_true_mm,h_px`, one row per repeat.
std::vector<StepReading> read_step_csv(const std::filesystem::path& path);
void write_step_csv(const std::filesystem::path& path, std::span<const StepReading> readings);

/// z = d_e + h / h_rho, with d_e relative to the log's height origin.
struct LinearModel {
  double h_rho = 0.0;
  double d_e = 0.0;
};

enum class DepthModelKind { Linear, Pinhole };
const char* to_string(DepthModelKind kind);

struct FitReport {
  DepthModelKind model = DepthModelKind::Linear;
  std::variant<LinearModel, PinholeFitParams> params;
  double r_squared = 0.0;  // clamped to [0, 1]
  double rmse = 0.0;       // mm
  double mae = 0.0;        // mm
  std::vector<double> residuals;  // observed - predicted, mm
  int iterations = 0;
  bool converged = true;

  /// Depth predicted at disparity h.
  double predict(double h) const;
};

FitReport fit_linear(std::span<const StepSample> samples);

struct PinholeFitOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) fit of z = a/(h - b) + c, started
/// from b = min(h) - 1. Steps that would move the pole into the data range
/// are rejected.
FitReport fit_pinhole(std::span<const StepSample> samples, const PinholeFitOptions& options = {});

struct ModelComparison {
  FitReport linear;
  FitReport pinhole;
  DepthModelKind winner = DepthModelKind::Linear;
  double f_statistic = 0.0;
  double p_value = 1.0;
};

/// Lower RMSE wins; ties go to the linear model. The three-parameter pinhole
/// family contains lines as a limit, so a pinhole RMSE advantage only counts
/// when the extra-parameter F test rejects the linear model at `significance`.
/// significance <= 0 compares raw RMSE.
ModelComparison compare_models(std::span<const StepSample> samples, double significance = 0.01);

/// Checkerboard corners in row-major grid order, in pixels.
struct CornerObservation {
  int rows = 0;
  int cols = 0;
  std::vector<Eigen::Vector2d> corners;
  double square_size = 0.0;  // mm
};

/// Mean neighbour spacing along rows gives P_rho_x, along columns P_rho_y.
std::pair<double, double> calibrate_pixel_size(const CornerObservation& obs);

}  // namespace msreg
