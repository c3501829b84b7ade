#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "msreg/geometry.hpp"
#include "msreg/imaging.hpp"

namespace msreg {

/// Optical layout of the two-microscope rig. Lengths in mm, angles in rad.
struct OpticalConfig {
  std::optional<double> focal_length;       // f
  std::optional<double> magnification;      // m (magnitude)
  std::optional<double> half_convergence;   // phi
  std::optional<double> baseline;           // B
  std::optional<double> working_distance;   // d_w
};

/// Linear disparity-depth model:
///   z = d_e + h / h_rho,  x = (x' - c_x) P_rho_x,  y = (y' - c_y) P_rho_y
struct CalibrationParams {
  double h_rho = 1.0;    // px per mm of depth
  double p_rho_x = 1.0;  // mm per px
  double p_rho_y = 1.0;  // mm per px
  double c_x = 0.0;      // px
  double c_y = 0.0;      // px
  double d_e = 0.0;      // mm
  OpticalConfig optical;

  void validate() const;
  bool operator==(const CalibrationParams&) const = default;
};

bool operator==(const OpticalConfig& a, const OpticalConfig& b);

inline constexpr std::uint8_t kNoLabel = 255;

/// Points in mm with 8-bit colour and an optional class label (kNoLabel).
/// `pixels` records the source left-image pixel of each point when the
/// cloud came from a raster; it is empty otherwise.
struct LabeledCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Rgb8> colors;
  std::vector<std::uint8_t> labels;
  std::vector<Eigen::Vector2i> pixels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_pixels() const { return !pixels.empty(); }

  void push_back(const Eigen::Vector3d& p, const Rgb8& c, std::uint8_t label = kNoLabel) {
    points.push_back(p);
    colors.push_back(c);
    labels.push_back(label);
  }

  /// Throws on mismatched attribute lengths or non-finite coordinates.
  void validate() const;
};

/// Copy of the cloud with every point mapped through T.
LabeledCloud transformed(const LabeledCloud& cloud, const RigidTransformd& transform);

/// Reciprocal comparison model z = a / (h - b) + c.
struct PinholeFitParams {
  double a = 0.0;  // mm px
  double b = 0.0;  // px
  double c = 0.0;  // mm
};

template <typename Scalar>
Vector3<Scalar> reconstruct_point(const Eigen::Matrix<Scalar, 2, 1>& pixel, Scalar disparity,
                                  const CalibrationParams& calib) {
  if (DisparityMap::is_invalid(static_cast<double>(disparity))) {
    throw Error(ErrorKind::InvalidArgument, "cannot reconstruct an invalid disparity");
  }
  return {(pixel.x() - Scalar(calib.c_x)) * Scalar(calib.p_rho_x),
          (pixel.y() - Scalar(calib.c_y)) * Scalar(calib.p_rho_y),
          Scalar(calib.d_e) + disparity / Scalar(calib.h_rho)};
}

/// Inverse of reconstruct_point: (x', y', h) for a point in mm.
template <typename Scalar>
Vector3<Scalar> project_point(const Vector3<Scalar>& p, const CalibrationParams& calib) {
  return {p.x() / Scalar(calib.p_rho_x) + Scalar(calib.c_x),
          p.y() / Scalar(calib.p_rho_y) + Scalar(calib.c_y),
          (p.z() - Scalar(calib.d_e)) * Scalar(calib.h_rho)};
}

/// One point per valid disparity pixel, coloured from `color` and labelled
/// from `labels` when given.
LabeledCloud reconstruct_cloud(const DisparityMap& d, const RgbImage& color,
                               const CalibrationParams& calib,
                               const LabelMask* labels = nullptr);

double pinhole_depth(double disparity, const PinholeFitParams& p);

/// Orthographic stereo-microscope depth, z = (h/m + B cos phi) / (2 sin phi),
/// with the pixel disparity converted to sensor mm through P_rho_x * m.
double orthographic_depth(double disparity, const CalibrationParams& calib);

/// Depth response implied by the orthographic model, h_rho = 2 sin(phi) / P_rho_x.
double implied_depth_response(double half_convergence, double pixel_size_mm);

}  // namespace msreg
