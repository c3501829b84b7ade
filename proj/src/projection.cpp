#include "msreg/projection.hpp"

#include <cmath>
#include <string>

namespace msreg {

bool operator==(const OpticalConfig& a, const OpticalConfig& b) {
  return a.focal_length == b.focal_length && a.magnification == b.magnification &&
         a.half_convergence == b.half_convergence && a.baseline == b.baseline &&
         a.working_distance == b.working_distance;
}

void CalibrationParams::validate() const {
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(h_rho) || h_rho == 0.0) {
    throw Error(ErrorKind::InvalidArgument, "h_rho must be finite and non-zero");
  }
  if (!finite(p_rho_x) || !finite(p_rho_y) || p_rho_x <= 0.0 || p_rho_y <= 0.0) {
    throw Error(ErrorKind::InvalidArgument, "P_rho_x and P_rho_y must be positive");
  }
  if (!finite(c_x) || !finite(c_y)) {
    throw Error(ErrorKind::InvalidArgument, "principal point must be finite");
  }
  if (!finite(d_e) || d_e < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "d_e must be finite and >= 0");
  }
  const auto& o = optical;
  if (o.focal_length && o.magnification && o.working_distance) {
    if (*o.magnification == 0.0) {
      throw Error(ErrorKind::InvalidArgument, "magnification must be non-zero");
    }
    const double thin_lens = *o.focal_length * (1.0 + 1.0 / *o.magnification);
    if (std::abs(thin_lens - *o.working_distance) > 0.01 * std::abs(*o.working_distance)) {
      throw Error(ErrorKind::InvalidArgument,
                  "optical block violates d_w = f (1 + 1/m): f(1+1/m) = " +
                      std::to_string(thin_lens) + " mm, d_w = " +
                      std::to_string(*o.working_distance) + " mm");
    }
  }
}

void LabeledCloud::validate() const {
  if (colors.size() != points.size() || labels.size() != points.size()) {
    throw Error(ErrorKind::InvalidArgument, "cloud attribute arrays differ in length");
  }
  if (!pixels.empty() && pixels.size() != points.size()) {
    throw Error(ErrorKind::InvalidArgument, "cloud pixel index length differs from point count");
  }
  for (const auto& p : points) {
    if (!p.allFinite()) throw Error(ErrorKind::InvalidArgument, "cloud holds a non-finite point");
  }
}

LabeledCloud transformed(const LabeledCloud& cloud, const RigidTransformd& transform) {
  LabeledCloud out = cloud;
  for (auto& p : out.points) p = transform * p;
  return out;
}

LabeledCloud reconstruct_cloud(const DisparityMap& d, const RgbImage& color,
                               const CalibrationParams& calib, const LabelMask* labels) {
  calib.validate();
  color.validate();
  if (d.width() != color.width || d.height() != color.height) {
    throw Error(ErrorKind::DimensionMismatch, "disparity and colour image differ in size");
  }
  if (labels && (labels->width() != d.width() || labels->height() != d.height())) {
    throw Error(ErrorKind::DimensionMismatch, "label mask and disparity differ in size");
  }
  LabeledCloud cloud;
  const std::size_t n = d.valid_count();
  cloud.points.reserve(n);
  cloud.colors.reserve(n);
  cloud.labels.reserve(n);
  cloud.pixels.reserve(n);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.valid(x, y)) continue;
      cloud.push_back(reconstruct_point<double>({x, y}, d(x, y), calib), color.rgb(x, y),
                      labels ? (*labels)(x, y) : kNoLabel);
      cloud.pixels.emplace_back(x, y);
    }
  }
  return cloud;
}

double pinhole_depth(double disparity, const PinholeFitParams& p) {
  if (disparity == p.b) {
    throw Error(ErrorKind::Numeric, "pinhole model evaluated at its pole h = b");
  }
  return p.a / (disparity - p.b) + p.c;
}

double orthographic_depth(double disparity, const CalibrationParams& calib) {
  const auto& o = calib.optical;
  if (!o.magnification || !o.half_convergence || !o.baseline) {
    throw Error(ErrorKind::InvalidArgument, "orthographic depth needs m, phi and B");
  }
  const double m = *o.magnification;
  const double phi = *o.half_convergence;
  if (m == 0.0) throw Error(ErrorKind::InvalidArgument, "magnification must be non-zero");
  if (std::sin(phi) == 0.0) throw Error(ErrorKind::InvalidArgument, "phi must be non-zero");
  const double sensor_disparity = disparity * calib.p_rho_x * m;
  return (sensor_disparity / m + *o.baseline * std::cos(phi)) / (2.0 * std::sin(phi));
}

double implied_depth_response(double half_convergence, double pixel_size_mm) {
  if (std::sin(half_convergence) == 0.0 || pixel_size_mm <= 0.0) {
    throw Error(ErrorKind::InvalidArgument, "need phi != 0 and a positive pixel size");
  }
  return 2.0 * std::sin(half_convergence) / pixel_size_mm;
}

}  // namespace msreg
