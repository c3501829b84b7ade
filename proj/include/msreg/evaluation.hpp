#pragma once

#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msreg/geometry.hpp"

namespace msreg {

/// Euclidean distance between the translations, in mm.
template <typename Scalar>
Scalar translational_error(const RigidTransform<Scalar>& t1, const RigidTransform<Scalar>& t2) {
  return (t1.translation() - t2.translation()).norm();
}

/// Geodesic angle between the rotations, in degrees. The arccos argument is
/// clamped to [-1, 1].
template <typename Scalar>
Scalar rotational_error(const RigidTransform<Scalar>& t1, const RigidTransform<Scalar>& t2) {
  const Scalar c = ((t1.rotation() * t2.rotation().transpose()).trace() - Scalar(1)) / Scalar(2);
  const Scalar clamped = std::min(Scalar(1), std::max(Scalar(-1), c));
  return std::acos(clamped) * Scalar(180) / Scalar(kPi);
}

struct PoseError {
  double e_t = 0.0;  // mm
  double e_r = 0.0;  // deg
};

PoseError pose_error(const RigidTransformd& estimate, const RigidTransformd& reference);

struct ChannelStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::size_t count = 0;
};

struct SequenceReport {
  std::vector<PoseError> frames;
  std::vector<double> latencies;  // s per frame
  std::vector<std::size_t> outliers;  // ascending frame indices
  std::vector<std::uint8_t> outlier_t;  // per-frame flag, translational channel
  std::vector<std::uint8_t> outlier_r;  // per-frame flag, rotational channel
  ChannelStats t_raw, r_raw;
  ChannelStats t_retained, r_retained;
  double mean_latency = 0.0;

  bool is_outlier(std::size_t frame) const;
};

/// Linear-interpolation quantile (the common "type 7" definition).
double quantile(std::vector<double> values, double p);

/// Statistics over all values.
ChannelStats channel_stats(const std::vector<double>& values);

/// Tukey 1.5 IQR fences per channel, optionally unioned with an explicit
/// exclusion list. A frame flagged in one channel is excluded from that
/// channel's retained statistics only; `outliers` is the union.
SequenceReport sequence_statistics(const std::vector<PoseError>& errors, const std::vector<double>& latencies,
                                   const std::vector<std::size_t>& exclude = {});

/// CSV with header frame,e_t_mm,e_r_deg,latency_s,outlier.
void write_sequence_csv(std::ostream& os, const SequenceReport& report);

}  // namespace msreg
