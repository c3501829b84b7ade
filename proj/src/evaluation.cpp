#include "msreg/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace msreg {

PoseError pose_error(const RigidTransformd& estimate, const RigidTransformd& reference) {
  return {translational_error(estimate, reference), rotational_error(estimate, reference)};
}

bool SequenceReport::is_outlier(std::size_t frame) const {
  return std::binary_search(outliers.begin(), outliers.end(), frame);
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ChannelStats channel_stats(const std::vector<double>& values) {
  ChannelStats s;
  s.count = values.size();
  if (values.empty()) {
    s.mean = s.std = s.median = s.q1 = s.q3 = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  s.median = quantile(values, 0.5);
  s.q1 = quantile(values, 0.25);
  s.q3 = quantile(values, 0.75);
  return s;
}

namespace {

std::vector<std::uint8_t> tukey_flags(const std::vector<double>& v) {
  const double q1 = quantile(v, 0.25), q3 = quantile(v, 0.75);
  const double iqr = q3 - q1;
  std::vector<std::uint8_t> flags(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    flags[i] = (v[i] > q3 + 1.5 * iqr || v[i] < q1 - 1.5 * iqr) ? 1 : 0;
  }
  return flags;
}

}  // namespace

SequenceReport sequence_statistics(const std::vector<PoseError>& errors, const std::vector<double>& latencies,
                                   const std::vector<std::size_t>& exclude) {
  if (errors.empty()) throw Error(ErrorKind::InvalidArgument, "sequence statistics need at least one frame");
  if (errors.size() < 2) throw Error(ErrorKind::InvalidArgument, "sequence statistics need at least 2 frames");
  if (!latencies.empty() && latencies.size() != errors.size()) {
    throw Error(ErrorKind::DimensionMismatch, "latency count does not match frame count");
  }
  SequenceReport r;
  r.frames = errors;
  r.latencies = latencies;
  std::vector<double> et, er;
  for (const auto& e : errors) {
    if (!(e.e_t >= 0.0) || !(e.e_r >= 0.0 && e.e_r <= 180.0)) {
      throw Error(ErrorKind::InvalidArgument, "pose error out of range");
    }
    et.push_back(e.e_t);
    er.push_back(e.e_r);
  }
  r.outlier_t = tukey_flags(et);
  r.outlier_r = tukey_flags(er);
  for (std::size_t i : exclude) {
    if (i >= errors.size()) throw Error(ErrorKind::InvalidArgument, "excluded frame index out of range");
    r.outlier_t[i] = r.outlier_r[i] = 1;
  }
  std::vector<double> kt, kr;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!r.outlier_t[i]) kt.push_back(et[i]);
    if (!r.outlier_r[i]) kr.push_back(er[i]);
    if (r.outlier_t[i] || r.outlier_r[i]) r.outliers.push_back(i);
  }
  r.t_raw = channel_stats(et);
  r.r_raw = channel_stats(er);
  r.t_retained = channel_stats(kt);
  r.r_retained = channel_stats(kr);
  if (!latencies.empty()) {
    r.mean_latency = std::accumulate(latencies.begin(), latencies.end(), 0.0) / static_cast<double>(latencies.size());
  }
  return r;
}

void write_sequence_csv(std::ostream& os, const SequenceReport& report) {
  os << "frame,e_t_mm,e_r_deg,latency_s,outlier\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < report.frames.size(); ++i) {
    os << i << ',' << report.frames[i].e_t << ',' << report.frames[i].e_r << ','
       << (report.latencies.empty() ? 0.0 : report.latencies[i]) << ',' << (report.is_outlier(i) ? 1 : 0) << '\n';
  }
}

}  // namespace msreg
