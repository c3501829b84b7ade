#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Cholesky>

#include "msreg/kdtree.hpp"
#include "msreg/registration.hpp"

namespace msreg {

void ColorIcpParams::validate() const {
  if (!(delta >= 0.0 && delta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "ICP delta must be in [0, 1]");
  if (max_iterations <= 0) throw Error(ErrorKind::InvalidArgument, "ICP max_iterations must be positive");
  if (std::isnan(correspondence_radius)) throw Error(ErrorKind::InvalidArgument, "ICP radius is NaN");
  if (!(convergence_eps >= 0.0)) throw Error(ErrorKind::InvalidArgument, "ICP convergence_eps must be >= 0");
  if (gradient_neighbors < 3) throw Error(ErrorKind::InvalidArgument, "ICP gradient_neighbors must be >= 3");
}

namespace {

constexpr int kMaxHalvings = 12;

Eigen::Vector3d unit_color(const Rgb8& c) { return Eigen::Vector3d(c[0], c[1], c[2]) / 255.0; }

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Nearest-neighbour lookup into the valid-normal points of A. In strict
/// mode a pair whose labels differ is discarded rather than re-routed.
class Targets {
 public:
  Targets(const NormalCloud& a, bool label_strict) : a_(a), strict_(label_strict) {
    std::vector<Eigen::Vector3d> pts;
    for (std::uint32_t i = 0; i < a.size(); ++i) {
      if (!a.normal_valid[i]) continue;
      members_.push_back(i);
      pts.push_back(a.cloud.points[i]);
    }
    tree_ = KdTree3(pts);
  }

  std::optional<std::uint32_t> nearest(const Eigen::Vector3d& q, std::uint8_t label, double r2) const {
    const KdTree3::Hit hit = tree_.nearest(q, r2);
    if (!hit.found()) return std::nullopt;
    const std::uint32_t ai = members_[hit.index];
    if (strict_ && a_.cloud.labels[ai] != label) return std::nullopt;
    return ai;
  }

 private:
  const NormalCloud& a_;
  bool strict_;
  std::vector<std::uint32_t> members_;
  KdTree3 tree_;
};

struct Correspondence {
  std::uint32_t b, a;
};

std::vector<Correspondence> correspond(const Targets& targets, const LabeledCloud& b,
                                       const RigidTransformd& t, double radius) {
  std::vector<Correspondence> out;
  out.reserve(b.size());
  const double r2 = radius * radius;
  for (std::uint32_t i = 0; i < b.size(); ++i) {
    if (auto a = targets.nearest(t * b.points[i], b.labels[i], r2)) out.push_back({i, *a});
  }
  return out;
}

/// Per-point 3x3 colour gradient of A (rows: channels) in the tangent plane,
/// fitted over k neighbours with a soft constraint G n = 0.
std::vector<Eigen::Matrix3d> color_gradients(const NormalCloud& a, int k) {
  std::vector<Eigen::Matrix3d> g(a.size(), Eigen::Matrix3d::Zero());
  const KdTree3 tree(a.cloud.points);
  std::vector<KdTree3::Hit> hits;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.normal_valid[i]) continue;
    tree.knn(a.cloud.points[i], static_cast<std::size_t>(k) + 1, hits);
    const Eigen::Vector3d& p = a.cloud.points[i];
    const Eigen::Vector3d& n = a.normals[i];
    const Eigen::Vector3d cp = unit_color(a.cloud.colors[i]);
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d atb = Eigen::Matrix3d::Zero();
    std::size_t used = 0;
    for (const auto& h : hits) {
      if (h.index == i) continue;
      const Eigen::Vector3d q = a.cloud.points[h.index];
      const Eigen::Vector3d u = q - n.dot(q - p) * n - p;
      const Eigen::Vector3d dc = unit_color(a.cloud.colors[h.index]) - cp;
      ata += u * u.transpose();
      atb += u * dc.transpose();
      ++used;
    }
    if (used < 2) continue;
    const double w = static_cast<double>(used);
    ata += w * w * n * n.transpose();
    const Eigen::LDLT<Eigen::Matrix3d> ldlt(ata);
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::Matrix3d x = ldlt.solve(atb);
    if (x.allFinite()) g[i] = x.transpose();
  }
  return g;
}

struct Problem {
  const NormalCloud& a;
  const LabeledCloud& b;
  const std::vector<Eigen::Matrix3d>& grad;
  double delta;

  double objective(const std::vector<Correspondence>& corr, const RigidTransformd& t) const {
    double e = 0.0;
    for (const auto& c : corr) {
      const Eigen::Vector3d q = t * b.points[c.b];
      const Eigen::Vector3d& p = a.cloud.points[c.a];
      const Eigen::Vector3d& n = a.normals[c.a];
      const double rg = (q - p).dot(n);
      const Eigen::Vector3d proj = q - rg * n;
      const Eigen::Vector3d rc =
          unit_color(a.cloud.colors[c.a]) + grad[c.a] * (proj - p) - unit_color(b.colors[c.b]);
      e += delta * rg * rg + (1.0 - delta) * rc.squaredNorm();
    }
    return e;
  }

  Vector6d step(const std::vector<Correspondence>& corr, const RigidTransformd& t) const {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Vector6d g = Vector6d::Zero();
    Eigen::Matrix<double, 3, 6> dq;
    for (const auto& c : corr) {
      const Eigen::Vector3d q = t * b.points[c.b];
      const Eigen::Vector3d& p = a.cloud.points[c.a];
      const Eigen::Vector3d& n = a.normals[c.a];
      dq.leftCols<3>() = -skew(q);
      dq.rightCols<3>().setIdentity();
      if (delta > 0.0) {
        const double rg = (q - p).dot(n);
        const Eigen::Matrix<double, 1, 6> jg = n.transpose() * dq;
        h += delta * jg.transpose() * jg;
        g += delta * jg.transpose() * rg;
      }
      if (delta < 1.0) {
        const double rg = (q - p).dot(n);
        const Eigen::Vector3d proj = q - rg * n;
        const Eigen::Vector3d rc =
            unit_color(a.cloud.colors[c.a]) + grad[c.a] * (proj - p) - unit_color(b.colors[c.b]);
        const Eigen::Matrix<double, 3, 6> jc =
            grad[c.a] * (Eigen::Matrix3d::Identity() - n * n.transpose()) * dq;
        h += (1.0 - delta) * jc.transpose() * jc;
        g += (1.0 - delta) * jc.transpose() * rc;
      }
    }
    // A vanishing diagonal loading keeps directions the data leaves free fixed.
    const double load = 1e-12 * std::max(h.diagonal().maxCoeff(), 1e-300);
    h.diagonal().array() += load;
    const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(h);
    Vector6d xi = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !xi.allFinite()) xi.setZero();
    return xi;
  }
};

struct Stats {
  double fitness = 0.0;
  double rmse = 0.0;
};

Stats stats_of(const std::vector<Correspondence>& corr, const NormalCloud& a, const LabeledCloud& b,
               const RigidTransformd& t) {
  Stats s;
  if (b.empty()) return s;
  double ss = 0.0;
  for (const auto& c : corr) ss += (t * b.points[c.b] - a.cloud.points[c.a]).squaredNorm();
  s.fitness = static_cast<double>(corr.size()) / static_cast<double>(b.size());
  s.rmse = corr.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(corr.size()));
  return s;
}

}  // namespace

ColorIcpResult color_icp_refine(const NormalCloud& cloud_a, const NormalCloud& cloud_b,
                                const RigidTransformd& init, const ColorIcpParams& params) {
  params.validate();
  if (cloud_a.valid_normal_count() == 0) throw Error(ErrorKind::Registration, "Cloud A has no valid normals");
  const double radius =
      params.correspondence_radius > 0.0 ? params.correspondence_radius : 5.0 * median_spacing(cloud_a.cloud);
  const Targets targets(cloud_a, params.label_strict);
  const std::vector<Eigen::Matrix3d> grad =
      params.delta < 1.0 ? color_gradients(cloud_a, params.gradient_neighbors)
                         : std::vector<Eigen::Matrix3d>(cloud_a.size(), Eigen::Matrix3d::Zero());
  const Problem problem{cloud_a, cloud_b.cloud, grad, params.delta};

  ColorIcpResult result;
  RigidTransformd t = init;
  std::vector<Correspondence> corr = correspond(targets, cloud_b.cloud, t, radius);
  if (corr.empty()) throw Error(ErrorKind::Registration, "no correspondences at the initial transform");
  Stats prev = stats_of(corr, cloud_a, cloud_b.cloud, t);

  for (int it = 0; it < params.max_iterations; ++it) {
    const double before = problem.objective(corr, t);
    const Vector6d xi = problem.step(corr, t);
    double alpha = 1.0;
    bool accepted = false;
    RigidTransformd next = t;
    double after = before;
    for (int k = 0; k <= kMaxHalvings; ++k, alpha *= 0.5) {
      next = RigidTransformd::from_twist(alpha * xi) * t;
      after = problem.objective(corr, next);
      if (after <= before) {
        accepted = true;
        break;
      }
    }
    result.iterations = it + 1;
    if (!accepted) {
      result.converged = true;
      break;
    }
    result.trace.push_back({before, after});
    t = next;
    std::vector<Correspondence> next_corr = correspond(targets, cloud_b.cloud, t, radius);
    if (next_corr.empty()) break;
    const Stats now = stats_of(next_corr, cloud_a, cloud_b.cloud, t);
    corr = std::move(next_corr);
    const bool small = std::abs(now.fitness - prev.fitness) < params.convergence_eps &&
                       std::abs(now.rmse - prev.rmse) < params.convergence_eps;
    prev = now;
    if (small) {
      result.converged = true;
      break;
    }
  }
  result.transform = t;
  result.fitness = prev.fitness;
  result.rmse = prev.rmse;
  return result;
}

ColorIcpResult color_icp_multiscale(const LabeledCloud& cloud_a, const LabeledCloud& cloud_b,
                                    const RigidTransformd& init, const ColorIcpParams& params,
                                    const std::vector<double>& factors, double base_spacing,
                                    int normal_neighbors) {
  params.validate();
  if (factors.empty()) throw Error(ErrorKind::InvalidArgument, "multi-scale refinement needs >= 1 level");
  if (!(base_spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "base spacing must be positive");
  const double base_radius = params.correspondence_radius > 0.0 ? params.correspondence_radius : 5.0 * base_spacing;

  ColorIcpResult result;
  result.transform = init;
  for (double f : factors) {
    if (!(f > 0.0)) throw Error(ErrorKind::InvalidArgument, "scale factors must be positive");
    const LabeledCloud a = voxel_downsample(cloud_a, f * base_spacing);
    NormalCloud b;
    b.cloud = voxel_downsample(cloud_b, f * base_spacing);
    b.normals.assign(b.size(), Eigen::Vector3d::Zero());
    b.normal_valid.assign(b.size(), 0);
    if (a.size() < static_cast<std::size_t>(normal_neighbors) || b.cloud.empty()) continue;
    ColorIcpParams level = params;
    level.correspondence_radius = base_radius * f;
    ColorIcpResult r = color_icp_refine(estimate_normals(a, normal_neighbors), b, result.transform, level);
    result.transform = r.transform;
    result.iterations += r.iterations;
    result.converged = r.converged;
    result.trace.insert(result.trace.end(), r.trace.begin(), r.trace.end());
  }

  // Final fitness and RMSE on the full-resolution clouds.
  NormalCloud a_full;
  a_full.cloud = cloud_a;
  a_full.normals.assign(cloud_a.size(), Eigen::Vector3d::Zero());
  a_full.normal_valid.assign(cloud_a.size(), 1);
  const Targets targets(a_full, params.label_strict);
  const auto corr = correspond(targets, cloud_b, result.transform, base_radius);
  const Stats s = stats_of(corr, a_full, cloud_b, result.transform);
  result.fitness = s.fitness;
  result.rmse = s.rmse;
  return result;
}

}  // namespace msreg
