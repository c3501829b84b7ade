#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "msreg/kdtree.hpp"
#include "msreg/registration.hpp"

namespace msreg {

void RansacParams::validate() const {
  if (max_iterations <= 0) throw Error(ErrorKind::InvalidArgument, "RANSAC max_iterations must be positive");
  if (sample_size != 3) throw Error(ErrorKind::InvalidArgument, "RANSAC sample_size must be 3");
  if (std::isnan(inlier_distance)) throw Error(ErrorKind::InvalidArgument, "RANSAC inlier_distance is NaN");
  if (!(normal_angle_max > 0.0 && normal_angle_max <= kPi)) {
    throw Error(ErrorKind::InvalidArgument, "RANSAC normal_angle_max must be in (0, pi]");
  }
  if (!(inplane_angle_window >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "RANSAC inplane_angle_window must be >= 0");
  }
  if (!(edge_length_similarity > 0.0 && edge_length_similarity <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "RANSAC edge_length_similarity must be in (0, 1]");
  }
  if (score_subsample < 0) throw Error(ErrorKind::InvalidArgument, "RANSAC score_subsample must be >= 0");
}

namespace {

constexpr int kMaxRefinePasses = 10;

/// Per-label view of a NormalCloud restricted to points with valid normals.
struct LabelIndex {
  std::map<std::uint8_t, std::vector<std::uint32_t>> members;
  std::map<std::uint8_t, KdTree3> trees;

  LabelIndex(const NormalCloud& c, bool use_labels, bool build_trees) {
    for (std::uint32_t i = 0; i < c.size(); ++i) {
      if (!c.normal_valid[i]) continue;
      members[use_labels ? c.cloud.labels[i] : std::uint8_t{0}].push_back(i);
    }
    if (!build_trees) return;
    for (const auto& [label, idx] : members) {
      std::vector<Eigen::Vector3d> pts;
      pts.reserve(idx.size());
      for (auto i : idx) pts.push_back(c.cloud.points[i]);
      trees.emplace(label, KdTree3(pts));
    }
  }
};

struct Pair {
  std::uint32_t b, a;
};

class Scorer {
 public:
  Scorer(const NormalCloud& a, const NormalCloud& b, const LabelIndex& ia, bool use_labels,
         double inlier_distance, double cos_normal)
      : a_(a), b_(b), ia_(ia), use_labels_(use_labels), r2_(inlier_distance * inlier_distance),
        cos_normal_(cos_normal) {}

  /// Inlier pair for B point i under T, if any.
  bool match(const RigidTransformd& t, std::uint32_t i, Pair& out) const {
    const std::uint8_t label = use_labels_ ? b_.cloud.labels[i] : std::uint8_t{0};
    auto tree = ia_.trees.find(label);
    if (tree == ia_.trees.end()) return false;
    const KdTree3::Hit hit = tree->second.nearest(t * b_.cloud.points[i], r2_);
    if (!hit.found()) return false;
    const std::uint32_t ai = ia_.members.at(label)[hit.index];
    if (std::abs(a_.normals[ai].dot(t.rotation() * b_.normals[i])) < cos_normal_) return false;
    out = {i, ai};
    return true;
  }

  /// Inlier count over `probe`, abandoning once `to_beat` is out of reach.
  std::size_t count(const RigidTransformd& t, const std::vector<std::uint32_t>& probe,
                    std::size_t to_beat) const {
    std::size_t n = 0;
    Pair p{};
    for (std::size_t k = 0; k < probe.size(); ++k) {
      if (match(t, probe[k], p)) ++n;
      if (n + (probe.size() - k - 1) <= to_beat) return n;
    }
    return n;
  }

  std::vector<Pair> inliers(const RigidTransformd& t, const std::vector<std::uint32_t>& probe) const {
    std::vector<Pair> out;
    Pair p{};
    for (auto i : probe) {
      if (match(t, i, p)) out.push_back(p);
    }
    return out;
  }

 private:
  const NormalCloud& a_;
  const NormalCloud& b_;
  const LabelIndex& ia_;
  bool use_labels_;
  double r2_;
  double cos_normal_;
};

bool edges_consistent(const std::array<Eigen::Vector3d, 3>& pa, const std::array<Eigen::Vector3d, 3>& pb,
                      double similarity) {
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const double da = (pa[i] - pa[j]).norm();
      const double db = (pb[i] - pb[j]).norm();
      if (da < similarity * db || db < similarity * da) return false;
    }
  }
  return true;
}

}  // namespace

RansacResult ransac_coarse_align(const NormalCloud& cloud_a, const NormalCloud& cloud_b,
                                 const RansacParams& params, double inplane) {
  params.validate();
  const LabelIndex ia(cloud_a, params.use_labels, true);
  const LabelIndex ib(cloud_b, params.use_labels, false);

  std::vector<std::uint8_t> shared;
  for (const auto& [label, idx] : ib.members) {
    if (ia.members.count(label)) shared.push_back(label);
  }
  if (shared.empty()) throw Error(ErrorKind::Registration, "clouds share no labels");

  const double inlier_distance =
      params.inlier_distance > 0.0 ? params.inlier_distance : 1.5 * median_spacing(cloud_a.cloud);
  const double min_edge = 4.0 * inlier_distance;
  const Scorer scorer(cloud_a, cloud_b, ia, params.use_labels, inlier_distance,
                      std::cos(params.normal_angle_max));

  std::vector<std::uint32_t> all_b;
  for (std::uint8_t label : shared) {
    const auto& idx = ib.members.at(label);
    all_b.insert(all_b.end(), idx.begin(), idx.end());
  }
  std::sort(all_b.begin(), all_b.end());
  std::vector<std::uint32_t> probe;
  const std::size_t want = params.score_subsample > 0 ? static_cast<std::size_t>(params.score_subsample) : all_b.size();
  if (all_b.size() <= want) {
    probe = all_b;
  } else {
    for (std::size_t k = 0; k < want; ++k) probe.push_back(all_b[k * all_b.size() / want]);
  }

  std::mt19937_64 rng(params.rng_seed);
  auto pick = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  RansacResult result;
  result.inlier_distance = inlier_distance;
  bool have_best = false;
  std::size_t best_score = 0;
  RigidTransformd best;
  const bool distinct_labels = shared.size() >= 3;

  for (int it = 0; it < params.max_iterations; ++it) {
    std::array<std::uint8_t, 3> labels{};
    if (distinct_labels) {
      std::array<std::size_t, 3> li{};
      li[0] = pick(shared.size());
      do li[1] = pick(shared.size()); while (li[1] == li[0]);
      do li[2] = pick(shared.size()); while (li[2] == li[0] || li[2] == li[1]);
      for (int k = 0; k < 3; ++k) labels[k] = shared[li[k]];
    } else {
      for (int k = 0; k < 3; ++k) labels[k] = shared[pick(shared.size())];
    }
    std::array<std::uint32_t, 3> sb{}, sa{};
    std::array<Eigen::Vector3d, 3> pb, pa;
    for (int k = 0; k < 3; ++k) {
      const auto& mb = ib.members.at(labels[k]);
      const auto& ma = ia.members.at(labels[k]);
      sb[k] = mb[pick(mb.size())];
      sa[k] = ma[pick(ma.size())];
      pb[k] = cloud_b.cloud.points[sb[k]];
      pa[k] = cloud_a.cloud.points[sa[k]];
    }
    if ((pb[0] - pb[1]).norm() < min_edge || (pb[0] - pb[2]).norm() < min_edge ||
        (pb[1] - pb[2]).norm() < min_edge) {
      continue;
    }
    if (!edges_consistent(pa, pb, params.edge_length_similarity)) continue;
    // Near-collinear triples give an ill-conditioned fit.
    if ((pb[1] - pb[0]).cross(pb[2] - pb[0]).norm() < 0.5 * min_edge * min_edge) continue;

    const RigidTransformd t = fit_rigid(pb, pa);
    bool sample_ok = true;
    for (int k = 0; k < 3 && sample_ok; ++k) {
      sample_ok = (t * pb[k] - pa[k]).norm() <= 2.0 * inlier_distance &&
                  std::abs(cloud_a.normals[sa[k]].dot(t.rotation() * cloud_b.normals[sb[k]])) >=
                      std::cos(params.normal_angle_max);
    }
    if (!sample_ok) continue;
    if (params.use_inplane_constraint &&
        std::abs(wrap_angle(inplane_angle(t.rotation()) - inplane)) > params.inplane_angle_window) {
      ++result.hypotheses_rejected_by_constraint;
      continue;
    }
    ++result.hypotheses_scored;
    const std::size_t score = scorer.count(t, probe, have_best ? best_score : 0);
    if (!have_best || score > best_score) {
      have_best = true;
      best_score = score;
      best = t;
    }
  }
  if (!have_best) {
    throw Error(ErrorKind::Registration,
                result.hypotheses_rejected_by_constraint > 0
                    ? "no RANSAC hypothesis satisfies the in-plane constraint"
                    : "no valid RANSAC hypothesis");
  }

  // Least-squares refit over the inliers, repeated while the pairing changes.
  RigidTransformd t = best;
  std::vector<Pair> pairs = scorer.inliers(t, all_b);
  for (int pass = 0; pass < kMaxRefinePasses && pairs.size() >= 3; ++pass) {
    std::vector<Eigen::Vector3d> src, dst;
    src.reserve(pairs.size());
    dst.reserve(pairs.size());
    for (const Pair& p : pairs) {
      src.push_back(cloud_b.cloud.points[p.b]);
      dst.push_back(cloud_a.cloud.points[p.a]);
    }
    const RigidTransformd next = fit_rigid(src, dst);
    if (params.use_inplane_constraint &&
        std::abs(wrap_angle(inplane_angle(next.rotation()) - inplane)) > params.inplane_angle_window) {
      break;
    }
    std::vector<Pair> next_pairs = scorer.inliers(next, all_b);
    if (next_pairs.size() < pairs.size()) break;
    t = next;
    const bool same = next_pairs.size() == pairs.size() &&
                      std::equal(pairs.begin(), pairs.end(), next_pairs.begin(),
                                 [](const Pair& x, const Pair& y) { return x.a == y.a && x.b == y.b; });
    pairs = std::move(next_pairs);
    if (same) break;
  }
  result.transform = t;
  result.inliers = pairs.size();
  result.inlier_fraction = static_cast<double>(pairs.size()) / static_cast<double>(cloud_b.size());
  return result;
}

}  // namespace msreg
