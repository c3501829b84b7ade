#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "msreg/kdtree.hpp"
#include "msreg/registration.hpp"

namespace msreg {

std::size_t NormalCloud::valid_normal_count() const {
  return static_cast<std::size_t>(std::count(normal_valid.begin(), normal_valid.end(), 1));
}

NormalCloud transformed(const NormalCloud& cloud, const RigidTransformd& transform) {
  NormalCloud out;
  out.cloud = transformed(cloud.cloud, transform);
  out.normals.reserve(cloud.normals.size());
  for (const auto& n : cloud.normals) out.normals.push_back(transform.rotation() * n);
  out.normal_valid = cloud.normal_valid;
  return out;
}

NormalCloud estimate_normals(const LabeledCloud& cloud, int k) {
  if (k < 3) throw Error(ErrorKind::InvalidArgument, "normal estimation needs k >= 3");
  if (cloud.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorKind::InvalidArgument, "normal estimation needs at least k points");
  }
  NormalCloud out;
  out.cloud = cloud;
  out.normals.assign(cloud.size(), Eigen::Vector3d::Zero());
  out.normal_valid.assign(cloud.size(), 0);

  const KdTree3 tree(cloud.points);
  std::vector<KdTree3::Hit> hits;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    tree.knn(cloud.points[i], static_cast<std::size_t>(k), hits);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& h : hits) mean += cloud.points[h.index];
    mean /= static_cast<double>(hits.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& h : hits) {
      const Eigen::Vector3d d = cloud.points[h.index] - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d ev = eig.eigenvalues();
    // Coincident or collinear neighbourhoods leave the plane undetermined.
    if (!(ev(2) > 0.0) || ev(1) <= 1e-10 * ev(2)) continue;
    Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();
    if (n.z() > 0.0) n = -n;
    out.normals[i] = n;
    out.normal_valid[i] = 1;
  }
  return out;
}

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  std::uint8_t label;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.label) + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

LabeledCloud voxel_downsample(const LabeledCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw Error(ErrorKind::InvalidArgument, "voxel size must be positive");
  struct Acc {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    std::size_t count = 0;
    std::uint8_t label = kNoLabel;
  };
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> index;
  std::vector<Acc> acc;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    const VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
                       static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
                       static_cast<std::int64_t>(std::floor(p.z() / voxel_size)), cloud.labels[i]};
    auto [it, inserted] = index.try_emplace(key, acc.size());
    if (inserted) {
      acc.emplace_back();
      acc.back().label = cloud.labels[i];
    }
    Acc& a = acc[it->second];
    a.sum += p;
    a.color += Eigen::Vector3d(cloud.colors[i][0], cloud.colors[i][1], cloud.colors[i][2]);
    ++a.count;
  }
  LabeledCloud out;
  out.points.reserve(acc.size());
  for (const Acc& a : acc) {
    const double n = static_cast<double>(a.count);
    const Eigen::Vector3d c = a.color / n;
    out.push_back(a.sum / n,
                  Rgb8{static_cast<std::uint8_t>(std::lround(c.x())),
                       static_cast<std::uint8_t>(std::lround(c.y())),
                       static_cast<std::uint8_t>(std::lround(c.z()))},
                  a.label);
  }
  return out;
}

double median_spacing(const LabeledCloud& cloud, std::size_t max_probes) {
  if (cloud.size() < 2) throw Error(ErrorKind::InvalidArgument, "spacing needs at least 2 points");
  const KdTree3 tree(cloud.points);
  const std::size_t stride = std::max<std::size_t>(1, cloud.size() / std::max<std::size_t>(1, max_probes));
  std::vector<double> d;
  std::vector<KdTree3::Hit> hits;
  for (std::size_t i = 0; i < cloud.size(); i += stride) {
    tree.knn(cloud.points[i], 2, hits);
    // The first hit is the probe itself unless duplicates tie with it.
    for (const auto& h : hits) {
      if (h.index != i) {
        d.push_back(std::sqrt(h.dist2));
        break;
      }
    }
  }
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

std::map<std::uint8_t, Eigen::Vector2d> label_centroids_2d(const LabeledCloud& cloud) {
  std::map<std::uint8_t, std::pair<Eigen::Vector2d, std::size_t>> acc;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i] == kNoLabel) continue;
    auto& [sum, n] = acc.try_emplace(cloud.labels[i], Eigen::Vector2d::Zero(), 0).first->second;
    sum += cloud.points[i].head<2>();
    ++n;
  }
  std::map<std::uint8_t, Eigen::Vector2d> out;
  for (const auto& [label, a] : acc) out[label] = a.first / static_cast<double>(a.second);
  return out;
}

double estimate_inplane_orientation(const std::map<std::uint8_t, Eigen::Vector2d>& cloud_a_2d,
                                    const std::map<std::uint8_t, Eigen::Vector2d>& cloud_b_2d) {
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> pairs;
  for (const auto& [label, a] : cloud_a_2d) {
    auto it = cloud_b_2d.find(label);
    if (it != cloud_b_2d.end()) pairs.emplace_back(a, it->second);
  }
  if (pairs.size() < 2) {
    throw Error(ErrorKind::Registration, "in-plane orientation needs >= 2 shared labels");
  }
  Eigen::Vector2d ca = Eigen::Vector2d::Zero(), cb = Eigen::Vector2d::Zero();
  for (const auto& [a, b] : pairs) {
    ca += a;
    cb += b;
  }
  ca /= static_cast<double>(pairs.size());
  cb /= static_cast<double>(pairs.size());
  double s_cos = 0.0, s_sin = 0.0;
  for (const auto& [a, b] : pairs) {
    const Eigen::Vector2d pa = a - ca, pb = b - cb;
    s_cos += pb.dot(pa);
    s_sin += pb.x() * pa.y() - pb.y() * pa.x();
  }
  if (std::hypot(s_cos, s_sin) < 1e-12) {
    throw Error(ErrorKind::Registration, "label centroids are coincident");
  }
  return std::atan2(s_sin, s_cos);
}

}  // namespace msreg
