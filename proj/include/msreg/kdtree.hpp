#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace msreg {

/// Static 3D k-d tree over a point set. Indices refer to the input order.
class KdTree3 {
 public:
  struct Hit {
    std::uint32_t index = 0;
    double dist2 = std::numeric_limits<double>::infinity();
    bool found() const { return dist2 < std::numeric_limits<double>::infinity(); }
  };

  KdTree3() = default;
  explicit KdTree3(std::span<const Eigen::Vector3d> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// Nearest point with squared distance <= max_dist2 (not found otherwise).
  Hit nearest(const Eigen::Vector3d& q,
              double max_dist2 = std::numeric_limits<double>::infinity()) const;

  /// k nearest points, ascending by distance (ties by index).
  void knn(const Eigen::Vector3d& q, std::size_t k, std::vector<Hit>& out) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // leaf range into order_
    std::int32_t left = -1, right = -1;
    int axis = -1;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void nearest_rec(std::int32_t node, const Eigen::Vector3d& q, Hit& best) const;
  void knn_rec(std::int32_t node, const Eigen::Vector3d& q, std::size_t k,
               std::vector<Hit>& heap) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace msreg
