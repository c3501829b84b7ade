#include "msreg/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace msreg {

namespace {
constexpr std::uint32_t kLeafSize = 8;

bool closer(const KdTree3::Hit& a, const KdTree3::Hit& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}
}  // namespace

KdTree3::KdTree3(std::span<const Eigen::Vector3d> points)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree3::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, -1, 0.0});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

KdTree3::Hit KdTree3::nearest(const Eigen::Vector3d& q, double max_dist2) const {
  Hit best;
  best.dist2 = max_dist2;
  best.index = std::numeric_limits<std::uint32_t>::max();
  if (!nodes_.empty()) nearest_rec(0, q, best);
  if (best.index == std::numeric_limits<std::uint32_t>::max()) return Hit{};
  return best;
}

void KdTree3::nearest_rec(std::int32_t id, const Eigen::Vector3d& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Hit h{order_[i], (points_[order_[i]] - q).squaredNorm()};
      if (h.dist2 <= best.dist2 &&
          (best.index == std::numeric_limits<std::uint32_t>::max() || closer(h, best))) {
        best = h;
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t first = diff < 0 ? node.left : node.right;
  const std::int32_t second = diff < 0 ? node.right : node.left;
  nearest_rec(first, q, best);
  if (diff * diff <= best.dist2) nearest_rec(second, q, best);
}

void KdTree3::knn(const Eigen::Vector3d& q, std::size_t k, std::vector<Hit>& out) const {
  out.clear();
  if (k == 0 || nodes_.empty()) return;
  out.reserve(k + 1);
  knn_rec(0, q, k, out);
  std::sort_heap(out.begin(), out.end(), closer);
}

void KdTree3::knn_rec(std::int32_t id, const Eigen::Vector3d& q, std::size_t k,
                      std::vector<Hit>& heap) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Hit h{order_[i], (points_[order_[i]] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(h);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(h, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = h;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t first = diff < 0 ? node.left : node.right;
  const std::int32_t second = diff < 0 ? node.right : node.left;
  knn_rec(first, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().dist2) knn_rec(second, q, k, heap);
}

}  // namespace msreg
