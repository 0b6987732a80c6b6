#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "rtsim/geometry/types.hpp"

namespace rtsim {

/// Static 3-d tree over a point set for nearest, k-nearest and radius
/// queries. Holds its own copy of the points.
class KdTree {
 public:
  struct Hit {
    std::uint32_t index;
    double distance_sq;
  };

  explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 1);
      build(0, static_cast<std::uint32_t>(points_.size()));
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Vec3>& points() const noexcept { return points_; }

  /// Nearest neighbor; the tree must be non-empty.
  Hit nearest(const Vec3& q) const {
    Hit best{0, std::numeric_limits<double>::infinity()};
    nearest_rec(0, q, best);
    return best;
  }

  /// k nearest neighbors sorted by distance.
  std::vector<Hit> knn(const Vec3& q, std::size_t k) const {
    std::vector<Hit> heap;  // max-heap on distance
    if (k == 0 || points_.empty()) return heap;
    heap.reserve(k + 1);
    knn_rec(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end(), by_distance);
    return heap;
  }

  /// All points within `radius` (unsorted).
  std::vector<Hit> radius(const Vec3& q, double radius) const {
    std::vector<Hit> out;
    if (!points_.empty()) radius_rec(0, q, radius * radius, out);
    return out;
  }

 private:
  static constexpr std::uint32_t kLeafSize = 8;

  struct Node {
    std::uint32_t begin, end;   // range in order_
    std::uint32_t left, right;  // children, 0 for leaves (root is never a child)
    int axis;
    double split;
  };

  static bool by_distance(const Hit& a, const Hit& b) { return a.distance_sq < b.distance_sq; }

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0, -1, 0.0});
    if (end - begin <= kLeafSize) return id;

    Aabb box;
    for (std::uint32_t i = begin; i < end; ++i) box.expand(points_[order_[i]]);
    int axis = 0;
    box.extent().maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void nearest_rec(std::uint32_t id, const Vec3& q, Hit& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double d = (points_[order_[i]] - q).squaredNorm();
        if (d < best.distance_sq || (d == best.distance_sq && order_[i] < best.index)) {
          best = {order_[i], d};
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t near = diff < 0 ? n.left : n.right;
    const std::uint32_t far = diff < 0 ? n.right : n.left;
    nearest_rec(near, q, best);
    if (diff * diff <= best.distance_sq) nearest_rec(far, q, best);
  }

  void knn_rec(std::uint32_t id, const Vec3& q, std::size_t k, std::vector<Hit>& heap) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double d = (points_[order_[i]] - q).squaredNorm();
        if (heap.size() < k) {
          heap.push_back({order_[i], d});
          std::push_heap(heap.begin(), heap.end(), by_distance);
        } else if (d < heap.front().distance_sq) {
          std::pop_heap(heap.begin(), heap.end(), by_distance);
          heap.back() = {order_[i], d};
          std::push_heap(heap.begin(), heap.end(), by_distance);
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t near = diff < 0 ? n.left : n.right;
    const std::uint32_t far = diff < 0 ? n.right : n.left;
    knn_rec(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().distance_sq) knn_rec(far, q, k, heap);
  }

  void radius_rec(std::uint32_t id, const Vec3& q, double r2, std::vector<Hit>& out) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double d = (points_[order_[i]] - q).squaredNorm();
        if (d <= r2) out.push_back({order_[i], d});
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t near = diff < 0 ? n.left : n.right;
    const std::uint32_t far = diff < 0 ? n.right : n.left;
    radius_rec(near, q, r2, out);
    if (diff * diff <= r2) radius_rec(far, q, r2, out);
  }

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace rtsim
