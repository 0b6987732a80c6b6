#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "rtsim/geometry/types.hpp"

namespace rtsim {

/// Binary AABB tree over the triangles of one mesh. Leaves hold at most
/// kLeafSize triangles; splits are at the centroid median along the longest
/// axis of the centroid bounds, so a given mesh always yields the same tree.
/// The tree keeps its own copy of triangle corners in leaf order.
class Bvh {
 public:
  static constexpr std::uint32_t kLeafSize = 4;

  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first slot; inner: left child
    std::uint32_t count = 0;  // leaf: triangle count; inner: 0
    std::uint32_t right = 0;  // inner: right child

    bool is_leaf() const { return count > 0; }
  };

  struct RayHit {
    double t = 0.0;
    std::uint32_t triangle = 0;
  };

  struct PointQuery {
    double distance = std::numeric_limits<double>::infinity();
    Vec3 point = Vec3::Zero();
    std::uint32_t triangle = 0;
  };

  explicit Bvh(const TriMesh& mesh) {
    if (mesh.empty()) throw GeometryError("cannot build a BVH over an empty mesh");
    const auto n = static_cast<std::uint32_t>(mesh.triangle_count());
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::vector<Vec3> centroids(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      auto [a, b, c] = mesh.corners(i);
      centroids[i] = (a + b + c) / 3.0;
    }
    nodes_.reserve(2 * n / kLeafSize + 2);
    build(mesh, order, centroids, 0, n, 1);

    corners_.resize(n);
    source_.resize(n);
    for (std::uint32_t slot = 0; slot < n; ++slot) {
      corners_[slot] = mesh.corners(order[slot]);
      source_[slot] = order[slot];
    }
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t triangle_count() const noexcept { return corners_.size(); }

  /// Corners of the triangle in leaf slot `slot`.
  const std::array<Vec3, 3>& slot_corners(std::uint32_t slot) const { return corners_[slot]; }
  /// Original mesh triangle index of leaf slot `slot`.
  std::uint32_t slot_triangle(std::uint32_t slot) const { return source_[slot]; }

  /// Closest ray hit with t in (t_min, t_max]; `dir` need not be unit length,
  /// t is measured in multiples of it.
  std::optional<RayHit> intersect_ray(const Vec3& origin, const Vec3& dir, double t_min = 1e-9,
                                      double t_max = std::numeric_limits<double>::infinity()) const {
    const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
    std::optional<RayHit> best;
    double t_best = t_max;
    std::uint32_t stack[128];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
      const Node& node = nodes_[stack[--sp]];
      if (!ray_box(origin, inv, node.box, t_min, t_best)) continue;
      if (node.is_leaf()) {
        for (std::uint32_t s = node.first; s < node.first + node.count; ++s) {
          double t;
          if (ray_triangle(origin, dir, corners_[s], t) && t > t_min && t <= t_best) {
            t_best = t;
            best = RayHit{t, source_[s]};
          }
        }
      } else {
        // push the farther child first so the nearer is visited next
        const Node& l = nodes_[node.first];
        const Node& r = nodes_[node.right];
        const double dl = (l.box.center() - origin).dot(dir);
        const double dr = (r.box.center() - origin).dot(dir);
        if (dl < dr) {
          stack[sp++] = node.right;
          stack[sp++] = node.first;
        } else {
          stack[sp++] = node.first;
          stack[sp++] = node.right;
        }
      }
    }
    return best;
  }

  /// Closest surface point to p (exact), searching only within max_distance.
  PointQuery closest_point(const Vec3& p,
                           double max_distance = std::numeric_limits<double>::infinity()) const {
    PointQuery best;
    best.distance = max_distance;
    std::uint32_t stack[128];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
      const Node& node = nodes_[stack[--sp]];
      if (node.box.distance(p) > best.distance) continue;
      if (node.is_leaf()) {
        for (std::uint32_t s = node.first; s < node.first + node.count; ++s) {
          const auto& c = corners_[s];
          const Vec3 q = closest_point_on_triangle(p, c[0], c[1], c[2]);
          const double d = (q - p).norm();
          if (d < best.distance) best = {d, q, source_[s]};
        }
      } else {
        const double dl = nodes_[node.first].box.distance(p);
        const double dr = nodes_[node.right].box.distance(p);
        if (dl < dr) {
          stack[sp++] = node.right;
          stack[sp++] = node.first;
        } else {
          stack[sp++] = node.first;
          stack[sp++] = node.right;
        }
      }
    }
    return best;
  }

  /// Möller-Trumbore; false for parallel rays.
  static bool ray_triangle(const Vec3& o, const Vec3& d, const std::array<Vec3, 3>& tri, double& t) {
    const Vec3 e1 = tri[1] - tri[0];
    const Vec3 e2 = tri[2] - tri[0];
    const Vec3 pv = d.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-14) return false;
    const double inv = 1.0 / det;
    const Vec3 tv = o - tri[0];
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = d.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    t = e2.dot(qv) * inv;
    return true;
  }

 private:
  static bool ray_box(const Vec3& o, const Vec3& inv, const Aabb& b, double t0, double t1) {
    for (int a = 0; a < 3; ++a) {
      double tn = (b.min[a] - o[a]) * inv[a];
      double tf = (b.max[a] - o[a]) * inv[a];
      if (tn > tf) std::swap(tn, tf);
      if (std::isnan(tn) || std::isnan(tf)) continue;  // origin on a slab plane with zero direction
      t0 = std::max(t0, tn);
      t1 = std::min(t1, tf);
      if (t0 > t1) return false;
    }
    return true;
  }

  std::uint32_t build(const TriMesh& mesh, std::vector<std::uint32_t>& order, const std::vector<Vec3>& centroids,
                      std::uint32_t begin, std::uint32_t end, std::size_t level) {
    depth_ = std::max(depth_, level);
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    Aabb cbox;
    for (std::uint32_t i = begin; i < end; ++i) {
      auto [a, b, c] = mesh.corners(order[i]);
      box.expand(a);
      box.expand(b);
      box.expand(c);
      cbox.expand(centroids[order[i]]);
    }
    nodes_[id].box = box;
    if (end - begin <= kLeafSize) {
      nodes_[id].first = begin;
      nodes_[id].count = end - begin;
      return id;
    }
    int axis = 0;
    cbox.extent().maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = centroids[a][axis];
                       const double cb = centroids[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const std::uint32_t left = build(mesh, order, centroids, begin, mid, level + 1);
    const std::uint32_t right = build(mesh, order, centroids, mid, end, level + 1);
    nodes_[id].first = left;
    nodes_[id].right = right;
    nodes_[id].count = 0;
    return id;
  }

  std::vector<Node> nodes_;
  std::vector<std::array<Vec3, 3>> corners_;
  std::vector<std::uint32_t> source_;
  std::size_t depth_ = 0;
};

}  // namespace rtsim
