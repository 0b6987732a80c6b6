#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtsim/error.hpp"

/// Core geometric types. World space is right-handed, +Z up, +Y along the
/// couch long axis toward the gantry, origin at the machine isocenter, and
/// every length is in millimeters.
namespace rtsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Triangle = std::array<std::uint32_t, 3>;

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Proper rigid motion p -> R p + t. The rotation is validated on construction
/// (orthonormal and det = +1 within 1e-9).
class RigidTransform {
 public:
  static constexpr double kTolerance = 1e-9;

  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  RigidTransform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation_.allFinite() || !is_finite(translation_)) {
      throw GeometryError("rigid transform has non-finite entries");
    }
    const double ortho = (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = rotation_.determinant();
    if (ortho > kTolerance || std::abs(det - 1.0) > kTolerance) {
      throw GeometryError("rotation is not a proper orthonormal matrix");
    }
  }

  static RigidTransform identity() { return {}; }

  static RigidTransform translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  /// Rotation by `degrees` about `axis` through the origin.
  static RigidTransform rotation(const Vec3& axis, double degrees) {
    Mat3 r = Eigen::AngleAxisd(degrees * kDegToRad, axis.normalized()).toRotationMatrix();
    return {r, Vec3::Zero()};
  }
  static RigidTransform rotation_x(double degrees) { return rotation(Vec3::UnitX(), degrees); }
  static RigidTransform rotation_y(double degrees) { return rotation(Vec3::UnitY(), degrees); }
  static RigidTransform rotation_z(double degrees) { return rotation(Vec3::UnitZ(), degrees); }

  /// Projects a nearly-orthonormal matrix onto SO(3) before validating. Used for
  /// rotations that went through text serialization.
  static RigidTransform from_approximate(const Mat3& approx, const Vec3& translation,
                                         double tolerance = 1e-5) {
    const double ortho = (approx.transpose() * approx - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!approx.allFinite() || ortho > tolerance || approx.determinant() <= 0.0) {
      throw GeometryError("matrix is not close to a rotation");
    }
    Eigen::JacobiSVD<Mat3> svd(approx, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    return {r, translation};
  }

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 apply_vector(const Vec3& v) const { return rotation_ * v; }

  /// (this * other)(p) == this(other(p))
  RigidTransform operator*(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation_ = rotation_ * other.rotation_;
    out.translation_ = rotation_ * other.translation_ + translation_;
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(out.rotation_ * translation_);
    return out;
  }

  bool operator==(const RigidTransform& other) const {
    return rotation_ == other.rotation_ && translation_ == other.translation_;
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Points with optional unit normals.
class PointCloud {
 public:
  static constexpr double kNormalTolerance = 1e-6;

  PointCloud() = default;

  explicit PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals = {})
      : points_(std::move(points)), normals_(std::move(normals)) {
    if (!normals_.empty() && normals_.size() != points_.size()) {
      throw GeometryError("normal count does not match point count");
    }
    for (const Vec3& p : points_) {
      if (!is_finite(p)) throw GeometryError("point cloud has a non-finite point");
    }
    for (const Vec3& n : normals_) {
      if (!is_finite(n) || std::abs(n.norm() - 1.0) > kNormalTolerance) {
        throw GeometryError("point cloud normal is not unit length");
      }
    }
  }

  const std::vector<Vec3>& points() const noexcept { return points_; }
  const std::vector<Vec3>& normals() const noexcept { return normals_; }
  bool has_normals() const noexcept { return !normals_.empty(); }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

 private:
  std::vector<Vec3> points_;
  std::vector<Vec3> normals_;
};

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool valid() const { return (min.array() <= max.array()).all(); }

  void expand(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void expand(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }

  bool contains(const Vec3& p, double eps = 0.0) const {
    return (p.array() >= min.array() - eps).all() && (p.array() <= max.array() + eps).all();
  }
  bool contains(const Aabb& b, double eps = 0.0) const {
    return contains(b.min, eps) && contains(b.max, eps);
  }
  bool overlaps(const Aabb& b) const {
    return (min.array() <= b.max.array()).all() && (b.min.array() <= max.array()).all();
  }
  /// Euclidean gap between two boxes, zero when they overlap.
  double distance(const Aabb& b) const {
    Vec3 gap = (b.min - max).cwiseMax(min - b.max).cwiseMax(0.0);
    return gap.norm();
  }
  double distance(const Vec3& p) const {
    Vec3 gap = (min - p).cwiseMax(p - max).cwiseMax(0.0);
    return gap.norm();
  }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

/// Indexed triangle mesh. Construction validates indices and coordinates and
/// drops zero-area triangles (area below 1e-12 mm^2).
class TriMesh {
 public:
  static constexpr double kMinArea = 1e-12;

  TriMesh() = default;

  TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
      : vertices_(std::move(vertices)) {
    for (const Vec3& v : vertices_) {
      if (!is_finite(v)) throw GeometryError("mesh has a non-finite vertex");
    }
    const auto n = vertices_.size();
    triangles_.reserve(triangles.size());
    for (const Triangle& t : triangles) {
      if (t[0] >= n || t[1] >= n || t[2] >= n) {
        throw GeometryError("triangle index out of range: " + std::to_string(std::max({t[0], t[1], t[2]})) +
                            " >= " + std::to_string(n));
      }
      if (triangle_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]) > kMinArea) {
        triangles_.push_back(t);
      }
    }
  }

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t triangle_count() const noexcept { return triangles_.size(); }
  bool empty() const noexcept { return triangles_.empty(); }

  std::array<Vec3, 3> corners(std::size_t tri) const {
    const Triangle& t = triangles_[tri];
    return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
  }

  double surface_area() const {
    double area = 0.0;
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
      auto [a, b, c] = corners(i);
      area += triangle_area(a, b, c);
    }
    return area;
  }

  /// Signed enclosed volume (positive for outward-oriented closed meshes).
  double signed_volume() const {
    double vol = 0.0;
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
      auto [a, b, c] = corners(i);
      vol += a.dot(b.cross(c));
    }
    return vol / 6.0;
  }

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
};

inline PointCloud transform_points(const RigidTransform& t, const PointCloud& pc) {
  std::vector<Vec3> pts;
  pts.reserve(pc.size());
  for (const Vec3& p : pc.points()) pts.push_back(t.apply(p));
  std::vector<Vec3> nrm;
  nrm.reserve(pc.normals().size());
  for (const Vec3& n : pc.normals()) nrm.push_back(t.apply_vector(n).normalized());
  return PointCloud(std::move(pts), std::move(nrm));
}

inline TriMesh transform_mesh(const RigidTransform& t, const TriMesh& m) {
  std::vector<Vec3> verts;
  verts.reserve(m.vertex_count());
  for (const Vec3& v : m.vertices()) verts.push_back(t.apply(v));
  return TriMesh(std::move(verts), m.triangles());
}

/// Concatenates meshes into one vertex/triangle list.
inline TriMesh merge_meshes(std::span<const TriMesh> meshes) {
  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  for (const TriMesh& m : meshes) {
    const auto base = static_cast<std::uint32_t>(verts.size());
    verts.insert(verts.end(), m.vertices().begin(), m.vertices().end());
    for (const Triangle& t : m.triangles()) tris.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return TriMesh(std::move(verts), std::move(tris));
}

inline Aabb mesh_bounds(const TriMesh& m) {
  if (m.vertex_count() == 0) throw GeometryError("bounds of an empty mesh");
  Aabb box;
  for (const Vec3& v : m.vertices()) box.expand(v);
  return box;
}

inline Aabb cloud_bounds(const PointCloud& pc) {
  if (pc.empty()) throw GeometryError("bounds of an empty point cloud");
  Aabb box;
  for (const Vec3& p : pc.points()) box.expand(p);
  return box;
}

struct ClosestPoint {
  double distance = 0.0;
  Vec3 point = Vec3::Zero();
};

/// Closest point on the closed triangle abc (Voronoi-region walk). The
/// caller guarantees a non-degenerate triangle.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Exact Euclidean distance from p to the closed triangle.
inline ClosestPoint point_triangle_distance(const Vec3& p, const std::array<Vec3, 3>& tri) {
  if (triangle_area(tri[0], tri[1], tri[2]) <= TriMesh::kMinArea) {
    throw GeometryError("point-triangle distance on a degenerate triangle");
  }
  Vec3 q = closest_point_on_triangle(p, tri[0], tri[1], tri[2]);
  return {(p - q).norm(), q};
}

}  // namespace rtsim
