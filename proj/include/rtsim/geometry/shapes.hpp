#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <utility>

#include "rtsim/geometry/types.hpp"

// Procedural closed meshes, all outward-oriented.
namespace rtsim::shapes {

/// Axis-aligned box with 12 triangles.
inline TriMesh box(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  std::vector<Triangle> t = {
      {0, 2, 1}, {1, 2, 3},  // -z
      {4, 5, 6}, {5, 7, 6},  // +z
      {0, 1, 4}, {1, 5, 4},  // -y
      {2, 6, 3}, {3, 6, 7},  // +y
      {0, 4, 2}, {2, 4, 6},  // -x
      {1, 3, 5}, {3, 7, 5},  // +x
  };
  return TriMesh(std::move(v), std::move(t));
}

/// Sphere-topology surface from a parametric map (u around in [0,1), v from
/// the south pole 0 to the north pole 1). Produces 2 * slices * (stacks - 1)
/// triangles.
inline TriMesh sphere_topology(int slices, int stacks, const std::function<Vec3(double u, double v)>& map) {
  if (slices < 3 || stacks < 2) throw GeometryError("sphere_topology needs slices >= 3 and stacks >= 2");
  std::vector<Vec3> verts;
  verts.push_back(map(0.0, 0.0));
  for (int j = 1; j < stacks; ++j) {
    for (int i = 0; i < slices; ++i) {
      verts.push_back(map(static_cast<double>(i) / slices, static_cast<double>(j) / stacks));
    }
  }
  verts.push_back(map(0.0, 1.0));
  const auto south = 0u;
  const auto north = static_cast<std::uint32_t>(verts.size() - 1);
  auto ring = [&](int j, int i) { return static_cast<std::uint32_t>(1 + (j - 1) * slices + (i % slices)); };

  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * slices * (stacks - 1)));
  for (int i = 0; i < slices; ++i) tris.push_back({south, ring(1, i + 1), ring(1, i)});
  for (int j = 1; j < stacks - 1; ++j) {
    for (int i = 0; i < slices; ++i) {
      tris.push_back({ring(j, i), ring(j, i + 1), ring(j + 1, i + 1)});
      tris.push_back({ring(j, i), ring(j + 1, i + 1), ring(j + 1, i)});
    }
  }
  for (int i = 0; i < slices; ++i) tris.push_back({north, ring(stacks - 1, i), ring(stacks - 1, i + 1)});
  return TriMesh(std::move(verts), std::move(tris));
}

/// Ellipsoid with poles on the z axis.
inline TriMesh ellipsoid(const Vec3& center, const Vec3& radii, int slices = 48, int stacks = 24) {
  return sphere_topology(slices, stacks, [&](double u, double v) {
    const double phi = 2.0 * std::numbers::pi * u;
    const double theta = std::numbers::pi * (v - 0.5);
    return Vec3(center.x() + radii.x() * std::cos(theta) * std::cos(phi),
                center.y() + radii.y() * std::cos(theta) * std::sin(phi),
                center.z() + radii.z() * std::sin(theta));
  });
}

inline TriMesh uv_sphere(const Vec3& center, double radius, int slices = 48, int stacks = 24) {
  return ellipsoid(center, Vec3::Constant(radius), slices, stacks);
}

/// Geodesic sphere: 20 * 4^subdivisions triangles, vertices on the sphere.
inline TriMesh icosphere(const Vec3& center, double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const Triangle& tri : f) {
      const auto a = midpoint(tri[0], tri[1]);
      const auto b = midpoint(tri[1], tri[2]);
      const auto c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (Vec3& p : v) p = center + radius * p;
  return TriMesh(std::move(v), std::move(f));
}

/// Capped frustum along +z from (z0, r0) to (z1, r1), axis through the origin.
/// r0 == r1 gives a cylinder.
inline TriMesh frustum(double z0, double r0, double z1, double r1, int segments = 32) {
  if (segments < 3 || z1 <= z0 || r0 <= 0 || r1 <= 0) throw GeometryError("invalid frustum");
  std::vector<Vec3> v;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    v.emplace_back(r0 * std::cos(a), r0 * std::sin(a), z0);
  }
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    v.emplace_back(r1 * std::cos(a), r1 * std::sin(a), z1);
  }
  const auto bottom = static_cast<std::uint32_t>(v.size());
  v.emplace_back(0, 0, z0);
  const auto top = static_cast<std::uint32_t>(v.size());
  v.emplace_back(0, 0, z1);
  const auto n = static_cast<std::uint32_t>(segments);
  std::vector<Triangle> t;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    t.push_back({i, j, n + j});
    t.push_back({i, n + j, n + i});
    t.push_back({bottom, j, i});
    t.push_back({top, n + i, n + j});
  }
  return TriMesh(std::move(v), std::move(t));
}

inline TriMesh cylinder(double z0, double z1, double radius, int segments = 32) {
  return frustum(z0, radius, z1, radius, segments);
}

/// Capped cylinder between two arbitrary points.
inline TriMesh cylinder_between(const Vec3& a, const Vec3& b, double radius, int segments = 32) {
  const Vec3 axis = b - a;
  const double len = axis.norm();
  TriMesh c = cylinder(0.0, len, radius, segments);
  const Mat3 r = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), axis / len).toRotationMatrix();
  return transform_mesh(RigidTransform::from_approximate(r, a), c);
}

}  // namespace rtsim::shapes
