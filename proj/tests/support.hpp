#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <unistd.h>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rtsim/rtsim.hpp"

namespace testing {

using rtsim::Mat3;
using rtsim::RigidTransform;
using rtsim::TriMesh;
using rtsim::Vec3;

/// Seeded generators for the property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sd) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Vec3 point(double extent) { return {uniform(-extent, extent), uniform(-extent, extent), uniform(-extent, extent)}; }

  Vec3 unit() {
    Vec3 v;
    do {
      v = point(1.0);
    } while (v.norm() < 1e-3 || v.norm() > 1.0);
    return v.normalized();
  }

  RigidTransform rigid(double max_translation) {
    return RigidTransform::rotation(unit(), uniform(-180.0, 180.0)) * RigidTransform::translation(point(max_translation));
  }

  /// A triangle with area well above the degenerate threshold.
  std::array<Vec3, 3> triangle(const Vec3& center, double size) {
    while (true) {
      std::array<Vec3, 3> t = {center + point(size), center + point(size), center + point(size)};
      if (rtsim::triangle_area(t[0], t[1], t[2]) > 1e-3 * size * size) return t;
    }
  }

  /// Random closed-ish blob: a randomly scaled, perturbed icosphere.
  TriMesh blob(const Vec3& center, double radius, int subdivisions = 2) {
    TriMesh s = rtsim::shapes::icosphere(Vec3::Zero(), radius, subdivisions);
    std::vector<Vec3> v = s.vertices();
    const Vec3 scale(uniform(0.6, 1.4), uniform(0.6, 1.4), uniform(0.6, 1.4));
    for (Vec3& p : v) p = center + p.cwiseProduct(scale) * (1.0 + uniform(-0.08, 0.08));
    return TriMesh(std::move(v), s.triangles());
  }

  /// Triangle soup of n independent triangles inside a cube.
  TriMesh soup(int n, const Vec3& center, double extent, double size) {
    std::vector<Vec3> v;
    std::vector<rtsim::Triangle> t;
    for (int i = 0; i < n; ++i) {
      const auto tri = triangle(center + point(extent), size);
      const auto base = static_cast<std::uint32_t>(v.size());
      v.insert(v.end(), tri.begin(), tri.end());
      t.push_back({base, base + 1, base + 2});
    }
    return TriMesh(std::move(v), std::move(t));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Points uniformly distributed on a sphere, with outward normals.
inline rtsim::PointCloud sphere_cloud(std::size_t n, double radius, std::uint64_t seed, const Vec3& center = Vec3::Zero()) {
  Gen g(seed);
  std::vector<Vec3> pts, nrm;
  pts.reserve(n);
  nrm.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 u = g.unit();
    pts.push_back(center + radius * u);
    nrm.push_back(u);
  }
  return rtsim::PointCloud(std::move(pts), std::move(nrm));
}

/// Signed distance to a sphere sampled on a cube grid of n^3 samples
/// spanning [-half, half]^3.
inline rtsim::surface::ScalarVolume sphere_sdf(std::size_t n, double radius, double half) {
  const double h = 2.0 * half / static_cast<double>(n - 1);
  return rtsim::surface::ScalarVolume::from_function({n, n, n}, Vec3::Constant(h), Vec3::Constant(-half),
                                                     [radius](const Vec3& p) { return p.norm() - radius; });
}

struct EdgeStats {
  std::size_t boundary = 0;      // edges used by one triangle
  std::size_t nonmanifold = 0;   // edges used by more than two
  std::size_t edges = 0;
};

inline EdgeStats edge_stats(const TriMesh& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
  for (const auto& t : m.triangles()) {
    for (int k = 0; k < 3; ++k) {
      auto a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[{a, b}];
    }
  }
  EdgeStats s;
  s.edges = count.size();
  for (const auto& [e, c] : count) {
    if (c == 1) ++s.boundary;
    if (c > 2) ++s.nonmanifold;
  }
  return s;
}

/// Every directed edge appears once and its reverse once: closed and
/// consistently oriented.
inline bool consistently_oriented(const TriMesh& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : m.triangles()) {
    for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
  }
  for (const auto& [e, c] : directed) {
    if (c != 1) return false;
    auto it = directed.find({e.second, e.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

inline long euler_characteristic(const TriMesh& m) {
  std::vector<char> used(m.vertex_count(), 0);
  for (const auto& t : m.triangles()) used[t[0]] = used[t[1]] = used[t[2]] = 1;
  long v = 0;
  for (char u : used) v += u;
  return v - static_cast<long>(edge_stats(m).edges) + static_cast<long>(m.triangle_count());
}

/// Brute-force nearest distance from p to a point set.
inline double brute_nearest(const Vec3& p, const std::vector<Vec3>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& q : pts) best = std::min(best, (p - q).squaredNorm());
  return std::sqrt(best);
}

/// Brute-force distance from p to a mesh surface.
inline double brute_surface_distance(const Vec3& p, const TriMesh& m) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.triangle_count(); ++i) {
    const auto c = m.corners(i);
    best = std::min(best, (rtsim::closest_point_on_triangle(p, c[0], c[1], c[2]) - p).norm());
  }
  return best;
}

/// Distance between segments pq and rs: interior stationary point if it
/// lies in the unit square, otherwise the best of the four border cases.
inline double brute_segment_distance(const Vec3& p, const Vec3& q, const Vec3& r, const Vec3& s) {
  auto point_segment = [](const Vec3& x, const Vec3& a, const Vec3& b) {
    const Vec3 d = b - a;
    const double len2 = d.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((x - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (a + t * d - x).norm();
  };
  double best = std::min({point_segment(p, r, s), point_segment(q, r, s), point_segment(r, p, q), point_segment(s, p, q)});
  const Vec3 d1 = q - p, d2 = s - r, w = p - r;
  const double a = d1.dot(d1), b = d1.dot(d2), c = d2.dot(d2), d = d1.dot(w), e = d2.dot(w);
  const double den = a * c - b * b;
  if (den > 1e-12 * a * c) {
    const double u = (b * e - c * d) / den, v = (a * e - b * d) / den;
    if (u >= 0 && u <= 1 && v >= 0 && v <= 1) best = std::min(best, (p + u * d1 - r - v * d2).norm());
  }
  return best;
}

/// True when segment pq passes through the triangle (non-coplanar case).
inline bool brute_segment_crosses(const Vec3& p, const Vec3& q, const std::array<Vec3, 3>& t) {
  const Vec3 n = (t[1] - t[0]).cross(t[2] - t[0]);
  const double dp = n.dot(p - t[0]), dq = n.dot(q - t[0]);
  if ((dp > 0 && dq > 0) || (dp < 0 && dq < 0) || dp == dq) return false;
  const Vec3 x = p + dp / (dp - dq) * (q - p);
  for (int i = 0; i < 3; ++i) {
    if (n.dot((t[(i + 1) % 3] - t[i]).cross(x - t[i])) < 0) return false;
  }
  return true;
}

struct BruteCollision {
  std::vector<std::array<std::uint32_t, 2>> pairs;  // sorted
  double clearance = std::numeric_limits<double>::infinity();
};

/// All-pairs reference for two world-space meshes in general position.
inline BruteCollision brute_collision(const TriMesh& a, const TriMesh& b) {
  BruteCollision out;
  for (std::uint32_t i = 0; i < a.triangle_count(); ++i) {
    const auto ta = a.corners(i);
    for (std::uint32_t j = 0; j < b.triangle_count(); ++j) {
      const auto tb = b.corners(j);
      bool hit = false;
      for (int k = 0; k < 3 && !hit; ++k) {
        hit = brute_segment_crosses(ta[k], ta[(k + 1) % 3], tb) || brute_segment_crosses(tb[k], tb[(k + 1) % 3], ta);
      }
      if (hit) {
        out.pairs.push_back({i, j});
        continue;
      }
      double d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        d = std::min(d, (rtsim::closest_point_on_triangle(ta[k], tb[0], tb[1], tb[2]) - ta[k]).norm());
        d = std::min(d, (rtsim::closest_point_on_triangle(tb[k], ta[0], ta[1], ta[2]) - tb[k]).norm());
        for (int l = 0; l < 3; ++l) d = std::min(d, brute_segment_distance(ta[k], ta[(k + 1) % 3], tb[l], tb[(l + 1) % 3]));
      }
      out.clearance = std::min(out.clearance, d);
    }
  }
  if (!out.pairs.empty()) out.clearance = 0.0;
  return out;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("rtsim_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
