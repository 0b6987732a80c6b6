#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "rtsim/geometry/types.hpp"

// Exact triangle-pair predicates and distances used by collision queries.
namespace rtsim::tri {

using Tri = std::array<Vec3, 3>;

/// Signed distances below this (mm) classify a vertex as on the plane.
inline constexpr double kPlaneEpsilon = 1e-9;

namespace detail {

inline int dominant_axis(const Vec3& n) {
  int axis = 0;
  n.cwiseAbs().maxCoeff(&axis);
  return axis;
}

struct P2 {
  double x, y;
};

inline P2 project(const Vec3& p, int drop) {
  switch (drop) {
    case 0: return {p.y(), p.z()};
    case 1: return {p.z(), p.x()};
    default: return {p.x(), p.y()};
  }
}

inline double orient(P2 a, P2 b, P2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

inline bool on_segment(P2 a, P2 b, P2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect_2d(P2 a, P2 b, P2 c, P2 d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

inline bool point_in_triangle_2d(P2 p, P2 a, P2 b, P2 c) {
  const double d1 = orient(a, b, p);
  const double d2 = orient(b, c, p);
  const double d3 = orient(c, a, p);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
  const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(neg && pos);
}

inline bool coplanar_intersect(const Tri& a, const Tri& b, const Vec3& normal) {
  const int drop = dominant_axis(normal);
  std::array<P2, 3> pa, pb;
  for (int i = 0; i < 3; ++i) {
    pa[i] = project(a[i], drop);
    pb[i] = project(b[i], drop);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (segments_intersect_2d(pa[i], pa[(i + 1) % 3], pb[j], pb[(j + 1) % 3])) return true;
    }
  }
  return point_in_triangle_2d(pa[0], pb[0], pb[1], pb[2]) || point_in_triangle_2d(pb[0], pa[0], pa[1], pa[2]);
}

/// Interval of the line param covered by a triangle straddling a plane.
inline std::pair<double, double> plane_interval(const std::array<double, 3>& proj, const std::array<double, 3>& dist) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto add = [&](double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (int i = 0; i < 3; ++i) {
    if (dist[i] == 0.0) add(proj[i]);
  }
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    if (dist[i] * dist[j] < 0.0) add(proj[i] + (proj[j] - proj[i]) * dist[i] / (dist[i] - dist[j]));
  }
  return {lo, hi};
}

}  // namespace detail

/// Closed-set intersection test: interval overlap on the line shared by the
/// two supporting planes, with an explicit branch for coplanar pairs.
inline bool triangles_intersect(const Tri& a, const Tri& b) {
  const Vec3 nb = (b[1] - b[0]).cross(b[2] - b[0]).normalized();
  std::array<double, 3> da;
  for (int i = 0; i < 3; ++i) {
    da[i] = nb.dot(a[i] - b[0]);
    if (std::abs(da[i]) < kPlaneEpsilon) da[i] = 0.0;
  }
  if ((da[0] > 0 && da[1] > 0 && da[2] > 0) || (da[0] < 0 && da[1] < 0 && da[2] < 0)) return false;

  const Vec3 na = (a[1] - a[0]).cross(a[2] - a[0]).normalized();
  std::array<double, 3> db;
  for (int i = 0; i < 3; ++i) {
    db[i] = na.dot(b[i] - a[0]);
    if (std::abs(db[i]) < kPlaneEpsilon) db[i] = 0.0;
  }
  if ((db[0] > 0 && db[1] > 0 && db[2] > 0) || (db[0] < 0 && db[1] < 0 && db[2] < 0)) return false;

  if (da[0] == 0 && da[1] == 0 && da[2] == 0) return detail::coplanar_intersect(a, b, nb);

  const Vec3 line = na.cross(nb);
  if (line.squaredNorm() < 1e-24) {
    // Parallel planes that are within epsilon: treat as coplanar.
    return detail::coplanar_intersect(a, b, nb);
  }
  std::array<double, 3> pa, pb;
  for (int i = 0; i < 3; ++i) {
    pa[i] = line.dot(a[i]);
    pb[i] = line.dot(b[i]);
  }
  const auto [a0, a1] = detail::plane_interval(pa, da);
  const auto [b0, b1] = detail::plane_interval(pb, db);
  return a0 <= b1 && b0 <= a1;
}

struct SegmentPair {
  double distance_sq;
  Vec3 on_first;
  Vec3 on_second;
};

/// Closest points between segments p1q1 and p2q2.
inline SegmentPair segment_segment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  constexpr double eps = 1e-30;
  if (a <= eps && e <= eps) {
    s = t = 0.0;
  } else if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  const Vec3 c1 = p1 + d1 * s;
  const Vec3 c2 = p2 + d2 * t;
  return {(c1 - c2).squaredNorm(), c1, c2};
}

/// Segment vs closed triangle; returns the parameter in [0,1] of the first
/// crossing for the non-coplanar case. Coplanar segments report a hit when
/// they touch the triangle, with the parameter of a shared point.
inline std::optional<double> segment_triangle(const Vec3& p, const Vec3& q, const Tri& t) {
  const Vec3 n = (t[1] - t[0]).cross(t[2] - t[0]).normalized();
  double dp = n.dot(p - t[0]);
  double dq = n.dot(q - t[0]);
  if (std::abs(dp) < kPlaneEpsilon) dp = 0.0;
  if (std::abs(dq) < kPlaneEpsilon) dq = 0.0;
  if ((dp > 0 && dq > 0) || (dp < 0 && dq < 0)) return std::nullopt;

  const int drop = detail::dominant_axis(n);
  const auto a = detail::project(t[0], drop);
  const auto b = detail::project(t[1], drop);
  const auto c = detail::project(t[2], drop);
  if (dp == 0 && dq == 0) {
    const auto pp = detail::project(p, drop);
    const auto qq = detail::project(q, drop);
    if (detail::point_in_triangle_2d(pp, a, b, c)) return 0.0;
    if (detail::point_in_triangle_2d(qq, a, b, c)) return 1.0;
    const std::array<detail::P2, 3> corners{a, b, c};
    for (int i = 0; i < 3; ++i) {
      if (detail::segments_intersect_2d(pp, qq, corners[i], corners[(i + 1) % 3])) {
        const auto sp = segment_segment(p, q, t[i], t[(i + 1) % 3]);
        const Vec3 d = q - p;
        return std::clamp((sp.on_first - p).dot(d) / d.squaredNorm(), 0.0, 1.0);
      }
    }
    return std::nullopt;
  }
  const double s = dp / (dp - dq);
  const Vec3 x = p + s * (q - p);
  if (detail::point_in_triangle_2d(detail::project(x, drop), a, b, c)) return s;
  return std::nullopt;
}

/// A point common to both triangles, when they intersect.
inline std::optional<Vec3> intersection_point(const Tri& a, const Tri& b) {
  for (int k = 0; k < 2; ++k) {
    const Tri& s = k == 0 ? a : b;
    const Tri& t = k == 0 ? b : a;
    for (int i = 0; i < 3; ++i) {
      const Vec3& p = s[i];
      const Vec3& q = s[(i + 1) % 3];
      if (auto u = segment_triangle(p, q, t)) return p + *u * (q - p);
    }
  }
  return std::nullopt;
}

struct TrianglePair {
  double distance;
  Vec3 on_first;
  Vec3 on_second;
};

/// Distance between two non-intersecting triangles: the minimum over the
/// six vertex-face and nine edge-edge features. Meaningless for pairs that
/// cross through each other's interior; test triangles_intersect first.
inline TrianglePair triangle_distance(const Tri& a, const Tri& b) {
  double best = std::numeric_limits<double>::infinity();
  Vec3 pa = a[0], pb = b[0];
  for (int i = 0; i < 3; ++i) {
    const Vec3 q = closest_point_on_triangle(a[i], b[0], b[1], b[2]);
    const double d = (q - a[i]).squaredNorm();
    if (d < best) { best = d; pa = a[i]; pb = q; }
    const Vec3 r = closest_point_on_triangle(b[i], a[0], a[1], a[2]);
    const double e = (r - b[i]).squaredNorm();
    if (e < best) { best = e; pa = r; pb = b[i]; }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const auto s = segment_segment(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]);
      if (s.distance_sq < best) { best = s.distance_sq; pa = s.on_first; pb = s.on_second; }
    }
  }
  return {std::sqrt(best), pa, pb};
}

}  // namespace rtsim::tri
