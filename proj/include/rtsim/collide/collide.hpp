#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rtsim/collide/bvh.hpp"
#include "rtsim/collide/triangle.hpp"
#include "rtsim/machine/kinematics.hpp"

namespace rtsim {

using TrianglePairIndex = std::array<std::uint32_t, 2>;

/// Every intersecting (triangle of a, triangle of b) pair, sorted. A
/// non-zero `cap` stops the search once that many have been found.
inline std::vector<TrianglePairIndex> intersecting_triangles(const Bvh& a, const Bvh& b, std::size_t cap = 0) {
  std::vector<TrianglePairIndex> out;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> stack = {{0u, 0u}};
  const auto& na = a.nodes();
  const auto& nb = b.nodes();
  while (!stack.empty()) {
    const auto [ia, ib] = stack.back();
    stack.pop_back();
    const Bvh::Node& x = na[ia];
    const Bvh::Node& y = nb[ib];
    if (!x.box.overlaps(y.box)) continue;
    if (x.is_leaf() && y.is_leaf()) {
      for (std::uint32_t s = x.first; s < x.first + x.count; ++s) {
        for (std::uint32_t t = y.first; t < y.first + y.count; ++t) {
          if (tri::triangles_intersect(a.slot_corners(s), b.slot_corners(t))) {
            out.push_back({a.slot_triangle(s), b.slot_triangle(t)});
            if (cap != 0 && out.size() >= cap) {
              std::sort(out.begin(), out.end());
              return out;
            }
          }
        }
      }
      continue;
    }
    const bool split_a = !x.is_leaf() && (y.is_leaf() || x.box.extent().maxCoeff() >= y.box.extent().maxCoeff());
    if (split_a) {
      stack.emplace_back(x.right, ib);
      stack.emplace_back(x.first, ib);
    } else {
      stack.emplace_back(ia, y.right);
      stack.emplace_back(ia, y.first);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct MeshDistance {
  double distance = std::numeric_limits<double>::infinity();
  Vec3 point_a = Vec3::Zero();
  Vec3 point_b = Vec3::Zero();
  std::uint32_t triangle_a = 0;
  std::uint32_t triangle_b = 0;
};

/// Exact minimum distance between two meshes that do not intersect, by
/// best-first descent over node pairs ordered by box distance. Pairs whose
/// boxes are at least `upper_bound` apart are never examined; if nothing is
/// closer than the bound the result stays at infinity.
inline MeshDistance mesh_distance(const Bvh& a, const Bvh& b,
                                  double upper_bound = std::numeric_limits<double>::infinity()) {
  MeshDistance best;
  double limit = upper_bound;
  using Item = std::tuple<double, std::uint32_t, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  const auto& na = a.nodes();
  const auto& nb = b.nodes();
  queue.emplace(na[0].box.distance(nb[0].box), 0u, 0u);
  while (!queue.empty()) {
    const auto [d, ia, ib] = queue.top();
    queue.pop();
    if (d >= limit) break;
    const Bvh::Node& x = na[ia];
    const Bvh::Node& y = nb[ib];
    if (x.is_leaf() && y.is_leaf()) {
      for (std::uint32_t s = x.first; s < x.first + x.count; ++s) {
        for (std::uint32_t t = y.first; t < y.first + y.count; ++t) {
          const tri::TrianglePair p = tri::triangle_distance(a.slot_corners(s), b.slot_corners(t));
          if (p.distance < limit) {
            limit = p.distance;
            best = {p.distance, p.on_first, p.on_second, a.slot_triangle(s), b.slot_triangle(t)};
          }
        }
      }
      continue;
    }
    const bool split_a = !x.is_leaf() && (y.is_leaf() || x.box.extent().maxCoeff() >= y.box.extent().maxCoeff());
    if (split_a) {
      for (std::uint32_t c : {x.first, x.right}) {
        const double cd = na[c].box.distance(y.box);
        if (cd < limit) queue.emplace(cd, c, ib);
      }
    } else {
      for (std::uint32_t c : {y.first, y.right}) {
        const double cd = x.box.distance(nb[c].box);
        if (cd < limit) queue.emplace(cd, ia, c);
      }
    }
  }
  return best;
}

enum class CollisionStatus { Clear, Collision };

struct CollidingPair {
  std::string a;
  std::string b;
  std::vector<TrianglePairIndex> witnesses;  // (triangle of a, triangle of b), component mesh indices
};

struct ClosestPair {
  std::string a;
  std::string b;
  Vec3 point_a = Vec3::Zero();
  Vec3 point_b = Vec3::Zero();
};

struct CollisionReport {
  CollisionStatus status = CollisionStatus::Clear;
  std::vector<CollidingPair> pairs;
  /// 0 when colliding; infinity when no pair was checked.
  double min_clearance_mm = std::numeric_limits<double>::infinity();
  std::optional<ClosestPair> closest;

  bool colliding() const { return status == CollisionStatus::Collision; }
};

struct CollisionOptions {
  std::size_t max_witnesses = 0;  // per pair; 0 keeps all
  bool compute_clearance = true;
};

/// Unordered component-name pairs.
class PairFilter {
 public:
  PairFilter() = default;
  PairFilter(std::initializer_list<std::pair<std::string, std::string>> pairs) {
    for (const auto& [a, b] : pairs) add(a, b);
  }
  void add(const std::string& a, const std::string& b) { pairs_.insert(a < b ? std::pair(a, b) : std::pair(b, a)); }
  bool contains(const std::string& a, const std::string& b) const {
    return pairs_.count(a < b ? std::pair(a, b) : std::pair(b, a)) > 0;
  }
  bool empty() const { return pairs_.empty(); }

 private:
  std::set<std::pair<std::string, std::string>> pairs_;
};

/// Intersection test over every checked component pair (not excluded and,
/// when a filter is given, listed in it). When nothing intersects, the
/// minimum clearance over the checked pairs and its closest points are
/// reported. Surfaces only: a component fully inside another is not a
/// collision.
inline CollisionReport check_collision(const machine::PosedScene& scene, const PairFilter* filter = nullptr,
                                       const CollisionOptions& opt = {}) {
  const auto& comps = scene.components;
  std::vector<std::pair<std::size_t, std::size_t>> checked;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    for (std::size_t j = i + 1; j < comps.size(); ++j) {
      if (scene.is_excluded(comps[i].name, comps[j].name)) continue;
      if (filter && !filter->contains(comps[i].name, comps[j].name)) continue;
      if (comps[i].mesh->empty() || comps[j].mesh->empty()) continue;
      checked.emplace_back(i, j);
    }
  }
  std::vector<std::optional<Bvh>> bvh(comps.size());
  auto tree = [&](std::size_t i) -> const Bvh& {
    if (!bvh[i]) bvh[i].emplace(comps[i].world_mesh());
    return *bvh[i];
  };

  CollisionReport report;
  for (const auto& [i, j] : checked) {
    auto w = intersecting_triangles(tree(i), tree(j), opt.max_witnesses);
    if (!w.empty()) report.pairs.push_back({comps[i].name, comps[j].name, std::move(w)});
  }
  if (!report.pairs.empty()) {
    report.status = CollisionStatus::Collision;
    report.min_clearance_mm = 0.0;
    const CollidingPair& first = report.pairs.front();
    const machine::PosedComponent* ca = scene.find(first.a);
    const machine::PosedComponent* cb = scene.find(first.b);
    tri::Tri ta = ca->mesh->corners(first.witnesses[0][0]);
    tri::Tri tb = cb->mesh->corners(first.witnesses[0][1]);
    for (int k = 0; k < 3; ++k) {
      ta[k] = ca->world.apply(ta[k]);
      tb[k] = cb->world.apply(tb[k]);
    }
    const Vec3 p = tri::intersection_point(ta, tb).value_or(ta[0]);
    report.closest = ClosestPair{first.a, first.b, p, p};
    return report;
  }
  if (!opt.compute_clearance) return report;
  for (const auto& [i, j] : checked) {
    const MeshDistance d = mesh_distance(tree(i), tree(j), report.min_clearance_mm);
    if (d.distance < report.min_clearance_mm) {
      report.min_clearance_mm = d.distance;
      report.closest = ClosestPair{comps[i].name, comps[j].name, d.point_a, d.point_b};
    }
  }
  return report;
}

/// Clearance between two named components (0 when they intersect).
inline CollisionReport check_pair(const machine::PosedScene& scene, const std::string& a, const std::string& b,
                                  const CollisionOptions& opt = {}) {
  if (!scene.find(a)) throw GeometryError("unknown component '" + a + "'");
  if (!scene.find(b)) throw GeometryError("unknown component '" + b + "'");
  if (a == b) throw GeometryError("a component cannot be checked against itself");
  if (scene.is_excluded(a, b)) throw GeometryError("pair '" + a + "'/'" + b + "' is excluded from checking");
  const PairFilter filter{{a, b}};
  return check_collision(scene, &filter, opt);
}

struct SweepEntry {
  std::optional<machine::MachineState> state;
  std::optional<CollisionReport> report;
  std::string error;  // set when the entry failed

  bool ok() const { return report.has_value(); }
};

/// FK plus collision check per state, in input order. A state the machine
/// rejects yields a failed entry; the sweep continues.
inline std::vector<SweepEntry> clearance_sweep(const machine::MachineGeometry& geom,
                                               std::span<const machine::MachineState> states,
                                               const CollisionOptions& opt = {}) {
  std::vector<SweepEntry> out;
  out.reserve(states.size());
  for (const machine::MachineState& s : states) {
    SweepEntry e;
    e.state = s;
    try {
      e.report = check_collision(machine::forward_kinematics(geom, s), nullptr, opt);
    } catch (const LimitError& ex) {
      e.error = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Sweep over joint maps applied to `base`.
inline std::vector<SweepEntry> clearance_sweep(const machine::MachineGeometry& geom, const machine::MachineState& base,
                                               std::span<const machine::JointUpdate> updates,
                                               const CollisionOptions& opt = {}) {
  std::vector<SweepEntry> out;
  out.reserve(updates.size());
  for (const machine::JointUpdate& u : updates) {
    SweepEntry e;
    try {
      e.state = machine::set_joints(base, u);
      e.report = check_collision(machine::forward_kinematics(geom, *e.state), nullptr, opt);
    } catch (const LimitError& ex) {
      e.error = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline const char* to_string(CollisionStatus s) { return s == CollisionStatus::Clear ? "clear" : "collision"; }

inline nlohmann::json to_json(const CollisionReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const CollidingPair& p : r.pairs) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& t : p.witnesses) w.push_back({t[0], t[1]});
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"witness", w}});
  }
  nlohmann::json j = {{"status", to_string(r.status)}, {"pairs", pairs}};
  j["min_clearance_mm"] = std::isfinite(r.min_clearance_mm) ? nlohmann::json(r.min_clearance_mm) : nlohmann::json();
  if (r.closest) {
    const auto& c = *r.closest;
    j["closest"] = {{"a", c.a},
                    {"b", c.b},
                    {"point_a_mm", {c.point_a.x(), c.point_a.y(), c.point_a.z()}},
                    {"point_b_mm", {c.point_b.x(), c.point_b.y(), c.point_b.z()}}};
  } else {
    j["closest"] = nullptr;
  }
  return j;
}

}  // namespace rtsim
