#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rtsim/geometry/types.hpp"

namespace rtsim::surface {

struct DecimationParams {
  double per_iteration_fraction = 0.10;
  std::size_t target_triangles = 0;  // 0 selects initial / 10

  void validate() const {
    if (!(per_iteration_fraction > 0.0 && per_iteration_fraction < 1.0)) {
      throw GeometryError("per_iteration_fraction must lie in (0, 1)");
    }
    if (target_triangles != 0 && target_triangles < 4) throw GeometryError("target_triangles must be at least 4");
  }
};

struct DecimationResult {
  TriMesh mesh;
  std::size_t rounds = 0;
  std::vector<std::size_t> round_counts;  // triangle count after each round
};

/// The target could not be reached because the remaining edges are locked
/// (non-manifold, boundary-pinched or fold-creating); carries the best mesh.
class DecimationError : public Error {
 public:
  DecimationError(const std::string& what, DecimationResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const DecimationResult& partial() const noexcept { return partial_; }

 private:
  DecimationResult partial_;
};

namespace detail {

/// Edge-collapse state over an indexed triangle soup with vertex-to-face
/// adjacency. Collapsing (a, b) keeps a, moves it to the optimal quadric
/// position and retires b.
class Collapser {
 public:
  explicit Collapser(const TriMesh& m)
      : pos_(m.vertices()), faces_(m.triangles()), face_alive_(faces_.size(), 1),
        vertex_faces_(pos_.size()), quadric_(pos_.size(), Eigen::Matrix4d::Zero()),
        version_(pos_.size(), 0), alive_count_(faces_.size()) {
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      for (std::uint32_t v : faces_[f]) vertex_faces_[v].push_back(f);
      const Vec3 n = face_normal(f);
      const double len = n.norm();
      if (len <= 0.0) continue;
      const Vec3 u = n / len;
      Eigen::Vector4d plane(u.x(), u.y(), u.z(), -u.dot(pos_[faces_[f][0]]));
      const Eigen::Matrix4d k = plane * plane.transpose();
      for (std::uint32_t v : faces_[f]) quadric_[v] += k;
    }
    add_boundary_constraints();
  }

  std::size_t alive_count() const { return alive_count_; }

  /// Collapses lowest-cost edges until `quota` faces are gone. Returns the
  /// number actually removed (quota, quota + 1, or fewer when stuck).
  std::size_t run_round(std::size_t quota) {
    std::size_t removed = 0;
    bool rebuilt_after_stall = false;
    rebuild_heap();
    while (removed < quota) {
      if (heap_.empty()) {
        if (rebuilt_after_stall) break;
        rebuilt_after_stall = true;
        rebuild_heap();
        continue;
      }
      const Candidate c = heap_.top();
      heap_.pop();
      if (version_[c.a] != c.va || version_[c.b] != c.vb) continue;
      const std::size_t r = collapse(c.a, c.b, c.target);
      if (r == 0) continue;
      removed += r;
      rebuilt_after_stall = false;
    }
    return removed;
  }

  TriMesh extract() const {
    std::vector<std::uint32_t> remap(pos_.size(), kDead);
    std::vector<Vec3> verts;
    std::vector<Triangle> tris;
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      for (std::uint32_t v : faces_[f]) {
        if (remap[v] == kDead) remap[v] = 0;
      }
    }
    for (std::uint32_t v = 0; v < pos_.size(); ++v) {
      if (remap[v] != kDead) {
        remap[v] = static_cast<std::uint32_t>(verts.size());
        verts.push_back(pos_[v]);
      }
    }
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      if (face_alive_[f]) tris.push_back({remap[faces_[f][0]], remap[faces_[f][1]], remap[faces_[f][2]]});
    }
    return TriMesh(std::move(verts), std::move(tris));
  }

 private:
  static constexpr std::uint32_t kDead = 0xffffffffu;
  static constexpr double kBoundaryWeight = 100.0;

  struct Candidate {
    double cost;
    std::uint32_t a, b;
    std::uint32_t va, vb;
    Vec3 target;
    bool operator>(const Candidate& o) const {
      if (cost != o.cost) return cost > o.cost;
      if (a != o.a) return a > o.a;
      return b > o.b;
    }
  };

  Vec3 face_normal(std::uint32_t f) const {
    const auto& t = faces_[f];
    return (pos_[t[1]] - pos_[t[0]]).cross(pos_[t[2]] - pos_[t[0]]);
  }

  /// Number of live faces containing both a and b.
  int shared_faces(std::uint32_t a, std::uint32_t b) const {
    int n = 0;
    for (std::uint32_t f : vertex_faces_[a]) {
      const auto& t = faces_[f];
      if (t[0] == b || t[1] == b || t[2] == b) ++n;
    }
    return n;
  }

  void neighbors(std::uint32_t v, std::vector<std::uint32_t>& out) const {
    out.clear();
    for (std::uint32_t f : vertex_faces_[v]) {
      for (std::uint32_t w : faces_[f]) {
        if (w != v) out.push_back(w);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }

  bool is_boundary_vertex(std::uint32_t v) const {
    std::vector<std::uint32_t> nb;
    neighbors(v, nb);
    for (std::uint32_t w : nb) {
      if (shared_faces(v, w) == 1) return true;
    }
    return false;
  }

  void add_boundary_constraints() {
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      const auto& t = faces_[f];
      for (int e = 0; e < 3; ++e) {
        const std::uint32_t a = t[e], b = t[(e + 1) % 3];
        if (shared_faces(a, b) != 1) continue;
        const Vec3 edge = pos_[b] - pos_[a];
        Vec3 n = edge.cross(face_normal(f));
        const double len = n.norm();
        if (len <= 0.0) continue;
        n /= len;
        Eigen::Vector4d plane(n.x(), n.y(), n.z(), -n.dot(pos_[a]));
        const Eigen::Matrix4d k = kBoundaryWeight * plane * plane.transpose();
        quadric_[a] += k;
        quadric_[b] += k;
      }
    }
  }

  static double evaluate(const Eigen::Matrix4d& q, const Vec3& p) {
    const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
    return std::max(0.0, h.dot(q * h));
  }

  Candidate make_candidate(std::uint32_t a, std::uint32_t b) const {
    const Eigen::Matrix4d q = quadric_[a] + quadric_[b];
    const Mat3 m = q.topLeftCorner<3, 3>();
    const Vec3 rhs = -q.topRightCorner<3, 1>();
    const Vec3 mid = 0.5 * (pos_[a] + pos_[b]);
    Vec3 best = mid;
    double best_cost = evaluate(q, mid);
    for (const Vec3& p : {pos_[a], pos_[b]}) {
      const double c = evaluate(q, p);
      if (c < best_cost) {
        best_cost = c;
        best = p;
      }
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(m);
    const Vec3 ev = es.eigenvalues();
    if (ev(2) > 0.0 && ev(0) > 1e-6 * ev(2)) {
      const Vec3 opt = es.eigenvectors() * (es.eigenvalues().cwiseInverse().asDiagonal() *
                                            (es.eigenvectors().transpose() * rhs));
      const double span = (pos_[a] - pos_[b]).norm();
      if (is_finite(opt) && (opt - mid).norm() <= 2.0 * span) {
        const double c = evaluate(q, opt);
        if (c <= best_cost) {
          best_cost = c;
          best = opt;
        }
      }
    }
    return {best_cost, a, b, version_[a], version_[b], best};
  }

  void push_edges_of(std::uint32_t v) {
    std::vector<std::uint32_t> nb;
    neighbors(v, nb);
    for (std::uint32_t w : nb) heap_.push(v < w ? make_candidate(v, w) : make_candidate(w, v));
  }

  void rebuild_heap() {
    heap_ = {};
    std::vector<std::uint32_t> nb;
    for (std::uint32_t v = 0; v < pos_.size(); ++v) {
      if (vertex_faces_[v].empty()) continue;
      neighbors(v, nb);
      for (std::uint32_t w : nb) {
        if (v < w) heap_.push(make_candidate(v, w));
      }
    }
  }

  bool folds(std::uint32_t moved, std::uint32_t other, const Vec3& p) const {
    for (std::uint32_t f : vertex_faces_[moved]) {
      const auto& t = faces_[f];
      if (t[0] == other || t[1] == other || t[2] == other) continue;
      const Vec3 before = face_normal(f);
      Vec3 c[3] = {pos_[t[0]], pos_[t[1]], pos_[t[2]]};
      for (int i = 0; i < 3; ++i) {
        if (t[i] == moved) c[i] = p;
      }
      const Vec3 after = (c[1] - c[0]).cross(c[2] - c[0]);
      const double an = after.norm(), bn = before.norm();
      if (an <= 1e-12 * std::max(1.0, bn) || after.dot(before) <= 1e-3 * an * bn) return true;
    }
    return false;
  }

  std::size_t collapse(std::uint32_t a, std::uint32_t b, const Vec3& p) {
    if (vertex_faces_[a].empty() || vertex_faces_[b].empty()) return 0;
    const int shared = shared_faces(a, b);
    if (shared == 0 || shared > 2) return 0;

    // Link condition: the common neighbors must be exactly the apexes of the shared faces.
    std::vector<std::uint32_t> na, nb, common;
    neighbors(a, na);
    neighbors(b, nb);
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (common.size() != static_cast<std::size_t>(shared)) return 0;
    if (shared == 2 && is_boundary_vertex(a) && is_boundary_vertex(b)) return 0;
    if (shared == 1 && na.size() + nb.size() <= 4) return 0;  // would degenerate an isolated piece
    if (folds(a, b, p) || folds(b, a, p)) return 0;

    std::size_t removed = 0;
    for (std::uint32_t f : vertex_faces_[b]) {
      auto& t = faces_[f];
      if (t[0] == a || t[1] == a || t[2] == a) {
        face_alive_[f] = 0;
        ++removed;
        for (std::uint32_t v : t) {
          if (v == b) continue;
          auto& list = vertex_faces_[v];
          list.erase(std::remove(list.begin(), list.end(), f), list.end());
        }
      } else {
        for (auto& v : t) {
          if (v == b) v = a;
        }
        vertex_faces_[a].push_back(f);
      }
    }
    vertex_faces_[b].clear();
    pos_[a] = p;
    quadric_[a] += quadric_[b];
    ++version_[a];
    ++version_[b];
    alive_count_ -= removed;
    push_edges_of(a);
    return removed;
  }

  std::vector<Vec3> pos_;
  std::vector<Triangle> faces_;
  std::vector<char> face_alive_;
  std::vector<std::vector<std::uint32_t>> vertex_faces_;
  std::vector<Eigen::Matrix4d> quadric_;
  std::vector<std::uint32_t> version_;
  std::size_t alive_count_;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap_;
};

}  // namespace detail

/// Iterative quadric-error edge collapse. Each round removes
/// floor(count * fraction) triangles of the current count, cheapest
/// collapses first, until the count is at or below the target. A closed
/// mesh loses triangles in pairs, so a round with an odd quota removes one
/// extra triangle.
inline DecimationResult decimate_logged(const TriMesh& mesh, const DecimationParams& params = {}) {
  params.validate();
  const std::size_t target = params.target_triangles != 0 ? params.target_triangles
                                                          : std::max<std::size_t>(4, mesh.triangle_count() / 10);
  DecimationResult result;
  if (mesh.triangle_count() <= target) {
    result.mesh = mesh;
    return result;
  }
  detail::Collapser state(mesh);
  while (state.alive_count() > target) {
    const std::size_t count = state.alive_count();
    const auto quota = static_cast<std::size_t>(std::floor(static_cast<double>(count) * params.per_iteration_fraction));
    if (quota == 0) break;
    const std::size_t removed = state.run_round(quota);
    if (removed < quota) {
      result.round_counts.push_back(state.alive_count());
      result.rounds = result.round_counts.size();
      result.mesh = state.extract();
      throw DecimationError("decimation stalled at " + std::to_string(state.alive_count()) +
                                " triangles (target " + std::to_string(target) + "): remaining edges are locked",
                            std::move(result));
    }
    result.round_counts.push_back(state.alive_count());
  }
  result.rounds = result.round_counts.size();
  result.mesh = state.extract();
  if (result.mesh.triangle_count() > target) {
    throw DecimationError("decimation cannot reach the target with the given fraction", std::move(result));
  }
  return result;
}

inline TriMesh decimate(const TriMesh& mesh, const DecimationParams& params = {}) {
  return decimate_logged(mesh, params).mesh;
}

}  // namespace rtsim::surface
