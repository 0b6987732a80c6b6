#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rtsim/surface/volume.hpp"

namespace rtsim::surface {

namespace mc {

// Cube corners are numbered by their offset bits: corner c sits at
// (c & 1, (c >> 1) & 1, (c >> 2) & 1). Edge e runs from edge_corner[e][0]
// along axis edge_axis[e].

struct Tables {
  std::array<std::array<int, 2>, 12> edge_corner{};
  std::array<int, 12> edge_axis{};
  /// Per case: edge triples of the emitted triangles, terminated by -1.
  std::array<std::array<std::int8_t, 16>, 256> triangles{};
};

inline int corner_bit(int corner, int axis) { return (corner >> axis) & 1; }

/// Builds the 256-case triangle table. On each cube face the isoline
/// segments are chosen with the inside corners of ambiguous faces cut off
/// individually, a rule that depends only on the face's own corner signs, so
/// neighboring cells agree and the surface is closed. Segments are chained
/// into loops across faces and fan-triangulated.
inline Tables build_tables() {
  Tables t;
  int e = 0;
  for (int axis = 0; axis < 3; ++axis) {
    for (int c = 0; c < 8; ++c) {
      if (corner_bit(c, axis) == 0) {
        t.edge_corner[e] = {c, c | (1 << axis)};
        t.edge_axis[e] = axis;
        ++e;
      }
    }
  }
  auto edge_of = [&](int a, int b) {
    for (int i = 0; i < 12; ++i) {
      const auto& ec = t.edge_corner[i];
      if ((ec[0] == a && ec[1] == b) || (ec[0] == b && ec[1] == a)) return i;
    }
    return -1;
  };

  // Face corner cycles, counter-clockwise seen from outside the cube.
  std::array<std::array<int, 4>, 6> faces{};
  for (int axis = 0; axis < 3; ++axis) {
    const int b = (axis + 1) % 3;
    const int c = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      std::array<int, 4> cyc;
      const int pattern[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
      for (int k = 0; k < 4; ++k) cyc[k] = (side << axis) | (pattern[k][0] << b) | (pattern[k][1] << c);
      if (side == 0) std::swap(cyc[1], cyc[3]);
      faces[2 * axis + side] = cyc;
    }
  }

  auto corner_pos = [](int c) -> Vec3 { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); };
  bool flip = false;
  for (int pass = 0; pass < 2; ++pass) {
    for (int cfg = 0; cfg < 256; ++cfg) {
      auto inside = [&](int c) { return ((cfg >> c) & 1) != 0; };
      std::array<int, 12> next;
      next.fill(-1);
      for (const auto& f : faces) {
        for (int k = 0; k < 4; ++k) {
          const int a = f[k], b = f[(k + 1) % 4];
          if (!(inside(a) && !inside(b))) continue;  // exits only
          for (int s = 1; s < 4; ++s) {
            const int j = (k - s + 4) % 4;
            const int p = f[j], q = f[(j + 1) % 4];
            if (!inside(p) && inside(q)) {
              next[edge_of(a, b)] = edge_of(p, q);
              break;
            }
          }
        }
      }
      std::vector<std::int8_t> tris;
      std::array<bool, 12> used{};
      for (int start = 0; start < 12; ++start) {
        if (next[start] < 0 || used[start]) continue;
        std::vector<int> loop;
        for (int cur = start; !used[cur]; cur = next[cur]) {
          used[cur] = true;
          loop.push_back(cur);
        }
        for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
          const int v1 = loop[i], v2 = loop[i + 1];
          tris.push_back(static_cast<std::int8_t>(loop[0]));
          tris.push_back(static_cast<std::int8_t>(flip ? v2 : v1));
          tris.push_back(static_cast<std::int8_t>(flip ? v1 : v2));
        }
      }
      auto& row = t.triangles[cfg];
      row.fill(-1);
      for (std::size_t i = 0; i < tris.size() && i < 15; ++i) row[i] = tris[i];
    }
    if (pass == 1) break;
    // Orientation: for a lone inside corner 0 the normal must point away from it.
    const auto& r = t.triangles[1];
    auto mid = [&](int edge) -> Vec3 { return 0.5 * (corner_pos(t.edge_corner[edge][0]) + corner_pos(t.edge_corner[edge][1])); };
    const Vec3 n = (mid(r[1]) - mid(r[0])).cross(mid(r[2]) - mid(r[0]));
    flip = n.dot(Vec3(1, 1, 1)) < 0.0;
    if (!flip) break;
  }
  return t;
}

inline const Tables& tables() {
  static const Tables t = build_tables();
  return t;
}

/// Shared core; cells touching an undefined (NaN) sample are skipped when
/// `skip_undefined` is set.
inline TriMesh extract(const ScalarVolume& vol, double iso, bool skip_undefined, bool inside_above = false) {
  const Tables& tab = tables();
  const auto [nx, ny, nz] = vol.dims;
  std::vector<Vec3> verts;
  std::vector<Triangle> tris;
  std::unordered_map<std::uint64_t, std::uint32_t> cache;
  cache.reserve(1 << 16);

  auto vertex_on = [&](std::size_t i, std::size_t j, std::size_t k, int edge) {
    const int c0 = tab.edge_corner[edge][0];
    const int axis = tab.edge_axis[edge];
    const std::size_t bi = i + (c0 & 1), bj = j + ((c0 >> 1) & 1), bk = k + ((c0 >> 2) & 1);
    const std::uint64_t key = static_cast<std::uint64_t>(vol.index(bi, bj, bk)) * 3 + static_cast<std::uint64_t>(axis);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const double v0 = vol.at(bi, bj, bk);
    const double v1 = vol.at(bi + (axis == 0), bj + (axis == 1), bk + (axis == 2));
    const double t = std::clamp((iso - v0) / (v1 - v0), 1e-3, 1.0 - 1e-3);
    Vec3 g(static_cast<double>(bi), static_cast<double>(bj), static_cast<double>(bk));
    g[axis] += t;
    verts.push_back(vol.origin + vol.spacing.cwiseProduct(g));
    const auto id = static_cast<std::uint32_t>(verts.size() - 1);
    cache.emplace(key, id);
    return id;
  };

  std::array<double, 8> val;
  for (std::size_t k = 0; k + 1 < nz; ++k) {
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      for (std::size_t i = 0; i + 1 < nx; ++i) {
        int cfg = 0;
        bool undefined = false;
        for (int c = 0; c < 8; ++c) {
          val[c] = vol.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          if (std::isnan(val[c])) {
            undefined = true;
            break;
          }
          if (inside_above ? val[c] > iso : val[c] < iso) cfg |= 1 << c;
        }
        if (undefined) {
          if (skip_undefined) continue;
          throw GeometryError("volume contains NaN samples");
        }
        if (cfg == 0 || cfg == 255) continue;
        const auto& row = tab.triangles[cfg];
        for (int r = 0; r < 15 && row[r] >= 0; r += 3) {
          const std::uint32_t a = vertex_on(i, j, k, row[r]);
          const std::uint32_t b = vertex_on(i, j, k, row[r + 1]);
          const std::uint32_t c = vertex_on(i, j, k, row[r + 2]);
          tris.push_back(Triangle{a, b, c});
        }
      }
    }
  }
  return TriMesh(std::move(verts), std::move(tris));
}

}  // namespace mc

struct McOptions {
  /// Set for CT-like volumes where tissue is brighter than air.
  bool inside_above = false;
};

/// Isosurface of `vol` at `iso`. By default samples below iso are inside.
/// Triangles face away from the inside, so signed distances that are
/// negative inside give an outward-facing surface. An iso outside the
/// sample range yields an empty mesh.
inline TriMesh marching_cubes(const ScalarVolume& vol, double iso, const McOptions& opt = {}) {
  vol.validate();
  for (float s : vol.samples) {
    if (std::isnan(s)) throw GeometryError("volume contains NaN samples");
  }
  return mc::extract(vol, iso, false, opt.inside_above);
}

}  // namespace rtsim::surface
