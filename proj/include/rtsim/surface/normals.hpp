#pragma once

#include <algorithm>
#include <optional>
#include <tuple>
#include <queue>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rtsim/geometry/kdtree.hpp"
#include "rtsim/geometry/types.hpp"

namespace rtsim::surface {

/// Unit normals from a PCA fit over each point's `k` nearest neighbors.
/// Orientation is propagated across the neighbor graph (largest-agreement
/// first), seeded to face `viewpoint` when given, otherwise to face away
/// from the cloud centroid at the point farthest from it.
inline std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, std::size_t k,
                                          std::optional<Vec3> viewpoint = std::nullopt) {
  const std::size_t n = points.size();
  if (n < 3 || k < 3) throw ReconstructionError("normal estimation needs at least 3 neighbors");
  k = std::min(k, n);
  const KdTree tree(points);
  std::vector<Vec3> normals(n);
  std::vector<std::vector<std::uint32_t>> neighbors(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto hits = tree.knn(points[i], k);
    Vec3 mean = Vec3::Zero();
    for (const auto& h : hits) mean += points[h.index];
    mean /= static_cast<double>(hits.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& h : hits) {
      const Vec3 d = points[h.index] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(cov);
    const Vec3 ev = es.eigenvalues();
    if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
      throw ReconstructionError("degenerate neighborhood: normals cannot be estimated");
    }
    normals[i] = es.eigenvectors().col(0).normalized();
    neighbors[i].reserve(hits.size());
    for (const auto& h : hits) {
      if (h.index != i) neighbors[i].push_back(h.index);
    }
  }

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(n);

  // Seeds in order of preference; each connected component is seeded once.
  std::vector<std::uint32_t> seeds(n);
  std::vector<double> key(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    seeds[i] = i;
    key[i] = viewpoint ? (points[i] - *viewpoint).squaredNorm() : -(points[i] - centroid).squaredNorm();
  }
  std::stable_sort(seeds.begin(), seeds.end(), [&](std::uint32_t a, std::uint32_t b) { return key[a] < key[b]; });

  using Edge = std::tuple<double, std::uint32_t, std::uint32_t>;  // (-|agreement|, target, source)
  std::priority_queue<Edge, std::vector<Edge>, std::greater<>> edges;
  std::vector<char> done(n, 0);
  auto expand = [&](std::uint32_t i) {
    for (std::uint32_t j : neighbors[i]) {
      if (!done[j]) edges.emplace(-std::abs(normals[i].dot(normals[j])), j, i);
    }
  };
  for (std::uint32_t seed : seeds) {
    if (done[seed]) continue;
    const Vec3 toward = viewpoint ? Vec3(*viewpoint - points[seed]) : Vec3(points[seed] - centroid);
    if (normals[seed].dot(toward) < 0.0) normals[seed] = -normals[seed];
    done[seed] = 1;
    expand(seed);
    while (!edges.empty()) {
      const auto [w, j, i] = edges.top();
      edges.pop();
      if (done[j]) continue;
      if (normals[j].dot(normals[i]) < 0.0) normals[j] = -normals[j];
      done[j] = 1;
      expand(j);
    }
  }
  return normals;
}

}  // namespace rtsim::surface
