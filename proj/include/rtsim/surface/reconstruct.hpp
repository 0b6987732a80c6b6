#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "rtsim/surface/marching_cubes.hpp"
#include "rtsim/surface/normals.hpp"

namespace rtsim::surface {

struct ReconParams {
  int grid_resolution = 512;           // voxels along the longest bounding-box axis
  std::size_t normal_neighborhood = 16;
  double truncation_mm = 0.0;          // 0 selects 3 voxel sizes
  std::optional<Vec3> viewpoint;       // orients estimated normals; unused when the cloud has normals

  void validate() const {
    if (grid_resolution < 16 || grid_resolution > 1024) {
      throw ReconstructionError("grid_resolution must lie in [16, 1024]");
    }
    if (!(truncation_mm >= 0.0) || !std::isfinite(truncation_mm)) {
      throw ReconstructionError("truncation must be positive (or 0 for the default)");
    }
    if (normal_neighborhood < 3) throw ReconstructionError("normal_neighborhood must be at least 3");
  }
};

inline constexpr std::size_t kMinReconPoints = 100;

struct ReconGrid {
  double voxel_mm = 0.0;
  double truncation_mm = 0.0;
  std::array<std::size_t, 3> dims{};
  Vec3 origin = Vec3::Zero();
};

/// Grid layout used by reconstruct() for a cloud with bounds `b`.
inline ReconGrid recon_grid(const Aabb& b, const ReconParams& params) {
  ReconGrid g;
  const double longest = b.extent().maxCoeff();
  if (!(longest > 0.0)) throw ReconstructionError("point cloud has zero extent");
  g.voxel_mm = longest / params.grid_resolution;
  g.truncation_mm = params.truncation_mm > 0.0 ? params.truncation_mm : 3.0 * g.voxel_mm;
  const double pad = g.truncation_mm + 2.0 * g.voxel_mm;
  g.origin = b.min - Vec3::Constant(pad);
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = static_cast<std::size_t>(std::ceil((b.extent()[a] + 2.0 * pad) / g.voxel_mm)) + 1;
  }
  return g;
}

/// Sorted, exact-duplicate-free copy of the cloud; makes the result
/// independent of input order and multiplicity.
inline PointCloud canonical_cloud(const PointCloud& cloud) {
  const auto& pts = cloud.points();
  const auto& nrm = cloud.normals();
  std::vector<std::uint32_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0u);
  auto lex = [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  };
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (pts[a] != pts[b]) return lex(pts[a], pts[b]);
    return !nrm.empty() && lex(nrm[a], nrm[b]);
  });
  std::vector<Vec3> p, n;
  p.reserve(pts.size());
  for (std::uint32_t i : order) {
    if (!p.empty() && p.back() == pts[i]) continue;
    p.push_back(pts[i]);
    if (!nrm.empty()) n.push_back(nrm[i]);
  }
  return PointCloud(std::move(p), std::move(n));
}

/// Surface from an oriented point cloud: each point splats its signed
/// plane distance n.(x - p) onto voxels within the truncation radius with a
/// smooth compact weight; the zero level set of the weighted average is
/// extracted by marching cubes. Voxels no point reaches stay undefined, so
/// the surface ends where data ends (apart from gaps narrower than about
/// twice the truncation radius, which get bridged).
inline TriMesh reconstruct(const PointCloud& input, const ReconParams& params = {}) {
  params.validate();
  if (input.size() < kMinReconPoints) {
    throw ReconstructionError("reconstruction needs at least " + std::to_string(kMinReconPoints) + " points, got " +
                              std::to_string(input.size()));
  }
  const PointCloud cloud = canonical_cloud(input);
  if (cloud.size() < kMinReconPoints) throw ReconstructionError("too few distinct points for reconstruction");
  const std::vector<Vec3> normals = cloud.has_normals()
                                        ? cloud.normals()
                                        : estimate_normals(cloud.points(), params.normal_neighborhood, params.viewpoint);

  const ReconGrid g = recon_grid(cloud_bounds(cloud), params);
  const std::size_t nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  ScalarVolume vol(g.dims, Vec3::Constant(g.voxel_mm), g.origin, 0.0f);
  std::vector<float> wsum(vol.samples.size(), 0.0f);

  const double r = g.truncation_mm;
  const double r2 = r * r;
  const double inv_voxel = 1.0 / g.voxel_mm;
  const auto& pts = cloud.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3& p = pts[i];
    const Vec3& n = normals[i];
    const Vec3 lo = (p - g.origin - Vec3::Constant(r)) * inv_voxel;
    const Vec3 hi = (p - g.origin + Vec3::Constant(r)) * inv_voxel;
    const auto i0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo.x())));
    const auto j0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo.y())));
    const auto k0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo.z())));
    const auto i1 = std::min(nx - 1, static_cast<std::size_t>(std::floor(hi.x())));
    const auto j1 = std::min(ny - 1, static_cast<std::size_t>(std::floor(hi.y())));
    const auto k1 = std::min(nz - 1, static_cast<std::size_t>(std::floor(hi.z())));
    for (std::size_t k = k0; k <= k1; ++k) {
      const double dz = g.origin.z() + k * g.voxel_mm - p.z();
      for (std::size_t j = j0; j <= j1; ++j) {
        const double dy = g.origin.y() + j * g.voxel_mm - p.y();
        const double dyz2 = dy * dy + dz * dz;
        if (dyz2 >= r2) continue;
        std::size_t idx = vol.index(i0, j, k);
        for (std::size_t ii = i0; ii <= i1; ++ii, ++idx) {
          const double dx = g.origin.x() + ii * g.voxel_mm - p.x();
          const double d2 = dx * dx + dyz2;
          if (d2 >= r2) continue;
          const double s = 1.0 - d2 / r2;
          const double w = s * s;
          vol.samples[idx] += static_cast<float>(w * (n.x() * dx + n.y() * dy + n.z() * dz));
          wsum[idx] += static_cast<float>(w);
        }
      }
    }
  }
  constexpr float kUndefined = std::numeric_limits<float>::quiet_NaN();
  for (std::size_t i = 0; i < vol.samples.size(); ++i) {
    vol.samples[i] = wsum[i] > 0.0f ? vol.samples[i] / wsum[i] : kUndefined;
  }
  wsum = {};
  TriMesh mesh = mc::extract(vol, 0.0, true);
  if (mesh.empty()) throw ReconstructionError("reconstruction produced no surface");
  return mesh;
}

}  // namespace rtsim::surface
