#pragma once

#include <cstdlib>
#include <span>
#include <utility>

#include "rtsim/scan/camera.hpp"

namespace rtsim::scan {

struct UnprojectOptions {
  bool estimate_normals = true;
  /// Pixel offset of the central-difference stencil.
  int normal_step = 2;
  /// Neighbors whose depth differs by more than this are treated as missing
  /// (silhouette edges).
  double max_depth_jump_mm = 30.0;
};

/// Camera-frame point cloud from the nonzero pixels, in row-major order.
/// Normals come from central differences on the depth grid (one-sided at
/// holes) and face the camera; pixels with no usable neighbors get the
/// viewing direction.
inline PointCloud unproject(const DepthFrame& frame, const UnprojectOptions& opt = {}) {
  const CameraIntrinsics& k = frame.intrinsics();
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  points.reserve(frame.valid_count());
  if (opt.estimate_normals) normals.reserve(points.capacity());

  const int w = static_cast<int>(k.width);
  const int h = static_cast<int>(k.height);
  auto sample = [&](int u, int v, double ref, Vec3& out) {
    if (u < 0 || v < 0 || u >= w || v >= h) return false;
    const std::uint16_t d = frame.at(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    if (d == 0 || std::abs(d - ref) > opt.max_depth_jump_mm) return false;
    out = k.unproject(u, v, d);
    return true;
  };

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::uint16_t d = frame.at(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
      if (d == 0) continue;
      const Vec3 p = k.unproject(u, v, d);
      points.push_back(p);
      if (!opt.estimate_normals) continue;

      const int s = opt.normal_step;
      Vec3 a, b;
      Vec3 tu = Vec3::Zero(), tv = Vec3::Zero();
      const bool ua = sample(u + s, v, d, a), ub = sample(u - s, v, d, b);
      if (ua && ub) tu = a - b;
      else if (ua) tu = a - p;
      else if (ub) tu = p - b;
      const bool va = sample(u, v + s, d, a), vb = sample(u, v - s, d, b);
      if (va && vb) tv = a - b;
      else if (va) tv = a - p;
      else if (vb) tv = p - b;

      Vec3 n = tu.cross(tv);
      const double len = n.norm();
      if (len > 1e-12) {
        n /= len;
        if (n.dot(p) > 0.0) n = -n;
      } else {
        n = -p.normalized();
      }
      normals.push_back(n);
    }
  }
  return PointCloud(std::move(points), std::move(normals));
}

/// Frames paired with the calibrated pose of the camera that captured them.
using PosedFrame = std::pair<DepthFrame, CameraPose>;

/// Unprojects every frame, maps it to the world, concatenates, and removes
/// the table by keeping only points with z >= z_cut (or z < z_cut when
/// keep_above is false).
inline PointCloud merge_scans(std::span<const PosedFrame> frames, const TableSliceParams& slice,
                              const UnprojectOptions& opt = {}) {
  if (frames.empty()) throw EmptyScanError("merge_scans called with no frames");
  if (!std::isfinite(slice.z_cut)) throw GeometryError("table slice height must be finite");
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  bool all_normals = opt.estimate_normals;
  for (const auto& [frame, pose] : frames) {
    const PointCloud local = unproject(frame, opt);
    all_normals = all_normals && local.has_normals();
    for (std::size_t i = 0; i < local.size(); ++i) {
      const Vec3 p = pose.pose.apply(local.points()[i]);
      const bool above = p.z() >= slice.z_cut;
      if (above != slice.keep_above) continue;
      points.push_back(p);
      if (local.has_normals()) normals.push_back(pose.pose.apply_vector(local.normals()[i]).normalized());
    }
  }
  if (points.empty()) throw EmptyScanError("no points left after table removal at z = " + std::to_string(slice.z_cut));
  if (!all_normals) normals.clear();
  return PointCloud(std::move(points), std::move(normals));
}

}  // namespace rtsim::scan
