#pragma once

#include <cmath>
#include <random>

#include "rtsim/collide/bvh.hpp"
#include "rtsim/scan/camera.hpp"

namespace rtsim::scan {

/// Synthetic depth frame: one ray per pixel center against the scene, nearest
/// hit depth plus Gaussian noise, rounded to whole millimeters. Misses and
/// returns beyond the 16-bit range are 0.
inline DepthFrame render_depth(const Bvh& scene, const CameraPose& pose, const CameraIntrinsics& intr,
                               const NoiseModel& noise, std::uint64_t seed) {
  intr.validate();
  noise.validate();
  DepthFrame frame(intr);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Vec3 origin = pose.pose.translation();
  const Mat3& rot = pose.pose.rotation();
  for (std::uint32_t v = 0; v < intr.height; ++v) {
    for (std::uint32_t u = 0; u < intr.width; ++u) {
      const Vec3 dir = rot * intr.ray(u, v);
      const auto hit = scene.intersect_ray(origin, dir);
      if (!hit) continue;
      double depth = hit->t;
      const double sigma = noise.sigma(intr, u, v, depth);
      if (sigma > 0.0) depth += sigma * gauss(rng);
      const double q = std::round(depth);
      if (q >= 1.0 && q <= 65535.0) frame.at(u, v) = static_cast<std::uint16_t>(q);
    }
  }
  return frame;
}

inline DepthFrame render_depth(const TriMesh& scene_mesh, const CameraPose& pose, const CameraIntrinsics& intr,
                               const NoiseModel& noise, std::uint64_t seed) {
  if (scene_mesh.empty()) return DepthFrame(intr);
  return render_depth(Bvh(scene_mesh), pose, intr, noise, seed);
}

}  // namespace rtsim::scan
