#pragma once

#include <vector>

#include "rtsim/geometry/shapes.hpp"
#include "rtsim/scan/camera.hpp"

// Bundled synthetic patients and the four-camera rig that scans them.
namespace rtsim::scan {

/// Height of the table top the bundled phantoms lie on.
inline constexpr double kTableTopZ = -150.0;
/// Default table-removal height for the bundled scene.
inline constexpr double kDefaultZCut = kTableTopZ + 10.0;

/// Camera-to-world pose for a camera at `eye` looking at `target`; image x
/// is aligned with forward x up, image y points down.
inline RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitY());
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return RigidTransform::from_approximate(r, eye);
}

/// Mannequin lying supine along +Y (head toward the gantry) on the table
/// top, built from overlapping closed parts.
inline TriMesh mannequin_mesh(int slices = 64, int stacks = 32) {
  using shapes::ellipsoid;
  const double z0 = kTableTopZ;
  std::vector<TriMesh> parts = {
      ellipsoid({0, 0, z0 + 105}, {170, 300, 105}, slices, stacks),           // torso
      ellipsoid({0, -330, z0 + 90}, {160, 140, 90}, slices, stacks),          // pelvis
      ellipsoid({0, 430, z0 + 85}, {75, 95, 85}, slices, stacks),             // head
      shapes::cylinder_between({0, 270, z0 + 85}, {0, 370, z0 + 85}, 50, slices),  // neck
      ellipsoid({90, -800, z0 + 60}, {65, 430, 60}, slices, stacks),          // legs
      ellipsoid({-90, -800, z0 + 60}, {65, 430, 60}, slices, stacks),
      ellipsoid({215, -50, z0 + 48}, {45, 300, 45}, slices, stacks),          // arms
      ellipsoid({-215, -50, z0 + 48}, {45, 300, 45}, slices, stacks),
  };
  return merge_meshes(parts);
}

inline TriMesh table_mesh() { return shapes::box({-300, -1500, kTableTopZ - 40}, {300, 700, kTableTopZ}); }

/// Scene rendered by the bundled rig: mannequin plus table.
inline TriMesh mannequin_scene() {
  const std::vector<TriMesh> parts = {mannequin_mesh(), table_mesh()};
  return merge_meshes(parts);
}

/// Four cameras at `standoff` mm: two over the upper body and two over the
/// lower body, one from each side, looking down at 45 degrees.
inline std::vector<CameraPose> default_rig(double standoff = 1000.0) {
  const double s = standoff / std::sqrt(2.0);
  const double target_z = kTableTopZ + 100.0;
  std::vector<CameraPose> rig;
  const struct {
    const char* id;
    double side;
    double y;
  } layout[] = {{"upper_left", -1, 300}, {"upper_right", 1, 300}, {"lower_left", -1, -550}, {"lower_right", 1, -550}};
  for (const auto& c : layout) {
    const Vec3 target(0, c.y, target_z);
    rig.push_back({c.id, look_at(target + Vec3(c.side * s, 0, s), target)});
  }
  return rig;
}

/// Smooth closed torso-like phantom about 400 mm long with
/// 2 * slices * (stacks - 1) triangles (160,000 for 400 x 201).
inline TriMesh torso_phantom(int slices = 400, int stacks = 201) {
  return shapes::sphere_topology(slices, stacks, [](double u, double v) {
    const double phi = 2.0 * std::numbers::pi * u;
    const double theta = std::numbers::pi * (v - 0.5);
    // poles along y; flattened front-to-back, with a gentle chest/waist profile
    const double along = std::sin(theta);
    const double ring = std::cos(theta);
    const double waist = 1.0 - 0.12 * std::cos(std::numbers::pi * along);
    return Vec3(160.0 * waist * ring * std::cos(phi), 200.0 * along,
                -100.0 * waist * ring * std::sin(phi) * (1.0 - 0.1 * std::sin(phi)));
  });
}

}  // namespace rtsim::scan
