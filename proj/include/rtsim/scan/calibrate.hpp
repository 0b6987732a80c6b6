#pragma once

#include <span>

#include "rtsim/scan/camera.hpp"

namespace rtsim::scan {

struct Calibration {
  RigidTransform camera_to_world;
  double residual_rms_mm = 0.0;
};

/// Least-squares rigid registration over known correspondences: finds R, T
/// minimizing sum |R c_i + T - w_i|^2 via the SVD of the cross-covariance
/// (reflection-corrected).
inline Calibration calibrate_pose(std::span<const Vec3> world_points, std::span<const Vec3> camera_points) {
  if (world_points.size() != camera_points.size()) {
    throw CalibrationError("correspondence lists differ in length");
  }
  const std::size_t n = world_points.size();
  if (n < 3) throw CalibrationError("calibration needs at least 3 correspondences");

  Vec3 cw = Vec3::Zero(), cc = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cw += world_points[i];
    cc += camera_points[i];
  }
  cw /= static_cast<double>(n);
  cc /= static_cast<double>(n);

  Mat3 h = Mat3::Zero();
  Mat3 spread_c = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = camera_points[i] - cc;
    const Vec3 b = world_points[i] - cw;
    h += a * b.transpose();
    spread_c += a * a.transpose();
  }

  // Collinear (or coincident) camera points leave the rotation about the line undetermined.
  Eigen::SelfAdjointEigenSolver<Mat3> spread(spread_c);
  const Vec3 ev = spread.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-10 * ev(2)) {
    throw CalibrationError("calibration points are collinear or coincident");
  }

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Mat3 r = v * d * u.transpose();
  // Re-orthonormalize against round-off before validation.
  Eigen::JacobiSVD<Mat3> clean(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = clean.matrixU() * clean.matrixV().transpose();
  const Vec3 t = cw - r * cc;

  Calibration out{RigidTransform(r, t), 0.0};
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) sq += (out.camera_to_world.apply(camera_points[i]) - world_points[i]).squaredNorm();
  out.residual_rms_mm = std::sqrt(sq / static_cast<double>(n));
  return out;
}

inline CameraPose calibrate_camera(std::string camera_id, std::span<const Vec3> world_points,
                                   std::span<const Vec3> camera_points) {
  return {std::move(camera_id), calibrate_pose(world_points, camera_points).camera_to_world};
}

}  // namespace rtsim::scan
