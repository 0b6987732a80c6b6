#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rtsim/geometry/types.hpp"

namespace rtsim::scan {

/// Pinhole model of a depth sensor. Pixel centers sit at integer
/// coordinates; the camera looks down +z with +x to the right and +y down.
struct CameraIntrinsics {
  std::uint32_t width = 512;
  std::uint32_t height = 424;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Focal lengths from the fields of view; principal point at the image
  /// center ((width - 1) / 2, (height - 1) / 2).
  static CameraIntrinsics from_fov(std::uint32_t width, std::uint32_t height, double hfov_deg, double vfov_deg) {
    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = (width / 2.0) / std::tan(hfov_deg * kDegToRad / 2.0);
    k.fy = (height / 2.0) / std::tan(vfov_deg * kDegToRad / 2.0);
    k.cx = (width - 1) / 2.0;
    k.cy = (height - 1) / 2.0;
    k.validate();
    return k;
  }

  /// 512 x 424 depth image, 70 x 60 degree field of view.
  static CameraIntrinsics kinect_v2() { return from_fov(512, 424, 70.0, 60.0); }

  void validate() const {
    if (width == 0 || height == 0) throw GeometryError("camera has zero-sized image");
    if (!(fx > 0.0) || !(fy > 0.0)) throw GeometryError("camera focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
      throw GeometryError("principal point outside the image");
    }
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  /// Camera-frame ray through pixel (u, v) with unit z component.
  Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

  Vec3 unproject(double u, double v, double depth) const { return ray(u, v) * depth; }

  /// Pixel coordinates of a camera-frame point in front of the camera.
  std::pair<double, double> project(const Vec3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
};

/// One depth image: millimeters along the optical axis, 0 = no return.
class DepthFrame {
 public:
  DepthFrame() = default;

  explicit DepthFrame(CameraIntrinsics intrinsics)
      : intrinsics_(intrinsics), depths_(intrinsics.pixel_count(), 0) {
    intrinsics_.validate();
  }

  DepthFrame(CameraIntrinsics intrinsics, std::vector<std::uint16_t> depths)
      : intrinsics_(intrinsics), depths_(std::move(depths)) {
    intrinsics_.validate();
    if (depths_.size() != intrinsics_.pixel_count()) throw GeometryError("depth grid does not match intrinsics");
  }

  const CameraIntrinsics& intrinsics() const noexcept { return intrinsics_; }
  const std::vector<std::uint16_t>& depths() const noexcept { return depths_; }
  std::uint32_t width() const noexcept { return intrinsics_.width; }
  std::uint32_t height() const noexcept { return intrinsics_.height; }

  std::uint16_t at(std::uint32_t u, std::uint32_t v) const { return depths_[static_cast<std::size_t>(v) * width() + u]; }
  std::uint16_t& at(std::uint32_t u, std::uint32_t v) { return depths_[static_cast<std::size_t>(v) * width() + u]; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto d : depths_) n += d != 0;
    return n;
  }

 private:
  CameraIntrinsics intrinsics_;
  std::vector<std::uint16_t> depths_;
};

/// Calibrated placement of one camera; `pose` maps camera frame to world.
struct CameraPose {
  std::string camera_id;
  RigidTransform pose;
};

/// Depth noise: Gaussian along the ray with
/// sigma = (sigma_base + sigma_per_meter * depth_m) * edge_factor, where the
/// edge factor grows linearly from 1 at the image center to edge_falloff at
/// the corners.
struct NoiseModel {
  double sigma_base = 1.0;
  double sigma_per_meter = 1.5;
  double edge_falloff = 1.5;

  static NoiseModel none() { return {0.0, 0.0, 1.0}; }

  void validate() const {
    if (!(sigma_base >= 0.0) || !(sigma_per_meter >= 0.0) || !(edge_falloff >= 0.0)) {
      throw GeometryError("noise model parameters must be non-negative");
    }
  }

  double sigma(const CameraIntrinsics& k, double u, double v, double depth_mm) const {
    const double du = u - k.cx;
    const double dv = v - k.cy;
    const double corner = std::hypot(std::max(k.cx, k.width - 1 - k.cx), std::max(k.cy, k.height - 1 - k.cy));
    const double rho = corner > 0.0 ? std::min(1.0, std::hypot(du, dv) / corner) : 0.0;
    const double edge = 1.0 + (edge_falloff - 1.0) * rho;
    return (sigma_base + sigma_per_meter * depth_mm / 1000.0) * edge;
  }

  NoiseModel scaled(double factor) const { return {sigma_base * factor, sigma_per_meter * factor, edge_falloff}; }
};

/// Axis-aligned table removal in the world frame.
struct TableSliceParams {
  double z_cut = 0.0;
  bool keep_above = true;
};

}  // namespace rtsim::scan
