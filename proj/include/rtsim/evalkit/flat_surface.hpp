#pragma once

#include <vector>

#include "rtsim/evalkit/metrics.hpp"
#include "rtsim/scan/render.hpp"
#include "rtsim/scan/unproject.hpp"

namespace rtsim::evalkit {

struct FlatSurfaceSpec {
  double width_m = 1.0;
  double height_m = 0.6;
  double distance_m = 1.0;
  int repeats = 5;

  void validate() const {
    if (!(width_m > 0.0 && height_m > 0.0 && distance_m > 0.0)) throw Error("flat surface dimensions must be positive");
    if (repeats < 1) throw Error("flat surface protocol needs at least one repeat");
  }

  /// The three panel sizes at both distances.
  static std::vector<FlatSurfaceSpec> presets() {
    std::vector<FlatSurfaceSpec> out;
    for (double d : {1.0, 2.0}) {
      out.push_back({1.0, 0.6, d, 5});
      out.push_back({0.6, 0.6, d, 5});
      out.push_back({0.4, 0.4, d, 5});
    }
    return out;
  }
};

struct FlatSurfaceResult {
  MetricsReport mean;               // per-run metrics averaged over the repeats
  std::vector<MetricsReport> runs;
};

/// Scans a flat panel square to the optical axis at the given distance,
/// keeps only returns from the panel and measures residuals against the
/// known plane z = distance. Run i uses seed + i.
inline FlatSurfaceResult flat_surface_runs(const FlatSurfaceSpec& spec, const scan::NoiseModel& noise,
                                           std::uint64_t seed,
                                           const scan::CameraIntrinsics& intr = scan::CameraIntrinsics::kinect_v2()) {
  spec.validate();
  const double w = spec.width_m * 500.0, h = spec.height_m * 500.0, d = spec.distance_m * 1000.0;
  const TriMesh panel({{-w, -h, d}, {w, -h, d}, {w, h, d}, {-w, h, d}}, {{0, 1, 2}, {0, 2, 3}});
  const Bvh bvh(panel);
  const scan::CameraPose camera{"flat", RigidTransform()};
  scan::UnprojectOptions opt;
  opt.estimate_normals = false;

  FlatSurfaceResult result;
  for (int i = 0; i < spec.repeats; ++i) {
    const scan::DepthFrame frame = scan::render_depth(bvh, camera, intr, noise, seed + static_cast<std::uint64_t>(i));
    const PointCloud cloud = scan::unproject(frame, opt);
    if (cloud.empty()) throw EmptyScanError("flat panel not visible from the camera");
    std::vector<double> residuals;
    residuals.reserve(cloud.size());
    for (const Vec3& p : cloud.points()) residuals.push_back(p.z() - d);
    result.runs.push_back(metrics(residuals));
  }
  for (const MetricsReport& r : result.runs) {
    result.mean.mae_mm += r.mae_mm;
    result.mean.rmse_mm += r.rmse_mm;
    result.mean.max_mm += r.max_mm;
    result.mean.n += r.n;
  }
  const auto k = static_cast<double>(result.runs.size());
  result.mean.mae_mm /= k;
  result.mean.rmse_mm /= k;
  result.mean.max_mm /= k;
  result.mean.n /= result.runs.size();
  return result;
}

inline MetricsReport flat_surface_protocol(const FlatSurfaceSpec& spec, const scan::NoiseModel& noise,
                                           std::uint64_t seed) {
  return flat_surface_runs(spec, noise, seed).mean;
}

}  // namespace rtsim::evalkit
