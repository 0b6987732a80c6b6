#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtsim/scan/io.hpp"
#include "rtsim/scan/phantoms.hpp"
#include "rtsim/scan/render.hpp"
#include "rtsim/scan/unproject.hpp"
#include "rtsim/surface/decimate.hpp"
#include "rtsim/surface/quality.hpp"
#include "rtsim/surface/reconstruct.hpp"

namespace rtsim::service {

namespace stage {
inline constexpr const char* kRender = "render";
inline constexpr const char* kMerge = "unproject+merge";
inline constexpr const char* kReconstruct = "reconstruct";
inline constexpr const char* kDecimate = "decimate";
inline constexpr const char* kQuality = "quality+filter";
inline constexpr const char* kAll[] = {kRender, kMerge, kReconstruct, kDecimate, kQuality};
}  // namespace stage

/// A pipeline stage failed; artifacts of the earlier stages stay on disk.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error("pipeline stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineParams {
  std::uint64_t seed = 1;
  scan::NoiseModel noise;
  scan::CameraIntrinsics intrinsics = scan::CameraIntrinsics::kinect_v2();
  double z_cut = scan::kDefaultZCut;
  surface::ReconParams recon;
  std::size_t target_triangles = 15999;  // strictly below 16k
  double per_iteration_fraction = 0.10;
  double quality_k = 3.0;
};

struct PipelineRun {
  std::vector<std::pair<std::string, double>> stage_ms;  // in execution order
  double total_ms = 0.0;
  std::map<std::string, std::filesystem::path> artifacts;
  std::size_t cloud_points = 0;
  std::size_t recon_triangles = 0;
  std::size_t decimated_triangles = 0;
  std::size_t decimation_rounds = 0;
  std::size_t output_triangles = 0;
  double quality_cutoff_mm = 0.0;

  double stage_sum_ms() const {
    double s = 0.0;
    for (const auto& [name, ms] : stage_ms) s += ms;
    return s;
  }
};

struct PipelineOutput {
  TriMesh mesh;                 // filtered patient surface
  TriMesh decimated;            // before filtering; `quality` indexes its vertices
  surface::QualityMap quality;
  PipelineRun run;
};

namespace detail {

class Stages {
 public:
  Stages(PipelineRun& run, std::optional<std::filesystem::path> dir) : run_(run), dir_(std::move(dir)) {
    if (dir_) std::filesystem::create_directories(*dir_);
  }

  template <class F>
  auto time(const char* name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        finish(name, t0);
      } else {
        auto result = body();
        finish(name, t0);
        return result;
      }
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& ex) {
      throw PipelineError(name, ex.what());
    }
  }

  /// Path for an artifact under the output directory, recorded in the run.
  std::optional<std::filesystem::path> artifact(const std::string& key, const std::filesystem::path& rel) {
    if (!dir_) return std::nullopt;
    const auto p = *dir_ / rel;
    std::filesystem::create_directories(p.parent_path());
    run_.artifacts[key] = p;
    return p;
  }

 private:
  void finish(const char* name, std::chrono::steady_clock::time_point t0) {
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    run_.stage_ms.emplace_back(name, ms);
  }

  PipelineRun& run_;
  std::optional<std::filesystem::path> dir_;
};

}  // namespace detail

inline nlohmann::json to_json(const PipelineRun& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& [name, ms] : r.stage_ms) stages.push_back({{"stage", name}, {"ms", ms}});
  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& [k, p] : r.artifacts) artifacts[k] = p.string();
  return {{"stages", stages},
          {"total_ms", r.total_ms},
          {"artifacts", artifacts},
          {"cloud_points", r.cloud_points},
          {"recon_triangles", r.recon_triangles},
          {"decimated_triangles", r.decimated_triangles},
          {"decimation_rounds", r.decimation_rounds},
          {"output_triangles", r.output_triangles},
          {"quality_cutoff_mm", r.quality_cutoff_mm}};
}

/// Capture directory layout: rig.json plus frames/<camera_id>.depth.
inline void write_capture(const std::filesystem::path& dir, const std::vector<scan::PosedFrame>& frames) {
  std::filesystem::create_directories(dir / "frames");
  std::vector<scan::CameraPose> rig;
  for (const auto& [frame, pose] : frames) {
    rig.push_back(pose);
    scan::write_depth_frame((dir / "frames" / (pose.camera_id + ".depth")).string(), frame);
  }
  scan::write_rig((dir / "rig.json").string(), rig);
}

inline std::vector<scan::PosedFrame> read_capture(const std::filesystem::path& dir) {
  std::vector<scan::PosedFrame> frames;
  for (const scan::CameraPose& pose : scan::read_rig((dir / "rig.json").string())) {
    frames.emplace_back(scan::read_depth_frame((dir / "frames" / (pose.camera_id + ".depth")).string()), pose);
  }
  return frames;
}

namespace detail {

inline PipelineOutput run_from(const std::optional<TriMesh>& scene, const std::vector<scan::CameraPose>& rig,
                               std::vector<scan::PosedFrame> frames, const PipelineParams& params,
                               const std::optional<std::filesystem::path>& out_dir) {
  if (rig.empty() && frames.empty()) throw PipelineError(stage::kRender, "no cameras");
  PipelineOutput out;
  PipelineRun& run = out.run;
  Stages st(run, out_dir);
  const auto t0 = std::chrono::steady_clock::now();

  if (auto p = st.artifact("rig", "rig.json")) {
    std::vector<scan::CameraPose> poses = rig;
    if (poses.empty()) {
      for (const auto& f : frames) poses.push_back(f.second);
    }
    scan::write_rig(p->string(), poses);
  }

  st.time(stage::kRender, [&] {
    if (scene) {
      params.noise.validate();
      const Bvh bvh(*scene);
      for (std::size_t i = 0; i < rig.size(); ++i) {
        frames.emplace_back(scan::render_depth(bvh, rig[i], params.intrinsics, params.noise, params.seed + i), rig[i]);
      }
    }
    for (const auto& [frame, pose] : frames) {
      if (auto p = st.artifact("frame:" + pose.camera_id, "frames/" + pose.camera_id + ".depth")) {
        scan::write_depth_frame(p->string(), frame);
      }
    }
  });

  const PointCloud cloud = st.time(stage::kMerge, [&] {
    PointCloud c = scan::merge_scans(frames, scan::TableSliceParams{params.z_cut, true});
    if (auto p = st.artifact("cloud", "cloud.ply")) ply::write_point_cloud(p->string(), c);
    return c;
  });
  run.cloud_points = cloud.size();
  frames.clear();

  const TriMesh recon = st.time(stage::kReconstruct, [&] {
    TriMesh m = surface::reconstruct(cloud, params.recon);
    if (auto p = st.artifact("reconstruction", "reconstruction.ply")) ply::write_mesh(p->string(), m);
    return m;
  });
  run.recon_triangles = recon.triangle_count();

  st.time(stage::kDecimate, [&] {
    surface::DecimationParams dp{params.per_iteration_fraction, params.target_triangles};
    surface::DecimationResult d = surface::decimate_logged(recon, dp);
    run.decimation_rounds = d.rounds;
    out.decimated = std::move(d.mesh);
    if (auto p = st.artifact("decimated", "decimated.ply")) ply::write_mesh(p->string(), out.decimated);
  });
  run.decimated_triangles = out.decimated.triangle_count();

  st.time(stage::kQuality, [&] {
    out.quality = surface::quality_map(out.decimated, cloud);
    run.quality_cutoff_mm = surface::quality_cutoff(out.quality, params.quality_k);
    out.mesh = surface::filter_by_quality(out.decimated, out.quality, params.quality_k);
    if (auto p = st.artifact("quality", "quality.ply")) surface::write_quality_ply(p->string(), out.decimated, out.quality);
    if (auto p = st.artifact("patient", "patient.ply")) ply::write_mesh(p->string(), out.mesh);
  });
  run.output_triangles = out.mesh.triangle_count();
  run.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  if (auto p = st.artifact("run", "run.json")) {
    std::ofstream f(*p);
    if (!f) throw FormatError("cannot open '" + p->string() + "' for writing");
    f << to_json(run).dump(2) << '\n';
  }
  return out;
}

}  // namespace detail

/// Renders `scene` from every camera of the rig (camera i uses seed + i),
/// then merges, reconstructs, decimates and filters. With `out_dir`, each
/// stage writes its artifacts there as soon as it completes.
inline PipelineOutput run_pipeline(const TriMesh& scene, const std::vector<scan::CameraPose>& rig,
                                   const PipelineParams& params = {},
                                   const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  if (rig.empty()) throw PipelineError(stage::kRender, "the rig has no cameras");
  return detail::run_from(scene, rig, {}, params, out_dir);
}

/// Same pipeline starting from captured frames; the render stage only
/// records them.
inline PipelineOutput run_pipeline(std::vector<scan::PosedFrame> frames, const PipelineParams& params = {},
                                   const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  if (frames.empty()) throw PipelineError(stage::kRender, "no frames");
  return detail::run_from(std::nullopt, {}, std::move(frames), params, out_dir);
}

/// Bundled synthetic scene: mannequin on the table, four-camera rig.
inline PipelineOutput run_bundled_pipeline(const PipelineParams& params = {},
                                           const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  return run_pipeline(scan::mannequin_scene(), scan::default_rig(), params, out_dir);
}

}  // namespace rtsim::service
