// rtsim: command-line front end for the scanning, reconstruction and
// collision simulator.
#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "rtsim/rtsim.hpp"

using namespace rtsim;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::uint64_t seed = 1;
  int grid = 512;
  std::size_t target_tris = 15999;
  double iso = 0.0;
  double z_cut = scan::kDefaultZCut;
  std::string bind = "127.0.0.1:8080";
  std::string machine;
};

machine::MachineGeometry load_geometry(const std::string& path, const std::string& kind) {
  if (!path.empty()) return machine::load_machine(path);
  return machine::bundled_machine(machine::kind_from_string(kind));
}

std::pair<std::string, int> parse_bind(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw Error("--bind expects host:port");
  try {
    return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error("--bind expects host:port, got '" + s + "'");
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << text;
}

service::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rtsim: patient scan, surface reconstruction and treatment-room collision simulator"};
  app.require_subcommand(1);
  Common c;
  auto seed_flag = [&](CLI::App* sub) { sub->add_option("--seed", c.seed, "random seed")->capture_default_str(); };

  // scan simulate
  auto* scan_cmd = app.add_subcommand("scan", "depth-camera simulation");
  scan_cmd->require_subcommand(1);
  auto* simulate = scan_cmd->add_subcommand("simulate", "render the rig's depth frames of a scene");
  std::string sim_out, sim_scene, sim_rig;
  double standoff = 1000.0;
  bool noiseless = false;
  simulate->add_option("--out", sim_out, "capture directory")->required();
  simulate->add_option("--scene", sim_scene, "scene mesh (PLY); default: bundled mannequin on the table");
  simulate->add_option("--rig", sim_rig, "rig JSON; default: bundled four-camera rig");
  simulate->add_option("--standoff", standoff, "bundled rig camera distance (mm)")->capture_default_str();
  simulate->add_flag("--noiseless", noiseless, "disable depth noise");
  seed_flag(simulate);
  simulate->callback([&] {
    const TriMesh scene = sim_scene.empty() ? scan::mannequin_scene() : ply::read_mesh(sim_scene);
    const auto rig = sim_rig.empty() ? scan::default_rig(standoff) : scan::read_rig(sim_rig);
    const scan::NoiseModel noise = noiseless ? scan::NoiseModel::none() : scan::NoiseModel{};
    const Bvh bvh(scene);
    std::vector<scan::PosedFrame> frames;
    for (std::size_t i = 0; i < rig.size(); ++i) {
      frames.emplace_back(scan::render_depth(bvh, rig[i], scan::CameraIntrinsics::kinect_v2(), noise, c.seed + i), rig[i]);
    }
    service::write_capture(sim_out, frames);
    for (const auto& [f, pose] : frames) std::cout << pose.camera_id << ": " << f.valid_count() << " returns\n";
  });

  // recon
  auto* recon = app.add_subcommand("recon", "surface reconstruction from a point cloud or a capture");
  std::string recon_in, recon_frames, recon_out;
  recon->add_option("--in", recon_in, "point cloud (PLY)");
  recon->add_option("--frames", recon_frames, "capture directory (rig.json + frames/)");
  recon->add_option("--out", recon_out, "output mesh (PLY)")->required();
  recon->add_option("--grid", c.grid, "voxels along the longest axis")->capture_default_str();
  recon->add_option("--z-cut", c.z_cut, "table removal height for captures (mm)")->capture_default_str();
  recon->callback([&] {
    if (recon_in.empty() == recon_frames.empty()) throw Error("give exactly one of --in and --frames");
    const PointCloud cloud = !recon_in.empty()
                                 ? ply::read_point_cloud(recon_in)
                                 : scan::merge_scans(service::read_capture(recon_frames), {c.z_cut, true});
    surface::ReconParams p;
    p.grid_resolution = c.grid;
    const TriMesh mesh = surface::reconstruct(cloud, p);
    ply::write_mesh(recon_out, mesh);
    std::cout << cloud.size() << " points -> " << mesh.triangle_count() << " triangles\n";
  });

  // decimate
  auto* dec = app.add_subcommand("decimate", "iterative quadric edge-collapse decimation");
  std::string dec_in, dec_out;
  double fraction = 0.10;
  dec->add_option("--in", dec_in, "input mesh (PLY)")->required();
  dec->add_option("--out", dec_out, "output mesh (PLY)")->required();
  dec->add_option("--target-tris", c.target_tris, "stop at or below this many triangles (0: a tenth of the input)")
      ->capture_default_str();
  dec->add_option("--fraction", fraction, "share of triangles removed per round")->capture_default_str();
  dec->callback([&] {
    const TriMesh mesh = ply::read_mesh(dec_in);
    const auto r = surface::decimate_logged(mesh, {fraction, c.target_tris});
    ply::write_mesh(dec_out, r.mesh);
    std::cout << mesh.triangle_count() << " -> " << r.mesh.triangle_count() << " triangles in " << r.rounds
              << " rounds\n";
  });

  // quality
  auto* qual = app.add_subcommand("quality", "per-vertex quality against a reference cloud and 3-sigma filter");
  std::string q_mesh, q_ref, q_out, q_filtered;
  double q_k = 3.0;
  qual->add_option("--mesh", q_mesh, "mesh (PLY)")->required();
  qual->add_option("--ref", q_ref, "reference point cloud (PLY)")->required();
  qual->add_option("--out", q_out, "quality-colored mesh (PLY)");
  qual->add_option("--filtered", q_filtered, "mesh with vertices above k * RMSE removed (PLY)");
  qual->add_option("--k", q_k, "filter multiplier")->capture_default_str();
  qual->callback([&] {
    const TriMesh mesh = ply::read_mesh(q_mesh);
    const auto q = surface::quality_map(mesh, ply::read_point_cloud(q_ref));
    if (!q_out.empty()) surface::write_quality_ply(q_out, mesh, q);
    nlohmann::json j = surface::to_json(q);
    j["cutoff_mm"] = surface::quality_cutoff(q, q_k);
    if (!q_filtered.empty()) {
      const TriMesh f = surface::filter_by_quality(mesh, q, q_k);
      ply::write_mesh(q_filtered, f);
      j["filtered_triangles"] = f.triangle_count();
    }
    std::cout << j.dump(2) << '\n';
  });

  // mc
  auto* mc = app.add_subcommand("mc", "marching cubes on a scalar volume");
  std::string mc_in, mc_out;
  bool inside_above = false;
  mc->add_option("--in", mc_in, "volume header (JSON)")->required();
  mc->add_option("--out", mc_out, "output mesh (PLY)")->required();
  mc->add_option("--iso", c.iso, "iso value")->capture_default_str();
  mc->add_flag("--inside-above", inside_above, "treat values above the iso value as inside");
  mc->callback([&] {
    const TriMesh mesh = surface::marching_cubes(surface::read_volume(mc_in), c.iso, {inside_above});
    ply::write_mesh(mc_out, mesh);
    std::cout << mesh.triangle_count() << " triangles, area " << mesh.surface_area() << " mm^2\n";
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "render, merge, reconstruct, decimate and filter end to end");
  std::string pipe_out, pipe_frames;
  pipe->add_option("--out", pipe_out, "artifact directory")->required();
  pipe->add_option("--frames", pipe_frames, "capture directory; default: render the bundled scene");
  pipe->add_option("--grid", c.grid, "reconstruction grid")->capture_default_str();
  pipe->add_option("--target-tris", c.target_tris, "decimation target")->capture_default_str();
  pipe->add_option("--z-cut", c.z_cut, "table removal height (mm)")->capture_default_str();
  seed_flag(pipe);
  pipe->callback([&] {
    service::PipelineParams p;
    p.seed = c.seed;
    p.recon.grid_resolution = c.grid;
    p.target_triangles = c.target_tris;
    p.z_cut = c.z_cut;
    const auto out = pipe_frames.empty() ? service::run_bundled_pipeline(p, fs::path(pipe_out))
                                         : service::run_pipeline(service::read_capture(pipe_frames), p, fs::path(pipe_out));
    std::cout << service::to_json(out.run).dump(2) << '\n';
  });

  // eval flat / eval scenarios
  auto* eval = app.add_subcommand("eval", "evaluation protocols");
  eval->require_subcommand(1);
  auto* flat = eval->add_subcommand("flat", "flat-surface scanner accuracy");
  double flat_w = 1.0, flat_h = 0.6, flat_d = 1.0;
  int repeats = 5;
  bool flat_all = false;
  flat->add_option("--width", flat_w, "panel width (m)")->capture_default_str();
  flat->add_option("--height", flat_h, "panel height (m)")->capture_default_str();
  flat->add_option("--distance", flat_d, "panel distance (m)")->capture_default_str();
  flat->add_option("--repeats", repeats, "scans per configuration")->capture_default_str();
  flat->add_flag("--all", flat_all, "run every panel size at 1 m and 2 m");
  seed_flag(flat);
  flat->callback([&] {
    std::vector<evalkit::FlatSurfaceSpec> specs =
        flat_all ? evalkit::FlatSurfaceSpec::presets() : std::vector{evalkit::FlatSurfaceSpec{flat_w, flat_h, flat_d, repeats}};
    std::printf("%-12s %8s %8s %8s %8s\n", "panel (m)", "dist", "MAE", "RMSE", "max");
    for (auto& s : specs) {
      s.repeats = repeats;
      const auto m = evalkit::flat_surface_protocol(s, scan::NoiseModel{}, c.seed);
      const std::string panel = evalkit::round_significant(s.width_m, 2) + "x" + evalkit::round_significant(s.height_m, 2);
      std::printf("%-12s %8.1f %8.2f %8.2f %8.2f\n", panel.c_str(), s.distance_m, m.mae_mm, m.rmse_mm, m.max_mm);
    }
  });

  auto* scen = eval->add_subcommand("scenarios", "simulated vs measured clearance");
  std::string scen_file, scen_patient, scen_write, kind = "XRT";
  bool scen_json = false;
  scen->add_option("--file", scen_file, "scenario JSON; default: synthetic fixture");
  scen->add_option("--machine", c.machine, "machine definition JSON");
  scen->add_option("--kind", kind, "bundled machine kind (XRT or PT)")->capture_default_str();
  scen->add_option("--patient", scen_patient, "patient mesh (PLY) on the couch top; default: bundled mannequin");
  scen->add_option("--write", scen_write, "also write the scenarios used to this file");
  scen->add_flag("--json", scen_json, "print the report as JSON");
  seed_flag(scen);
  scen->callback([&] {
    machine::MachineGeometry geom = load_geometry(c.machine, kind);
    geom = machine::attach_patient(std::move(geom),
                                   scen_patient.empty() ? scan::mannequin_mesh() : ply::read_mesh(scen_patient),
                                   RigidTransform());
    const auto scenarios =
        scen_file.empty() ? evalkit::synthetic_scenarios(geom, c.seed) : evalkit::read_scenarios(scen_file);
    if (!scen_write.empty()) write_text(scen_write, evalkit::scenarios_to_json(scenarios).dump(2) + "\n");
    const auto report = evalkit::run_scenarios(scenarios, geom);
    std::cout << (scen_json ? evalkit::to_json(report).dump(2) + "\n" : evalkit::to_table(report));
  });

  // export x3d
  auto* exp = app.add_subcommand("export", "scene and mesh export");
  exp->require_subcommand(1);
  auto* ex3d = exp->add_subcommand("x3d", "X3D export of a mesh or of the posed room");
  std::string x_mesh, x_out, x_joints, x_patient;
  int precision = 10;
  ex3d->add_option("--mesh", x_mesh, "export this mesh alone (PLY)");
  ex3d->add_option("--patient", x_patient, "patient mesh (PLY) for a scene export");
  ex3d->add_option("--machine", c.machine, "machine definition JSON for a scene export");
  ex3d->add_option("--joints", x_joints, "joint map JSON applied to the initial state");
  ex3d->add_option("--precision", precision, "significant digits for coordinates")->capture_default_str();
  ex3d->add_option("--out", x_out, "output file")->required();
  ex3d->callback([&] {
    const x3d::Options opt{precision};
    if (!x_mesh.empty()) {
      write_text(x_out, x3d::export_mesh(ply::read_mesh(x_mesh), "patient", opt));
      return;
    }
    machine::MachineGeometry geom = load_geometry(c.machine, "XRT");
    if (!x_patient.empty()) geom = machine::attach_patient(std::move(geom), ply::read_mesh(x_patient), RigidTransform());
    machine::MachineState state = geom.initial_state;
    if (!x_joints.empty()) state = machine::set_joints(state, machine::JointUpdate::from_json(nlohmann::json::parse(x_joints)));
    write_text(x_out, x3d::export_scene(machine::forward_kinematics(geom, state), opt));
  });

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP scene service for the planner UI");
  std::string serve_patient;
  bool no_patient = false;
  serve->add_option("--bind", c.bind, "host:port")->capture_default_str();
  serve->add_option("--machine", c.machine, "machine definition JSON; default: bundled XRT");
  serve->add_option("--patient", serve_patient, "patient mesh (PLY); default: bundled mannequin");
  serve->add_flag("--no-patient", no_patient, "start without a patient");
  serve->callback([&] {
    machine::MachineGeometry geom = load_geometry(c.machine, "XRT");
    if (!no_patient) {
      geom = machine::attach_patient(std::move(geom),
                                     serve_patient.empty() ? scan::mannequin_mesh() : ply::read_mesh(serve_patient),
                                     RigidTransform());
    }
    const std::string ref = c.machine.empty() ? "bundled:xrt" : c.machine;
    service::Server server(std::make_shared<service::SceneDocument>(std::move(geom), ref));
    const auto [host, port] = parse_bind(c.bind);
    const int bound = server.bind(host, port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "serving on http://" << host << ":" << bound << std::endl;
    server.run();
    g_server = nullptr;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const LimitError& e) {
    std::cerr << "limit error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
