#include <doctest.h>

#include "support.hpp"

using namespace rtsim;
using namespace rtsim::machine;
using testing::Gen;

namespace {

Vec3 mirror_x(const Vec3& p) { return {-p.x(), p.y(), p.z()}; }

Vec3 centroid(const TriMesh& m) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& v : m.vertices()) c += v;
  return c / static_cast<double>(m.vertex_count());
}

JointUpdate random_update(Gen& g) {
  JointUpdate u;
  u.gantry_deg = g.uniform(-250, 250);
  u.collimator_deg = g.uniform(-250, 250);
  u.couch_rotation_deg = g.uniform(-120, 120);
  u.couch_lateral_mm = g.uniform(-600, 600);
  u.couch_longitudinal_mm = g.uniform(-1200, 1200);
  u.couch_vertical_mm = g.uniform(-300, 600);
  u.gap_x_mm = g.uniform(-10, 450);
  u.gap_y_mm = g.uniform(-10, 450);
  return u;
}

}  // namespace

TEST_SUITE("machine") {

TEST_CASE("default limits and state") {
  const MachineState s(JointLimits{});
  CHECK(s.gantry_deg() == 0.0);
  CHECK(s.couch_translation_mm() == Vec3::Zero());
  CHECK(s.collimator_gap_mm()[0] > 0.0);
  CHECK(s.limits().gantry.max == 185.0);
}

TEST_CASE("joint updates") {
  const MachineState s(JointLimits{});
  JointUpdate u;
  u.gantry_deg = 45.0;
  CHECK(set_joints(s, u).gantry_deg() == 45.0);
  CHECK(s.gantry_deg() == 0.0);

  u.gantry_deg = 200.0;
  try {
    (void)s.with(u);
    FAIL("expected LimitError");
  } catch (const LimitError& e) {
    CHECK(e.joint() == joint::kGantry);
    CHECK(e.requested() == 200.0);
    CHECK(e.min() == -185.0);
    CHECK(e.max() == 185.0);
  }

  JointUpdate gap;
  gap.gap_x_mm = 0.0;
  CHECK_THROWS_AS((void)s.with(gap), LimitError);

  // a rejected update applies nothing, even joints listed before the bad one
  JointUpdate mixed;
  mixed.collimator_deg = 10.0;
  mixed.couch_vertical_mm = 900.0;
  MachineState t = s;
  CHECK_THROWS_AS(t = t.with(mixed), LimitError);
  CHECK(t == s);
}

TEST_CASE("limit enforcement is total (property)") {
  Gen g(3);
  const JointLimits limits;
  MachineState s(limits);
  int accepted = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    JointUpdate u = random_update(g);
    // sparsify so that some updates succeed
    if (g.uniform(0, 1) < 0.7) u.gantry_deg.reset();
    if (g.uniform(0, 1) < 0.7) u.collimator_deg.reset();
    if (g.uniform(0, 1) < 0.7) u.couch_rotation_deg.reset();
    if (g.uniform(0, 1) < 0.7) u.couch_lateral_mm.reset();
    if (g.uniform(0, 1) < 0.7) u.couch_longitudinal_mm.reset();
    if (g.uniform(0, 1) < 0.7) u.couch_vertical_mm.reset();
    if (g.uniform(0, 1) < 0.7) u.gap_x_mm.reset();
    if (g.uniform(0, 1) < 0.7) u.gap_y_mm.reset();
    try {
      s = s.with(u);
      ++accepted;
    } catch (const LimitError&) {
    }
    CHECK_NOTHROW(s.check_within(limits));
  }
  CHECK(accepted > 100);
}

TEST_CASE("joint maps from JSON") {
  const auto u = JointUpdate::from_json({{"gantry_deg", 30}, {"couch_translation_mm", {1, 2, 3}}, {"collimator_gap_mm", {50, 60}}});
  CHECK(*u.gantry_deg == 30.0);
  CHECK(*u.couch_longitudinal_mm == 2.0);
  CHECK(*u.gap_y_mm == 60.0);
  CHECK(!u.collimator_deg);
  CHECK_THROWS_AS(JointUpdate::from_json({{"warp_drive", 1}}), FormatError);
  CHECK_THROWS_AS(JointUpdate::from_json({{"gantry_deg", "north"}}), FormatError);
  CHECK_THROWS_AS(JointUpdate::from_json({{"couch_translation_mm", {1, 2}}}), FormatError);
  CHECK_THROWS_AS(JointUpdate::from_json(nlohmann::json::array()), FormatError);

  const nlohmann::json j = to_json(MachineState(JointLimits{}));
  CHECK(j.at("gantry_deg") == 0.0);
  CHECK(j.at("couch_translation_mm").size() == 3);
  CHECK(JointUpdate::from_json({{"couch_translation_mm", j.at("couch_translation_mm")}}).couch_vertical_mm == 0.0);
}

TEST_CASE("source position") {
  MachineState s(JointLimits{});
  CHECK((source_position(s) - Vec3(0, 0, 1000)).norm() < 1e-9);
  JointUpdate u;
  u.gantry_deg = 90.0;
  CHECK((source_position(s.with(u)) - Vec3(1000, 0, 0)).norm() < 1e-6);
  u.gantry_deg = -90.0;
  CHECK((source_position(s.with(u)) - Vec3(-1000, 0, 0)).norm() < 1e-6);
}

TEST_CASE("zero pose uses the mounts alone") {
  MachineGeometry g = bundled_machine();
  g.components.push_back({"probe", std::make_shared<const TriMesh>(shapes::box({0, 0, 0}, {1, 1, 1})), frame::kGantry,
                          RigidTransform::translation({5, 6, 7})});
  const PosedScene scene = forward_kinematics(g, g.initial_state);
  CHECK(scene.find("probe")->world == RigidTransform::translation({5, 6, 7}));
  CHECK(scene.find("gantry_head")->world == RigidTransform());
  CHECK(scene.find("probe")->group == Group::Gantry);
  CHECK(scene.find("couch_top")->group == Group::Couch);
}

TEST_CASE("couch translation moves the patient rigidly") {
  const MachineGeometry g = attach_patient(bundled_machine(), shapes::box({-100, -300, -150}, {100, 300, 50}), RigidTransform());
  const PosedScene a = forward_kinematics(g, g.initial_state);
  JointUpdate u;
  u.couch_lateral_mm = 0.0;
  u.couch_longitudinal_mm = 100.0;
  u.couch_vertical_mm = 0.0;
  const PosedScene b = forward_kinematics(g, g.initial_state.with(u));
  const Vec3 shift = centroid(b.patient()->world_mesh()) - centroid(a.patient()->world_mesh());
  CHECK((shift - Vec3(0, 100, 0)).norm() < 1e-9);
}

TEST_CASE("patient keeps its distances to the couch under couch motion (property)") {
  Gen g(19);
  const MachineGeometry geom = attach_patient(bundled_machine(), g.blob({0, 0, 0}, 80.0, 1), RigidTransform::translation({0, 0, -40}));
  auto distances = [](const PosedScene& s) {
    const TriMesh p = s.patient()->world_mesh();
    const TriMesh c = s.find("couch_top")->world_mesh();
    std::vector<double> d;
    for (std::size_t i = 0; i < p.vertex_count(); i += 7) {
      for (const Vec3& v : c.vertices()) d.push_back((p.vertices()[i] - v).norm());
    }
    return d;
  };
  const auto base = distances(forward_kinematics(geom, geom.initial_state));
  for (int trial = 0; trial < 20; ++trial) {
    JointUpdate u;
    u.couch_rotation_deg = g.uniform(-95, 95);
    u.couch_lateral_mm = g.uniform(-500, 500);
    u.couch_longitudinal_mm = g.uniform(-1000, 1000);
    u.couch_vertical_mm = g.uniform(-200, 500);
    const auto d = distances(forward_kinematics(geom, geom.initial_state.with(u)));
    REQUIRE(d.size() == base.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) worst = std::max(worst, std::abs(d[i] - base[i]));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("negated rotations mirror the gantry chain (property)") {
  Gen g(23);
  const MachineGeometry geom = bundled_machine();
  for (int trial = 0; trial < 50; ++trial) {
    JointUpdate u;
    u.gantry_deg = g.uniform(-185, 185);
    u.collimator_deg = g.uniform(-180, 180);
    JointUpdate neg;
    neg.gantry_deg = -*u.gantry_deg;
    neg.collimator_deg = -*u.collimator_deg;
    const PosedScene a = forward_kinematics(geom, geom.initial_state.with(u));
    const PosedScene b = forward_kinematics(geom, geom.initial_state.with(neg));
    for (const char* name : {"gantry_head", "collimator_housing"}) {
      const Vec3 p = g.point(500);
      const Vec3 lhs = a.find(name)->world.apply(p);
      const Vec3 rhs = mirror_x(b.find(name)->world.apply(mirror_x(p)));
      CHECK((lhs - rhs).norm() < 1e-9);
    }
  }
}

TEST_CASE("forward kinematics is deterministic") {
  const MachineGeometry geom = bundled_machine();
  JointUpdate u;
  u.gantry_deg = 33.3;
  u.couch_rotation_deg = -12.0;
  const PosedScene a = forward_kinematics(geom, geom.initial_state.with(u));
  const PosedScene b = forward_kinematics(geom, geom.initial_state.with(u));
  REQUIRE(a.components.size() == b.components.size());
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    CHECK(a.components[i].world.rotation() == b.components[i].world.rotation());
    CHECK(a.components[i].world.translation() == b.components[i].world.translation());
  }
}

TEST_CASE("forward kinematics rejects states outside the machine limits") {
  MachineGeometry geom = bundled_machine();
  JointUpdate u;
  u.gantry_deg = 150.0;
  const MachineState s = geom.initial_state.with(u);
  geom.limits.gantry = {-90.0, 90.0};
  CHECK_THROWS_AS(forward_kinematics(geom, s), LimitError);
}

TEST_CASE("attaching and replacing the patient") {
  const MachineGeometry base = bundled_machine();
  const std::size_t before = forward_kinematics(base, base.initial_state).triangle_count();
  Gen g(1);
  const TriMesh patient = g.blob({0, 0, 0}, 100.0, 4);
  const RigidTransform offset = RigidTransform::translation({0, 0, 100});
  const MachineGeometry with = attach_patient(base, patient, offset);
  const PosedScene scene = forward_kinematics(with, with.initial_state);
  CHECK(scene.triangle_count() == before + patient.triangle_count());
  const RigidTransform couch = scene.find("couch_top")->world;
  CHECK(scene.patient()->world == couch * offset);

  const TriMesh other = shapes::box({-10, -10, -10}, {10, 10, 10});
  const MachineGeometry swapped = attach_patient(with, other, offset);
  const PosedScene s2 = forward_kinematics(swapped, swapped.initial_state);
  CHECK(s2.patient()->mesh->triangle_count() == 12);
  CHECK(std::count_if(s2.components.begin(), s2.components.end(), [](const auto& c) { return c.name == kPatient; }) == 1);
  CHECK(forward_kinematics(detach_patient(swapped), swapped.initial_state).patient() == nullptr);
}

TEST_CASE("parent and child components are excluded from checking") {
  const MachineGeometry geom = attach_patient(bundled_machine(), shapes::box({0, 0, 0}, {1, 1, 1}), RigidTransform());
  CHECK(geom.excluded("patient", "couch_top"));
  CHECK(geom.excluded("head_fixation", "couch_top"));
  CHECK(geom.excluded("gantry_head", "collimator_housing"));
  CHECK(!geom.excluded("patient", "collimator_housing"));
  const PosedScene s = forward_kinematics(geom, geom.initial_state);
  CHECK(s.is_excluded("couch_top", "patient"));
  CHECK(s.is_excluded("patient", "couch_top"));
}

TEST_CASE("proton geometry shares the kinematic chain") {
  const MachineGeometry xrt = bundled_machine(MachineKind::XRT);
  const MachineGeometry pt = bundled_machine(MachineKind::PT);
  CHECK(pt.kind == MachineKind::PT);
  CHECK(mesh_bounds(*pt.find("collimator_housing")->mesh).min.z() < mesh_bounds(*xrt.find("collimator_housing")->mesh).min.z());
  JointUpdate u;
  u.gantry_deg = 60.0;
  const PosedScene a = forward_kinematics(xrt, xrt.initial_state.with(u));
  const PosedScene b = forward_kinematics(pt, pt.initial_state.with(u));
  CHECK(a.find("collimator_housing")->world == b.find("collimator_housing")->world);
}

TEST_CASE("machine definitions from JSON") {
  const auto dir = testing::scratch_dir("machine");
  ply::write_mesh((dir / "cube.ply").string(), shapes::box({0, 0, 0}, {10, 10, 10}), ply::Format::Ascii);
  const nlohmann::json def = {
      {"kind", "PT"},
      {"sad_mm", 1100},
      {"joints", {{"gantry_deg", {{"min", -90}, {"max", 90}, {"default", 10}}}}},
      {"components",
       {{{"name", "head"}, {"mesh", "bundled:gantry_head"}, {"parent", "gantry"}},
        {{"name", "couch_top"}, {"mesh", "cube.ply"}, {"parent", "couch"},
         {"mount", {{"translation_mm", {1, 2, 3}}}}},
        {{"name", "marker"}, {"mesh", "cube.ply"}, {"parent", "couch_top"}}}},
      {"exclude_pairs", nlohmann::json::array({nlohmann::json::array({"head", "marker"})})}};
  const MachineGeometry g = machine_from_json(def, dir);
  CHECK(g.kind == MachineKind::PT);
  CHECK(g.sad_mm == 1100.0);
  CHECK(g.limits.gantry.max == 90.0);
  CHECK(g.initial_state.gantry_deg() == 10.0);
  CHECK(g.find("couch_top")->mount.translation() == Vec3(1, 2, 3));
  CHECK(g.excluded("marker", "head"));

  {
    std::ofstream out(dir / "machine.json");
    out << def.dump();
  }
  CHECK(load_machine((dir / "machine.json").string()).components.size() == 3);

  nlohmann::json cyclic = def;
  cyclic["components"] = {{{"name", "a"}, {"mesh", "cube.ply"}, {"parent", "b"}},
                          {{"name", "b"}, {"mesh", "cube.ply"}, {"parent", "a"}}};
  const MachineGeometry cg = machine_from_json(cyclic, dir);
  CHECK_THROWS_AS(forward_kinematics(cg, cg.initial_state), GeometryError);

  nlohmann::json bad_default = def;
  bad_default["joints"]["gantry_deg"]["default"] = 120;
  CHECK_THROWS_AS(machine_from_json(bad_default, dir), FormatError);
  nlohmann::json unknown_parent = def;
  unknown_parent["components"][0]["parent"] = "nowhere";
  CHECK_THROWS_AS(machine_from_json(unknown_parent, dir), GeometryError);
  nlohmann::json missing_mesh = def;
  missing_mesh["components"][1]["mesh"] = "absent.ply";
  CHECK_THROWS_AS(machine_from_json(missing_mesh, dir), FormatError);
  CHECK_THROWS_AS(load_machine((dir / "nope.json").string()), FormatError);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
