#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rtsim/geometry/ply.hpp"
#include "rtsim/geometry/shapes.hpp"
#include "rtsim/machine/state.hpp"

namespace rtsim::machine {

/// Joint frames components can hang from. A component's parent is either
/// one of these or another component's name.
namespace frame {
inline constexpr const char* kRoom = "room";
inline constexpr const char* kGantry = "gantry";
inline constexpr const char* kCollimator = "collimator";
inline constexpr const char* kCouchRotation = "couch_rotation";
inline constexpr const char* kCouch = "couch";
inline bool is_frame(const std::string& s) {
  return s == kRoom || s == kGantry || s == kCollimator || s == kCouchRotation || s == kCouch;
}
}  // namespace frame

inline constexpr const char* kPatient = "patient";

struct Component {
  std::string name;
  std::shared_ptr<const TriMesh> mesh;
  std::string parent;
  RigidTransform mount;  // component frame -> parent frame
};

struct MachineGeometry {
  MachineKind kind = MachineKind::XRT;
  double sad_mm = 1000.0;
  JointLimits limits;
  MachineState initial_state;
  std::vector<Component> components;
  std::vector<std::pair<std::string, std::string>> exclude_pairs;

  const Component* find(const std::string& name) const {
    for (const Component& c : components) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }

  void validate() const {
    std::set<std::string> names;
    for (const Component& c : components) {
      if (c.name.empty()) throw GeometryError("component without a name");
      if (frame::is_frame(c.name)) throw GeometryError("component name '" + c.name + "' collides with a joint frame");
      if (!names.insert(c.name).second) throw GeometryError("duplicate component '" + c.name + "'");
      if (!c.mesh) throw GeometryError("component '" + c.name + "' has no mesh");
    }
    for (const Component& c : components) {
      if (!frame::is_frame(c.parent) && !names.count(c.parent)) {
        throw GeometryError("component '" + c.name + "' has unknown parent '" + c.parent + "'");
      }
    }
    limits.validate();
  }

  /// True when checking the pair is switched off: a component and its
  /// direct parent component, or a configured exclusion.
  bool excluded(const std::string& a, const std::string& b) const {
    const Component* ca = find(a);
    const Component* cb = find(b);
    if ((ca && ca->parent == b) || (cb && cb->parent == a)) return true;
    for (const auto& [x, y] : exclude_pairs) {
      if ((x == a && y == b) || (x == b && y == a)) return true;
    }
    return false;
  }

  std::size_t triangle_count() const {
    std::size_t n = 0;
    for (const Component& c : components) n += c.mesh->triangle_count();
    return n;
  }
};

/// Registers `patient` as a child of couch_top at `couch_offset`, replacing
/// any previous patient.
inline MachineGeometry attach_patient(MachineGeometry geom, TriMesh patient, const RigidTransform& couch_offset) {
  if (!geom.find("couch_top")) throw GeometryError("machine has no couch_top to attach the patient to");
  std::erase_if(geom.components, [](const Component& c) { return c.name == kPatient; });
  geom.components.push_back(
      {kPatient, std::make_shared<const TriMesh>(std::move(patient)), "couch_top", couch_offset});
  return geom;
}

inline MachineGeometry detach_patient(MachineGeometry geom) {
  std::erase_if(geom.components, [](const Component& c) { return c.name == kPatient; });
  return geom;
}

/// Procedural stand-in machine at SAD 1000 mm. In the gantry frame the beam
/// runs along -z from the source at z = +SAD; the collimator housing spans
/// z 450..650 and the head 650..1250. The couch top's upper face is at
/// z = -150 in the couch frame with the head end toward +y.
inline MachineGeometry bundled_machine(MachineKind kind = MachineKind::XRT) {
  using shapes::box;
  MachineGeometry g;
  g.kind = kind;
  g.sad_mm = 1000.0;
  g.initial_state = MachineState(g.limits, kind);
  auto add = [&](const char* name, TriMesh mesh, const char* parent) {
    g.components.push_back({name, std::make_shared<const TriMesh>(std::move(mesh)), parent, RigidTransform()});
  };
  add("gantry_head", box({-300, -350, 650}, {300, 350, 1250}), frame::kGantry);
  add("gantry_arm", shapes::cylinder_between({0, 350, 950}, {0, 1500, 950}, 250, 48), frame::kGantry);
  if (kind == MachineKind::XRT) {
    add("collimator_housing", shapes::frustum(450, 150, 650, 250, 48), frame::kCollimator);
  } else {
    add("collimator_housing", shapes::frustum(300, 200, 650, 260, 48), frame::kCollimator);
  }
  add("couch_top", box({-265, -1600, -190}, {265, 400, -150}), frame::kCouch);
  add("couch_base", box({-200, -1300, -1300}, {200, -700, -420}), frame::kCouchRotation);
  // Side rails of a head rest, either side of the patient's head.
  const std::vector<TriMesh> rails = {box({-135, 330, -150}, {-115, 540, -40}), box({115, 330, -150}, {135, 540, -40})};
  add("head_fixation", merge_meshes(rails), "couch_top");
  g.exclude_pairs = {{"gantry_head", "gantry_arm"}, {"gantry_head", "collimator_housing"}, {"couch_base", "couch_top"}};
  g.validate();
  return g;
}

inline RigidTransform transform_from_json(const nlohmann::json& j) {
  const auto rot = j.value("rotation", std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto tr = j.value("translation_mm", std::vector<double>{0, 0, 0});
  if (rot.size() != 9 || tr.size() != 3) throw FormatError("mount needs 9 rotation and 3 translation values");
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r(i, k) = rot[static_cast<std::size_t>(3 * i + k)];
  }
  try {
    return RigidTransform::from_approximate(r, Vec3(tr[0], tr[1], tr[2]));
  } catch (const GeometryError& ex) {
    throw FormatError(std::string("mount: ") + ex.what());
  }
}

/// Machine definition: {kind, sad_mm, joints: {name: {min, max, default}},
/// components: [{name, mesh: "<ply path>", parent, mount: {rotation, translation_mm}}],
/// exclude_pairs: [[a, b], ...]}. Mesh paths resolve against `base_dir`;
/// the mesh "bundled:<name>" takes that component from the built-in stand-in.
inline MachineGeometry machine_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  try {
    MachineGeometry g;
    g.kind = kind_from_string(j.value("kind", std::string("XRT")));
    g.sad_mm = j.value("sad_mm", 1000.0);
    if (!(g.sad_mm > 0.0)) throw FormatError("sad_mm must be positive");
    JointUpdate defaults;
    nlohmann::json default_map = nlohmann::json::object();
    if (j.contains("joints")) {
      for (const auto& [name, spec] : j.at("joints").items()) {
        Interval& i = g.limits[name];
        i.min = spec.at("min").get<double>();
        i.max = spec.at("max").get<double>();
        if (spec.contains("default")) default_map[name] = spec.at("default");
      }
    }
    g.limits.validate();
    g.initial_state = MachineState(g.limits, g.kind).with(JointUpdate::from_json(default_map));
    std::optional<MachineGeometry> bundled;
    for (const auto& c : j.at("components")) {
      const std::string mesh_ref = c.at("mesh").get<std::string>();
      const std::string name = c.at("name").get<std::string>();
      std::shared_ptr<const TriMesh> mesh;
      if (mesh_ref.rfind("bundled:", 0) == 0) {
        if (!bundled) bundled = bundled_machine(g.kind);
        const Component* src = bundled->find(mesh_ref.substr(8));
        if (!src) throw FormatError("no bundled component '" + mesh_ref.substr(8) + "'");
        mesh = src->mesh;
      } else {
        std::filesystem::path p(mesh_ref);
        if (p.is_relative()) p = base_dir / p;
        mesh = std::make_shared<const TriMesh>(ply::read_mesh(p.string()));
      }
      g.components.push_back({name, mesh, c.at("parent").get<std::string>(),
                              c.contains("mount") ? transform_from_json(c.at("mount")) : RigidTransform()});
    }
    if (j.contains("exclude_pairs")) {
      for (const auto& p : j.at("exclude_pairs")) {
        g.exclude_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("machine definition: ") + ex.what());
  } catch (const LimitError& ex) {
    throw FormatError(std::string("machine definition: default ") + ex.what());
  }
}

inline MachineGeometry load_machine(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("machine definition: ") + ex.what());
  }
  return machine_from_json(j, std::filesystem::path(path).parent_path());
}

}  // namespace rtsim::machine
