#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <memory>
#include <string>
#include <vector>

#include "rtsim/machine/geometry.hpp"

namespace rtsim::machine {

enum class Group { Room, Gantry, Couch };

inline const char* to_string(Group g) {
  switch (g) {
    case Group::Room: return "room";
    case Group::Gantry: return "gantry";
    case Group::Couch: return "couch";
  }
  return "?";
}

struct PosedComponent {
  std::string name;
  std::shared_ptr<const TriMesh> mesh;  // in the component frame
  RigidTransform world;                 // component frame -> world
  Group group = Group::Room;

  TriMesh world_mesh() const { return transform_mesh(world, *mesh); }
};

struct PosedScene {
  std::vector<PosedComponent> components;
  MachineState state;
  std::set<std::pair<std::string, std::string>> excluded;  // unordered pairs stored with first < second

  bool is_excluded(const std::string& a, const std::string& b) const {
    return excluded.count(a < b ? std::make_pair(a, b) : std::make_pair(b, a)) > 0;
  }

  const PosedComponent* find(const std::string& name) const {
    for (const PosedComponent& c : components) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
  const PosedComponent* patient() const { return find(kPatient); }

  std::size_t triangle_count() const {
    std::size_t n = 0;
    for (const PosedComponent& c : components) n += c.mesh->triangle_count();
    return n;
  }
};

/// Joint frames for a state. Gantry: rotation about +Y through the
/// isocenter, positive clockwise seen from the couch foot (so +90 puts the
/// source on +X). Collimator: rotation about the beam axis on top of the
/// gantry. Couch: rotation about +Z through the isocenter, then the
/// translation in room coordinates.
inline std::map<std::string, RigidTransform> joint_frames(const MachineState& s) {
  const RigidTransform gantry = RigidTransform::rotation_y(s.gantry_deg());
  const RigidTransform couch_rot = RigidTransform::rotation_z(s.couch_rotation_deg());
  return {{frame::kRoom, RigidTransform()},
          {frame::kGantry, gantry},
          {frame::kCollimator, gantry * RigidTransform::rotation_z(s.collimator_deg())},
          {frame::kCouchRotation, couch_rot},
          {frame::kCouch, RigidTransform::translation(s.couch_translation_mm()) * couch_rot}};
}

/// Radiation source position: (0, 0, SAD) carried by the gantry.
inline Vec3 source_position(const MachineState& s, double sad_mm = 1000.0) {
  return RigidTransform::rotation_y(s.gantry_deg()).apply(Vec3(0, 0, sad_mm));
}

inline PosedScene forward_kinematics(const MachineGeometry& geom, const MachineState& state) {
  state.check_within(geom.limits);
  const auto frames = joint_frames(state);
  PosedScene scene;
  scene.state = state;
  const std::size_t n = geom.components.size();
  std::vector<std::optional<std::pair<RigidTransform, Group>>> resolved(n);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[geom.components[i].name] = i;

  auto group_of = [](const std::string& f) {
    if (f == frame::kGantry || f == frame::kCollimator) return Group::Gantry;
    if (f == frame::kCouch || f == frame::kCouchRotation) return Group::Couch;
    return Group::Room;
  };
  std::vector<char> visiting(n, 0);
  std::function<std::pair<RigidTransform, Group>(std::size_t)> resolve = [&](std::size_t i) {
    if (resolved[i]) return *resolved[i];
    if (visiting[i]) throw GeometryError("component parent chain forms a cycle at '" + geom.components[i].name + "'");
    visiting[i] = 1;
    const Component& c = geom.components[i];
    std::pair<RigidTransform, Group> out;
    if (auto f = frames.find(c.parent); f != frames.end()) {
      out = {f->second * c.mount, group_of(c.parent)};
    } else {
      auto it = index.find(c.parent);
      if (it == index.end()) throw GeometryError("component '" + c.name + "' has unknown parent '" + c.parent + "'");
      const auto parent = resolve(it->second);
      out = {parent.first * c.mount, parent.second};
    }
    resolved[i] = out;
    return out;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto [world, group] = resolve(i);
    scene.components.push_back({geom.components[i].name, geom.components[i].mesh, world, group});
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::string& a = geom.components[i].name;
      const std::string& b = geom.components[j].name;
      if (geom.excluded(a, b)) scene.excluded.insert(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
    }
  }
  return scene;
}

}  // namespace rtsim::machine
