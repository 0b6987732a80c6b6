#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "rtsim/collide/collide.hpp"
#include "rtsim/scan/phantoms.hpp"

namespace rtsim::service {

/// Immutable view of the scene at one revision. The report always belongs
/// to (geometry, state) of the same snapshot.
struct SceneSnapshot {
  std::uint64_t revision = 0;
  std::string machine_ref;
  std::shared_ptr<const machine::MachineGeometry> geometry;  // includes the patient, if any
  machine::MachineState state;
  machine::PosedScene posed;
  CollisionReport report;

  bool has_patient() const { return geometry->find(machine::kPatient) != nullptr; }
};

/// The scene's single mutable cell. Mutations are serialized and each one
/// runs FK and the collision check before it is published; readers take
/// snapshots and never block on a running check.
class SceneDocument {
 public:
  explicit SceneDocument(machine::MachineGeometry geometry, std::string machine_ref = "bundled:xrt") {
    geometry.validate();
    auto geom = std::make_shared<const machine::MachineGeometry>(std::move(geometry));
    current_ = evaluate(0, std::move(machine_ref), geom, geom->initial_state);
  }

  std::shared_ptr<const SceneSnapshot> snapshot() const {
    std::lock_guard lock(read_mu_);
    return current_;
  }

  std::uint64_t revision() const { return snapshot()->revision; }

  /// Applies a partial joint map. Throws LimitError (scene unchanged) when a
  /// value is outside its interval.
  std::shared_ptr<const SceneSnapshot> set_joints(const machine::JointUpdate& update) {
    std::lock_guard writer(write_mu_);
    const auto cur = snapshot();
    const machine::MachineState next = machine::set_joints(cur->state, update);
    return publish(evaluate(cur->revision + 1, cur->machine_ref, cur->geometry, next));
  }

  /// Places (or replaces) the patient on the couch top.
  std::shared_ptr<const SceneSnapshot> set_patient(TriMesh patient, const RigidTransform& couch_offset) {
    if (patient.empty()) throw GeometryError("patient mesh has no triangles");
    std::lock_guard writer(write_mu_);
    const auto cur = snapshot();
    auto geom = std::make_shared<const machine::MachineGeometry>(
        machine::attach_patient(*cur->geometry, std::move(patient), couch_offset));
    return publish(evaluate(cur->revision + 1, cur->machine_ref, std::move(geom), cur->state));
  }

  std::shared_ptr<const SceneSnapshot> remove_patient() {
    std::lock_guard writer(write_mu_);
    const auto cur = snapshot();
    auto geom = std::make_shared<const machine::MachineGeometry>(machine::detach_patient(*cur->geometry));
    return publish(evaluate(cur->revision + 1, cur->machine_ref, std::move(geom), cur->state));
  }

  /// Blocks until the revision exceeds `after`, the timeout passes or
  /// close() is called; returns the latest snapshot either way.
  std::shared_ptr<const SceneSnapshot> wait_for(std::uint64_t after, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(read_mu_);
    changed_.wait_for(lock, timeout, [&] { return closed_ || current_->revision > after; });
    return current_;
  }

  /// Wakes every waiter; used on shutdown.
  void close() {
    {
      std::lock_guard lock(read_mu_);
      closed_ = true;
    }
    changed_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(read_mu_);
    return closed_;
  }

 private:
  static std::shared_ptr<const SceneSnapshot> evaluate(std::uint64_t revision, std::string ref,
                                                       std::shared_ptr<const machine::MachineGeometry> geom,
                                                       const machine::MachineState& state) {
    auto s = std::make_shared<SceneSnapshot>();
    s->revision = revision;
    s->machine_ref = std::move(ref);
    s->posed = machine::forward_kinematics(*geom, state);
    s->report = check_collision(s->posed);
    s->geometry = std::move(geom);
    s->state = state;
    return s;
  }

  std::shared_ptr<const SceneSnapshot> publish(std::shared_ptr<const SceneSnapshot> next) {
    {
      std::lock_guard lock(read_mu_);
      current_ = next;
    }
    changed_.notify_all();
    return next;
  }

  std::mutex write_mu_;
  mutable std::mutex read_mu_;
  mutable std::condition_variable changed_;
  std::shared_ptr<const SceneSnapshot> current_;
  bool closed_ = false;
};

inline nlohmann::json transform_to_json(const RigidTransform& t) {
  nlohmann::json rot = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) rot.push_back(t.rotation()(i, k));
  }
  const Vec3& p = t.translation();
  return {{"rotation", rot}, {"translation_mm", {p.x(), p.y(), p.z()}}};
}

/// Scene summary: machine, state, component poses with mesh references,
/// patient placement and the latest collision report.
inline nlohmann::json to_json(const SceneSnapshot& s) {
  nlohmann::json comps = nlohmann::json::array();
  for (const machine::PosedComponent& c : s.posed.components) {
    const machine::Component* def = s.geometry->find(c.name);
    comps.push_back({{"name", c.name},
                     {"parent", def ? def->parent : ""},
                     {"group", machine::to_string(c.group)},
                     {"triangles", c.mesh->triangle_count()},
                     {"mesh", "/api/scene/mesh/" + c.name},
                     {"world", transform_to_json(c.world)}});
  }
  nlohmann::json patient = {{"present", false}};
  if (const machine::Component* p = s.geometry->find(machine::kPatient)) {
    patient = {{"present", true}, {"triangles", p->mesh->triangle_count()}, {"couch_offset", transform_to_json(p->mount)}};
  }
  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& [a, b] : s.posed.excluded) excluded.push_back({a, b});
  return {{"revision", s.revision},
          {"machine", {{"ref", s.machine_ref},
                       {"kind", machine::to_string(s.geometry->kind)},
                       {"sad_mm", s.geometry->sad_mm},
                       {"limits", machine::to_json(s.geometry->limits)}}},
          {"state", machine::to_json(s.state)},
          {"components", comps},
          {"excluded_pairs", excluded},
          {"patient", patient},
          {"collision", to_json(s.report)}};
}

/// Service fixture: the bundled machine with the mannequin lying on the
/// couch top (identity offset). Raising the couch 400 mm drives the patient
/// into the collimator housing.
inline machine::MachineGeometry fixture_scene(machine::MachineKind kind = machine::MachineKind::XRT) {
  return machine::attach_patient(machine::bundled_machine(kind), scan::mannequin_mesh(), RigidTransform());
}

inline constexpr double kFixtureCollisionCouchVerticalMm = 400.0;

}  // namespace rtsim::service
