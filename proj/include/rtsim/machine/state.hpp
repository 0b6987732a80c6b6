#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include <json.hpp>

#include "rtsim/geometry/types.hpp"

namespace rtsim::machine {

enum class MachineKind { XRT, PT };

inline std::string to_string(MachineKind k) { return k == MachineKind::XRT ? "XRT" : "PT"; }

inline MachineKind kind_from_string(const std::string& s) {
  if (s == "XRT" || s == "xrt") return MachineKind::XRT;
  if (s == "PT" || s == "pt") return MachineKind::PT;
  throw FormatError("unknown machine kind '" + s + "'");
}

struct Interval {
  double min = 0.0;
  double max = 0.0;
  bool contains(double v) const { return v >= min && v <= max; }
};

/// Joint names as they appear in machine files, joint maps and errors.
namespace joint {
inline constexpr const char* kGantry = "gantry_deg";
inline constexpr const char* kCollimator = "collimator_deg";
inline constexpr const char* kCouchRotation = "couch_rotation_deg";
inline constexpr const char* kCouchLateral = "couch_lateral_mm";
inline constexpr const char* kCouchLongitudinal = "couch_longitudinal_mm";
inline constexpr const char* kCouchVertical = "couch_vertical_mm";
inline constexpr const char* kGapX = "collimator_gap_x_mm";
inline constexpr const char* kGapY = "collimator_gap_y_mm";
inline constexpr std::array<const char*, 8> kAll = {kGantry,       kCollimator,        kCouchRotation, kCouchLateral,
                                                    kCouchLongitudinal, kCouchVertical, kGapX,          kGapY};
}  // namespace joint

/// Legal intervals per joint. The defaults are representative values, not
/// those of any particular treatment unit.
struct JointLimits {
  Interval gantry{-185.0, 185.0};
  Interval collimator{-180.0, 180.0};
  Interval couch_rotation{-95.0, 95.0};
  Interval couch_lateral{-500.0, 500.0};
  Interval couch_longitudinal{-1000.0, 1000.0};
  Interval couch_vertical{-200.0, 500.0};
  Interval gap_x{5.0, 400.0};
  Interval gap_y{5.0, 400.0};

  Interval& operator[](const std::string& name) {
    return const_cast<Interval&>(static_cast<const JointLimits&>(*this)[name]);
  }
  const Interval& operator[](const std::string& name) const {
    if (name == joint::kGantry) return gantry;
    if (name == joint::kCollimator) return collimator;
    if (name == joint::kCouchRotation) return couch_rotation;
    if (name == joint::kCouchLateral) return couch_lateral;
    if (name == joint::kCouchLongitudinal) return couch_longitudinal;
    if (name == joint::kCouchVertical) return couch_vertical;
    if (name == joint::kGapX) return gap_x;
    if (name == joint::kGapY) return gap_y;
    throw FormatError("unknown joint '" + name + "'");
  }

  void validate() const {
    for (const char* name : joint::kAll) {
      const Interval& i = (*this)[name];
      if (!std::isfinite(i.min) || !std::isfinite(i.max) || i.min > i.max) {
        throw FormatError(std::string("joint '") + name + "' has an invalid interval");
      }
    }
    if (gap_x.min <= 0.0 || gap_y.min <= 0.0) throw FormatError("collimator gap limits must be positive");
  }
};

/// Partial joint map; unset joints keep their current value.
struct JointUpdate {
  std::optional<double> gantry_deg;
  std::optional<double> collimator_deg;
  std::optional<double> couch_rotation_deg;
  std::optional<double> couch_lateral_mm;
  std::optional<double> couch_longitudinal_mm;
  std::optional<double> couch_vertical_mm;
  std::optional<double> gap_x_mm;
  std::optional<double> gap_y_mm;

  /// Accepts the individual joint names plus the grouped forms
  /// couch_translation_mm: [x, y, z] and collimator_gap_mm: [x, y].
  static JointUpdate from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("joint map must be a JSON object");
    JointUpdate u;
    auto number = [](const nlohmann::json& v, const std::string& key) {
      if (!v.is_number()) throw FormatError("joint '" + key + "' must be a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw FormatError("joint '" + key + "' must be finite");
      return d;
    };
    for (const auto& [key, v] : j.items()) {
      if (key == joint::kGantry) u.gantry_deg = number(v, key);
      else if (key == joint::kCollimator) u.collimator_deg = number(v, key);
      else if (key == joint::kCouchRotation) u.couch_rotation_deg = number(v, key);
      else if (key == joint::kCouchLateral) u.couch_lateral_mm = number(v, key);
      else if (key == joint::kCouchLongitudinal) u.couch_longitudinal_mm = number(v, key);
      else if (key == joint::kCouchVertical) u.couch_vertical_mm = number(v, key);
      else if (key == joint::kGapX) u.gap_x_mm = number(v, key);
      else if (key == joint::kGapY) u.gap_y_mm = number(v, key);
      else if (key == "couch_translation_mm") {
        if (!v.is_array() || v.size() != 3) throw FormatError("couch_translation_mm needs 3 numbers");
        u.couch_lateral_mm = number(v[0], key);
        u.couch_longitudinal_mm = number(v[1], key);
        u.couch_vertical_mm = number(v[2], key);
      } else if (key == "collimator_gap_mm") {
        if (!v.is_array() || v.size() != 2) throw FormatError("collimator_gap_mm needs 2 numbers");
        u.gap_x_mm = number(v[0], key);
        u.gap_y_mm = number(v[1], key);
      } else {
        throw FormatError("unknown joint '" + key + "'");
      }
    }
    return u;
  }
};

/// Joint values of one machine pose; every value lies within `limits`.
class MachineState {
 public:
  MachineState() = default;
  explicit MachineState(JointLimits limits, MachineKind kind = MachineKind::XRT)
      : limits_(limits), kind_(kind) {
    limits_.validate();
    // Start from zero where legal, otherwise the nearest bound.
    for (const char* name : joint::kAll) {
      const Interval& i = limits_[name];
      value_ref(name) = std::clamp(std::string(name).find("gap") != std::string::npos ? 100.0 : 0.0, i.min, i.max);
    }
  }

  double gantry_deg() const { return gantry_; }
  double collimator_deg() const { return collimator_; }
  double couch_rotation_deg() const { return couch_rotation_; }
  Vec3 couch_translation_mm() const { return couch_translation_; }
  std::array<double, 2> collimator_gap_mm() const { return gap_; }
  MachineKind kind() const { return kind_; }
  const JointLimits& limits() const { return limits_; }

  double value(const std::string& name) const { return const_cast<MachineState*>(this)->value_ref(name); }

  /// New state with `u` applied; any value outside its interval is rejected
  /// and this state is left as it was.
  MachineState with(const JointUpdate& u) const {
    MachineState next = *this;
    auto apply = [&](const char* name, const std::optional<double>& v) {
      if (!v) return;
      const Interval& i = limits_[name];
      if (!std::isfinite(*v) || !i.contains(*v)) throw LimitError(name, *v, i.min, i.max);
      next.value_ref(name) = *v;
    };
    apply(joint::kGantry, u.gantry_deg);
    apply(joint::kCollimator, u.collimator_deg);
    apply(joint::kCouchRotation, u.couch_rotation_deg);
    apply(joint::kCouchLateral, u.couch_lateral_mm);
    apply(joint::kCouchLongitudinal, u.couch_longitudinal_mm);
    apply(joint::kCouchVertical, u.couch_vertical_mm);
    apply(joint::kGapX, u.gap_x_mm);
    apply(joint::kGapY, u.gap_y_mm);
    return next;
  }

  /// Throws LimitError for the first joint outside `limits`.
  void check_within(const JointLimits& limits) const {
    for (const char* name : joint::kAll) {
      const Interval& i = limits[name];
      const double v = value(name);
      if (!i.contains(v)) throw LimitError(name, v, i.min, i.max);
    }
  }

  bool operator==(const MachineState& o) const {
    for (const char* name : joint::kAll) {
      if (value(name) != o.value(name)) return false;
    }
    return kind_ == o.kind_;
  }

 private:
  double& value_ref(const std::string& name) {
    if (name == joint::kGantry) return gantry_;
    if (name == joint::kCollimator) return collimator_;
    if (name == joint::kCouchRotation) return couch_rotation_;
    if (name == joint::kCouchLateral) return couch_translation_.x();
    if (name == joint::kCouchLongitudinal) return couch_translation_.y();
    if (name == joint::kCouchVertical) return couch_translation_.z();
    if (name == joint::kGapX) return gap_[0];
    if (name == joint::kGapY) return gap_[1];
    throw FormatError("unknown joint '" + name + "'");
  }

  JointLimits limits_;
  MachineKind kind_ = MachineKind::XRT;
  double gantry_ = 0.0;
  double collimator_ = 0.0;
  double couch_rotation_ = 0.0;
  Vec3 couch_translation_ = Vec3::Zero();
  std::array<double, 2> gap_{100.0, 100.0};
};

inline MachineState set_joints(const MachineState& state, const JointUpdate& updates) { return state.with(updates); }

inline nlohmann::json to_json(const MachineState& s) {
  const Vec3 t = s.couch_translation_mm();
  return {{"kind", to_string(s.kind())},
          {joint::kGantry, s.gantry_deg()},
          {joint::kCollimator, s.collimator_deg()},
          {joint::kCouchRotation, s.couch_rotation_deg()},
          {"couch_translation_mm", {t.x(), t.y(), t.z()}},
          {"collimator_gap_mm", {s.collimator_gap_mm()[0], s.collimator_gap_mm()[1]}}};
}

inline nlohmann::json to_json(const JointLimits& l) {
  nlohmann::json j = nlohmann::json::object();
  for (const char* name : joint::kAll) j[name] = {{"min", l[name].min}, {"max", l[name].max}};
  return j;
}

}  // namespace rtsim::machine
