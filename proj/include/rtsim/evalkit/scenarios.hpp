#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtsim/collide/collide.hpp"

namespace rtsim::evalkit {

struct Scenario {
  std::string id;
  machine::JointUpdate joints;  // applied to the machine's initial state
  std::string a;
  std::string b;
  double measured_clearance_mm = 0.0;
};

struct ScenarioRow {
  std::string id;
  std::string a;
  std::string b;
  double measured_mm = 0.0;
  double simulated_mm = 0.0;
  double difference_mm = 0.0;  // simulated - measured
  std::string error;           // non-empty when the scenario could not be evaluated

  bool ok() const { return error.empty(); }
};

struct ScenarioReport {
  std::vector<ScenarioRow> rows;
  std::size_t evaluated = 0;
  double mean_difference_mm = 0.0;
  double std_difference_mm = 0.0;  // sample standard deviation
};

inline nlohmann::json joints_to_json(const machine::JointUpdate& u) {
  nlohmann::json j = nlohmann::json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put(machine::joint::kGantry, u.gantry_deg);
  put(machine::joint::kCollimator, u.collimator_deg);
  put(machine::joint::kCouchRotation, u.couch_rotation_deg);
  if (u.couch_lateral_mm && u.couch_longitudinal_mm && u.couch_vertical_mm) {
    j["couch_translation_mm"] = {*u.couch_lateral_mm, *u.couch_longitudinal_mm, *u.couch_vertical_mm};
  } else {
    put(machine::joint::kCouchLateral, u.couch_lateral_mm);
    put(machine::joint::kCouchLongitudinal, u.couch_longitudinal_mm);
    put(machine::joint::kCouchVertical, u.couch_vertical_mm);
  }
  if (u.gap_x_mm && u.gap_y_mm) {
    j["collimator_gap_mm"] = {*u.gap_x_mm, *u.gap_y_mm};
  } else {
    put(machine::joint::kGapX, u.gap_x_mm);
    put(machine::joint::kGapY, u.gap_y_mm);
  }
  return j;
}

// Scenario file: [{id, joints: {...}, pair: [a, b], measured_clearance_mm}, ...]

inline std::vector<Scenario> scenarios_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("scenario file must be a JSON array");
  std::vector<Scenario> out;
  try {
    for (const auto& e : j) {
      Scenario s;
      s.id = e.at("id").is_string() ? e.at("id").get<std::string>() : e.at("id").dump();
      s.joints = machine::JointUpdate::from_json(e.at("joints"));
      const auto& pair = e.at("pair");
      if (!pair.is_array() || pair.size() != 2) throw FormatError("scenario '" + s.id + "': pair needs two names");
      s.a = pair.at(0).get<std::string>();
      s.b = pair.at(1).get<std::string>();
      s.measured_clearance_mm = e.at("measured_clearance_mm").get<double>();
      if (!(s.measured_clearance_mm >= 0.0)) throw FormatError("scenario '" + s.id + "': negative clearance");
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("scenario file: ") + ex.what());
  }
  return out;
}

inline nlohmann::json scenarios_to_json(const std::vector<Scenario>& scenarios) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Scenario& s : scenarios) {
    arr.push_back({{"id", s.id},
                   {"joints", joints_to_json(s.joints)},
                   {"pair", {s.a, s.b}},
                   {"measured_clearance_mm", s.measured_clearance_mm}});
  }
  return arr;
}

inline std::vector<Scenario> read_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("scenario file: ") + ex.what());
  }
  return scenarios_from_json(j);
}

/// Simulated clearance for the scenario's pair (0 when intersecting).
inline double simulated_clearance(const machine::MachineGeometry& geom, const Scenario& s) {
  const machine::MachineState state = machine::set_joints(geom.initial_state, s.joints);
  const CollisionReport r = check_pair(machine::forward_kinematics(geom, state), s.a, s.b);
  return r.min_clearance_mm;
}

/// Compares simulated against measured clearance per scenario. Scenarios
/// that name unknown components or illegal joints become failed rows and
/// are left out of the statistics.
inline ScenarioReport run_scenarios(const std::vector<Scenario>& scenarios, const machine::MachineGeometry& geom) {
  ScenarioReport report;
  std::vector<double> diffs;
  for (const Scenario& s : scenarios) {
    ScenarioRow row{s.id, s.a, s.b, s.measured_clearance_mm, 0.0, 0.0, {}};
    try {
      row.simulated_mm = simulated_clearance(geom, s);
      if (!std::isfinite(row.simulated_mm)) throw GeometryError("pair has no comparable geometry");
      row.difference_mm = row.simulated_mm - row.measured_mm;
      diffs.push_back(row.difference_mm);
    } catch (const Error& ex) {
      row.error = ex.what();
    }
    report.rows.push_back(std::move(row));
  }
  report.evaluated = diffs.size();
  if (!diffs.empty()) {
    double sum = 0.0;
    for (double d : diffs) sum += d;
    report.mean_difference_mm = sum / static_cast<double>(diffs.size());
    if (diffs.size() > 1) {
      double sq = 0.0;
      for (double d : diffs) sq += (d - report.mean_difference_mm) * (d - report.mean_difference_mm);
      report.std_difference_mm = std::sqrt(sq / static_cast<double>(diffs.size() - 1));
    }
  }
  return report;
}

inline nlohmann::json to_json(const ScenarioReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ScenarioRow& row : r.rows) {
    nlohmann::json j = {{"id", row.id}, {"pair", {row.a, row.b}}, {"measured_mm", row.measured_mm}};
    if (row.ok()) {
      j["simulated_mm"] = row.simulated_mm;
      j["difference_mm"] = row.difference_mm;
    } else {
      j["error"] = row.error;
    }
    rows.push_back(j);
  }
  return {{"rows", rows},
          {"evaluated", r.evaluated},
          {"mean_difference_mm", r.mean_difference_mm},
          {"std_difference_mm", r.std_difference_mm}};
}

inline std::string to_table(const ScenarioReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(8) << "id" << std::setw(40) << "pair" << std::right << std::setw(12) << "measured"
      << std::setw(12) << "simulated" << std::setw(12) << "diff" << '\n';
  for (const ScenarioRow& row : r.rows) {
    out << std::left << std::setw(8) << row.id << std::setw(40) << (row.a + "/" + row.b) << std::right
        << std::setw(12) << row.measured_mm;
    if (row.ok()) {
      out << std::setw(12) << row.simulated_mm << std::setw(12) << row.difference_mm;
    } else {
      out << "  failed: " << row.error;
    }
    out << '\n';
  }
  out << "mean difference " << r.mean_difference_mm << " mm, std " << r.std_difference_mm << " mm over "
      << r.evaluated << " scenarios\n";
  return out.str();
}

/// Self-consistent fixture: near-collision poses of the given machine with
/// "measured" clearances equal to the simulated value plus N(0, noise_sd),
/// and two poses in outright collision measured as 0. `geom` must carry a
/// patient.
inline std::vector<Scenario> synthetic_scenarios(const machine::MachineGeometry& geom, std::uint64_t seed,
                                                 std::size_t count = 20, double noise_sd = 0.5) {
  if (!geom.find(machine::kPatient)) throw GeometryError("synthetic scenarios need a patient");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_sd);
  const std::pair<const char*, const char*> pairs[] = {{"collimator_housing", "patient"},
                                                      {"collimator_housing", "couch_top"},
                                                      {"gantry_head", "couch_top"},
                                                      {"collimator_housing", "head_fixation"}};
  const std::size_t collisions = count >= 10 ? 2 : 0;
  std::vector<Scenario> out;
  for (std::size_t attempt = 0; out.size() < count && attempt < 50 * count; ++attempt) {
    const bool collide = out.size() < collisions;
    const auto& [a, b] = collide ? pairs[0] : pairs[attempt % std::size(pairs)];
    if (!geom.find(a) || !geom.find(b) || geom.excluded(a, b)) continue;
    Scenario s;
    s.id = "S" + std::to_string(out.size() + 1);
    s.a = a;
    s.b = b;
    s.joints.gantry_deg = std::round(-60.0 + 120.0 * unit(rng));
    s.joints.collimator_deg = std::round(-90.0 + 180.0 * unit(rng));
    s.joints.couch_rotation_deg = std::round(-30.0 + 60.0 * unit(rng));
    s.joints.couch_lateral_mm = std::round(-100.0 + 200.0 * unit(rng));
    s.joints.couch_longitudinal_mm = std::round(-200.0 + 400.0 * unit(rng));
    s.joints.couch_vertical_mm = 0.0;
    double c = 0.0;
    try {
      c = simulated_clearance(geom, s);
      if (!std::isfinite(c) || c <= 0.0) continue;
      // Raise the couch so the pair ends up a few centimeters apart (or touching).
      const double goal = collide ? -20.0 : 5.0 + 45.0 * unit(rng);
      s.joints.couch_vertical_mm = std::round(std::clamp(c - goal, geom.limits.couch_vertical.min, geom.limits.couch_vertical.max));
      c = simulated_clearance(geom, s);
      if (collide) {
        if (c != 0.0) continue;
        s.measured_clearance_mm = 0.0;
      } else {
        if (!(c > 3.0)) continue;
        s.measured_clearance_mm = std::max(0.0, c + noise(rng));
      }
    } catch (const Error&) {
      continue;
    }
    out.push_back(std::move(s));
  }
  if (out.size() < count) throw GeometryError("could not place enough scenarios on this machine");
  return out;
}

}  // namespace rtsim::evalkit
