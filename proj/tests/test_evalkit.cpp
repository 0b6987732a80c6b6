#include <doctest.h>

#include "support.hpp"

using namespace rtsim;
using namespace rtsim::evalkit;
using testing::Gen;

namespace {

machine::MachineGeometry fixture_machine() {
  return machine::attach_patient(machine::bundled_machine(), scan::mannequin_mesh(), RigidTransform());
}

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("metrics of small residual sets") {
  const std::vector<double> a = {1, -1, 1, -1};
  const MetricsReport m = metrics(a);
  CHECK(m.mae_mm == 1.0);
  CHECK(m.rmse_mm == 1.0);
  CHECK(m.max_mm == 1.0);
  CHECK(m.n == 4);

  const std::vector<double> b = {0, 0, 3};
  const MetricsReport k = metrics(b);
  CHECK(k.mae_mm == doctest::Approx(1.0));
  CHECK(k.rmse_mm == doctest::Approx(std::sqrt(3.0)));
  CHECK(k.max_mm == 3.0);

  CHECK_THROWS_AS(metrics(std::vector<double>{}), Error);
  CHECK_THROWS_AS(metrics(std::vector<double>{1.0, std::nan("")}), Error);
}

TEST_CASE("metrics ordering holds for any input (property)") {
  Gen g(12);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> e(static_cast<std::size_t>(g.integer(1, 200)));
    const int kind = trial % 4;
    const double c = g.normal(10.0);
    for (double& x : e) {
      if (kind == 0) x = g.normal(3.0);
      else if (kind == 1) x = c;  // constant: the bound is tight
      else if (kind == 2) x = c + 1e-13 * g.normal(1.0);
      else x = std::pow(10.0, g.uniform(-12, 6)) * (g.integer(0, 1) ? 1 : -1);
    }
    const MetricsReport m = metrics(e);
    CHECK(m.mae_mm <= m.rmse_mm);
    CHECK(m.rmse_mm <= m.max_mm);
  }
}

TEST_CASE("display rounding") {
  CHECK(round_significant(1.34) == "1");
  CHECK(round_significant(0.046) == "0.05");
  CHECK(round_significant(9.2, 2) == "9.2");
  CHECK(round_significant(0.0) == "0");
}

TEST_CASE("error budget composition") {
  const MetricsReport scanner{2.0, 2.5, 6.0, 10};
  const MetricsReport recon{1.2, 1.4, 4.2, 10};
  const ErrorBudget b = compose_budget(scanner, recon, 1.0);
  CHECK(b.composed_mae_mm == doctest::Approx(4.2));
  CHECK(b.composed_max_mm == doctest::Approx(11.2));

  const ErrorBudget zero = compose_budget({}, {}, 0.0);
  CHECK(zero.composed_mae_mm == 0.0);
  CHECK(zero.composed_max_mm == 0.0);
  CHECK_THROWS_AS(compose_budget(scanner, recon, -1.0), Error);

  const nlohmann::json j = to_json(b);
  CHECK(j.at("composed_mae_mm") == b.composed_mae_mm);
}

TEST_CASE("error budget is additive and monotone (property)") {
  Gen g(8);
  for (int trial = 0; trial < 500; ++trial) {
    MetricsReport s{g.uniform(0, 5), 0, 0, 1}, r{g.uniform(0, 5), 0, 0, 1};
    s.max_mm = s.mae_mm + g.uniform(0, 5);
    r.max_mm = r.mae_mm + g.uniform(0, 5);
    const double d = g.uniform(0, 3);
    const ErrorBudget b = compose_budget(s, r, d);
    CHECK(b.composed_mae_mm == s.mae_mm + r.mae_mm + d);
    CHECK(b.composed_max_mm == s.max_mm + r.max_mm + d);

    const double bump = g.uniform(1e-3, 2);
    MetricsReport s2 = s, r2 = r;
    s2.mae_mm += bump;
    s2.max_mm += bump;
    r2.mae_mm += bump;
    r2.max_mm += bump;
    for (const ErrorBudget& up : {compose_budget(s2, r, d), compose_budget(s, r2, d), compose_budget(s, r, d + bump)}) {
      CHECK(up.composed_mae_mm > b.composed_mae_mm);
      CHECK(up.composed_max_mm > b.composed_max_mm);
    }
  }
}

TEST_CASE("flat surface protocol") {
  const FlatSurfaceSpec spec{1.0, 0.6, 1.0, 3};
  const MetricsReport m = flat_surface_protocol(spec, scan::NoiseModel{}, 1);
  CHECK(m.rmse_mm > 0.0);
  CHECK(m.rmse_mm < 4.0);
  CHECK(m.mae_mm >= 1.0);
  CHECK(m.mae_mm <= 3.0);

  const MetricsReport clean = flat_surface_protocol(spec, scan::NoiseModel::none(), 1);
  CHECK(clean.rmse_mm <= 0.5);
  CHECK(clean.mae_mm <= 0.5);

  const scan::NoiseModel base{};
  const scan::NoiseModel doubled{2 * base.sigma_base, 2 * base.sigma_per_meter, base.edge_falloff};
  const double r1 = flat_surface_protocol(spec, base, 5).rmse_mm;
  const double r2 = flat_surface_protocol(spec, doubled, 5).rmse_mm;
  CHECK(std::abs(r2 / r1 - 2.0) <= 0.2);

  CHECK_THROWS_AS(flat_surface_protocol({0.0, 0.6, 1.0, 3}, base, 1), Error);
  CHECK_THROWS_AS(flat_surface_protocol({1.0, 0.6, 1.0, 0}, base, 1), Error);
}

TEST_CASE("flat surface protocol is reproducible and grows with distance") {
  const FlatSurfaceSpec near{0.6, 0.6, 1.0, 2};
  const FlatSurfaceResult a = flat_surface_runs(near, scan::NoiseModel{}, 42);
  const FlatSurfaceResult b = flat_surface_runs(near, scan::NoiseModel{}, 42);
  REQUIRE(a.runs.size() == 2);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].rmse_mm == b.runs[i].rmse_mm);
    CHECK(a.runs[i].max_mm == b.runs[i].max_mm);
  }
  const FlatSurfaceSpec far{0.6, 0.6, 2.0, 2};
  CHECK(flat_surface_protocol(far, scan::NoiseModel{}, 42).rmse_mm > a.mean.rmse_mm);
  CHECK(FlatSurfaceSpec::presets().size() == 6);
}

TEST_CASE("scenario files round trip") {
  Scenario s;
  s.id = "S1";
  s.joints.gantry_deg = 30.0;
  s.joints.couch_vertical_mm = 120.0;
  s.a = "collimator_housing";
  s.b = "patient";
  s.measured_clearance_mm = 12.5;
  const auto dir = testing::scratch_dir("scenarios");
  {
    std::ofstream out(dir / "s.json");
    out << scenarios_to_json({s}).dump(2);
  }
  const auto back = read_scenarios((dir / "s.json").string());
  REQUIRE(back.size() == 1);
  CHECK(back[0].id == "S1");
  CHECK(*back[0].joints.gantry_deg == 30.0);
  CHECK(!back[0].joints.collimator_deg);
  CHECK(back[0].b == "patient");
  CHECK(back[0].measured_clearance_mm == 12.5);

  CHECK_THROWS_AS(scenarios_from_json(nlohmann::json::object()), FormatError);
  CHECK_THROWS_AS(scenarios_from_json(nlohmann::json::parse(R"([{"id":"x","joints":{},"pair":["a"],"measured_clearance_mm":1}])")),
                  FormatError);
  CHECK_THROWS_AS(scenarios_from_json(nlohmann::json::parse(R"([{"id":"x","joints":{}}])")), FormatError);
  CHECK_THROWS_AS(read_scenarios((dir / "none.json").string()), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic scenarios reproduce the injected noise") {
  const machine::MachineGeometry geom = fixture_machine();
  const auto scenarios = synthetic_scenarios(geom, 7);
  REQUIRE(scenarios.size() == 20);
  const ScenarioReport r = run_scenarios(scenarios, geom);
  CHECK(r.evaluated == 20);
  CHECK(std::abs(r.mean_difference_mm) <= 0.5);
  CHECK(r.std_difference_mm >= 0.3);
  CHECK(r.std_difference_mm <= 0.7);

  // collision scenarios come back as zero clearance
  int collisions = 0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (scenarios[i].measured_clearance_mm == 0.0) {
      ++collisions;
      CHECK(r.rows[i].simulated_mm == 0.0);
    }
  }
  CHECK(collisions == 2);

  // aggregate is recomputable from the rows
  double sum = 0.0;
  for (const ScenarioRow& row : r.rows) sum += row.difference_mm;
  CHECK(r.mean_difference_mm == doctest::Approx(sum / 20.0));
  double sq = 0.0;
  for (const ScenarioRow& row : r.rows) sq += std::pow(row.difference_mm - r.mean_difference_mm, 2);
  CHECK(r.std_difference_mm == doctest::Approx(std::sqrt(sq / 19.0)));
  CHECK(to_table(r).find("mean difference") != std::string::npos);
}

TEST_CASE("scenario results do not depend on order") {
  const machine::MachineGeometry geom = fixture_machine();
  auto scenarios = synthetic_scenarios(geom, 3, 12);
  const ScenarioReport a = run_scenarios(scenarios, geom);
  std::shuffle(scenarios.begin(), scenarios.end(), std::mt19937_64(9));
  const ScenarioReport b = run_scenarios(scenarios, geom);
  std::map<std::string, double> by_id;
  for (const ScenarioRow& row : a.rows) by_id[row.id] = row.simulated_mm;
  for (const ScenarioRow& row : b.rows) CHECK(row.simulated_mm == by_id.at(row.id));
  CHECK(b.mean_difference_mm == doctest::Approx(a.mean_difference_mm));
}

TEST_CASE("failed scenarios are reported and left out") {
  const machine::MachineGeometry geom = fixture_machine();
  std::vector<Scenario> s = synthetic_scenarios(geom, 11, 3);
  Scenario unknown = s[0];
  unknown.id = "bad-name";
  unknown.b = "teapot";
  Scenario illegal = s[0];
  illegal.id = "bad-joint";
  illegal.joints.gantry_deg = 400.0;
  s.push_back(unknown);
  s.push_back(illegal);
  const ScenarioReport r = run_scenarios(s, geom);
  CHECK(r.evaluated == 3);
  CHECK(!r.rows[3].ok());
  CHECK(r.rows[3].error.find("teapot") != std::string::npos);
  CHECK(!r.rows[4].ok());
  const nlohmann::json j = to_json(r);
  CHECK(j.at("rows")[4].contains("error"));
  CHECK(!j.at("rows")[0].contains("error"));

  CHECK_THROWS_AS(synthetic_scenarios(machine::bundled_machine(), 1), GeometryError);
}

}  // TEST_SUITE
