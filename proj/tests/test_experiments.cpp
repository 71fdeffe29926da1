#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jmc/config.hpp"
#include "jmc/experiments.hpp"

using jmc::ConfigError;
using jmc::ExperimentConfig;
using jmc::ExperimentKind;
using nlohmann::json;

namespace {

json demo_surface_json() {
  return json::parse(R"json({
    "kind": "surface",
    "integrand": "(x1*x2*ln(3 + x1*w1*w2) - (x1^2 - 1)*(x2^2 - 1)*w2^2)/(2 + w1*x1)",
    "x_box": [[-1.0, 1.0], [-1.0, 1.0]],
    "law": [
      {"kind": "uniform", "lo": 0.0, "hi": 1.0},
      {"kind": "uniform", "lo": 0.0, "hi": 2.0}
    ],
    "partitions": [[1, 1], [2, 2]],
    "grid": 5,
    "mc_samples": 2000,
    "seed": 12345
  })json");
}

json demo_convergence_json() {
  return json::parse(R"json({
    "kind": "convergence",
    "integrand": "((w1 - 10)^2*ln(x1) + (x1 - 5)^2)/w1",
    "x_box": [[24.0, 26.0]],
    "law": [{"kind": "uniform", "lo": 10.0, "hi": 13.0}],
    "x": [25.0],
    "k": 100.0,
    "epsilons": [0.15625, 0.078125, 0.0390625, 0.01953125, 0.009765625]
  })json");
}

json demo_bounds_json() {
  return json::parse(R"json({
    "kind": "bounds",
    "integrand": "(x1*x2*ln(3 + x1*w1*w2) - (x1^2 - 1)*(x2^2 - 1)*w2^2)/(2 + w1*x1)",
    "x_box": [[-1.0, 1.0], [-1.0, 1.0]],
    "law": [
      {"kind": "uniform", "lo": 0.0, "hi": 1.0},
      {"kind": "uniform", "lo": 0.0, "hi": 2.0}
    ],
    "x": [0.5, -0.5],
    "counts": [4, 4],
    "mc_samples": 200000,
    "seed": 99
  })json");
}

std::string surface_csv_text(const jmc::SurfaceTable& t) {
  std::ostringstream os;
  jmc::write_surface_csv(os, t);
  return os.str();
}

}  // namespace

TEST_CASE("config loads laws, boxes, and kind-specific fields", "[experiments]") {
  const ExperimentConfig cfg = jmc::config_from_json(demo_surface_json());
  CHECK(cfg.kind == ExperimentKind::surface);
  CHECK(cfg.seed == 12345u);
  REQUIRE(cfg.x_box.has_value());
  CHECK(cfg.x_box->size() == 2);
  CHECK(cfg.rv.dims() == 2);
  CHECK(cfg.rv.gamma_box[1].hi == 2.0);
  CHECK(cfg.partitions.size() == 2);
  CHECK(cfg.grid == 5);
  CHECK(cfg.integrand.n_x() == 2);
  CHECK(cfg.integrand.n_w() == 2);
}

TEST_CASE("config builds transform chains", "[experiments]") {
  json j = json::parse(R"json({
    "kind": "bounds",
    "integrand": "w1 + w2",
    "rv": {
      "components": [
        {"kind": "normal", "mu": 0.0, "sigma": 1.0, "lo": -5.0, "hi": 5.0},
        {"kind": "normal", "mu": 0.0, "sigma": 1.0, "lo": -5.0, "hi": 5.0}
      ],
      "transforms": [
        {"kind": "affine", "d": [0.097, 0.039], "a": [[0.0072, 0.0004], [0.0008, 0.0036]]}
      ]
    },
    "x": [],
    "counts": [2, 2]
  })json");
  const ExperimentConfig cfg = jmc::config_from_json(j);
  CHECK(cfg.rv.dims() == 2);
  // the map evaluated at the base mean reproduces the offset
  const std::vector<double> zero{0.0, 0.0};
  CHECK(jmc::eval_real(cfg.rv.psi[0], {}, zero) == 0.097);
  CHECK(jmc::eval_real(cfg.rv.psi[1], {}, zero) == 0.039);
  // the composed integrand folds the map into the base space
  CHECK(cfg.relaxed.n_w() == 2);
  const std::vector<double> g{1.0, -2.0};
  const double w1 = 0.097 + 0.0072 * 1.0 + 0.0004 * -2.0;
  const double w2 = 0.039 + 0.0008 * 1.0 + 0.0036 * -2.0;
  CHECK(jmc::eval_real(cfg.relaxed, {}, g) == Catch::Approx(w1 + w2).margin(1e-15));
}

TEST_CASE("config accepts inverse-transform components", "[experiments]") {
  json j = json::parse(R"json({
    "kind": "bounds",
    "integrand": "w1*w2",
    "rv": {
      "components": [
        {"kind": "weibull", "alpha": 2.0, "beta": 3.0, "support": [0.5, 6.0]},
        {"kind": "uniform", "lo": 0.0, "hi": 1.0}
      ]
    },
    "x": [],
    "counts": [3, 3]
  })json");
  const ExperimentConfig cfg = jmc::config_from_json(j);
  CHECK(cfg.rv.dims() == 2);
  // component one maps a unit-uniform base through the inverse CDF
  CHECK(cfg.rv.gamma_box[0].lo == 0.0);
  CHECK(cfg.rv.gamma_box[0].hi == 1.0);
  const std::vector<double> lo{0.0, 0.3};
  CHECK(jmc::eval_real(cfg.rv.psi[0], {}, lo) == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("config validation rejects malformed inputs", "[experiments]") {
  const auto reject = [](json j, const char* needle) {
    try {
      (void)jmc::config_from_json(j);
      FAIL_CHECK("expected rejection: " << needle);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  json j = demo_surface_json();
  j.erase("integrand");
  reject(j, "integrand");

  j = demo_surface_json();
  j["integrand"] = "ln(x1";
  reject(j, "integrand");

  j = demo_surface_json();
  j["kind"] = "mystery";
  reject(j, "kind");

  j = demo_surface_json();
  j.erase("law");
  reject(j, "law");

  j = demo_surface_json();
  j["rv"] = {{"components", json::array({{{"kind", "uniform"}, {"lo", 0.0}, {"hi", 1.0}}})}};
  reject(j, "law");  // both law and rv present

  j = demo_surface_json();
  j["law"][0]["kind"] = "binomial";
  reject(j, "law[0]");

  j = demo_surface_json();
  j["x_box"] = json::array({json::array({-1.0, 1.0})});
  reject(j, "x_box");  // surfaces need two dimensions

  j = demo_surface_json();
  j["partitions"] = json::array({json::array({4})});
  reject(j, "partitions[0]");

  j = demo_convergence_json();
  j["k"] = -1.0;
  reject(j, "k");

  j = demo_convergence_json();
  j["epsilons"] = json::array({0.5, 0.0});
  reject(j, "epsilons");

  j = demo_convergence_json();
  j["fit_window"] = json::array({3, 9});
  reject(j, "fit_window");

  j = demo_convergence_json();
  j["epsilons"] = json::array({4.0});  // X_eps would leave [24, 26]
  reject(j, "x_box");

  j = demo_bounds_json();
  j["x"] = json::array({0.5, 9.0});
  reject(j, "x");

  j = demo_bounds_json();
  j["counts"] = json::array({4, 4, 4});
  reject(j, "counts");

  j = demo_bounds_json();
  j["integrand"] = "w1*w2*w3";
  reject(j, "integrand");  // more random components than the model has
}

TEST_CASE("config files load with parse diagnostics", "[experiments]") {
  const std::string good = "/tmp/jmc_test_good.json";
  {
    std::ofstream os(good);
    os << demo_surface_json().dump(1);
  }
  const ExperimentConfig cfg = jmc::load_config(good);
  CHECK(cfg.kind == ExperimentKind::surface);
  std::remove(good.c_str());

  const std::string bad = "/tmp/jmc_test_bad.json";
  {
    std::ofstream os(bad);
    os << "{ \"kind\": ";
  }
  CHECK_THROWS_AS(jmc::load_config(bad), ConfigError);
  std::remove(bad.c_str());

  CHECK_THROWS_AS(jmc::load_config("/tmp/jmc_test_missing_file.json"), ConfigError);
}

TEST_CASE("surface experiment evaluates the grid in declared order", "[experiments]") {
  const ExperimentConfig cfg = jmc::config_from_json(demo_surface_json());
  const jmc::SurfaceResult res = jmc::run_surface(cfg, cfg.seed, 1);
  REQUIRE(res.tables.size() == 2);
  CHECK(res.tables[0].cells == 1);
  CHECK(res.tables[1].cells == 4);
  for (const auto& t : res.tables) {
    REQUIRE(t.rows.size() == 25);
    for (const auto& r : t.rows) {
      CHECK(r.cv <= r.cc);
      CHECK(r.cv <= r.mc + r.mc_half + 1e-9);
      CHECK(r.mc - r.mc_half <= r.cc + 1e-9);
    }
  }
  // x1-major ordering with 5 points per axis
  CHECK(res.tables[0].rows[0].x1 == -1.0);
  CHECK(res.tables[0].rows[1].x1 == -1.0);
  CHECK(res.tables[0].rows[1].x2 == -0.5);
  CHECK(res.tables[0].rows[5].x1 == -0.5);
  // refinement tightens the worst gap
  CHECK(res.tables[1].max_gap < res.tables[0].max_gap);
}

TEST_CASE("surface results do not depend on the thread count", "[experiments]") {
  const ExperimentConfig cfg = jmc::config_from_json(demo_surface_json());
  const jmc::SurfaceResult a = jmc::run_surface(cfg, cfg.seed, 1);
  const jmc::SurfaceResult b = jmc::run_surface(cfg, cfg.seed, 4);
  REQUIRE(a.tables.size() == b.tables.size());
  for (std::size_t t = 0; t < a.tables.size(); ++t)
    CHECK(surface_csv_text(a.tables[t]) == surface_csv_text(b.tables[t]));
}

TEST_CASE("surface seeds steer only the sampled column", "[experiments]") {
  const ExperimentConfig cfg = jmc::config_from_json(demo_surface_json());
  const jmc::SurfaceResult a = jmc::run_surface(cfg, 1u, 1);
  const jmc::SurfaceResult b = jmc::run_surface(cfg, 2u, 1);
  CHECK(a.tables[0].rows[7].mc != b.tables[0].rows[7].mc);
  CHECK(a.tables[0].rows[7].cv == b.tables[0].rows[7].cv);
  CHECK(a.tables[0].rows[7].cc == b.tables[0].rows[7].cc);
}

TEST_CASE("single-point grid produces a single-row table", "[experiments]") {
  json j = demo_surface_json();
  j["grid"] = 1;
  const ExperimentConfig cfg = jmc::config_from_json(j);
  const jmc::SurfaceResult res = jmc::run_surface(cfg, cfg.seed, 1);
  REQUIRE(res.tables[0].rows.size() == 1);
  CHECK(res.tables[0].rows[0].x1 == 0.0);  // box midpoint
  CHECK(res.tables[0].rows[0].x2 == 0.0);
  const std::string csv = surface_csv_text(res.tables[0]);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + one row
}

TEST_CASE("surface file naming embeds the cell count", "[experiments]") {
  CHECK(jmc::surface_csv_path("out.csv", 16) == "out_16cells.csv");
  CHECK(jmc::surface_csv_path("runs/demo", 1) == "runs/demo_1cells.csv");
}

TEST_CASE("convergence experiment reports rungs and a quadratic slope", "[experiments]") {
  const ExperimentConfig cfg = jmc::config_from_json(demo_convergence_json());
  const jmc::ConvergenceResult res = jmc::run_convergence(cfg, 2);
  REQUIRE(res.rows.size() == 5);
  std::size_t expect_cells = 1;
  for (const auto& r : res.rows) {
    CHECK(r.cells == expect_cells);
    expect_cells *= 2;
    CHECK(r.gap > 0.0);
    CHECK(r.width == Catch::Approx(2.0 * r.eps));
  }
  REQUIRE(res.fitted);
  CHECK(res.fit_rungs.size() == 5);
  CHECK(res.slope >= 1.8);
  CHECK(res.slope <= 2.2);

  std::ostringstream os;
  jmc::write_convergence_csv(os, res);
  const std::string csv = os.str();
  CHECK(csv.rfind("epsilon,width,cells,cv,cc,gap\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("convergence fit honors the configured window", "[experiments]") {
  json j = demo_convergence_json();
  j["fit_window"] = json::array({2, 4});
  const ExperimentConfig cfg = jmc::config_from_json(j);
  const jmc::ConvergenceResult res = jmc::run_convergence(cfg, 1);
  REQUIRE(res.fitted);
  CHECK(res.fit_first == 2);
  CHECK(res.fit_last == 4);
  CHECK(res.fit_rungs == std::vector<int>{2, 3, 4});
  CHECK(res.slope >= 1.8);
  CHECK(res.slope <= 2.2);
}

TEST_CASE("affine integrands skip the convergence fit", "[experiments]") {
  json j = demo_convergence_json();
  j["integrand"] = "2*x1 + 3*w1 - 1";
  const ExperimentConfig cfg = jmc::config_from_json(j);
  const jmc::ConvergenceResult res = jmc::run_convergence(cfg, 1);
  for (const auto& r : res.rows) CHECK(r.gap <= 1e-12);
  CHECK_FALSE(res.fitted);
  REQUIRE_FALSE(res.notes.empty());
  CHECK(res.notes.back().find("fit skipped") != std::string::npos);
}

TEST_CASE("bounds certificate straddles the sample mean", "[experiments]") {
  const ExperimentConfig cfg = jmc::config_from_json(demo_bounds_json());
  const jmc::BoundsResult res = jmc::run_bounds(cfg, cfg.seed);
  CHECK(res.partition_size == 16);
  CHECK(res.lower <= res.upper);
  CHECK(res.passed);

  std::ostringstream os;
  jmc::write_bounds_json(os, res);
  const json round = json::parse(os.str());
  CHECK(round.at("passed").get<bool>());
  CHECK(round.at("partition_size").get<std::size_t>() == 16);
  CHECK(round.at("lower").get<double>() == res.lower);
  CHECK(round.at("mc_halfwidth").get<double>() == res.mc_halfwidth);
}

TEST_CASE("constant integrands give equal bounds", "[experiments]") {
  json j = demo_bounds_json();
  j["integrand"] = "4.25";
  j["x"] = json::array();
  j.erase("x_box");
  j["mc_samples"] = 100;
  const ExperimentConfig cfg = jmc::config_from_json(j);
  const jmc::BoundsResult res = jmc::run_bounds(cfg, 1u);
  CHECK(res.lower == Catch::Approx(4.25).margin(1e-13));
  CHECK(res.upper == Catch::Approx(4.25).margin(1e-13));
  CHECK(res.passed);
}

TEST_CASE("commands reject configs of the wrong kind", "[experiments]") {
  const ExperimentConfig surface = jmc::config_from_json(demo_surface_json());
  const ExperimentConfig convergence = jmc::config_from_json(demo_convergence_json());
  CHECK_THROWS_AS(jmc::run_convergence(surface, 1), ConfigError);
  CHECK_THROWS_AS(jmc::run_bounds(surface, 1u), ConfigError);
  CHECK_THROWS_AS(jmc::run_surface(convergence, 1u, 1), ConfigError);
}

TEST_CASE("overlay configs parse but no command consumes them", "[experiments]") {
  json j = demo_surface_json();
  j["kind"] = "overlay";
  j.erase("partitions");
  const ExperimentConfig cfg = jmc::config_from_json(j);
  CHECK(cfg.kind == ExperimentKind::overlay);
  CHECK_THROWS_AS(jmc::run_surface(cfg, 1u, 1), ConfigError);
  CHECK_THROWS_AS(jmc::run_convergence(cfg, 1), ConfigError);
  CHECK_THROWS_AS(jmc::run_bounds(cfg, 1u), ConfigError);
}

TEST_CASE("parallel_for covers every index exactly once", "[experiments]") {
  for (const int threads : {1, 2, 3, 8}) {
    for (const std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{7}, std::size_t{64}}) {
      std::vector<std::atomic<int>> hits(n);
      jmc::parallel_for(n, threads, [&](std::size_t i) { hits[i].fetch_add(1); });
      for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);
    }
  }
}

TEST_CASE("parallel_for propagates worker exceptions", "[experiments]") {
  CHECK_THROWS_AS(jmc::parallel_for(16, 4,
                                    [](std::size_t i) {
                                      if (i == 9) throw jmc::Error("boom");
                                    }),
                  jmc::Error);
}

TEST_CASE("selftest suites pass", "[experiments]") {
  std::ostringstream os;
  CHECK(jmc::run_selftest(os) == 0);
  CHECK(os.str().find("all suites passed") != std::string::npos);
}
