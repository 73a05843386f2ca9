#include "svi2/boxvi.hpp"
#include "svi2/generator.hpp"
#include "svi2/model.hpp"
#include "svi2/phm.hpp"
#include "svi2/rng.hpp"
#include "svi2/saa.hpp"
#include "svi2/second_stage.hpp"
#include "svi2/types.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "test_helpers.hpp"

using svi2::Matrix;
using svi2::Rng;
using svi2::Scenario;
using svi2::TwoStageInstance;
using svi2::Vector;
namespace saa = svi2::saa;
namespace gen = svi2::generator;

namespace {

TwoStageInstance small_generated(std::uint64_t seed, int n_scenarios) {
  gen::GeneratorConfig cfg;
  cfg.n1 = 1;
  cfg.n2 = 1;
  cfg.m1 = 1;
  cfg.m2 = 2;
  cfg.seed = seed;
  cfg.n_scenarios = n_scenarios;
  return gen::generate(cfg);
}

std::string stats_string(const std::vector<saa::ResStats>& stats) {
  std::ostringstream os;
  saa::write_stats_csv(os, stats);
  return os.str();
}

std::string trajectories_string(const saa::ExperimentResult& result) {
  std::ostringstream os;
  saa::write_trajectories_csv(os, result);
  return os.str();
}

}  // namespace

TEST_CASE("out-of-sample residual is invariant under scenario permutation") {
  auto inst = small_generated(8, 12);
  Rng rng(99);
  Vector x(inst.n);
  for (int i = 0; i < inst.n; ++i) x[i] = rng.uniform(inst.a[i], inst.b[i]);

  const double base = saa::out_of_sample_res(inst, x);

  auto reversed = inst;
  std::reverse(reversed.scenarios.begin(), reversed.scenarios.end());
  CHECK(saa::out_of_sample_res(reversed, x) == base);  // bitwise

  auto shuffled = inst;
  std::mt19937 urbg(4242);
  std::shuffle(shuffled.scenarios.begin(), shuffled.scenarios.end(), urbg);
  CHECK(saa::out_of_sample_res(shuffled, x) == base);
}

TEST_CASE("out-of-sample residual matches the first-stage residual formula") {
  auto inst = small_generated(9, 6);
  Rng rng(100);
  Vector x(inst.n);
  for (int i = 0; i < inst.n; ++i) x[i] = rng.uniform(inst.a[i], inst.b[i]);

  // Independent route: fresh second-stage solves, natural-order average.
  std::vector<Vector> ys;
  for (const auto& sc : inst.scenarios) {
    const auto sol = svi2::second_stage::solve(sc, x);
    REQUIRE(sol.status == svi2::boxvi::SolveStatus::Converged);
    ys.push_back(sol.y);
  }
  const double direct = svi2::first_stage_residual(inst, x, ys);
  CHECK(saa::out_of_sample_res(inst, x) == Catch::Approx(direct).margin(1e-12));
}

TEST_CASE("residual vanishes at the extensive-form solution of the same set") {
  auto inst = small_generated(10, 5);
  const auto ext = svi2::boxvi::solve(svi2::phm::extensive_form(inst), 1e-12, 500);
  REQUIRE(ext.status == svi2::boxvi::SolveStatus::Converged);
  const Vector x = ext.z.head(inst.n);
  CHECK(saa::out_of_sample_res(inst, x) <= 1e-8);

  // A corner far from the solution scores strictly worse.
  CHECK(saa::out_of_sample_res(inst, inst.b) > 1e-3);
}

TEST_CASE("residual ignores the evaluation set when B is zero") {
  auto one = testutil::identity_instance(2, 2, 3, 0.25, 0.5);
  auto two = testutil::identity_instance(2, 2, 3, 0.25, -0.75);
  for (auto& sc : two.scenarios) sc.M = 3.0 * Matrix::Identity(2, 2);

  const Vector x = Vector::Constant(2, 0.5);
  CHECK(saa::out_of_sample_res(one, x) == saa::out_of_sample_res(two, x));
}

TEST_CASE("second-stage failures surface with the scenario index") {
  auto inst = testutil::identity_instance(1, 1, 2, 0.0, 0.5);
  inst.scenarios[1].M = Matrix::Zero(1, 1);
  inst.scenarios[1].h2 = Vector::Constant(1, -0.5);  // interior branch, singular
  try {
    saa::out_of_sample_res(inst, Vector::Zero(1));
    FAIL("expected StepError");
  } catch (const svi2::phm::StepError& e) {
    CHECK(e.scenario_index == 1);
  }
}

TEST_CASE("experiment runs deterministically and fills every cell") {
  saa::ExperimentConfig cfg;
  cfg.base.n1 = 1;
  cfg.base.n2 = 1;
  cfg.base.m1 = 1;
  cfg.base.m2 = 2;
  cfg.n_grid = {2, 4};
  cfg.replications = 3;
  cfg.eval_scenarios = 20;
  cfg.seed = 17;

  const auto result = saa::run(cfg);
  REQUIRE(result.cells.size() == 6);
  REQUIRE(result.stats.size() == 2);
  CHECK(result.wall_seconds > 0.0);

  for (int rep = 0; rep < 3; ++rep) {
    for (int g = 0; g < 2; ++g) {
      const auto& cell = result.cells[static_cast<std::size_t>(rep * 2 + g)];
      CHECK(cell.replication == rep);
      CHECK(cell.n_scenarios == cfg.n_grid[static_cast<std::size_t>(g)]);
      CHECK(cell.x.size() == 2);
      CHECK(cell.ok());
    }
  }
  for (std::size_t g = 0; g < 2; ++g) {
    const auto& row = result.stats[g];
    CHECK(row.n == cfg.n_grid[g]);
    CHECK(row.failures == 0);
    REQUIRE(std::isfinite(row.mean));
    CHECK(row.mean > 0.0);
    const double half = 1.96 * std::sqrt(row.variance / 3.0);
    CHECK(row.ci_lo == Catch::Approx(row.mean - half).margin(1e-15));
    CHECK(row.ci_hi == Catch::Approx(row.mean + half).margin(1e-15));
  }

  // Same seed, same outputs; worker count must not matter.
  const auto again = saa::run(cfg);
  CHECK(stats_string(again.stats) == stats_string(result.stats));
  CHECK(trajectories_string(again) == trajectories_string(result));

  auto threaded = cfg;
  threaded.threads = 4;
  const auto parallel = saa::run(threaded);
  CHECK(stats_string(parallel.stats) == stats_string(result.stats));
  CHECK(trajectories_string(parallel) == trajectories_string(result));

  // Trajectories: one row per cell and component, plus the header.
  const std::string traj = trajectories_string(result);
  CHECK(std::count(traj.begin(), traj.end(), '\n') == 1 + 6 * 2);

  // The evaluation set is shared within a replication, so different N land
  // on different residuals of the same target function.
  CHECK(result.cells[0].res != result.cells[1].res);
}

TEST_CASE("training sets differ across grid positions and replications") {
  saa::ExperimentConfig cfg;
  cfg.base.n1 = 1;
  cfg.base.n2 = 1;
  cfg.base.m1 = 1;
  cfg.base.m2 = 2;
  cfg.n_grid = {3, 5};
  cfg.replications = 2;
  cfg.eval_scenarios = 10;
  cfg.seed = 23;
  const auto result = saa::run(cfg);
  // Different replications see different structural draws, hence different x.
  CHECK(result.cells[0].x != result.cells[2].x);
  // Same replication, different N: same structural data, different training
  // draws, so the solutions differ as well.
  CHECK(result.cells[0].x != result.cells[1].x);
}

TEST_CASE("solver failures are counted and excluded from the mean") {
  saa::ExperimentConfig cfg;
  cfg.base.n1 = 1;
  cfg.base.n2 = 1;
  cfg.base.m1 = 1;
  cfg.base.m2 = 1;
  cfg.n_grid = {2};
  cfg.replications = 2;
  cfg.eval_scenarios = 5;
  cfg.seed = 31;
  cfg.solver.max_iter = 1;  // starve the solver

  const auto result = saa::run(cfg);
  REQUIRE(result.stats.size() == 1);
  CHECK(result.stats[0].failures == 2);
  CHECK(std::isnan(result.stats[0].mean));
  CHECK(std::isnan(result.stats[0].ci_lo));
  for (const auto& cell : result.cells) {
    CHECK_FALSE(cell.ok());
    CHECK(cell.x.size() == 2);  // partial iterate is still reported
  }

  const std::string csv = stats_string(result.stats);
  CHECK(csv.find("nan") != std::string::npos);
  CHECK(csv.rfind("N,mean,variance,ci_lo,ci_hi,failures\n", 0) == 0);
}

TEST_CASE("experiment configuration is validated") {
  saa::ExperimentConfig cfg;
  cfg.n_grid = {};
  CHECK_THROWS_AS(saa::run(cfg), std::invalid_argument);
  cfg = {};
  cfg.n_grid = {10, 10};
  CHECK_THROWS_AS(saa::run(cfg), std::invalid_argument);
  cfg = {};
  cfg.replications = 0;
  CHECK_THROWS_AS(saa::run(cfg), std::invalid_argument);
  cfg = {};
  cfg.eval_scenarios = 0;
  CHECK_THROWS_AS(saa::run(cfg), std::invalid_argument);
}
