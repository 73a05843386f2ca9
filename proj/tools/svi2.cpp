// svi2 — command-line driver: generate instances, solve them with
// progressive hedging, certify monotonicity, run SAA experiments, and
// self-check the solvers against independent oracles.
//
// Exit codes (stable contract):
//   0  success
//   1  oracle-check found a failing check
//   2  input error (bad file, bad flags, bad config)
//   3  iteration budget exhausted (solver stopped at max-iter)
//   4  numerical abort (singular inner system)
//   5  instance not certified strongly monotone

#include "svi2/boxvi.hpp"
#include "svi2/generator.hpp"
#include "svi2/io.hpp"
#include "svi2/model.hpp"
#include "svi2/parallel.hpp"
#include "svi2/phm.hpp"
#include "svi2/rng.hpp"
#include "svi2/saa.hpp"
#include "svi2/second_stage.hpp"
#include "svi2/types.hpp"
#include "svi2/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitBudget = 3;
constexpr int kExitAbort = 4;
constexpr int kExitUncertified = 5;

using svi2::Matrix;
using svi2::TwoStageInstance;
using svi2::Vector;
namespace io = svi2::io;

// Worker count: explicit --threads wins, then SVI2_THREADS, then one per
// hardware thread. 0 means "auto" in all three places.
int resolve_threads(bool flag_set, int flag_value) {
  int value = 0;
  if (flag_set) {
    value = flag_value;
  } else if (const char* env = std::getenv("SVI2_THREADS")) {
    try {
      std::size_t pos = 0;
      value = std::stoi(env, &pos);
      if (pos != std::string(env).size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("SVI2_THREADS is not an integer: ") + env);
    }
  }
  if (value < 0) throw std::invalid_argument("thread count must be >= 0");
  return value == 0 ? svi2::hardware_threads() : value;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// oracle-check: cross-validate the solvers on one instance. Three checks,
// each printed as "name: PASS/FAIL/SKIPPED (detail)". Returns kExitOk when
// nothing failed (skips are fine), kExitCheckFailed otherwise.
// ---------------------------------------------------------------------------

struct CheckOutcome {
  bool failed = false;
};

void report_check(std::ostream& os, CheckOutcome& outcome, const std::string& name, bool pass,
                  const std::string& detail) {
  outcome.failed = outcome.failed || !pass;
  os << name << ": " << (pass ? "PASS" : "FAIL") << " (" << detail << ")\n";
}

void report_skip(std::ostream& os, const std::string& name, const std::string& why) {
  os << name << ": SKIPPED (" << why << ")\n";
}

int run_oracle_checks(const TwoStageInstance& inst, std::uint64_t seed,
                      const svi2::phm::PhmOptions& opts, std::ostream& os) {
  CheckOutcome outcome;
  const int n_checked = std::min<int>(static_cast<int>(inst.scenarios.size()), 10);

  // 1. Second-stage solves vs exhaustive active-set enumeration at a
  //    deterministic probe point. Tolerance 1e-8 (infinity norm).
  {
    const std::string name = "second-stage vs enumeration";
    if (inst.m > 10) {
      report_skip(os, name, "m > 10: 3^m enumeration too large");
    } else {
      const Vector x_probe = svi2::mid(Vector::Zero(inst.n), inst.a, inst.b);
      double worst = 0.0;
      std::string note;
      bool ok = true;
      for (int j = 0; j < n_checked && ok; ++j) {
        const svi2::Scenario& sc = inst.scenarios[static_cast<std::size_t>(j)];
        svi2::BoxLvi p{sc.M, sc.L * x_probe + sc.h2, sc.l, sc.u};
        try {
          const auto newton = svi2::boxvi::solve(p, 1e-12, 200);
          const Vector brute = svi2::boxvi::brute_force(p);
          if (newton.status != svi2::boxvi::SolveStatus::Converged) {
            ok = false;
            note = "scenario " + std::to_string(j) + ": newton did not converge";
          } else {
            worst = std::max(worst, (newton.z - brute).lpNorm<Eigen::Infinity>());
          }
        } catch (const std::exception& e) {
          ok = false;
          note = "scenario " + std::to_string(j) + ": " + e.what();
        }
      }
      if (ok) {
        ok = worst <= 1e-8;
        note = "max error " + io::fmt17(worst) + " over " + std::to_string(n_checked) +
               " scenarios, tol 1e-8";
      }
      report_check(os, outcome, name, ok, note);
    }
  }

  // 2. Second-stage Jacobian vs central finite differences at seeded random
  //    probe points (step 1e-6, relative tolerance 1e-5). Scenarios where
  //    the activity classification is not strict are skipped.
  {
    const std::string name = "jacobian vs finite differences";
    const double step = 1e-6;
    double worst = 0.0;
    int used = 0;
    int with_free = 0;  // probes where the solution has interior components
    bool ok = true;
    std::string note;
    for (int j = 0; j < n_checked && ok; ++j) {
      const svi2::Scenario& sc = inst.scenarios[static_cast<std::size_t>(j)];
      svi2::Rng rng(svi2::derive_seed(seed, 101, static_cast<std::uint64_t>(j)));
      Vector x(inst.n);
      for (int i = 0; i < inst.n; ++i) x[i] = rng.uniform(inst.a[i], inst.b[i]);
      try {
        const auto sol = svi2::second_stage::solve(sc, x, 1e-12, 200);
        if (sol.status != svi2::boxvi::SolveStatus::Converged) {
          ok = false;
          note = "scenario " + std::to_string(j) + ": solve did not converge";
          break;
        }
        if (!sol.strict_complementarity) continue;  // derivative may not exist here
        ++used;
        if (std::any_of(sol.active.begin(), sol.active.end(), [](svi2::second_stage::Activity a) {
              return a == svi2::second_stage::Activity::Interior;
            })) {
          ++with_free;
        }
        const Matrix jac = svi2::second_stage::jacobian(sc, x, sol);
        for (int d = 0; d < 5; ++d) {
          Vector dir(inst.n);
          for (int i = 0; i < inst.n; ++i) dir[i] = rng.normal();
          dir.normalize();
          const auto plus = svi2::second_stage::solve(sc, x + step * dir, 1e-12, 200);
          const auto minus = svi2::second_stage::solve(sc, x - step * dir, 1e-12, 200);
          const Vector fd = (plus.y - minus.y) / (2.0 * step);
          // Mixed absolute/relative scale: pure relative error amplifies the
          // finite-difference rounding floor when the derivative is tiny.
          const double rel = (jac * dir - fd).norm() / std::max(fd.norm(), 1.0);
          worst = std::max(worst, rel);
        }
      } catch (const std::exception& e) {
        ok = false;
        note = "scenario " + std::to_string(j) + ": " + e.what();
      }
    }
    if (!ok) {
      report_check(os, outcome, name, false, note);
    } else if (used == 0) {
      report_skip(os, name, "no scenario with strict activity classification");
    } else {
      report_check(os, outcome, name, worst <= 1e-5,
                   "max error " + io::fmt17(worst) + " relative to max(1, |fd|) over " +
                       std::to_string(used) + " scenarios x 5 directions (" +
                       std::to_string(with_free) + " with free components), tol 1e-5");
    }
  }

  // 3. Progressive hedging vs one monolithic solve of the coupled system
  //    (all scenarios at once). Tolerance 1e-4 on the first-stage part.
  {
    const std::string name = "progressive hedging vs extensive form";
    const long total_dim =
        inst.n + static_cast<long>(inst.scenarios.size()) * static_cast<long>(inst.m);
    const auto cert = svi2::certify_strong_monotonicity(inst);
    if (total_dim > 200) {
      report_skip(os, name, "coupled dimension " + std::to_string(total_dim) + " > 200");
    } else if (!cert.certified) {
      report_skip(os, name, "instance not certified strongly monotone");
    } else {
      try {
        const svi2::BoxLvi ext = svi2::phm::extensive_form(inst);
        const auto mono = svi2::boxvi::solve(ext, 1e-10, 500);
        auto phm_opts = opts;
        phm_opts.tol = std::min(opts.tol, 1e-5);
        const auto report = svi2::phm::solve(inst, phm_opts);
        if (mono.status != svi2::boxvi::SolveStatus::Converged ||
            report.status != svi2::boxvi::SolveStatus::Converged) {
          report_check(os, outcome, name, false, "one of the solvers did not converge");
        } else {
          const double err = (report.x - mono.z.head(inst.n)).norm();
          report_check(os, outcome, name, err <= 1e-4,
                       "first-stage difference " + io::fmt17(err) + ", tol 1e-4");
        }
      } catch (const std::exception& e) {
        report_check(os, outcome, name, false, e.what());
      }
    }
  }

  return outcome.failed ? kExitCheckFailed : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage stochastic box-constrained VI toolkit"};
  app.set_version_flag("--version", svi2::kVersion);
  app.require_subcommand(1);

  // generate ----------------------------------------------------------------
  auto* gen_cmd = app.add_subcommand("generate", "write a random certified instance as JSON");
  svi2::generator::GeneratorConfig gen_cfg;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen_cmd->add_option("--seed", gen_seed, "RNG seed (default 0)");
  gen_cmd->add_option("--n1", gen_cfg.n1, "first-stage block 1 size (default 3)");
  gen_cmd->add_option("--n2", gen_cfg.n2, "first-stage block 2 size (default 3)");
  gen_cmd->add_option("--m1", gen_cfg.m1, "second-stage block 1 size (default 5)");
  gen_cmd->add_option("--m2", gen_cfg.m2, "second-stage block 2 size (default 5)");
  gen_cmd->add_option("--alpha", gen_cfg.alpha, "monotonicity margin (default 1)");
  gen_cmd->add_option("--scenarios", gen_cfg.n_scenarios, "scenario count (default 10)");
  gen_cmd->add_option("--out", gen_out, "output path (default: stdout)");

  // solve -------------------------------------------------------------------
  auto* solve_cmd = app.add_subcommand("solve", "solve an instance by progressive hedging");
  std::string solve_in, solve_out, solve_history, solve_format = "json";
  double solve_tol = 1e-5, solve_r = 1.0;
  int solve_max_iter = 5000, solve_threads = 0;
  std::uint64_t solve_seed = 0;
  bool solve_oracle = false;
  solve_cmd->add_option("instance", solve_in, "instance JSON file")->required();
  solve_cmd->add_option("--tol", solve_tol, "stopping residual (default 1e-5)");
  solve_cmd->add_option("--max-iter", solve_max_iter, "iteration budget (default 5000)");
  solve_cmd->add_option("--r", solve_r, "proximal parameter (default 1)");
  auto* solve_threads_opt =
      solve_cmd->add_option("--threads", solve_threads, "workers (default: cores; env SVI2_THREADS)");
  solve_cmd->add_option("--out", solve_out, "report JSON path (default: stdout)");
  solve_cmd->add_option("--history", solve_history,
                        "history CSV path (default: derived from --out)");
  solve_cmd->add_option("--format", solve_format, "stdout payload: json report or csv history")
      ->check(CLI::IsMember({"json", "csv"}));
  solve_cmd->add_option("--seed", solve_seed, "seed for --oracle-check probes");
  solve_cmd->add_flag("--oracle-check", solve_oracle, "cross-check solvers on this instance");

  // certify -----------------------------------------------------------------
  auto* cert_cmd = app.add_subcommand("certify", "check strong monotonicity of an instance");
  std::string cert_in, cert_out;
  cert_cmd->add_option("instance", cert_in, "instance JSON file")->required();
  cert_cmd->add_option("--out", cert_out, "certificate JSON path (default: stdout)");

  // experiment ----------------------------------------------------------------
  auto* exp_cmd = app.add_subcommand("experiment", "run the SAA convergence experiment");
  std::string exp_config, exp_out = ".";
  std::uint64_t exp_seed = 0;
  double exp_tol = 1e-5, exp_r = 1.0;
  int exp_max_iter = 5000, exp_threads = 0, exp_reps = 0, exp_eval = 0;
  std::vector<int> exp_grid;
  exp_cmd->add_option("config", exp_config, "experiment config JSON (optional)");
  exp_cmd->add_option("--out", exp_out, "output directory (default: .)");
  auto* exp_seed_opt = exp_cmd->add_option("--seed", exp_seed, "master seed (default 0)");
  auto* exp_tol_opt = exp_cmd->add_option("--tol", exp_tol, "PHM stopping residual");
  auto* exp_max_opt = exp_cmd->add_option("--max-iter", exp_max_iter, "PHM iteration budget");
  auto* exp_r_opt = exp_cmd->add_option("--r", exp_r, "PHM proximal parameter");
  auto* exp_threads_opt =
      exp_cmd->add_option("--threads", exp_threads, "workers (default: cores; env SVI2_THREADS)");
  auto* exp_grid_opt = exp_cmd->add_option("--grid", exp_grid, "sample-size grid override");
  auto* exp_reps_opt = exp_cmd->add_option("--replications", exp_reps, "replication count");
  auto* exp_eval_opt = exp_cmd->add_option("--eval-scenarios", exp_eval, "evaluation set size");

  // oracle-check --------------------------------------------------------------
  auto* oracle_cmd = app.add_subcommand("oracle-check", "cross-check solvers against oracles");
  std::string oracle_in;
  std::uint64_t oracle_seed = 0;
  double oracle_tol = 1e-5, oracle_r = 1.0;
  int oracle_max_iter = 5000, oracle_threads = 0;
  oracle_cmd->add_option("instance", oracle_in,
                         "instance JSON file (default: built-in seeded fixture)");
  oracle_cmd->add_option("--seed", oracle_seed, "seed for probe points (default 0)");
  oracle_cmd->add_option("--tol", oracle_tol, "PHM stopping residual");
  oracle_cmd->add_option("--max-iter", oracle_max_iter, "PHM iteration budget");
  oracle_cmd->add_option("--r", oracle_r, "PHM proximal parameter");
  auto* oracle_threads_opt =
      oracle_cmd->add_option("--threads", oracle_threads, "workers (default: cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (gen_cmd->parsed()) {
      gen_cfg.seed = gen_seed;
      TwoStageInstance inst;
      try {
        inst = svi2::generator::generate(gen_cfg);
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
      }
      io::json meta;
      meta["generator"] = {{"n1", gen_cfg.n1},   {"n2", gen_cfg.n2},
                           {"m1", gen_cfg.m1},   {"m2", gen_cfg.m2},
                           {"alpha", gen_cfg.alpha}, {"n_scenarios", gen_cfg.n_scenarios},
                           {"seed", gen_cfg.seed}};
      if (gen_out.empty()) {
        io::json doc = io::instance_to_json(inst);
        doc["metadata"]["generator"] = meta["generator"];
        std::cout << doc.dump(2) << '\n';
      } else {
        io::save_instance(gen_out, inst, meta);
      }
      return kExitOk;
    }

    if (solve_cmd->parsed()) {
      TwoStageInstance inst;
      try {
        inst = io::load_instance(solve_in);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
      }
      svi2::phm::PhmOptions opts;
      opts.tol = solve_tol;
      opts.max_iter = solve_max_iter;
      opts.r = solve_r;
      opts.threads = resolve_threads(solve_threads_opt->count() > 0, solve_threads);
      if (opts.tol <= 0 || opts.max_iter < 1 || opts.r <= 0) {
        std::cerr << "error: need tol > 0, max-iter >= 1, r > 0\n";
        return kExitInput;
      }

      svi2::phm::PhmReport report;
      try {
        report = svi2::phm::solve(inst, opts);
      } catch (const svi2::phm::PhmAborted& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitAbort;
      }

      io::json doc = io::report_to_json(report);
      doc["config"] = {{"tol", opts.tol},           {"max_iter", opts.max_iter},
                       {"r", opts.r},               {"threads", opts.threads},
                       {"inner_tol", opts.inner_tol}, {"inner_max_iter", opts.inner_max_iter},
                       {"res_every", opts.res_every}};
      std::ostringstream history;
      io::write_history_csv(history, report.history, inst.n);

      if (!solve_out.empty()) {
        io::save_json(solve_out, doc);
        std::string hist_path = solve_history;
        if (hist_path.empty()) {
          hist_path = std::filesystem::path(solve_out).replace_extension(".history.csv").string();
        }
        write_text_file(hist_path, history.str());
      } else {
        if (!solve_history.empty()) write_text_file(solve_history, history.str());
        if (solve_format == "csv") {
          std::cout << history.str();
        } else {
          std::cout << doc.dump(2) << '\n';
        }
      }

      int rc = kExitOk;
      if (report.status == svi2::boxvi::SolveStatus::Converged) {
        rc = kExitOk;
      } else {
        rc = kExitBudget;
      }
      if (solve_oracle) {
        const int check_rc = run_oracle_checks(inst, solve_seed, opts, std::cout);
        if (rc == kExitOk) rc = check_rc;
      }
      return rc;
    }

    if (cert_cmd->parsed()) {
      TwoStageInstance inst;
      try {
        inst = io::load_instance(cert_in);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
      }
      const auto cert = svi2::certify_strong_monotonicity(inst);
      io::json doc = io::certificate_to_json(cert);
      if (inst.blocks) {
        const auto schur = svi2::generator::schur_check(inst);
        doc["schur"] = {{"first_stage_margin", schur.first_stage_margin},
                        {"second_stage_margins", schur.second_stage_margins},
                        {"min_second_stage_margin", schur.min_second_stage_margin},
                        {"ok", schur.ok}};
      }
      if (cert_out.empty()) {
        std::cout << doc.dump(2) << '\n';
      } else {
        io::save_json(cert_out, doc);
      }
      return cert.certified ? kExitOk : kExitUncertified;
    }

    if (exp_cmd->parsed()) {
      svi2::saa::ExperimentConfig cfg;
      try {
        if (!exp_config.empty()) {
          const io::json j = io::load_json(exp_config);
          if (j.contains("generator")) {
            const io::json& g = j["generator"];
            if (g.contains("n1")) cfg.base.n1 = g["n1"].get<int>();
            if (g.contains("n2")) cfg.base.n2 = g["n2"].get<int>();
            if (g.contains("m1")) cfg.base.m1 = g["m1"].get<int>();
            if (g.contains("m2")) cfg.base.m2 = g["m2"].get<int>();
            if (g.contains("alpha")) cfg.base.alpha = g["alpha"].get<double>();
          }
          if (j.contains("n_grid")) cfg.n_grid = j["n_grid"].get<std::vector<int>>();
          if (j.contains("replications")) cfg.replications = j["replications"].get<int>();
          if (j.contains("eval_scenarios")) cfg.eval_scenarios = j["eval_scenarios"].get<int>();
          if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
          if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
          if (j.contains("phm")) {
            const io::json& p = j["phm"];
            if (p.contains("r")) cfg.solver.r = p["r"].get<double>();
            if (p.contains("tol")) cfg.solver.tol = p["tol"].get<double>();
            if (p.contains("max_iter")) cfg.solver.max_iter = p["max_iter"].get<int>();
            if (p.contains("res_every")) cfg.solver.res_every = p["res_every"].get<int>();
            if (p.contains("inner_tol")) cfg.solver.inner_tol = p["inner_tol"].get<double>();
            if (p.contains("inner_max_iter")) {
              cfg.solver.inner_max_iter = p["inner_max_iter"].get<int>();
            }
          }
        }
        if (exp_seed_opt->count() > 0) cfg.seed = exp_seed;
        if (exp_tol_opt->count() > 0) cfg.solver.tol = exp_tol;
        if (exp_max_opt->count() > 0) cfg.solver.max_iter = exp_max_iter;
        if (exp_r_opt->count() > 0) cfg.solver.r = exp_r;
        if (exp_grid_opt->count() > 0) cfg.n_grid = exp_grid;
        if (exp_reps_opt->count() > 0) cfg.replications = exp_reps;
        if (exp_eval_opt->count() > 0) cfg.eval_scenarios = exp_eval;
        cfg.threads = resolve_threads(exp_threads_opt->count() > 0, exp_threads);
        cfg.validate();
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
      }

      std::error_code ec;
      std::filesystem::create_directories(exp_out, ec);
      if (ec) {
        std::cerr << "error: cannot create output directory " << exp_out << ": " << ec.message()
                  << '\n';
        return kExitInput;
      }

      const auto result = svi2::saa::run(cfg);

      const auto stats_path = (std::filesystem::path(exp_out) / "stats.csv").string();
      const auto traj_path = (std::filesystem::path(exp_out) / "trajectories.csv").string();
      const auto meta_path = (std::filesystem::path(exp_out) / "metadata.json").string();
      std::ostringstream stats, traj;
      svi2::saa::write_stats_csv(stats, result.stats);
      svi2::saa::write_trajectories_csv(traj, result);
      write_text_file(stats_path, stats.str());
      write_text_file(traj_path, traj.str());
      io::save_json(meta_path, svi2::saa::metadata_json(cfg, result));
      std::cout << "wrote " << stats_path << '\n'
                << "wrote " << traj_path << '\n'
                << "wrote " << meta_path << '\n';
      return kExitOk;
    }

    if (oracle_cmd->parsed()) {
      TwoStageInstance inst;
      try {
        if (oracle_in.empty()) {
          svi2::generator::GeneratorConfig cfg;  // small built-in fixture
          cfg.n_scenarios = 5;
          cfg.seed = oracle_seed;
          inst = svi2::generator::generate(cfg);
        } else {
          inst = io::load_instance(oracle_in);
        }
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
      }
      svi2::phm::PhmOptions opts;
      opts.tol = oracle_tol;
      opts.max_iter = oracle_max_iter;
      opts.r = oracle_r;
      opts.threads = resolve_threads(oracle_threads_opt->count() > 0, oracle_threads);
      return run_oracle_checks(inst, oracle_seed, opts, std::cout);
    }
  } catch (const std::exception& e) {
    // I/O failures after a successful parse are input errors; anything from
    // deep inside the solvers would have been mapped above.
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }

  return kExitInput;  // unreachable: require_subcommand(1)
}
