// End-to-end tests of the svi2 binary: exit codes, file outputs and
// byte-level determinism. SVI2_CLI_PATH is injected by the build.

#include "svi2/io.hpp"
#include "svi2/types.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using svi2::Matrix;
using svi2::TwoStageInstance;
using svi2::Vector;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "svi2-cli-tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Runs `svi2 <args>` through the shell, captures stdout+stderr, returns the
// exit code (-1 if the process died abnormally).
int run_cli(const std::string& args, std::string* output = nullptr,
            const std::string& env_prefix = "") {
  const fs::path log = work_dir() / "last-output.txt";
  const std::string cmd =
      env_prefix + " \"" + SVI2_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = slurp(log);
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

// A small certified instance shared by the solve/certify/oracle tests.
const fs::path& base_instance() {
  static const fs::path path = [] {
    fs::path p = work_dir() / "base.json";
    REQUIRE(run_cli("generate --seed 3 --m1 2 --m2 2 --scenarios 3 --out \"" + p.string() + "\"") ==
            0);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("version flag prints and succeeds") {
  std::string out;
  CHECK(run_cli("--version", &out) == 0);
  CHECK(out.find("0.1.0") != std::string::npos);
}

TEST_CASE("a subcommand is required") {
  std::string out;
  CHECK(run_cli("", &out) == 2);
  CHECK(run_cli("frobnicate", &out) == 2);
}

TEST_CASE("generate writes deterministic instance files") {
  const fs::path one = work_dir() / "gen-one.json";
  const fs::path two = work_dir() / "gen-two.json";
  REQUIRE(run_cli("generate --seed 11 --scenarios 4 --out \"" + one.string() + "\"") == 0);
  REQUIRE(run_cli("generate --seed 11 --scenarios 4 --out \"" + two.string() + "\"") == 0);
  CHECK(slurp(one) == slurp(two));

  const auto doc = svi2::io::load_json(one.string());
  CHECK(doc.at("n").get<int>() == 6);
  CHECK(doc.at("m").get<int>() == 10);
  CHECK(doc.at("scenarios").size() == 4);
  CHECK(doc.at("metadata").at("generator").at("seed").get<int>() == 11);
  CHECK(doc.at("metadata").at("blocks").at("n1").get<int>() == 3);

  // The file round-trips through the library loader.
  const auto inst = svi2::io::load_instance(one.string());
  CHECK(inst.n == 6);
  CHECK(inst.scenarios.size() == 4);

  const fs::path three = work_dir() / "gen-three.json";
  REQUIRE(run_cli("generate --seed 12 --scenarios 4 --out \"" + three.string() + "\"") == 0);
  CHECK(slurp(one) != slurp(three));
}

TEST_CASE("generate streams to stdout and validates flags") {
  std::string out;
  CHECK(run_cli("generate --seed 1 --scenarios 2", &out) == 0);
  CHECK(out.find("\"scenarios\"") != std::string::npos);
  CHECK(run_cli("generate --n1 0", &out) == 2);
  CHECK(run_cli("generate --alpha -1", &out) == 2);
}

TEST_CASE("solve writes a report and a history next to it") {
  const fs::path report = work_dir() / "report.json";
  const fs::path history = work_dir() / "report.history.csv";
  std::string out;
  REQUIRE(run_cli("solve \"" + base_instance().string() + "\" --out \"" + report.string() + "\"",
                  &out) == 0);

  const auto doc = svi2::io::load_json(report.string());
  CHECK(doc.at("status").get<std::string>() == "Converged");
  CHECK(doc.at("res").get<double>() <= 1e-5);
  CHECK(doc.at("x").size() == 6);
  CHECK(doc.at("config").at("max_iter").get<int>() == 5000);

  const std::string hist = slurp(history);
  CHECK(hist.rfind("nu,res,x0,x1,x2,x3,x4,x5\n", 0) == 0);
}

TEST_CASE("solve can stream the history as csv") {
  std::string out;
  REQUIRE(run_cli("solve \"" + base_instance().string() + "\" --format csv", &out) == 0);
  CHECK(out.rfind("nu,res,x0", 0) == 0);
}

TEST_CASE("solve reports budget exhaustion distinctly") {
  std::string out;
  CHECK(run_cli("solve \"" + base_instance().string() + "\" --max-iter 1", &out) == 3);
}

TEST_CASE("solve rejects bad inputs") {
  std::string out;
  CHECK(run_cli("solve \"" + (work_dir() / "missing.json").string() + "\"", &out) == 2);

  const fs::path junk = work_dir() / "junk.json";
  std::ofstream(junk) << "this is not json";
  CHECK(run_cli("solve \"" + junk.string() + "\"", &out) == 2);

  CHECK(run_cli("solve \"" + base_instance().string() + "\" --tol 0", &out) == 2);
  CHECK(run_cli("solve \"" + base_instance().string() + "\" --r -2", &out) == 2);
}

TEST_CASE("solve flags numerical aborts") {
  // A + rI vanishes at the default r = 1, so the first proximal subproblem
  // is singular on its interior branch.
  TwoStageInstance inst;
  inst.n = 1;
  inst.m = 1;
  inst.A = -Matrix::Identity(1, 1);
  inst.h1 = Vector::Constant(1, 0.5);
  inst.a = Vector::Constant(1, -1.0);
  inst.b = Vector::Ones(1);
  svi2::Scenario sc;
  sc.B = Matrix::Zero(1, 1);
  sc.L = Matrix::Zero(1, 1);
  sc.M = Matrix::Identity(1, 1);
  sc.h2 = Vector::Zero(1);
  sc.l = Vector::Zero(1);
  sc.u = Vector::Ones(1);
  sc.weight = 1.0;
  inst.scenarios.push_back(sc);
  const fs::path path = work_dir() / "abort.json";
  svi2::io::save_instance(path.string(), inst);

  std::string out;
  CHECK(run_cli("solve \"" + path.string() + "\"", &out) == 4);
  CHECK(out.find("scenario 0") != std::string::npos);
}

TEST_CASE("certify accepts generated instances and rejects merely monotone ones") {
  std::string out;
  const fs::path cert = work_dir() / "cert.json";
  REQUIRE(run_cli("certify \"" + base_instance().string() + "\" --out \"" + cert.string() + "\"",
                  &out) == 0);
  const auto doc = svi2::io::load_json(cert.string());
  CHECK(doc.at("certified").get<bool>());
  CHECK(doc.at("kappa").get<double>() > 0.0);
  CHECK(doc.at("schur").at("ok").get<bool>());

  // Rotation first stage: monotone, zero margin, no block metadata.
  TwoStageInstance skew;
  skew.n = 2;
  skew.m = 1;
  skew.A = Matrix::Zero(2, 2);
  skew.A(0, 1) = 1.0;
  skew.A(1, 0) = -1.0;
  skew.h1 = Vector::Zero(2);
  skew.a = Vector::Constant(2, -1.0);
  skew.b = Vector::Ones(2);
  svi2::Scenario sc;
  sc.B = Matrix::Zero(2, 1);
  sc.L = Matrix::Zero(1, 2);
  sc.M = Matrix::Identity(1, 1);
  sc.h2 = Vector::Zero(1);
  sc.l = Vector::Zero(1);
  sc.u = Vector::Ones(1);
  sc.weight = 1.0;
  skew.scenarios.push_back(sc);
  const fs::path skew_path = work_dir() / "skew.json";
  svi2::io::save_instance(skew_path.string(), skew);

  const int rc = run_cli("certify \"" + skew_path.string() + "\"", &out);
  CHECK(rc == 5);
  CHECK(out.find("\"certified\": false") != std::string::npos);
}

TEST_CASE("experiment writes csv outputs deterministically") {
  const fs::path cfg_path = work_dir() / "exp-config.json";
  {
    svi2::io::json cfg;
    cfg["generator"] = {{"n1", 1}, {"n2", 1}, {"m1", 1}, {"m2", 2}};
    cfg["n_grid"] = {2, 4};
    cfg["replications"] = 2;
    cfg["eval_scenarios"] = 10;
    cfg["seed"] = 5;
    svi2::io::save_json(cfg_path.string(), cfg);
  }

  const fs::path dir1 = work_dir() / "exp-one";
  const fs::path dir2 = work_dir() / "exp-two";
  std::string out;
  REQUIRE(run_cli("experiment \"" + cfg_path.string() + "\" --out \"" + dir1.string() + "\"",
                  &out) == 0);
  CHECK(out.find("wrote") != std::string::npos);
  REQUIRE(fs::exists(dir1 / "stats.csv"));
  REQUIRE(fs::exists(dir1 / "trajectories.csv"));
  REQUIRE(fs::exists(dir1 / "metadata.json"));

  const std::string stats = slurp(dir1 / "stats.csv");
  CHECK(stats.rfind("N,mean,variance,ci_lo,ci_hi,failures\n", 0) == 0);
  CHECK(std::count(stats.begin(), stats.end(), '\n') == 3);  // header + two grid rows

  const auto meta = svi2::io::load_json((dir1 / "metadata.json").string());
  CHECK(meta.at("seed").get<int>() == 5);
  CHECK(meta.at("n_grid").size() == 2);
  CHECK(meta.at("replications").get<int>() == 2);
  CHECK(meta.contains("sampling"));
  CHECK(meta.at("wall_seconds").get<double>() > 0.0);

  REQUIRE(run_cli("experiment \"" + cfg_path.string() + "\" --out \"" + dir2.string() + "\"",
                  &out) == 0);
  CHECK(slurp(dir2 / "stats.csv") == stats);
  CHECK(slurp(dir2 / "trajectories.csv") == slurp(dir1 / "trajectories.csv"));

  // Worker count must not leak into the outputs.
  const fs::path dir3 = work_dir() / "exp-three";
  REQUIRE(run_cli("experiment \"" + cfg_path.string() + "\" --out \"" + dir3.string() +
                      "\" --threads 3",
                  &out) == 0);
  CHECK(slurp(dir3 / "stats.csv") == stats);

  const fs::path dir4 = work_dir() / "exp-four";
  REQUIRE(run_cli("experiment \"" + cfg_path.string() + "\" --out \"" + dir4.string() + "\"", &out,
                  "SVI2_THREADS=2") == 0);
  CHECK(slurp(dir4 / "stats.csv") == stats);

  // Flag overrides beat the config file.
  const fs::path dir5 = work_dir() / "exp-five";
  REQUIRE(run_cli("experiment \"" + cfg_path.string() + "\" --out \"" + dir5.string() +
                      "\" --replications 1",
                  &out) == 0);
  const auto meta5 = svi2::io::load_json((dir5 / "metadata.json").string());
  CHECK(meta5.at("replications").get<int>() == 1);
}

TEST_CASE("experiment rejects bad configuration") {
  std::string out;
  CHECK(run_cli("experiment --grid 10 5 --replications 2 --eval-scenarios 5", &out) == 2);
  CHECK(out.find("increasing") != std::string::npos);

  const fs::path dir = work_dir() / "exp-env";
  CHECK(run_cli("experiment --grid 2 --replications 1 --eval-scenarios 5 --out \"" + dir.string() +
                    "\"",
                &out, "SVI2_THREADS=abc") == 2);
  CHECK(out.find("SVI2_THREADS") != std::string::npos);
}

TEST_CASE("oracle-check passes on the built-in fixture") {
  std::string out;
  CHECK(run_cli("oracle-check --seed 1", &out) == 0);
  CHECK(out.find("second-stage vs enumeration: PASS") != std::string::npos);
  CHECK(out.find("jacobian vs finite differences: PASS") != std::string::npos);
  CHECK(out.find("progressive hedging vs extensive form: PASS") != std::string::npos);
  CHECK(out.find("FAIL") == std::string::npos);
}

TEST_CASE("oracle-check accepts an explicit instance") {
  std::string out;
  CHECK(run_cli("oracle-check \"" + base_instance().string() + "\"", &out) == 0);
  CHECK(out.find("FAIL") == std::string::npos);
}

TEST_CASE("oracle-check fails on an instance with non-unique second stage") {
  // M = -5 on [0,1] admits two solutions (y = 0 and y = 0.2), so the
  // enumeration oracle rejects it.
  TwoStageInstance inst;
  inst.n = 1;
  inst.m = 1;
  inst.A = Matrix::Identity(1, 1);
  inst.h1 = Vector::Zero(1);
  inst.a = Vector::Zero(1);
  inst.b = Vector::Ones(1);
  svi2::Scenario sc;
  sc.B = Matrix::Zero(1, 1);
  sc.L = Matrix::Zero(1, 1);
  sc.M = Matrix::Constant(1, 1, -5.0);
  sc.h2 = Vector::Ones(1);
  sc.l = Vector::Zero(1);
  sc.u = Vector::Ones(1);
  sc.weight = 1.0;
  inst.scenarios.push_back(sc);
  const fs::path path = work_dir() / "nonunique.json";
  svi2::io::save_instance(path.string(), inst);

  std::string out;
  CHECK(run_cli("oracle-check \"" + path.string() + "\"", &out) == 1);
  CHECK(out.find("FAIL") != std::string::npos);
}

TEST_CASE("solve can fold in the oracle checks") {
  std::string out;
  CHECK(run_cli("solve \"" + base_instance().string() + "\" --oracle-check --out \"" +
                    (work_dir() / "oc-report.json").string() + "\"",
                &out) == 0);
  CHECK(out.find("PASS") != std::string::npos);
}
