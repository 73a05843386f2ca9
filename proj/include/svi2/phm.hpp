#pragma once

// Progressive Hedging for the SAA two-stage box VI.
//
// Each iteration solves, per scenario, the proximally regularized coupled
// box VI in z = (x_j, y_j)
//
//   H_j = [[A + rI, B_j], [L_j, M_j + rI]],
//   q_j = (h1 + w_j - r x_j ; h2_j - r y_j),   box [a,b] x [l_j,u_j],
//
// then averages the first-stage copies, restores nonanticipativity and
// updates the multipliers w_j <- w_j + r (x_hat_j - x_bar). The stopping
// test is the first-stage residual evaluated with fresh second-stage
// solutions at x_bar, not with the internal y_j.
//
// Scenario solves run in parallel; every reduction is a fixed-order sum
// over the canonical scenario order, so reports are identical for any
// thread count.

#include "svi2/boxvi.hpp"
#include "svi2/model.hpp"
#include "svi2/parallel.hpp"
#include "svi2/second_stage.hpp"
#include "svi2/types.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace svi2::phm {

using boxvi::SolveStatus;

struct PhmState {
  int nu = 0;
  Vector x_bar;
  std::vector<Vector> x;  // first-stage copies, all equal to x_bar after a step
  std::vector<Vector> y;
  std::vector<Vector> w;  // multipliers; weighted mean stays zero
  double r = 1.0;
};

struct PhmOptions {
  double r = 1.0;       // proximal penalty
  double tol = 1e-5;    // stopping threshold on the first-stage residual
  int max_iter = 5000;
  int res_every = 1;    // residual evaluation cadence, in iterations
  double inner_tol = 1e-10;
  int inner_max_iter = boxvi::kDefaultMaxIter;
  int threads = 1;
  bool check_monotonicity = true;  // warn (never refuse) on uncertified input
};

struct PhmHistoryRow {
  int nu = 0;
  double res = std::numeric_limits<double>::quiet_NaN();  // NaN when not evaluated
  double dx = 0.0;  // ||x_bar - previous x_bar||
  Vector x_bar;
};

struct PhmReport {
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
  double res = 0.0;
  Vector x;
  std::vector<Vector> y;  // fresh second-stage solutions at the returned x
  std::vector<PhmHistoryRow> history;
};

// Inner-solver failure inside Step 1 or a residual evaluation.
struct StepError : std::runtime_error {
  int scenario_index;
  StepError(int j, const std::string& what)
      : std::runtime_error("scenario " + std::to_string(j) + ": " + what),
        scenario_index(j) {}
};

// Raised by solve when a step fails; carries everything computed so far.
struct PhmAborted : std::runtime_error {
  int scenario_index;
  PhmReport partial;
  PhmAborted(const StepError& cause, PhmReport report)
      : std::runtime_error(cause.what()),
        scenario_index(cause.scenario_index),
        partial(std::move(report)) {}
};

inline PhmState init(const TwoStageInstance& inst, double r, const Vector& x0) {
  if (!(r > 0.0)) throw std::invalid_argument("phm::init: r must be positive");
  if (x0.size() != inst.n) throw std::invalid_argument("phm::init: x0 must have length n");
  const std::size_t count = inst.scenarios.size();
  PhmState st;
  st.nu = 0;
  st.r = r;
  st.x_bar = x0;
  st.x.assign(count, x0);
  st.y.reserve(count);
  for (const Scenario& sc : inst.scenarios) {
    st.y.push_back(mid(Vector::Zero(inst.m), sc.l, sc.u));
  }
  st.w.assign(count, Vector::Zero(inst.n));  // zero-mean by construction
  return st;
}

// One PH iteration (Step 1 + Step 2).
inline PhmState step(const TwoStageInstance& inst, PhmState state,
                     const PhmOptions& opts = {}) {
  const int count = static_cast<int>(inst.scenarios.size());
  const int n = inst.n;
  const int m = inst.m;

  std::vector<Vector> x_hat(static_cast<std::size_t>(count));
  std::vector<Vector> y_hat(static_cast<std::size_t>(count));

  parallel_for(count, opts.threads, [&](int j) {
    const Scenario& sc = inst.scenarios[static_cast<std::size_t>(j)];
    BoxLvi p;
    p.H.setZero(n + m, n + m);
    p.H.topLeftCorner(n, n) = inst.A + state.r * Matrix::Identity(n, n);
    p.H.topRightCorner(n, m) = sc.B;
    p.H.bottomLeftCorner(m, n) = sc.L;
    p.H.bottomRightCorner(m, m) = sc.M + state.r * Matrix::Identity(m, m);

    p.q.resize(n + m);
    p.q.head(n) = inst.h1 + state.w[static_cast<std::size_t>(j)] -
                  state.r * state.x[static_cast<std::size_t>(j)];
    p.q.tail(m) = sc.h2 - state.r * state.y[static_cast<std::size_t>(j)];

    p.lo.resize(n + m);
    p.up.resize(n + m);
    p.lo.head(n) = inst.a;
    p.lo.tail(m) = sc.l;
    p.up.head(n) = inst.b;
    p.up.tail(m) = sc.u;

    Vector z0(n + m);
    z0.head(n) = state.x[static_cast<std::size_t>(j)];
    z0.tail(m) = state.y[static_cast<std::size_t>(j)];

    const boxvi::BoxLviSolution sol = boxvi::solve(p, z0, opts.inner_tol, opts.inner_max_iter);
    if (sol.status != SolveStatus::Converged) {
      throw StepError(j, std::string("inner solve ") + boxvi::to_string(sol.status));
    }
    x_hat[static_cast<std::size_t>(j)] = sol.z.head(n);
    y_hat[static_cast<std::size_t>(j)] = sol.z.tail(m);
  });

  Vector x_bar = Vector::Zero(n);
  for (int j = 0; j < count; ++j) {
    x_bar.noalias() += inst.scenarios[static_cast<std::size_t>(j)].weight *
                       x_hat[static_cast<std::size_t>(j)];
  }

  for (int j = 0; j < count; ++j) {
    state.w[static_cast<std::size_t>(j)] +=
        state.r * (x_hat[static_cast<std::size_t>(j)] - x_bar);
    state.x[static_cast<std::size_t>(j)] = x_bar;
    state.y[static_cast<std::size_t>(j)] = std::move(y_hat[static_cast<std::size_t>(j)]);
  }
  state.x_bar = std::move(x_bar);
  ++state.nu;
  return state;
}

namespace detail {

// Fresh second-stage solutions at x for every scenario, canonical order.
inline std::vector<Vector> second_stage_sweep(const TwoStageInstance& inst, const Vector& x,
                                              const PhmOptions& opts) {
  std::vector<Vector> ys(inst.scenarios.size());
  parallel_for(static_cast<int>(inst.scenarios.size()), opts.threads, [&](int j) {
    const auto sol = second_stage::solve(inst.scenarios[static_cast<std::size_t>(j)], x,
                                         opts.inner_tol, opts.inner_max_iter);
    if (sol.status != SolveStatus::Converged) {
      throw StepError(j, std::string("second-stage solve ") + boxvi::to_string(sol.status));
    }
    ys[static_cast<std::size_t>(j)] = sol.y;
  });
  return ys;
}

}  // namespace detail

inline PhmReport solve(const TwoStageInstance& inst, const PhmOptions& opts = {}) {
  inst.validate();
  if (!(opts.tol > 0.0)) throw std::invalid_argument("phm::solve: tol must be positive");
  if (opts.max_iter < 1) throw std::invalid_argument("phm::solve: max_iter must be >= 1");
  if (opts.res_every < 1) throw std::invalid_argument("phm::solve: res_every must be >= 1");

  if (opts.check_monotonicity) {
    const auto cert = certify_strong_monotonicity(inst);
    if (!cert.certified) {
      const double worst = cert.min_eig_sym.empty()
                               ? 0.0
                               : *std::min_element(cert.min_eig_sym.begin(),
                                                   cert.min_eig_sym.end());
      std::cerr << "svi2: warning: instance not certified strongly monotone "
                << "(min eigenvalue of symmetric part " << worst
                << "); PHM may not converge\n";
    }
  }

  PhmState state = init(inst, opts.r, mid(Vector::Zero(inst.n), inst.a, inst.b));

  PhmReport report;
  auto evaluate = [&](const Vector& x) -> std::pair<double, std::vector<Vector>> {
    std::vector<Vector> ys = detail::second_stage_sweep(inst, x, opts);
    return {first_stage_residual(inst, x, ys), std::move(ys)};
  };

  try {
    double res;
    std::vector<Vector> ys;
    std::tie(res, ys) = evaluate(state.x_bar);
    int eval_nu = 0;
    report.history.push_back({0, res, 0.0, state.x_bar});

    while (res > opts.tol && state.nu < opts.max_iter) {
      const Vector prev = state.x_bar;
      state = step(inst, std::move(state), opts);
      PhmHistoryRow row;
      row.nu = state.nu;
      row.dx = (state.x_bar - prev).norm();
      row.x_bar = state.x_bar;
      if (state.nu % opts.res_every == 0) {
        std::tie(res, ys) = evaluate(state.x_bar);
        eval_nu = state.nu;
        row.res = res;
      }
      report.history.push_back(std::move(row));
    }

    if (eval_nu != state.nu) {
      std::tie(res, ys) = evaluate(state.x_bar);
    }
    report.status = res <= opts.tol ? SolveStatus::Converged : SolveStatus::MaxIter;
    report.iterations = state.nu;
    report.res = res;
    report.x = state.x_bar;
    report.y = std::move(ys);
  } catch (const StepError& err) {
    report.iterations = state.nu;
    report.x = state.x_bar;
    throw PhmAborted(err, std::move(report));
  }
  return report;
}

// The SAA problem as one coupled box LVI in z = (x, y_1, ..., y_N); the
// oracle PHM is checked against. Scenario rows are scaled by their
// probability weight, which leaves the solution set unchanged (normal cones
// are invariant to positive scaling) and makes the block matrix inherit
// strong monotonicity from the per-scenario blocks.
inline BoxLvi extensive_form(const TwoStageInstance& inst) {
  inst.validate();
  const int n = inst.n;
  const int m = inst.m;
  const int count = static_cast<int>(inst.scenarios.size());
  const int k = n + count * m;

  BoxLvi p;
  p.H.setZero(k, k);
  p.q.resize(k);
  p.lo.resize(k);
  p.up.resize(k);

  p.H.topLeftCorner(n, n) = inst.A;
  p.q.head(n) = inst.h1;
  p.lo.head(n) = inst.a;
  p.up.head(n) = inst.b;

  for (int j = 0; j < count; ++j) {
    const Scenario& sc = inst.scenarios[static_cast<std::size_t>(j)];
    const int off = n + j * m;
    p.H.block(0, off, n, m) = sc.weight * sc.B;
    p.H.block(off, 0, m, n) = sc.weight * sc.L;
    p.H.block(off, off, m, m) = sc.weight * sc.M;
    p.q.segment(off, m) = sc.weight * sc.h2;
    p.lo.segment(off, m) = sc.l;
    p.up.segment(off, m) = sc.u;
  }
  return p;
}

}  // namespace svi2::phm
