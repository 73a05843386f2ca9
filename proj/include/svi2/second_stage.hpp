#pragma once

// Second-stage solution map y(x, xi) of the scenario VI
//
//   0 in M y + (L x + h2) + N_[l,u](y)
//
// and one selection of its generalized Jacobian with respect to x,
//
//   J = -(I - D + D M)^{-1} D L,
//
// where D is diagonal with D_ii = 1 on interior coordinates and 0 on
// active bounds. At points of strict complementarity J is the Frechet
// derivative of the solution map; on ties we still return the {0,1}
// vertex selection and lower the strict_complementarity flag.

#include "svi2/boxvi.hpp"
#include "svi2/types.hpp"

#include <Eigen/LU>

#include <stdexcept>
#include <vector>

namespace svi2::second_stage {

using boxvi::SolveStatus;

enum class Activity { Lower, Interior, Upper };

// Coordinates are classified from the natural-map argument w = y - (My + q)
// at tolerance 1e-9, one order looser than the inner solve so solver noise
// cannot flip a classification.
inline constexpr double kActivityTol = 1e-9;

struct SecondStageSolution {
  Vector y;
  std::vector<Activity> active;
  double residual = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
  bool strict_complementarity = true;
};

inline SecondStageSolution solve(const Scenario& sc, const Vector& x,
                                 double tol = boxvi::kDefaultTol,
                                 int max_iter = boxvi::kDefaultMaxIter) {
  if (sc.L.cols() != x.size()) {
    throw std::invalid_argument("second_stage::solve: x dimension mismatch");
  }
  BoxLvi p{sc.M, sc.L * x + sc.h2, sc.l, sc.u};
  const boxvi::BoxLviSolution inner = boxvi::solve(p, tol, max_iter);

  SecondStageSolution out;
  out.y = inner.z;
  out.residual = inner.residual;
  out.iterations = inner.iterations;
  out.status = inner.status;

  const Vector w = out.y - (sc.M * out.y + p.q);
  out.active.resize(static_cast<std::size_t>(out.y.size()));
  for (Eigen::Index i = 0; i < out.y.size(); ++i) {
    if (w[i] <= sc.l[i] + kActivityTol) {
      out.active[static_cast<std::size_t>(i)] = Activity::Lower;
    } else if (w[i] >= sc.u[i] - kActivityTol) {
      out.active[static_cast<std::size_t>(i)] = Activity::Upper;
    } else {
      out.active[static_cast<std::size_t>(i)] = Activity::Interior;
    }
    if (std::abs(w[i] - sc.l[i]) <= kActivityTol || std::abs(w[i] - sc.u[i]) <= kActivityTol) {
      out.strict_complementarity = false;
    }
  }
  return out;
}

// Jacobian selection d/dx y(x, xi) for the activity pattern in sol. Rows of
// coordinates at active bounds are zero; the map is locally constant there.
inline Matrix jacobian(const Scenario& sc, const Vector& x, const SecondStageSolution& sol) {
  if (sol.status != SolveStatus::Converged) {
    throw std::invalid_argument("second_stage::jacobian: needs a converged solution");
  }
  if (sc.L.cols() != x.size() || sol.y.size() != sc.M.rows()) {
    throw std::invalid_argument("second_stage::jacobian: dimension mismatch");
  }
  const Eigen::Index m = sol.y.size();

  // W = I - D + D M, rows picked like the Newton Jacobian in boxvi.
  Matrix w(m, m);
  Matrix dl(m, x.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    if (sol.active[static_cast<std::size_t>(i)] == Activity::Interior) {
      w.row(i) = sc.M.row(i);
      dl.row(i) = sc.L.row(i);
    } else {
      w.row(i).setZero();
      w(i, i) = 1.0;
      dl.row(i).setZero();
    }
  }
  Eigen::FullPivLU<Matrix> lu(w);
  if (!lu.isInvertible()) {
    // Cannot happen when sym(M) is positive definite; reported anyway.
    throw std::runtime_error("second_stage::jacobian: I - D + DM is singular");
  }
  return -lu.solve(dl);
}

// True iff the scenario VI at x has a solution the inner solver can reach
// within budget. On certified instances this holds for every x.
inline bool feasible(const Scenario& sc, const Vector& x,
                     double tol = boxvi::kDefaultTol,
                     int max_iter = boxvi::kDefaultMaxIter) {
  try {
    return solve(sc, x, tol, max_iter).status == SolveStatus::Converged;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace svi2::second_stage
