#pragma once

// Solver for box-constrained linear VIs  0 in Hz + q + N_[lo,up](z).
//
// z solves the VI iff it is a fixed point of the natural map,
// F(z) = z - mid(z - (Hz + q), lo, up) = 0, so we run a damped semismooth
// Newton method on F. At a kink (a component of z - (Hz+q) exactly on a
// bound) the bound-active Jacobian branch is selected, which keeps the
// method deterministic; any element of the generalized Jacobian is
// admissible there.
//
// brute_force enumerates all 3^k active-set assignments and is the test
// oracle; it is only meant for small k.

#include "svi2/model.hpp"
#include "svi2/types.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace svi2::boxvi {

enum class SolveStatus { Converged, MaxIter, Singular };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::Singular: return "Singular";
  }
  return "?";
}

struct BoxLviSolution {
  Vector z;
  double residual = 0.0;  // ||F(z)|| at the returned point
  int iterations = 0;     // accepted Newton steps
  SolveStatus status = SolveStatus::MaxIter;
  std::vector<double> residual_history;  // ||F|| at z0 and after each step
};

inline constexpr double kDefaultTol = 1e-10;
inline constexpr int kDefaultMaxIter = 200;

inline Vector natural_map(const BoxLvi& p, const Vector& z) {
  return z - mid(z - (p.H * z + p.q), p.lo, p.up);
}

inline Vector default_start(const BoxLvi& p) {
  return mid(Vector::Zero(p.dim()), p.lo, p.up);
}

// Damped semismooth Newton. Expects the symmetric part of H to be positive
// definite (the caller certifies; nothing is verified here). Line search is
// backtracking on ||F|| with factor 1/2 and Armijo constant 1e-4, so the
// residual strictly decreases along accepted steps.
inline BoxLviSolution solve(const BoxLvi& p, const Vector& z0,
                            double tol = kDefaultTol, int max_iter = kDefaultMaxIter) {
  p.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("boxvi::solve: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("boxvi::solve: max_iter must be >= 1");
  if (z0.size() != p.dim()) throw std::invalid_argument("boxvi::solve: z0 dimension mismatch");

  const Eigen::Index k = p.dim();
  constexpr double armijo = 1e-4;
  constexpr double min_step = 1e-14;

  BoxLviSolution out;
  out.z = z0;
  Vector f = natural_map(p, out.z);
  double res = f.norm();
  out.residual_history.push_back(res);

  Matrix jac(k, k);
  for (out.iterations = 0; ; ) {
    if (res <= tol) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (out.iterations >= max_iter) {
      out.status = SolveStatus::MaxIter;
      break;
    }

    // Generalized Jacobian I - D + D*H: row i is H.row(i) where the inner
    // point lies strictly inside the box, the identity row otherwise.
    const Vector inner = out.z - (p.H * out.z + p.q);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (inner[i] > p.lo[i] && inner[i] < p.up[i]) {
        jac.row(i) = p.H.row(i);
      } else {
        jac.row(i).setZero();
        jac(i, i) = 1.0;
      }
    }

    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) {
      out.status = SolveStatus::Singular;
      break;
    }
    const Vector dz = lu.solve(-f);

    double step = 1.0;
    Vector z_try;
    Vector f_try;
    double res_try = 0.0;
    bool accepted = false;
    while (step >= min_step) {
      z_try = out.z + step * dz;
      f_try = natural_map(p, z_try);
      res_try = f_try.norm();
      if (res_try <= (1.0 - armijo * step) * res) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent along the Newton direction; give back the best iterate.
      out.status = SolveStatus::MaxIter;
      break;
    }

    out.z = std::move(z_try);
    f = std::move(f_try);
    res = res_try;
    out.residual_history.push_back(res);
    ++out.iterations;
  }

  out.residual = res;
  return out;
}

inline BoxLviSolution solve(const BoxLvi& p, double tol = kDefaultTol,
                            int max_iter = kDefaultMaxIter) {
  return solve(p, default_start(p), tol, max_iter);
}

// Active-set enumeration oracle. Each coordinate is assigned to
// {at lo, interior, at up}; bound coordinates are fixed, the interior block
// is solved exactly, and the candidate is accepted iff interior components
// lie strictly inside the box and the residual s = Hz + q satisfies
// s_i >= 0 at lower bounds and s_i <= 0 at upper bounds (within 1e-10).
// Requires the symmetric part of H positive definite so that the solution
// is unique.
inline Vector brute_force(const BoxLvi& p) {
  p.validate();
  const int k = static_cast<int>(p.dim());
  if (k > 12) {
    throw std::invalid_argument("boxvi::brute_force: dimension must be <= 12");
  }

  constexpr double bound_tol = 1e-10;
  constexpr double agree_tol = 1e-8;

  std::vector<Vector> accepted;
  std::vector<int> state(static_cast<std::size_t>(k), 0);  // 0 = lo, 1 = interior, 2 = up

  long total = 1;
  for (int i = 0; i < k; ++i) total *= 3;

  for (long code = 0; code < total; ++code) {
    long rest = code;
    std::vector<int> interior;
    for (int i = 0; i < k; ++i) {
      state[static_cast<std::size_t>(i)] = static_cast<int>(rest % 3);
      rest /= 3;
      if (state[static_cast<std::size_t>(i)] == 1) interior.push_back(i);
    }

    Vector z(k);
    for (int i = 0; i < k; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      z[i] = (s == 0) ? p.lo[i] : (s == 2) ? p.up[i] : 0.0;
    }

    const int ni = static_cast<int>(interior.size());
    if (ni > 0) {
      Matrix hii(ni, ni);
      Vector rhs(ni);
      for (int r = 0; r < ni; ++r) {
        double fixed = 0.0;
        for (int c2 = 0; c2 < k; ++c2) {
          if (state[static_cast<std::size_t>(c2)] != 1) fixed += p.H(interior[r], c2) * z[c2];
        }
        rhs[r] = -p.q[interior[r]] - fixed;
        for (int c = 0; c < ni; ++c) hii(r, c) = p.H(interior[r], interior[c]);
      }
      Eigen::FullPivLU<Matrix> lu(hii);
      if (!lu.isInvertible()) continue;
      const Vector zi = lu.solve(rhs);
      for (int r = 0; r < ni; ++r) z[interior[r]] = zi[r];
    }

    const Vector s = p.H * z + p.q;
    bool ok = true;
    for (int i = 0; i < k && ok; ++i) {
      switch (state[static_cast<std::size_t>(i)]) {
        case 0: ok = s[i] >= -bound_tol; break;
        case 2: ok = s[i] <= bound_tol; break;
        default: ok = z[i] > p.lo[i] && z[i] < p.up[i]; break;
      }
    }
    if (!ok) continue;

    for (const Vector& prev : accepted) {
      if ((prev - z).lpNorm<Eigen::Infinity>() > agree_tol) {
        throw std::runtime_error("boxvi::brute_force: multiple distinct solutions; "
                                 "H is not strongly monotone");
      }
    }
    accepted.push_back(z);
  }

  if (accepted.empty()) {
    throw std::runtime_error("boxvi::brute_force: no active set satisfies the VI conditions");
  }
  return accepted.front();
}

}  // namespace svi2::boxvi
