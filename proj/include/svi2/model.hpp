#pragma once

// Model-level operations: the componentwise median operator, the
// first-stage natural-map residual, and strong-monotonicity certification
// of an instance via eigenvalues of the per-scenario block matrices.

#include "svi2/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace svi2 {

// mid(v, lo, up)_i = median(v_i, lo_i, up_i); the componentwise clamp.
inline Vector mid(const Vector& v, const Vector& lo, const Vector& up) {
  if (v.size() != lo.size() || v.size() != up.size()) {
    throw std::invalid_argument("mid: dimension mismatch");
  }
  return v.cwiseMax(lo).cwiseMin(up);
}

// First-stage residual at x given per-scenario second-stage solutions y_j:
//
//   res = || x - mid(x - A x - sum_j weight_j B_j y_j - h1, a, b) ||
//
// Zero exactly when x solves the SAA first-stage VI for the supplied y.
// With uniform weights the sum is the plain 1/N average.
inline double first_stage_residual(const TwoStageInstance& inst, const Vector& x,
                                   const std::vector<Vector>& y) {
  if (x.size() != inst.n) {
    throw std::invalid_argument("first_stage_residual: x must have length n");
  }
  if (y.size() != inst.scenarios.size()) {
    throw std::invalid_argument("first_stage_residual: need one y per scenario");
  }
  Vector coupling = Vector::Zero(inst.n);
  for (std::size_t j = 0; j < inst.scenarios.size(); ++j) {
    if (y[j].size() != inst.m) {
      throw std::invalid_argument("first_stage_residual: y must have length m");
    }
    coupling.noalias() += inst.scenarios[j].weight * (inst.scenarios[j].B * y[j]);
  }
  const Vector inner = x - (inst.A * x + coupling + inst.h1);
  return (x - mid(inner, inst.a, inst.b)).norm();
}

// Per-scenario sampled values of the strong-monotonicity modulus. kappa is
// the instance-wide certified modulus, floored at zero; the certificate only
// speaks for the sampled scenarios, not the full support of xi.
struct MonotonicityCertificate {
  std::vector<double> min_eig_sym;  // lambda_min(sym [[A,B_j],[L_j,M_j]]) per scenario
  double kappa = 0.0;
  bool certified = false;
};

// Certifies z' G_j z >= kappa ||z||^2 for every sampled scenario, where
// G_j = [[A, B_j], [L_j, M_j]], via lambda_min of the symmetric part.
inline MonotonicityCertificate certify_strong_monotonicity(const TwoStageInstance& inst) {
  MonotonicityCertificate cert;
  cert.min_eig_sym.reserve(inst.scenarios.size());
  const int k = inst.n + inst.m;
  Matrix block(k, k);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < inst.scenarios.size(); ++j) {
    const Scenario& sc = inst.scenarios[j];
    block.topLeftCorner(inst.n, inst.n) = inst.A;
    block.topRightCorner(inst.n, inst.m) = sc.B;
    block.bottomLeftCorner(inst.m, inst.n) = sc.L;
    block.bottomRightCorner(inst.m, inst.m) = sc.M;
    const Matrix sym = 0.5 * (block + block.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) {
      throw std::runtime_error("certify_strong_monotonicity: eigensolver failed on scenario " +
                               std::to_string(j));
    }
    const double lam = eig.eigenvalues().minCoeff();
    cert.min_eig_sym.push_back(lam);
    worst = std::min(worst, lam);
  }
  cert.kappa = std::max(worst, 0.0);
  cert.certified = worst > 0.0;
  return cert;
}

}  // namespace svi2
