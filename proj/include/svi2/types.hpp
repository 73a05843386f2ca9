#pragma once

// Core data model for two-stage box-constrained stochastic variational
// inequalities:
//
//   first stage    -A x - E[B(xi) y(xi)] - h1      in  N_[a,b](x)
//   second stage   -M(xi) y(xi) - L(xi) x - h2(xi) in  N_[l(xi),u(xi)](y(xi))
//
// A sampled instance holds the first-stage data plus an ordered scenario
// list; the list order is canonical and every reduction iterates in it.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace svi2 {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One realization xi^j of the random data.
struct Scenario {
  Matrix B;   // n x m, couples second-stage decisions into the first stage
  Matrix L;   // m x n
  Matrix M;   // m x m
  Vector h2;  // m
  Vector l;   // m, lower bounds, l_i < u_i
  Vector u;   // m, upper bounds
  double weight = 0.0;  // probability mass; 1/N for plain SAA
};

// Block split of generator output (first stage n1+n2, second stage m1+m2).
// Needed by the Schur-complement certificate; absent on hand-built data.
struct BlockDims {
  int n1 = 0;
  int n2 = 0;
  int m1 = 0;
  int m2 = 0;
};

struct TwoStageInstance {
  int n = 0;  // first-stage dimension
  int m = 0;  // second-stage dimension
  Matrix A;   // n x n
  Vector h1;  // n
  Vector a;   // n, lower bounds, a_i < b_i
  Vector b;   // n, upper bounds
  std::vector<Scenario> scenarios;  // canonical sample order xi^1..xi^N
  std::optional<BlockDims> blocks;

  void validate() const;
};

// Generic box-constrained linear VI  0 in Hz + q + N_[lo,up](z);
// the currency of the inner solver.
struct BoxLvi {
  Matrix H;   // k x k
  Vector q;   // k
  Vector lo;  // k, lo_i < up_i
  Vector up;  // k

  Eigen::Index dim() const { return q.size(); }
  void validate() const;
};

inline void BoxLvi::validate() const {
  const auto k = q.size();
  if (H.rows() != k || H.cols() != k) {
    throw std::invalid_argument("BoxLvi: H must be square and match q");
  }
  if (lo.size() != k || up.size() != k) {
    throw std::invalid_argument("BoxLvi: bound dimensions must match q");
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(lo[i] < up[i])) {
      throw std::invalid_argument("BoxLvi: requires lo < up componentwise");
    }
  }
}

inline void TwoStageInstance::validate() const {
  if (n <= 0 || m <= 0) {
    throw std::invalid_argument("TwoStageInstance: n and m must be positive");
  }
  if (A.rows() != n || A.cols() != n) {
    throw std::invalid_argument("TwoStageInstance: A must be n x n");
  }
  if (h1.size() != n || a.size() != n || b.size() != n) {
    throw std::invalid_argument("TwoStageInstance: first-stage vectors must have length n");
  }
  for (int i = 0; i < n; ++i) {
    if (!(a[i] < b[i])) {
      throw std::invalid_argument("TwoStageInstance: requires a < b componentwise");
    }
  }
  if (scenarios.empty()) {
    throw std::invalid_argument("TwoStageInstance: scenario list is empty");
  }
  double total_weight = 0.0;
  for (std::size_t j = 0; j < scenarios.size(); ++j) {
    const Scenario& sc = scenarios[j];
    const std::string where = "scenario " + std::to_string(j);
    if (sc.B.rows() != n || sc.B.cols() != m) {
      throw std::invalid_argument("TwoStageInstance: B must be n x m in " + where);
    }
    if (sc.L.rows() != m || sc.L.cols() != n) {
      throw std::invalid_argument("TwoStageInstance: L must be m x n in " + where);
    }
    if (sc.M.rows() != m || sc.M.cols() != m) {
      throw std::invalid_argument("TwoStageInstance: M must be m x m in " + where);
    }
    if (sc.h2.size() != m || sc.l.size() != m || sc.u.size() != m) {
      throw std::invalid_argument("TwoStageInstance: second-stage vectors must have length m in " + where);
    }
    for (int i = 0; i < m; ++i) {
      if (!(sc.l[i] < sc.u[i])) {
        throw std::invalid_argument("TwoStageInstance: requires l < u componentwise in " + where);
      }
    }
    if (!(sc.weight >= 0.0 && sc.weight <= 1.0)) {
      throw std::invalid_argument("TwoStageInstance: weight must lie in [0,1] in " + where);
    }
    total_weight += sc.weight;
  }
  if (std::abs(total_weight - 1.0) > 1e-12) {
    throw std::invalid_argument("TwoStageInstance: scenario weights must sum to 1");
  }
}

}  // namespace svi2
