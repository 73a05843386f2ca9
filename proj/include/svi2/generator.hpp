#pragma once

// Seeded instance generator. The construction guarantees the per-scenario
// block matrices [[A, B(xi)], [L(xi), M(xi)]] are strongly monotone:
//
//   * H1 is SPD with spectrum in [1,2]; H2 = (P1'+P2) H1^{-1} (P1+P2') / 4
//     + alpha I, so 4 H2 - (P1+P2') H1^{-1} (P1+P2') = 4 alpha I is PD and
//     A = [[H1, P1], [P2, H2]] is positive definite.
//   * The Q-blocks of M(xi) carry the diagonal shift
//     xi + (n+m)^2 / lambda_min(A+A'), which dominates the coupling term
//     in the Schur complement and leaves a margin of at least 2 alpha.
//
// Draw order (one mt19937_64 stream per instance, fixed for reproducibility):
//   structural:  H1 basis normals (row-major) -> H1 eigenvalues U[1,2]
//                -> P1, P2 entries U[-1,1] row-major
//                -> Sbar11, Sbar12, Sbar21, Sbar22, Obar1, Obar2 row-major
//                -> Qbar1 then Qbar2, upper triangle row-major with the
//                   diagonal drawn from (m-1+alpha, m+alpha]
//                -> b U[1,50], lbar U[0,1], ubar U[3,50], h1 U[-5,5]
//   scenario j:  xi_1..xi_10 U[0,1], then m entries of h2 U[-1,1]
//
// Changing any draw above is a breaking change for seeded fixtures.

#include "svi2/rng.hpp"
#include "svi2/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace svi2::generator {

struct GeneratorConfig {
  int n1 = 3;
  int n2 = 3;
  int m1 = 5;
  int m2 = 5;
  double alpha = 1.0;  // monotonicity margin
  int n_scenarios = 10;
  std::uint64_t seed = 0;

  int n() const { return n1 + n2; }
  int m() const { return m1 + m2; }

  void validate() const {
    if (n1 < 1 || n2 < 1 || m1 < 1 || m2 < 1) {
      throw std::invalid_argument("GeneratorConfig: block dimensions must be >= 1");
    }
    if (!(alpha > 0.0)) throw std::invalid_argument("GeneratorConfig: alpha must be positive");
    if (n_scenarios < 1) throw std::invalid_argument("GeneratorConfig: need at least one scenario");
  }
};

// Scenario-independent data; one draw per replication in the experiments.
struct Structural {
  GeneratorConfig cfg;
  Matrix A;
  Matrix Sbar11, Sbar12, Sbar21, Sbar22;
  Matrix Obar1, Obar2;
  Matrix Qbar1, Qbar2;
  Vector a, b;
  Vector lbar, ubar;
  Vector h1;
  double diag_shift = 0.0;  // (n+m)^2 / lambda_min(A + A')
};

namespace detail {

inline Matrix random_entries(Rng& rng, int rows, int cols, double lo, double hi) {
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out(i, j) = rng.uniform(lo, hi);
  }
  return out;
}

// SPD matrix Q diag(lam) Q' with Q orthogonal from a sign-fixed QR of a
// standard-normal matrix and lam uniform in [1,2].
inline Matrix random_spd(Rng& rng, int k) {
  Matrix g(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < k; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  Vector lam(k);
  for (int i = 0; i < k; ++i) lam[i] = rng.uniform(1.0, 2.0);
  return q * lam.asDiagonal() * q.transpose();
}

// Symmetric, off-diagonal U[-1,1], diagonal in (m-1+alpha, m+alpha]; the
// diagonal dominance makes it PD with eigenvalues above alpha.
inline Matrix random_diag_dominant(Rng& rng, int k, double diag_lo, double diag_hi) {
  Matrix out(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      if (i == j) {
        out(i, i) = rng.uniform_open_closed(diag_lo, diag_hi);
      } else {
        const double v = rng.uniform(-1.0, 1.0);
        out(i, j) = v;
        out(j, i) = v;
      }
    }
  }
  return out;
}

inline double min_eig_sym(const Matrix& any) {
  const Matrix sym = 0.5 * (any + any.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("generator: eigensolver failed");
  }
  return eig.eigenvalues().minCoeff();
}

}  // namespace detail

inline Structural draw_structural(const GeneratorConfig& cfg, Rng& rng) {
  cfg.validate();
  const int n = cfg.n();
  const int m = cfg.m();

  Structural s;
  s.cfg = cfg;

  const Matrix h1_block = detail::random_spd(rng, cfg.n1);
  const Matrix p1 = detail::random_entries(rng, cfg.n1, cfg.n2, -1.0, 1.0);
  const Matrix p2 = detail::random_entries(rng, cfg.n2, cfg.n1, -1.0, 1.0);
  const Matrix t = p1 + p2.transpose();  // n1 x n2
  const Matrix h2_block =
      0.25 * t.transpose() * h1_block.llt().solve(t) + cfg.alpha * Matrix::Identity(cfg.n2, cfg.n2);

  s.A.resize(n, n);
  s.A.topLeftCorner(cfg.n1, cfg.n1) = h1_block;
  s.A.topRightCorner(cfg.n1, cfg.n2) = p1;
  s.A.bottomLeftCorner(cfg.n2, cfg.n1) = p2;
  s.A.bottomRightCorner(cfg.n2, cfg.n2) = h2_block;

  s.Sbar11 = detail::random_entries(rng, cfg.m1, cfg.n1, -1.0, 1.0);
  s.Sbar12 = detail::random_entries(rng, cfg.m1, cfg.n2, -1.0, 1.0);
  s.Sbar21 = detail::random_entries(rng, cfg.m2, cfg.n1, -1.0, 1.0);
  s.Sbar22 = detail::random_entries(rng, cfg.m2, cfg.n2, -1.0, 1.0);
  s.Obar1 = detail::random_entries(rng, cfg.m1, cfg.m2, -1.0, 1.0);
  s.Obar2 = detail::random_entries(rng, cfg.m2, cfg.m1, -1.0, 1.0);

  const double diag_lo = m - 1 + cfg.alpha;
  s.Qbar1 = detail::random_diag_dominant(rng, cfg.m1, diag_lo, diag_lo + 1.0);
  s.Qbar2 = detail::random_diag_dominant(rng, cfg.m2, diag_lo, diag_lo + 1.0);

  s.a = Vector::Zero(n);
  s.b.resize(n);
  for (int i = 0; i < n; ++i) s.b[i] = rng.uniform(1.0, 50.0);
  s.lbar.resize(m);
  for (int i = 0; i < m; ++i) s.lbar[i] = rng.uniform(0.0, 1.0);
  s.ubar.resize(m);
  for (int i = 0; i < m; ++i) s.ubar[i] = rng.uniform(3.0, 50.0);
  s.h1.resize(n);
  for (int i = 0; i < n; ++i) s.h1[i] = rng.uniform(-5.0, 5.0);

  const double lam_min = detail::min_eig_sym(s.A + s.A.transpose()) ;
  if (!(lam_min > 0.0)) {
    // The construction above makes A + A' PD; reaching this is a bug.
    throw std::runtime_error("generator: A + A' not positive definite");
  }
  s.diag_shift = static_cast<double>((n + m) * (n + m)) / lam_min;
  return s;
}

inline Scenario draw_scenario(const Structural& s, Rng& rng) {
  const GeneratorConfig& cfg = s.cfg;
  const int n = cfg.n();
  const int m = cfg.m();

  double xi[10];
  for (double& v : xi) v = rng.uniform01();

  Scenario sc;
  sc.h2.resize(m);
  for (int i = 0; i < m; ++i) sc.h2[i] = rng.uniform(-1.0, 1.0);

  const Matrix s11 = xi[0] * s.Sbar11;
  const Matrix s12 = xi[1] * s.Sbar12;
  const Matrix s21 = xi[2] * s.Sbar21;
  const Matrix s22 = xi[3] * s.Sbar22;

  sc.B.setZero(n, m);
  sc.B.topLeftCorner(cfg.n1, cfg.m1) = s11.transpose();
  sc.B.bottomRightCorner(cfg.n2, cfg.m2) = s22.transpose();

  sc.L.resize(m, n);
  sc.L.topLeftCorner(cfg.m1, cfg.n1) = s11;
  sc.L.topRightCorner(cfg.m1, cfg.n2) = s12;
  sc.L.bottomLeftCorner(cfg.m2, cfg.n1) = s21;
  sc.L.bottomRightCorner(cfg.m2, cfg.n2) = s22;

  sc.M.resize(m, m);
  sc.M.topLeftCorner(cfg.m1, cfg.m1) =
      s.Qbar1 + (xi[6] + s.diag_shift) * Matrix::Identity(cfg.m1, cfg.m1);
  sc.M.topRightCorner(cfg.m1, cfg.m2) = xi[4] * s.Obar1;
  sc.M.bottomLeftCorner(cfg.m2, cfg.m1) = xi[5] * s.Obar2;
  sc.M.bottomRightCorner(cfg.m2, cfg.m2) =
      s.Qbar2 + (xi[7] + s.diag_shift) * Matrix::Identity(cfg.m2, cfg.m2);

  sc.l = (1.0 + xi[8]) * s.lbar;
  sc.u = (1.0 + xi[9]) * s.ubar;
  return sc;
}

inline TwoStageInstance assemble(const Structural& s, std::vector<Scenario> scenarios) {
  if (scenarios.empty()) {
    throw std::invalid_argument("generator::assemble: need at least one scenario");
  }
  const double w = 1.0 / static_cast<double>(scenarios.size());
  for (Scenario& sc : scenarios) sc.weight = w;

  TwoStageInstance inst;
  inst.n = s.cfg.n();
  inst.m = s.cfg.m();
  inst.A = s.A;
  inst.h1 = s.h1;
  inst.a = s.a;
  inst.b = s.b;
  inst.scenarios = std::move(scenarios);
  inst.blocks = BlockDims{s.cfg.n1, s.cfg.n2, s.cfg.m1, s.cfg.m2};
  inst.validate();
  return inst;
}

inline TwoStageInstance generate(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Structural s = draw_structural(cfg, rng);
  std::vector<Scenario> scenarios;
  scenarios.reserve(static_cast<std::size_t>(cfg.n_scenarios));
  for (int j = 0; j < cfg.n_scenarios; ++j) scenarios.push_back(draw_scenario(s, rng));
  return assemble(s, std::move(scenarios));
}

// Schur-complement sufficient condition for strong monotonicity:
//   (i)  4 H2 - (P1 + P2') H1^{-1} (P1 + P2') is PD, and
//   (ii) lambda_min(M + M' - (B' + L)(A + A')^{-1} (B + L')) > 0 per scenario.
// The generated instances satisfy (ii) with margin at least 2 alpha.
struct SchurReport {
  double first_stage_margin = 0.0;
  std::vector<double> second_stage_margins;
  double min_second_stage_margin = 0.0;
  bool ok = false;
};

inline SchurReport schur_check(const TwoStageInstance& inst) {
  if (!inst.blocks) {
    throw std::invalid_argument("schur_check: instance carries no block split metadata");
  }
  const BlockDims& bd = *inst.blocks;
  if (bd.n1 + bd.n2 != inst.n || bd.m1 + bd.m2 != inst.m) {
    throw std::invalid_argument("schur_check: block split inconsistent with dimensions");
  }

  SchurReport rep;
  const Matrix h1_block = inst.A.topLeftCorner(bd.n1, bd.n1);
  const Matrix p1 = inst.A.topRightCorner(bd.n1, bd.n2);
  const Matrix p2 = inst.A.bottomLeftCorner(bd.n2, bd.n1);
  const Matrix h2_block = inst.A.bottomRightCorner(bd.n2, bd.n2);

  const Matrix t = p1 + p2.transpose();
  Eigen::FullPivLU<Matrix> h1_lu(h1_block);
  if (!h1_lu.isInvertible()) {
    rep.first_stage_margin = -std::numeric_limits<double>::infinity();
  } else {
    rep.first_stage_margin =
        detail::min_eig_sym(4.0 * h2_block - t.transpose() * h1_lu.solve(t));
  }

  const Matrix aat = inst.A + inst.A.transpose();
  const double lam_a = detail::min_eig_sym(aat);
  rep.second_stage_margins.reserve(inst.scenarios.size());
  if (!(lam_a > 0.0)) {
    // A + A' not PD: the sufficient condition already fails.
    rep.second_stage_margins.assign(inst.scenarios.size(),
                                    -std::numeric_limits<double>::infinity());
  } else {
    Eigen::LLT<Matrix> aat_llt(aat);
    for (const Scenario& sc : inst.scenarios) {
      const Matrix coupling = sc.B.transpose() + sc.L;  // m x n
      const Matrix schur = sc.M + sc.M.transpose() -
                           coupling * aat_llt.solve(coupling.transpose());
      rep.second_stage_margins.push_back(detail::min_eig_sym(schur));
    }
  }

  rep.min_second_stage_margin =
      rep.second_stage_margins.empty()
          ? -std::numeric_limits<double>::infinity()
          : *std::min_element(rep.second_stage_margins.begin(), rep.second_stage_margins.end());
  rep.ok = rep.first_stage_margin > 0.0 && rep.min_second_stage_margin > 0.0;
  return rep;
}

}  // namespace svi2::generator
