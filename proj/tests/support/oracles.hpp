#pragma once

// Reference computations used only by tests. Each one takes a different route
// from the library code it checks: eigenvalues instead of Cholesky, explicit
// selection matrices instead of index gathering, the pre-Woodbury posterior
// instead of the information form, forward propagation instead of precision
// assembly, bitmask enumeration instead of combination lists.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "senssched/block_linalg.hpp"
#include "senssched/process_models.hpp"
#include "senssched/sensing.hpp"

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double min_eigenvalue(const MatrixXd &m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// log det through the eigenvalues; NaN when the matrix is not positive definite.
inline double logdet_eig(const MatrixXd &m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const VectorXd ev = eig.eigenvalues();
  if (ev.minCoeff() <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return ev.array().log().sum();
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline MatrixXd random_matrix(std::mt19937_64 &rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m(i) = normal(rng);
  return m;
}

inline MatrixXd random_spd(std::mt19937_64 &rng, Index n, double shift = 0.5) {
  const MatrixXd w = random_matrix(rng, n, n);
  return w * w.transpose() / static_cast<double>(n) + shift * MatrixXd::Identity(n, n);
}

/// SPD block-tridiagonal matrix L L^T from a random lower block-bidiagonal L.
inline senssched::BlockTridiagonalMatrix random_spd_block_tridiagonal(
    std::mt19937_64 &rng, const std::vector<Index> &dims) {
  const std::size_t K = dims.size();
  std::vector<MatrixXd> Ld(K);
  std::vector<MatrixXd> Ls(K);  // Ls[k] is block (k, k-1)
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  for (std::size_t k = 0; k < K; ++k) {
    Ld[k] = random_matrix(rng, dims[k], dims[k], 0.5).triangularView<Eigen::StrictlyLower>();
    for (Index i = 0; i < dims[k]; ++i) Ld[k](i, i) = pos(rng);
    if (k > 0) Ls[k] = random_matrix(rng, dims[k], dims[k - 1], 0.7);
  }
  std::vector<MatrixXd> diag(K);
  std::vector<MatrixXd> upper(K == 0 ? 0 : K - 1);
  for (std::size_t k = 0; k < K; ++k) {
    diag[k] = Ld[k] * Ld[k].transpose();
    if (k > 0) diag[k] += Ls[k] * Ls[k].transpose();
    if (k + 1 < K) upper[k] = Ld[k] * Ls[k + 1].transpose();
  }
  return senssched::BlockTridiagonalMatrix(std::move(diag), std::move(upper));
}

/// Dense covariance of x_{k+1} = A x_k + w_k by forward propagation, with
/// cross-covariances Cov(x_j, x_k) = A^{j-k} Sigma_k for j > k.
inline MatrixXd propagate_gauss_markov(const MatrixXd &A, const MatrixXd &Q, const MatrixXd &Sigma0,
                                       std::size_t K) {
  const Index n = A.rows();
  std::vector<MatrixXd> marg(K);
  marg[0] = Sigma0;
  for (std::size_t k = 1; k < K; ++k) marg[k] = A * marg[k - 1] * A.transpose() + Q;
  MatrixXd cov(n * static_cast<Index>(K), n * static_cast<Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    MatrixXd cross = marg[k];
    for (std::size_t j = k; j < K; ++j) {
      cov.block(static_cast<Index>(j) * n, static_cast<Index>(k) * n, n, n) = cross;
      cov.block(static_cast<Index>(k) * n, static_cast<Index>(j) * n, n, n) = cross.transpose();
      cross = A * cross;
    }
  }
  return cov;
}

/// Explicit 0/1 selection matrix S_k: one identity block per selected sensor,
/// picking its rows out of the full stacked measurement of all m sensors.
inline MatrixXd selection_matrix(const senssched::SensorSuite &suite, const std::vector<int> &set) {
  Index total = 0;
  std::vector<Index> offset;
  for (const auto &s : suite.sensors()) {
    offset.push_back(total);
    total += s.output_dim();
  }
  Index rows = 0;
  for (int i : set) rows += suite[i].output_dim();
  MatrixXd S = MatrixXd::Zero(rows, total);
  Index r = 0;
  for (int i : set) {
    const auto p = suite[i].output_dim();
    S.block(r, offset[i], p, p).setIdentity();
    r += p;
  }
  return S;
}

/// Full (all m sensors) Jacobian G(x) and noise covariance of one step.
inline MatrixXd full_jacobian(const senssched::SensorSuite &suite, const VectorXd &x) {
  Index total = 0;
  for (const auto &s : suite.sensors()) total += s.output_dim();
  MatrixXd G(total, x.size());
  Index r = 0;
  for (const auto &s : suite.sensors()) {
    G.middleRows(r, s.output_dim()) = s.jacobian(x);
    r += s.output_dim();
  }
  return G;
}

inline MatrixXd full_noise(const senssched::SensorSuite &suite, std::size_t k) {
  Index total = 0;
  for (const auto &s : suite.sensors()) total += s.output_dim();
  MatrixXd R = MatrixXd::Zero(total, total);
  Index r = 0;
  for (const auto &s : suite.sensors()) {
    R.block(r, r, s.output_dim(), s.output_dim()) = s.noise_cov(k);
    r += s.output_dim();
  }
  return R;
}

/// Dense C(x) = blockdiag(S_k G(x_k)) and S Sigma(v) S^T from explicit selections.
inline std::pair<MatrixXd, MatrixXd> explicit_measurement_model(const senssched::SensorSuite &suite,
                                                                const senssched::Schedule &sched,
                                                                const VectorXd &lin) {
  const Index n = suite.state_dim();
  const std::size_t K = sched.horizon();
  std::vector<MatrixXd> Cb;
  std::vector<MatrixXd> Rb;
  Index rows = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const MatrixXd S = selection_matrix(suite, sched.set(k));
    Cb.push_back(S * full_jacobian(suite, lin.segment(static_cast<Index>(k) * n, n)));
    Rb.push_back(S * full_noise(suite, k) * S.transpose());
    rows += S.rows();
  }
  MatrixXd C = MatrixXd::Zero(rows, n * static_cast<Index>(K));
  MatrixXd R = MatrixXd::Zero(rows, rows);
  Index r = 0;
  for (std::size_t k = 0; k < K; ++k) {
    C.block(r, static_cast<Index>(k) * n, Cb[k].rows(), n) = Cb[k];
    R.block(r, r, Rb[k].rows(), Rb[k].rows()) = Rb[k];
    r += Cb[k].rows();
  }
  return {C, R};
}

/// Posterior covariance Sigma - Sigma C^T (C Sigma C^T + R)^{-1} C Sigma.
inline MatrixXd posterior_long_form(const MatrixXd &Sigma, const MatrixXd &C, const MatrixXd &R) {
  if (C.rows() == 0) return Sigma;
  const MatrixXd innov = C * Sigma * C.transpose() + R;
  const MatrixXd gain = Sigma * C.transpose() * innov.fullPivLu().inverse();
  const MatrixXd post = Sigma - gain * C * Sigma;
  return 0.5 * (post + post.transpose());
}

/// H(x | schedule) through the long-form posterior and eigenvalue log-det.
inline double entropy_long_form(const senssched::GaussianPrior &prior,
                                const senssched::SensorSuite &suite,
                                const senssched::Schedule &sched, const VectorXd &lin) {
  const auto [C, R] = explicit_measurement_model(suite, sched, lin);
  const MatrixXd Sigma = prior.dense_covariance();
  const MatrixXd post = posterior_long_form(Sigma, C, R);
  return 0.5 * (static_cast<double>(post.rows()) * senssched::kLog2PiE + logdet_eig(post));
}

/// Central finite-difference Jacobian.
inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd &)> &g, const VectorXd &x,
                            double h = 1e-6) {
  const VectorXd g0 = g(x);
  MatrixXd J(g0.size(), x.size());
  for (Index j = 0; j < x.size(); ++j) {
    VectorXd xp = x;
    VectorXd xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (g(xp) - g(xm)) / (2.0 * h);
  }
  return J;
}

/// All schedules with |S_k| <= budgets[k] (or == when exact), by bitmask.
inline std::vector<senssched::Schedule> enumerate_bitmask(std::size_t m, const std::vector<int> &budgets,
                                                          bool exact) {
  std::vector<std::vector<std::vector<int>>> per_step;
  for (int b : budgets) {
    std::vector<std::vector<int>> sets;
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
      const int bits = __builtin_popcount(mask);
      if (bits > b || (exact && bits != b)) continue;
      std::vector<int> s;
      for (std::size_t i = 0; i < m; ++i) {
        if (mask & (1u << i)) s.push_back(static_cast<int>(i));
      }
      sets.push_back(s);
    }
    per_step.push_back(sets);
  }
  std::vector<senssched::Schedule> out;
  std::vector<std::vector<int>> current(budgets.size());
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == budgets.size()) {
      out.emplace_back(current, budgets, m);
      return;
    }
    for (const auto &s : per_step[k]) {
      current[k] = s;
      rec(k + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace oracle
