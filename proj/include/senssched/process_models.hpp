#pragma once

#include <optional>
#include <variant>

#include "senssched/block_linalg.hpp"

namespace senssched {

struct CovarianceSparse {
  BlockTridiagonalMatrix matrix;
};
struct PrecisionSparse {
  BlockTridiagonalMatrix matrix;
};
struct CovarianceDense {
  MatrixXd matrix;
};
struct PrecisionDense {
  MatrixXd matrix;
};

using PriorForm =
    std::variant<CovarianceSparse, PrecisionSparse, CovarianceDense, PrecisionDense>;

enum class PriorFormKind { covariance_sparse, precision_sparse, covariance_dense, precision_dense };

/*
 * Gaussian prior over the batch state x_{1:K} (K stacked n-vectors), stored
 * either as a covariance or a precision, block-tridiagonal or dense.
 * The stored matrix is checked for positive definiteness on construction.
 */
class GaussianPrior {
 public:
  GaussianPrior(Index state_dim, std::size_t horizon, VectorXd mean, PriorForm form);

  Index state_dim() const { return n_; }
  std::size_t horizon() const { return K_; }
  Index batch_dim() const { return n_ * static_cast<Index>(K_); }
  const VectorXd &mean() const { return mean_; }
  const PriorForm &form() const { return form_; }
  PriorFormKind kind() const;

  bool is_sparse() const;
  bool has_precision() const;
  bool has_covariance() const;

  /// log det of the stored matrix (covariance or precision as stored).
  double stored_logdet() const { return stored_logdet_; }
  /// log det of the covariance, regardless of how it is stored.
  double covariance_logdet() const;

  /// Dense assembly of the stored matrix.
  MatrixXd stored_dense() const;
  /// Dense covariance / precision; inverts densely when the other form is stored.
  MatrixXd dense_covariance() const;
  MatrixXd dense_precision() const;

 private:
  Index n_;
  std::size_t K_;
  VectorXd mean_;
  PriorForm form_;
  double stored_logdet_ = 0.0;
};

/// Same Gaussian with the stored matrix assembled densely (same covariance or
/// precision role). Used to exercise the dense regime of a sparse scenario.
GaussianPrior densify(const GaussianPrior &prior);

/// Same Gaussian stored in the opposite role (covariance <-> precision), dense.
GaussianPrior convert_dense(const GaussianPrior &prior);

/// Stationary block-tridiagonal covariance: var*I on the diagonal blocks and
/// corr*var*I on the first off-diagonal blocks.
GaussianPrior build_tracking_prior(Index n, std::size_t K, double marginal_var,
                                   double neighbor_corr,
                                   std::optional<VectorXd> mean = std::nullopt);

/*
 * Joint precision of x_{k+1} = A x_k + w_k, w_k ~ N(0, Q), x_1 ~ N(mu0, Sigma0):
 *
 *   J_1 = Sigma0^{-1} + A^T Q^{-1} A
 *   J_k = Q^{-1} + A^T Q^{-1} A        (1 < k < K)
 *   J_K = Q^{-1}                       (Sigma0^{-1} when K = 1)
 *   upper off-diagonal blocks: -A^T Q^{-1}
 *
 * Mean propagates as mu_{k+1} = A mu_k.
 */
GaussianPrior build_gauss_markov_prior(const MatrixXd &A, const MatrixXd &Q,
                                       const MatrixXd &Sigma0, const VectorXd &mu0,
                                       std::size_t K);

/// Differential entropy 0.5 * (nK ln(2 pi e) + logdet Sigma), in nats.
double prior_entropy(const GaussianPrior &prior);

/// ln(2 pi e).
inline constexpr double kLog2PiE = 2.8378770664093454836;

}  // namespace senssched
