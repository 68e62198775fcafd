#include "senssched/process_models.hpp"

#include <string>

#include "senssched/errors.hpp"

namespace senssched {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

MatrixXd dense_inverse_spd(const MatrixXd &m) {
  const auto llt = checked_llt(m);
  MatrixXd inv = llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

void check_square(const MatrixXd &m, Index n, const char *name) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionMismatch(std::string(name) + " must be " + std::to_string(n) +
                            "x" + std::to_string(n));
  }
}

}  // namespace

GaussianPrior::GaussianPrior(Index state_dim, std::size_t horizon, VectorXd mean,
                             PriorForm form)
    : n_(state_dim), K_(horizon), mean_(std::move(mean)), form_(std::move(form)) {
  if (n_ <= 0 || K_ == 0) {
    throw InvalidParams("prior: state dimension and horizon must be positive");
  }
  if (mean_.size() != batch_dim()) {
    throw DimensionMismatch("prior: mean has length " + std::to_string(mean_.size()) +
                            ", expected " + std::to_string(batch_dim()));
  }
  stored_logdet_ = std::visit(
      overloaded{
          [&](const CovarianceSparse &f) {
            if (f.matrix.num_blocks() != K_ || f.matrix.uniform_block_dim() != n_) {
              throw DimensionMismatch("prior: covariance block layout mismatch");
            }
            return logdet_block_tridiagonal(f.matrix);
          },
          [&](const PrecisionSparse &f) {
            if (f.matrix.num_blocks() != K_ || f.matrix.uniform_block_dim() != n_) {
              throw DimensionMismatch("prior: precision block layout mismatch");
            }
            return logdet_block_tridiagonal(f.matrix);
          },
          [&](const CovarianceDense &f) {
            check_square(f.matrix, batch_dim(), "prior covariance");
            return logdet_dense(0.5 * (f.matrix + f.matrix.transpose()));
          },
          [&](const PrecisionDense &f) {
            check_square(f.matrix, batch_dim(), "prior precision");
            return logdet_dense(0.5 * (f.matrix + f.matrix.transpose()));
          },
      },
      form_);
  // Dense forms are symmetrized once here; sparse ones on block construction.
  if (auto *c = std::get_if<CovarianceDense>(&form_)) {
    c->matrix = 0.5 * (c->matrix + c->matrix.transpose()).eval();
  } else if (auto *p = std::get_if<PrecisionDense>(&form_)) {
    p->matrix = 0.5 * (p->matrix + p->matrix.transpose()).eval();
  }
}

PriorFormKind GaussianPrior::kind() const {
  return static_cast<PriorFormKind>(form_.index());
}

bool GaussianPrior::is_sparse() const {
  return kind() == PriorFormKind::covariance_sparse ||
         kind() == PriorFormKind::precision_sparse;
}

bool GaussianPrior::has_precision() const {
  return kind() == PriorFormKind::precision_sparse ||
         kind() == PriorFormKind::precision_dense;
}

bool GaussianPrior::has_covariance() const { return !has_precision(); }

double GaussianPrior::covariance_logdet() const {
  return has_precision() ? -stored_logdet_ : stored_logdet_;
}

MatrixXd GaussianPrior::stored_dense() const {
  return std::visit(overloaded{
                        [](const CovarianceSparse &f) { return f.matrix.to_dense(); },
                        [](const PrecisionSparse &f) { return f.matrix.to_dense(); },
                        [](const CovarianceDense &f) { return f.matrix; },
                        [](const PrecisionDense &f) { return f.matrix; },
                    },
                    form_);
}

MatrixXd GaussianPrior::dense_covariance() const {
  return has_covariance() ? stored_dense() : dense_inverse_spd(stored_dense());
}

MatrixXd GaussianPrior::dense_precision() const {
  return has_precision() ? stored_dense() : dense_inverse_spd(stored_dense());
}

GaussianPrior densify(const GaussianPrior &prior) {
  if (prior.has_precision()) {
    return GaussianPrior(prior.state_dim(), prior.horizon(), prior.mean(),
                         PrecisionDense{prior.stored_dense()});
  }
  return GaussianPrior(prior.state_dim(), prior.horizon(), prior.mean(),
                       CovarianceDense{prior.stored_dense()});
}

GaussianPrior convert_dense(const GaussianPrior &prior) {
  if (prior.has_precision()) {
    return GaussianPrior(prior.state_dim(), prior.horizon(), prior.mean(),
                         CovarianceDense{prior.dense_covariance()});
  }
  return GaussianPrior(prior.state_dim(), prior.horizon(), prior.mean(),
                       PrecisionDense{prior.dense_precision()});
}

GaussianPrior build_tracking_prior(Index n, std::size_t K, double marginal_var,
                                   double neighbor_corr, std::optional<VectorXd> mean) {
  if (n <= 0 || K == 0) {
    throw InvalidParams("tracking prior: n and K must be positive");
  }
  if (!(marginal_var > 0.0)) {
    throw InvalidParams("tracking prior: marginal_var must be positive");
  }
  if (!(neighbor_corr > -1.0 && neighbor_corr < 1.0)) {
    throw InvalidParams("tracking prior: neighbor_corr must lie in (-1, 1)");
  }
  const MatrixXd I = MatrixXd::Identity(n, n);
  auto cov = BlockTridiagonalMatrix::uniform(marginal_var * I,
                                             neighbor_corr * marginal_var * I, K);
  VectorXd mu = mean.value_or(VectorXd::Zero(n * static_cast<Index>(K)));
  return GaussianPrior(n, K, std::move(mu), CovarianceSparse{std::move(cov)});
}

GaussianPrior build_gauss_markov_prior(const MatrixXd &A, const MatrixXd &Q,
                                       const MatrixXd &Sigma0, const VectorXd &mu0,
                                       std::size_t K) {
  const Index n = A.rows();
  if (n == 0 || K == 0) {
    throw InvalidParams("gauss-markov prior: n and K must be positive");
  }
  check_square(A, n, "A");
  check_square(Q, n, "Q");
  check_square(Sigma0, n, "Sigma0");
  if (mu0.size() != n) {
    throw DimensionMismatch("gauss-markov prior: mu0 must have length n");
  }
  const MatrixXd Qinv = dense_inverse_spd(0.5 * (Q + Q.transpose()));
  const MatrixXd S0inv = dense_inverse_spd(0.5 * (Sigma0 + Sigma0.transpose()));
  const MatrixXd AtQinvA = A.transpose() * Qinv * A;
  const MatrixXd upper = -A.transpose() * Qinv;

  std::vector<MatrixXd> diag(K);
  for (std::size_t k = 0; k < K; ++k) {
    diag[k] = (k == 0) ? S0inv : Qinv;
    if (k + 1 < K) {
      diag[k] += AtQinvA;
    }
  }
  std::vector<MatrixXd> off(K - 1, upper);

  VectorXd mean(n * static_cast<Index>(K));
  VectorXd mu = mu0;
  for (std::size_t k = 0; k < K; ++k) {
    mean.segment(static_cast<Index>(k) * n, n) = mu;
    mu = A * mu;
  }
  return GaussianPrior(n, K, std::move(mean),
                       PrecisionSparse{BlockTridiagonalMatrix(std::move(diag), std::move(off))});
}

double prior_entropy(const GaussianPrior &prior) {
  return 0.5 * (static_cast<double>(prior.batch_dim()) * kLog2PiE +
                prior.covariance_logdet());
}

}  // namespace senssched
