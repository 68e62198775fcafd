#include "senssched/entropy_oracle.hpp"

#include <cmath>
#include <string>

#include "senssched/errors.hpp"

namespace senssched {

namespace {

constexpr double kJitterTrigger = 1e-10;
constexpr double kJitter = 1e-12;

// Per-step stacked Jacobians C_k (r_k x n) and noise covariances R_k (r_k x r_k).
struct StepBlocks {
  std::vector<MatrixXd> C;
  std::vector<MatrixXd> R;
};

Index step_rows(const SensorSuite &suite, const std::vector<int> &set) {
  Index rows = 0;
  for (int i : set) rows += suite[i].output_dim();
  return rows;
}

StepBlocks blocks_from_context(const OracleContext &ctx, const Schedule &schedule) {
  const Index n = ctx.state_dim();
  StepBlocks out;
  out.C.resize(schedule.horizon());
  out.R.resize(schedule.horizon());
  for (std::size_t k = 0; k < schedule.horizon(); ++k) {
    const auto &set = schedule.set(k);
    const Index rows = step_rows(ctx.suite(), set);
    out.C[k].resize(rows, n);
    out.R[k] = MatrixXd::Zero(rows, rows);
    Index r = 0;
    for (int i : set) {
      const auto p = ctx.suite()[i].output_dim();
      out.C[k].middleRows(r, p) = ctx.jacobian(k, i);
      out.R[k].block(r, r, p, p) = ctx.suite()[i].noise_cov(k);
      r += p;
    }
  }
  return out;
}

StepBlocks blocks_at_state(const SensorSuite &suite, const Schedule &schedule,
                           const VectorXd &state) {
  const Index n = suite.state_dim();
  StepBlocks out;
  out.C.resize(schedule.horizon());
  out.R.resize(schedule.horizon());
  for (std::size_t k = 0; k < schedule.horizon(); ++k) {
    const auto &set = schedule.set(k);
    const Index rows = step_rows(suite, set);
    const VectorXd xk = state.segment(static_cast<Index>(k) * n, n);
    out.C[k].resize(rows, n);
    out.R[k] = MatrixXd::Zero(rows, rows);
    Index r = 0;
    for (int i : set) {
      const auto p = suite[i].output_dim();
      out.C[k].middleRows(r, p) = suite[i].jacobian(xk);
      out.R[k].block(r, r, p, p) = suite[i].noise_cov(k);
      r += p;
    }
  }
  return out;
}

// C_k^T R_k^{-1} C_k for every step.
std::vector<MatrixXd> step_information(const StepBlocks &blocks, Index n) {
  std::vector<MatrixXd> info(blocks.C.size());
  for (std::size_t k = 0; k < blocks.C.size(); ++k) {
    if (blocks.C[k].rows() == 0) {
      info[k] = MatrixXd::Zero(n, n);
      continue;
    }
    const Eigen::LLT<MatrixXd> llt(blocks.R[k]);
    const MatrixXd whitened = llt.matrixL().solve(blocks.C[k]);
    info[k] = whitened.transpose() * whitened;
  }
  return info;
}

// R + C Sigma C^T with Sigma block tridiagonal; blocks sized by selected rows.
BlockTridiagonalMatrix innovation_sparse(const BlockTridiagonalMatrix &cov,
                                         const StepBlocks &blocks, double jitter) {
  const std::size_t K = blocks.C.size();
  std::vector<MatrixXd> diag(K);
  std::vector<MatrixXd> upper(K == 0 ? 0 : K - 1);
  for (std::size_t k = 0; k < K; ++k) {
    const MatrixXd &Ck = blocks.C[k];
    diag[k] = blocks.R[k];
    diag[k].noalias() += Ck * cov.diag_block(k) * Ck.transpose();
    if (jitter != 0.0) {
      diag[k].diagonal().array() += jitter;
    }
    if (k + 1 < K) {
      upper[k] = Ck * cov.upper_block(k) * blocks.C[k + 1].transpose();
    }
  }
  return BlockTridiagonalMatrix(std::move(diag), std::move(upper));
}

MatrixXd innovation_dense(const MatrixXd &cov, Index n, const StepBlocks &blocks,
                          double jitter) {
  const std::size_t K = blocks.C.size();
  std::vector<Index> offsets(K + 1, 0);
  for (std::size_t k = 0; k < K; ++k) offsets[k + 1] = offsets[k] + blocks.C[k].rows();
  MatrixXd out(offsets[K], offsets[K]);
  for (std::size_t k = 0; k < K; ++k) {
    const MatrixXd &Ck = blocks.C[k];
    if (Ck.rows() == 0) continue;
    for (std::size_t l = k; l < K; ++l) {
      const MatrixXd &Cl = blocks.C[l];
      if (Cl.rows() == 0) continue;
      const auto kn = static_cast<Index>(k) * n;
      const auto ln = static_cast<Index>(l) * n;
      MatrixXd b = Ck * cov.block(kn, ln, n, n) * Cl.transpose();
      if (l == k) {
        b += blocks.R[k];
        b.diagonal().array() += jitter;
        out.block(offsets[k], offsets[k], b.rows(), b.cols()) = 0.5 * (b + b.transpose());
      } else {
        out.block(offsets[k], offsets[l], b.rows(), b.cols()) = b;
        out.block(offsets[l], offsets[k], b.cols(), b.rows()) = b.transpose();
      }
    }
  }
  return out;
}

// Retry once with a tiny diagonal jitter when the failure is at round-off level.
template <class Fn>
double logdet_with_jitter(Fn &&logdet_at) {
  try {
    return logdet_at(0.0);
  } catch (const NotPositiveDefinite &e) {
    if (!(e.min_eigenvalue() >= -kJitterTrigger)) {
      throw;
    }
    return logdet_at(kJitter);
  }
}

VectorXd stacked_residual(const SensorSuite &suite, const Schedule &schedule,
                          const std::vector<VectorXd> &measurements,
                          const VectorXd &state, std::size_t k) {
  const Index n = suite.state_dim();
  const VectorXd xk = state.segment(static_cast<Index>(k) * n, n);
  return measurements[k] - stacked_measurement(suite, schedule.set(k), xk);
}

}  // namespace

OracleContext::OracleContext(GaussianPrior prior, SensorSuite suite,
                             std::optional<VectorXd> linearization, OracleOptions options)
    : prior_(std::move(prior)),
      suite_(std::move(suite)),
      linearization_(linearization.value_or(prior_.mean())),
      options_(options) {
  const Index n = prior_.state_dim();
  const std::size_t K = prior_.horizon();
  const std::size_t m = suite_.size();
  if (suite_.state_dim() != n) {
    throw DimensionMismatch("oracle: sensor suite state dimension " +
                            std::to_string(suite_.state_dim()) + " differs from prior " +
                            std::to_string(n));
  }
  if (linearization_.size() != prior_.batch_dim()) {
    throw DimensionMismatch("oracle: linearization must have length n*K");
  }
  prior_entropy_ = senssched::prior_entropy(prior_);

  jacobians_.resize(K * m);
  information_.resize(K * m);
  noise_logdet_.resize(K * m);
  for (std::size_t k = 0; k < K; ++k) {
    const VectorXd xk = linearization_.segment(static_cast<Index>(k) * n, n);
    for (std::size_t i = 0; i < m; ++i) {
      const auto idx = k * m + i;
      const auto &sensor = suite_[i];
      jacobians_[idx] = sensor.jacobian(xk);
      const auto llt = checked_llt(sensor.noise_cov(k));
      const MatrixXd whitened = llt.matrixL().solve(jacobians_[idx]);
      information_[idx] = whitened.transpose() * whitened;
      noise_logdet_[idx] = logdet_from_llt(llt);
    }
  }

  if (options_.allow_form_conversion) {
    if (prior_.has_precision()) {
      converted_covariance_ = prior_.dense_covariance();
    } else {
      converted_precision_ = prior_.dense_precision();
    }
  }
}

void OracleContext::check_schedule(const Schedule &schedule) const {
  if (schedule.horizon() != horizon()) {
    throw DimensionMismatch("oracle: schedule has " + std::to_string(schedule.horizon()) +
                            " steps, prior horizon is " + std::to_string(horizon()));
  }
  if (schedule.num_sensors() != num_sensors()) {
    throw DimensionMismatch("oracle: schedule built for " +
                            std::to_string(schedule.num_sensors()) + " sensors, suite has " +
                            std::to_string(num_sensors()));
  }
}

BlockDiagonalMatrix information_increment(const OracleContext &ctx, const Schedule &schedule) {
  ctx.check_schedule(schedule);
  const Index n = ctx.state_dim();
  std::vector<MatrixXd> blocks(schedule.horizon());
  for (std::size_t k = 0; k < schedule.horizon(); ++k) {
    blocks[k] = MatrixXd::Zero(n, n);
    for (int i : schedule.set(k)) blocks[k] += ctx.information(k, i);
  }
  return BlockDiagonalMatrix(std::move(blocks));
}

double conditional_entropy_precision_form(const OracleContext &ctx, const Schedule &schedule) {
  ctx.check_schedule(schedule);
  const auto &prior = ctx.prior();
  const Index n = ctx.state_dim();
  const double constant = 0.5 * static_cast<double>(prior.batch_dim()) * kLog2PiE;

  if (const auto *sparse = std::get_if<PrecisionSparse>(&prior.form())) {
    std::vector<MatrixXd> diag = sparse->matrix.diag_blocks();
    for (std::size_t k = 0; k < diag.size(); ++k) {
      for (int i : schedule.set(k)) diag[k] += ctx.information(k, i);
    }
    const double logdet = logdet_block_tridiagonal(
        std::span<const MatrixXd>(diag), std::span<const MatrixXd>(sparse->matrix.upper_blocks()));
    return -0.5 * logdet + constant;
  }

  const MatrixXd *precision = nullptr;
  if (const auto *dense = std::get_if<PrecisionDense>(&prior.form())) {
    precision = &dense->matrix;
  } else if (ctx.converted_precision()) {
    precision = &*ctx.converted_precision();
  } else {
    throw WrongForm("precision-form entropy needs a precision prior (conversion disabled)");
  }
  MatrixXd total = *precision;
  for (std::size_t k = 0; k < schedule.horizon(); ++k) {
    const auto o = static_cast<Index>(k) * n;
    for (int i : schedule.set(k)) total.block(o, o, n, n) += ctx.information(k, i);
  }
  return -0.5 * logdet_dense(total) + constant;
}

double conditional_entropy_covariance_form(const OracleContext &ctx, const Schedule &schedule) {
  ctx.check_schedule(schedule);
  const auto &prior = ctx.prior();
  const Index n = ctx.state_dim();

  // T1: per-step entropies of S_k v_k; row counts drive the (2 pi e) exponents.
  double rows = 0.0;
  double noise_logdet = 0.0;
  for (std::size_t k = 0; k < schedule.horizon(); ++k) {
    for (int i : schedule.set(k)) {
      rows += static_cast<double>(ctx.suite()[i].output_dim());
      noise_logdet += ctx.noise_logdet(k, i);
    }
  }
  if (rows == 0.0) {
    return ctx.prior_entropy();
  }
  const double t1 = 0.5 * (rows * kLog2PiE + noise_logdet);

  const StepBlocks blocks = blocks_from_context(ctx, schedule);
  double innovation_logdet = 0.0;
  if (const auto *sparse = std::get_if<CovarianceSparse>(&prior.form())) {
    innovation_logdet = logdet_with_jitter([&](double jitter) {
      return logdet_block_tridiagonal(innovation_sparse(sparse->matrix, blocks, jitter));
    });
  } else {
    const MatrixXd *cov = nullptr;
    if (const auto *dense = std::get_if<CovarianceDense>(&prior.form())) {
      cov = &dense->matrix;
    } else if (ctx.converted_covariance()) {
      cov = &*ctx.converted_covariance();
    } else {
      throw WrongForm("covariance-form entropy needs a covariance prior (conversion disabled)");
    }
    innovation_logdet = logdet_with_jitter([&](double jitter) {
      return logdet_dense(innovation_dense(*cov, n, blocks, jitter));
    });
  }
  const double t2 = 0.5 * (rows * kLog2PiE + innovation_logdet);
  return t1 - t2 + ctx.prior_entropy();
}

double conditional_entropy(const OracleContext &ctx, const Schedule &schedule) {
  switch (ctx.prior().kind()) {
    case PriorFormKind::precision_sparse:
    case PriorFormKind::precision_dense:
      return conditional_entropy_precision_form(ctx, schedule);
    case PriorFormKind::covariance_sparse:
    case PriorFormKind::covariance_dense:
      return conditional_entropy_covariance_form(ctx, schedule);
  }
  throw WrongForm("unknown prior form");
}

MatrixXd posterior_covariance(const OracleContext &ctx, const Schedule &schedule) {
  ctx.check_schedule(schedule);
  const auto &prior = ctx.prior();
  const Index n = ctx.state_dim();
  MatrixXd information;
  if (prior.has_precision()) {
    information = prior.stored_dense();
  } else if (ctx.converted_precision()) {
    information = *ctx.converted_precision();
  } else {
    throw WrongForm("posterior covariance needs a precision prior (conversion disabled)");
  }
  for (std::size_t k = 0; k < schedule.horizon(); ++k) {
    const auto o = static_cast<Index>(k) * n;
    for (int i : schedule.set(k)) information.block(o, o, n, n) += ctx.information(k, i);
  }
  const auto llt = checked_llt(information);
  MatrixXd cov = llt.solve(MatrixXd::Identity(information.rows(), information.cols()));
  return 0.5 * (cov + cov.transpose());
}

double mutual_information(const OracleContext &ctx, const Schedule &schedule) {
  return ctx.prior_entropy() - conditional_entropy(ctx, schedule);
}

MapEstimate map_linearization(const GaussianPrior &prior, const SensorSuite &suite,
                              const Schedule &past_schedule,
                              const std::vector<VectorXd> &measurements,
                              GaussNewtonOptions options) {
  const Index n = prior.state_dim();
  const std::size_t K = prior.horizon();
  MapEstimate result{prior.mean(), true, 0};
  if (measurements.empty() || past_schedule.total_selected() == 0) {
    return result;
  }
  if (past_schedule.horizon() != K || measurements.size() != K) {
    throw DimensionMismatch("map_linearization: schedule and measurements must span the horizon");
  }
  if (past_schedule.num_sensors() != suite.size()) {
    throw DimensionMismatch("map_linearization: schedule built for a different suite");
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (measurements[k].size() != step_rows(suite, past_schedule.set(k))) {
      throw DimensionMismatch("map_linearization: measurement length mismatch at step " +
                              std::to_string(k));
    }
  }

  const VectorXd &mu = prior.mean();
  VectorXd estimate = mu;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const StepBlocks blocks = blocks_at_state(suite, past_schedule, estimate);
    VectorXd next;

    if (prior.has_precision()) {
      // Gauss-Newton on the negative log posterior.
      const std::vector<MatrixXd> info = step_information(blocks, n);
      VectorXd gradient(prior.batch_dim());
      for (std::size_t k = 0; k < K; ++k) {
        const auto o = static_cast<Index>(k) * n;
        if (blocks.C[k].rows() == 0) {
          gradient.segment(o, n).setZero();
          continue;
        }
        const VectorXd r = stacked_residual(suite, past_schedule, measurements, estimate, k);
        gradient.segment(o, n) = blocks.C[k].transpose() * Eigen::LLT<MatrixXd>(blocks.R[k]).solve(r);
      }
      const VectorXd offset = estimate - mu;
      VectorXd delta;
      if (const auto *sparse = std::get_if<PrecisionSparse>(&prior.form())) {
        gradient -= multiply(sparse->matrix, offset);
        const auto hessian = add_block_diagonal(sparse->matrix, BlockDiagonalMatrix(info));
        delta = solve_block_tridiagonal(hessian, gradient);
      } else {
        MatrixXd hessian = prior.stored_dense();
        gradient -= hessian * offset;
        for (std::size_t k = 0; k < K; ++k) {
          const auto o = static_cast<Index>(k) * n;
          hessian.block(o, o, n, n) += info[k];
        }
        delta = checked_llt(hessian).solve(gradient);
      }
      next = estimate + delta;
    } else {
      // Innovation form: mu + Sigma C^T (C Sigma C^T + R)^{-1} (y - c(mu~) - C (mu - mu~)).
      std::vector<VectorXd> innov(K);
      Index total_rows = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const auto o = static_cast<Index>(k) * n;
        innov[k] = stacked_residual(suite, past_schedule, measurements, estimate, k);
        if (blocks.C[k].rows() > 0) {
          innov[k] -= blocks.C[k] * (mu.segment(o, n) - estimate.segment(o, n));
        }
        total_rows += innov[k].size();
      }
      VectorXd stacked(total_rows);
      Index r = 0;
      for (const auto &v : innov) {
        stacked.segment(r, v.size()) = v;
        r += v.size();
      }
      VectorXd weights;
      VectorXd back(prior.batch_dim());
      if (const auto *sparse = std::get_if<CovarianceSparse>(&prior.form())) {
        weights = solve_block_tridiagonal(innovation_sparse(sparse->matrix, blocks, 0.0), stacked);
      } else {
        const MatrixXd cov = prior.stored_dense();
        weights = checked_llt(innovation_dense(cov, n, blocks, 0.0)).solve(stacked);
      }
      r = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const auto rows = blocks.C[k].rows();
        back.segment(static_cast<Index>(k) * n, n) =
            blocks.C[k].transpose() * weights.segment(r, rows);
        r += rows;
      }
      if (const auto *sparse = std::get_if<CovarianceSparse>(&prior.form())) {
        next = mu + multiply(sparse->matrix, back);
      } else {
        next = mu + prior.stored_dense() * back;
      }
    }

    const double step = (next - estimate).lpNorm<Eigen::Infinity>();
    estimate = std::move(next);
    result.iterations = iter;
    if (step <= options.step_tolerance) {
      result.estimate = estimate;
      result.converged = true;
      return result;
    }
  }
  result.estimate = estimate;
  result.converged = false;
  return result;
}

}  // namespace senssched
