#pragma once

#include <optional>
#include <vector>

#include "senssched/process_models.hpp"
#include "senssched/sensing.hpp"

namespace senssched {

struct OracleOptions {
  /// Permit formulas that need the representation the prior does not store.
  /// The missing form is computed once, densely, when the context is built.
  bool allow_form_conversion = false;
};

/*
 * Everything the conditional-entropy objective needs that does not depend on
 * the schedule: the prior, the suite, the linearization point, and per
 * (step, sensor) caches of Jacobians, information increments C^T R^{-1} C and
 * noise log-determinants. Immutable after construction, so evaluations may run
 * concurrently.
 */
class OracleContext {
 public:
  OracleContext(GaussianPrior prior, SensorSuite suite,
                std::optional<VectorXd> linearization = std::nullopt,
                OracleOptions options = {});

  const GaussianPrior &prior() const { return prior_; }
  const SensorSuite &suite() const { return suite_; }
  const VectorXd &linearization() const { return linearization_; }
  const OracleOptions &options() const { return options_; }

  std::size_t horizon() const { return prior_.horizon(); }
  Index state_dim() const { return prior_.state_dim(); }
  std::size_t num_sensors() const { return suite_.size(); }

  double prior_entropy() const { return prior_entropy_; }

  const MatrixXd &jacobian(std::size_t k, std::size_t sensor) const {
    return jacobians_[k * num_sensors() + sensor];
  }
  const MatrixXd &information(std::size_t k, std::size_t sensor) const {
    return information_[k * num_sensors() + sensor];
  }
  double noise_logdet(std::size_t k, std::size_t sensor) const {
    return noise_logdet_[k * num_sensors() + sensor];
  }

  /// Dense precision or covariance computed at construction when conversion is
  /// enabled and the prior stores the other form.
  const std::optional<MatrixXd> &converted_precision() const { return converted_precision_; }
  const std::optional<MatrixXd> &converted_covariance() const { return converted_covariance_; }

  void check_schedule(const Schedule &schedule) const;

 private:
  GaussianPrior prior_;
  SensorSuite suite_;
  VectorXd linearization_;
  OracleOptions options_;
  double prior_entropy_ = 0.0;
  std::vector<MatrixXd> jacobians_;
  std::vector<MatrixXd> information_;
  std::vector<double> noise_logdet_;
  std::optional<MatrixXd> converted_precision_;
  std::optional<MatrixXd> converted_covariance_;
};

/// Block-diagonal information increment; block k is sum over selected i of
/// C_ik^T R_ik^{-1} C_ik (zero block for an empty step).
BlockDiagonalMatrix information_increment(const OracleContext &ctx, const Schedule &schedule);

/// H = -0.5 logdet(Xi + Sigma^{-1}) + 0.5 nK ln(2 pi e).
double conditional_entropy_precision_form(const OracleContext &ctx, const Schedule &schedule);

/// H = T1 - T2 + H(x), with T1 the per-step noise entropies and T2 the entropy
/// of the innovation covariance R + C Sigma C^T.
double conditional_entropy_covariance_form(const OracleContext &ctx, const Schedule &schedule);

/// Picks the formula matching the stored prior representation.
double conditional_entropy(const OracleContext &ctx, const Schedule &schedule);

/// MMSE error covariance (Xi + Sigma^{-1})^{-1}, dense nK x nK.
MatrixXd posterior_covariance(const OracleContext &ctx, const Schedule &schedule);

/// H(x) - H(x | y).
double mutual_information(const OracleContext &ctx, const Schedule &schedule);

struct MapEstimate {
  VectorXd estimate;
  bool converged = true;
  int iterations = 0;
};

struct GaussNewtonOptions {
  double step_tolerance = 1e-8;
  int max_iterations = 50;
};

/*
 * MAP estimate of x_{1:K} given realized measurements of the sensors in
 * `past_schedule`. measurements[k] stacks the readings of past_schedule.set(k)
 * in ascending sensor order. With no measurements the prior mean is returned.
 *
 * Precision-stored priors iterate
 *   delta = (Xi(mu~) + Sigma^{-1})^{-1} [C^T R^{-1}(y - c(mu~)) - Sigma^{-1}(mu~ - mu)];
 * covariance-stored priors use the algebraically equivalent innovation form
 *   mu~+ = mu + Sigma C^T (C Sigma C^T + R)^{-1} (y - c(mu~) - C (mu - mu~)).
 * Non-convergence is reported through the flag, with the last iterate.
 */
MapEstimate map_linearization(const GaussianPrior &prior, const SensorSuite &suite,
                              const Schedule &past_schedule,
                              const std::vector<VectorXd> &measurements,
                              GaussNewtonOptions options = {});

}  // namespace senssched
