#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "senssched/block_linalg.hpp"

namespace senssched {

/*
 * A sensor z = g(x) + v with v ~ N(0, R). The measurement map and its
 * Jacobian are plain callables; R is time-invariant unless a per-step
 * override is installed.
 */
class Sensor {
 public:
  using MeasureFn = std::function<VectorXd(const VectorXd &)>;
  using JacobianFn = std::function<MatrixXd(const VectorXd &)>;

  Sensor(std::string kind, Index input_dim, Index output_dim, MeasureFn measure,
         JacobianFn jacobian, MatrixXd noise_cov);

  const std::string &kind() const { return kind_; }
  Index input_dim() const { return input_dim_; }
  Index output_dim() const { return output_dim_; }

  VectorXd measure(const VectorXd &x) const;
  MatrixXd jacobian(const VectorXd &x) const;

  /// Noise covariance at step k (0-based).
  const MatrixXd &noise_cov(std::size_t k = 0) const;
  Sensor &set_step_noise(std::size_t k, MatrixXd cov);

 private:
  std::string kind_;
  Index input_dim_;
  Index output_dim_;
  MeasureFn measure_;
  JacobianFn jacobian_;
  MatrixXd noise_cov_;
  std::map<std::size_t, MatrixXd> step_noise_;
};

class SensorSuite {
 public:
  SensorSuite() = default;
  SensorSuite(Index state_dim, std::vector<Sensor> sensors);

  Index state_dim() const { return state_dim_; }
  std::size_t size() const { return sensors_.size(); }
  const Sensor &operator[](std::size_t i) const { return sensors_[i]; }
  const std::vector<Sensor> &sensors() const { return sensors_; }

 private:
  Index state_dim_ = 0;
  std::vector<Sensor> sensors_;
};

namespace sensors {

/// g(x) = x[axis].
Sensor linear_coordinate(Index state_dim, Index axis, MatrixXd noise_cov);
/// g(x) = ||x - anchor||_2. Undefined (InvalidParams) at the anchor.
Sensor range(VectorXd anchor, MatrixXd noise_cov);
/// g(x) = atan2(x[1] - a[1], x[0] - a[0]) on the first two coordinates.
Sensor bearing(Index state_dim, VectorXd anchor, MatrixXd noise_cov);
/// g(x) = 0.5 x^T W x with W symmetric.
Sensor quadratic(MatrixXd weight, MatrixXd noise_cov);

}  // namespace sensors

/*
 * Per-step index sets of active sensors with per-step budgets. Sets are kept
 * sorted; construction rejects duplicates, out-of-range indices and sets
 * larger than their budget. Indices are 0-based.
 */
class Schedule {
 public:
  Schedule() = default;
  Schedule(std::vector<std::vector<int>> sets, std::vector<int> budgets,
           std::size_t num_sensors);

  static Schedule empty(std::vector<int> budgets, std::size_t num_sensors);

  std::size_t horizon() const { return sets_.size(); }
  std::size_t num_sensors() const { return num_sensors_; }
  const std::vector<int> &set(std::size_t k) const { return sets_[k]; }
  const std::vector<std::vector<int>> &sets() const { return sets_; }
  const std::vector<int> &budgets() const { return budgets_; }
  bool contains(std::size_t k, int sensor) const;
  std::size_t total_selected() const;

  /// Copy with `sensor` inserted at step k.
  Schedule with_added(std::size_t k, int sensor) const;
  /// Copy with the set at step k replaced.
  Schedule with_set(std::size_t k, std::vector<int> set) const;

  bool operator==(const Schedule &other) const {
    return sets_ == other.sets_ && budgets_ == other.budgets_;
  }

  /// "0;2|1|" style: steps separated by '|', indices by ';'.
  std::string to_string() const;

 private:
  std::vector<std::vector<int>> sets_;
  std::vector<int> budgets_;
  std::size_t num_sensors_ = 0;
};

/// Block k stacks the Jacobians of the sensors selected at step k, evaluated at
/// the k-th n-subvector of `linearization`; an empty step gives a 0 x n block.
BlockDiagonalMatrix stacked_jacobian(const SensorSuite &suite, const Schedule &schedule,
                                     const VectorXd &linearization);

/// One block per (step, selected sensor) in schedule order.
BlockDiagonalMatrix stacked_noise_cov(const SensorSuite &suite, const Schedule &schedule);

/// Stacked predicted measurements c(x) of the selected sensors at step k.
VectorXd stacked_measurement(const SensorSuite &suite, const std::vector<int> &set,
                             const VectorXd &state);

}  // namespace senssched
