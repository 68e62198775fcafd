#include "senssched/sensing.hpp"

#include <algorithm>
#include <cmath>

#include "senssched/errors.hpp"

namespace senssched {

namespace {

void check_noise(const MatrixXd &cov, Index output_dim, const std::string &kind) {
  if (cov.rows() != output_dim || cov.cols() != output_dim) {
    throw DimensionMismatch(kind + " sensor: noise covariance must be " +
                            std::to_string(output_dim) + "x" + std::to_string(output_dim));
  }
  Eigen::LLT<MatrixXd> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success || !cov.allFinite()) {
    throw InvalidParams(kind + " sensor: noise covariance must be positive definite");
  }
}

}  // namespace

Sensor::Sensor(std::string kind, Index input_dim, Index output_dim, MeasureFn measure,
               JacobianFn jacobian, MatrixXd noise_cov)
    : kind_(std::move(kind)),
      input_dim_(input_dim),
      output_dim_(output_dim),
      measure_(std::move(measure)),
      jacobian_(std::move(jacobian)),
      noise_cov_(std::move(noise_cov)) {
  if (input_dim_ <= 0 || output_dim_ <= 0) {
    throw InvalidParams(kind_ + " sensor: dimensions must be positive");
  }
  check_noise(noise_cov_, output_dim_, kind_);
  noise_cov_ = 0.5 * (noise_cov_ + noise_cov_.transpose()).eval();
}

VectorXd Sensor::measure(const VectorXd &x) const {
  if (x.size() != input_dim_) {
    throw DimensionMismatch(kind_ + " sensor: state has wrong dimension");
  }
  return measure_(x);
}

MatrixXd Sensor::jacobian(const VectorXd &x) const {
  if (x.size() != input_dim_) {
    throw DimensionMismatch(kind_ + " sensor: state has wrong dimension");
  }
  return jacobian_(x);
}

const MatrixXd &Sensor::noise_cov(std::size_t k) const {
  if (!step_noise_.empty()) {
    if (auto it = step_noise_.find(k); it != step_noise_.end()) {
      return it->second;
    }
  }
  return noise_cov_;
}

Sensor &Sensor::set_step_noise(std::size_t k, MatrixXd cov) {
  check_noise(cov, output_dim_, kind_);
  step_noise_[k] = 0.5 * (cov + cov.transpose());
  return *this;
}

SensorSuite::SensorSuite(Index state_dim, std::vector<Sensor> sensors)
    : state_dim_(state_dim), sensors_(std::move(sensors)) {
  for (std::size_t i = 0; i < sensors_.size(); ++i) {
    if (sensors_[i].input_dim() != state_dim_) {
      throw DimensionMismatch("sensor " + std::to_string(i) + " expects state dimension " +
                              std::to_string(sensors_[i].input_dim()) + ", suite has " +
                              std::to_string(state_dim_));
    }
  }
}

namespace sensors {

Sensor linear_coordinate(Index state_dim, Index axis, MatrixXd noise_cov) {
  if (axis < 0 || axis >= state_dim) {
    throw InvalidParams("linear_coordinate sensor: axis out of range");
  }
  return Sensor(
      "linear_coordinate", state_dim, 1,
      [axis](const VectorXd &x) { return VectorXd::Constant(1, x(axis)); },
      [axis, state_dim](const VectorXd &) {
        MatrixXd j = MatrixXd::Zero(1, state_dim);
        j(0, axis) = 1.0;
        return j;
      },
      std::move(noise_cov));
}

Sensor range(VectorXd anchor, MatrixXd noise_cov) {
  const Index n = anchor.size();
  return Sensor(
      "range", n, 1,
      [anchor](const VectorXd &x) { return VectorXd::Constant(1, (x - anchor).norm()); },
      [anchor](const VectorXd &x) {
        const VectorXd d = x - anchor;
        const double r = d.norm();
        if (r == 0.0) {
          throw InvalidParams("range sensor: jacobian undefined at the anchor");
        }
        return MatrixXd((d / r).transpose());
      },
      std::move(noise_cov));
}

Sensor bearing(Index state_dim, VectorXd anchor, MatrixXd noise_cov) {
  if (state_dim < 2 || anchor.size() != 2) {
    throw InvalidParams("bearing sensor: needs state_dim >= 2 and a planar anchor");
  }
  auto offset = [anchor](const VectorXd &x) {
    const double dx = x(0) - anchor(0);
    const double dy = x(1) - anchor(1);
    if (dx == 0.0 && dy == 0.0) {
      throw InvalidParams("bearing sensor: evaluated at its anchor");
    }
    return std::pair{dx, dy};
  };
  return Sensor(
      "bearing", state_dim, 1,
      [offset](const VectorXd &x) {
        const auto [dx, dy] = offset(x);
        return VectorXd::Constant(1, std::atan2(dy, dx));
      },
      [offset, state_dim](const VectorXd &x) {
        const auto [dx, dy] = offset(x);
        const double r2 = dx * dx + dy * dy;
        MatrixXd j = MatrixXd::Zero(1, state_dim);
        j(0, 0) = -dy / r2;
        j(0, 1) = dx / r2;
        return j;
      },
      std::move(noise_cov));
}

Sensor quadratic(MatrixXd weight, MatrixXd noise_cov) {
  if (weight.rows() != weight.cols() || weight.rows() == 0) {
    throw InvalidParams("quadratic sensor: weight must be square");
  }
  const Index n = weight.rows();
  MatrixXd w = 0.5 * (weight + weight.transpose());
  return Sensor(
      "quadratic", n, 1,
      [w](const VectorXd &x) { return VectorXd::Constant(1, 0.5 * x.dot(w * x)); },
      [w](const VectorXd &x) { return MatrixXd((w * x).transpose()); },
      std::move(noise_cov));
}

}  // namespace sensors

Schedule::Schedule(std::vector<std::vector<int>> sets, std::vector<int> budgets,
                   std::size_t num_sensors)
    : sets_(std::move(sets)), budgets_(std::move(budgets)), num_sensors_(num_sensors) {
  if (sets_.size() != budgets_.size()) {
    throw DimensionMismatch("schedule: " + std::to_string(sets_.size()) + " sets but " +
                            std::to_string(budgets_.size()) + " budgets");
  }
  for (std::size_t k = 0; k < sets_.size(); ++k) {
    if (budgets_[k] < 0) {
      throw InvalidParams("schedule: negative budget at step " + std::to_string(k));
    }
    auto &s = sets_[k];
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
      throw InvalidParams("schedule: duplicate sensor at step " + std::to_string(k));
    }
    if (!s.empty() && (s.front() < 0 || static_cast<std::size_t>(s.back()) >= num_sensors_)) {
      throw InvalidParams("schedule: sensor index out of range at step " + std::to_string(k));
    }
    if (static_cast<int>(s.size()) > budgets_[k]) {
      throw InvalidParams("schedule: step " + std::to_string(k) + " selects " +
                          std::to_string(s.size()) + " sensors, budget is " +
                          std::to_string(budgets_[k]));
    }
  }
}

Schedule Schedule::empty(std::vector<int> budgets, std::size_t num_sensors) {
  std::vector<std::vector<int>> sets(budgets.size());
  return Schedule(std::move(sets), std::move(budgets), num_sensors);
}

bool Schedule::contains(std::size_t k, int sensor) const {
  return std::binary_search(sets_[k].begin(), sets_[k].end(), sensor);
}

std::size_t Schedule::total_selected() const {
  std::size_t total = 0;
  for (const auto &s : sets_) total += s.size();
  return total;
}

Schedule Schedule::with_added(std::size_t k, int sensor) const {
  auto sets = sets_;
  sets.at(k).push_back(sensor);
  return Schedule(std::move(sets), budgets_, num_sensors_);
}

Schedule Schedule::with_set(std::size_t k, std::vector<int> set) const {
  auto sets = sets_;
  sets.at(k) = std::move(set);
  return Schedule(std::move(sets), budgets_, num_sensors_);
}

std::string Schedule::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < sets_.size(); ++k) {
    if (k > 0) out += '|';
    for (std::size_t j = 0; j < sets_[k].size(); ++j) {
      if (j > 0) out += ';';
      out += std::to_string(sets_[k][j]);
    }
  }
  return out;
}

BlockDiagonalMatrix stacked_jacobian(const SensorSuite &suite, const Schedule &schedule,
                                     const VectorXd &linearization) {
  const Index n = suite.state_dim();
  const auto K = static_cast<Index>(schedule.horizon());
  if (linearization.size() != n * K) {
    throw DimensionMismatch("stacked_jacobian: linearization must have length n*K");
  }
  if (schedule.num_sensors() != suite.size()) {
    throw DimensionMismatch("stacked_jacobian: schedule built for a different suite");
  }
  std::vector<MatrixXd> blocks;
  blocks.reserve(schedule.horizon());
  for (std::size_t k = 0; k < schedule.horizon(); ++k) {
    const VectorXd xk = linearization.segment(static_cast<Index>(k) * n, n);
    Index rows = 0;
    for (int i : schedule.set(k)) rows += suite[i].output_dim();
    MatrixXd block(rows, n);
    Index r = 0;
    for (int i : schedule.set(k)) {
      const auto p = suite[i].output_dim();
      block.middleRows(r, p) = suite[i].jacobian(xk);
      r += p;
    }
    blocks.push_back(std::move(block));
  }
  return BlockDiagonalMatrix(std::move(blocks));
}

BlockDiagonalMatrix stacked_noise_cov(const SensorSuite &suite, const Schedule &schedule) {
  if (schedule.num_sensors() != suite.size()) {
    throw DimensionMismatch("stacked_noise_cov: schedule built for a different suite");
  }
  std::vector<MatrixXd> blocks;
  for (std::size_t k = 0; k < schedule.horizon(); ++k) {
    for (int i : schedule.set(k)) {
      blocks.push_back(suite[i].noise_cov(k));
    }
  }
  return BlockDiagonalMatrix(std::move(blocks));
}

VectorXd stacked_measurement(const SensorSuite &suite, const std::vector<int> &set,
                             const VectorXd &state) {
  Index rows = 0;
  for (int i : set) rows += suite[i].output_dim();
  VectorXd out(rows);
  Index r = 0;
  for (int i : set) {
    const auto p = suite[i].output_dim();
    out.segment(r, p) = suite[i].measure(state);
    r += p;
  }
  return out;
}

}  // namespace senssched
