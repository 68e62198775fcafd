#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "senssched/entropy_oracle.hpp"

namespace senssched {

struct GreedyOptions {
  /// Lazy (stale upper bound) evaluation of marginal gains.
  bool lazy = false;
  /// Stop a step once the best remaining gain is <= 0. When false, zero-gain
  /// sensors are still added (lowest index first) until the budget is met.
  bool stop_on_nonpositive_gain = true;
  /// Worker threads for candidate evaluation in eager greedy.
  unsigned threads = 1;
  /// Store the wall time of every oracle call in the trace.
  bool record_call_times = false;
};

struct GreedyPick {
  int sensor = -1;
  double gain = 0.0;  // nats
};

struct StepTrace {
  std::vector<GreedyPick> picks;
  std::size_t oracle_calls = 0;
  double wall_ms = 0.0;
};

/*
 * Record of a greedy run. Within a step the realized gains are non-increasing
 * in pick order. Eager greedy spends at most s_k * m oracle calls per step
 * (one per remaining candidate per pick; the base value is carried over from
 * the previous pick). Note the s_k^2 count sometimes quoted for this scheme
 * only holds when m <= s_k.
 */
struct GreedyTrace {
  std::vector<StepTrace> steps;
  /// Seconds per oracle call, in call order (only with record_call_times).
  std::vector<double> call_seconds;

  std::size_t oracle_calls() const;
  double wall_ms() const;
};

struct GreedyResult {
  Schedule schedule;
  GreedyTrace trace;
  double entropy = 0.0;  // H(x | schedule), nats
};

struct StepResult {
  std::vector<int> set;
  double entropy = 0.0;
  StepTrace trace;
  std::vector<double> call_seconds;
};

/// Greedy selection for step k with steps before k fixed by `fixed_prefix`
/// (its sets at steps >= k must be empty). `base_entropy` is the objective at
/// the prefix; when absent it costs one extra oracle call.
StepResult greedy_step(const OracleContext &ctx, const Schedule &fixed_prefix, std::size_t k,
                       int budget, const GreedyOptions &options = {},
                       std::optional<double> base_entropy = std::nullopt);

/// Same contract as greedy_step, using lazy evaluations. Returns the same set.
StepResult lazy_greedy_step(const OracleContext &ctx, const Schedule &fixed_prefix,
                            std::size_t k, int budget, const GreedyOptions &options = {},
                            std::optional<double> base_entropy = std::nullopt);

/// Per-step greedy over k = 1..K, each step conditioned on the earlier picks.
GreedyResult greedy_schedule(const OracleContext &ctx, const std::vector<int> &budgets,
                             const GreedyOptions &options = {});

/// s_k distinct sensors drawn uniformly per step; reproducible by seed.
Schedule random_schedule(const std::vector<int> &budgets, std::size_t num_sensors,
                         std::uint64_t seed);

/// Throws InvalidParams unless budgets has K entries in [0, m].
void check_budgets(const std::vector<int> &budgets, std::size_t horizon, std::size_t num_sensors);

}  // namespace senssched
