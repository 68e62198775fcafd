#include "senssched/scheduler.hpp"

#include <chrono>
#include <queue>
#include <random>
#include <string>

#include "senssched/errors.hpp"
#include "senssched/parallel.hpp"

namespace senssched {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kGainClampTolerance = 1e-8;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Exact gains are >= 0; small negatives are round-off.
double clamp_gain(double gain) {
  return (gain < 0.0 && gain >= -kGainClampTolerance) ? 0.0 : gain;
}

void check_gain(double best_gain, std::size_t k) {
  if (best_gain < -kGainClampTolerance) {
    throw OracleInconsistency("greedy step " + std::to_string(k) +
                              ": best marginal gain is negative (" +
                              std::to_string(best_gain) + " nats)");
  }
}

// Counts (and optionally times) oracle calls.
class CountingOracle {
 public:
  CountingOracle(const OracleContext &ctx, bool record_times)
      : ctx_(ctx), record_times_(record_times) {}

  double operator()(const Schedule &s) {
    ++calls_;
    if (!record_times_) {
      return conditional_entropy(ctx_, s);
    }
    const auto start = Clock::now();
    const double h = conditional_entropy(ctx_, s);
    seconds_.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    return h;
  }

  /// Evaluates a batch in parallel; results in input order.
  std::vector<double> batch(const std::vector<Schedule> &schedules, unsigned threads) {
    std::vector<double> out(schedules.size());
    std::vector<double> secs(schedules.size(), 0.0);
    parallel_for(schedules.size(), threads, [&](std::size_t j) {
      const auto start = Clock::now();
      out[j] = conditional_entropy(ctx_, schedules[j]);
      secs[j] = std::chrono::duration<double>(Clock::now() - start).count();
    });
    calls_ += schedules.size();
    if (record_times_) seconds_.insert(seconds_.end(), secs.begin(), secs.end());
    return out;
  }

  std::size_t calls() const { return calls_; }
  std::vector<double> take_seconds() { return std::move(seconds_); }

 private:
  const OracleContext &ctx_;
  bool record_times_;
  std::size_t calls_ = 0;
  std::vector<double> seconds_;
};

void check_step_inputs(const OracleContext &ctx, const Schedule &prefix, std::size_t k,
                       int budget) {
  ctx.check_schedule(prefix);
  if (k >= prefix.horizon()) {
    throw InvalidParams("greedy step index out of range");
  }
  if (budget < 0 || static_cast<std::size_t>(budget) > ctx.num_sensors()) {
    throw InvalidParams("greedy step budget must lie in [0, m]");
  }
  if (budget > prefix.budgets()[k]) {
    throw InvalidParams("greedy step budget exceeds the schedule budget");
  }
  for (std::size_t j = k; j < prefix.horizon(); ++j) {
    if (!prefix.set(j).empty()) {
      throw InvalidParams("greedy step: prefix must be empty from step k on");
    }
  }
}

}  // namespace

std::size_t GreedyTrace::oracle_calls() const {
  std::size_t total = 0;
  for (const auto &s : steps) total += s.oracle_calls;
  return total;
}

double GreedyTrace::wall_ms() const {
  double total = 0.0;
  for (const auto &s : steps) total += s.wall_ms;
  return total;
}

void check_budgets(const std::vector<int> &budgets, std::size_t horizon,
                   std::size_t num_sensors) {
  if (budgets.size() != horizon) {
    throw InvalidParams("budgets: expected " + std::to_string(horizon) + " entries, got " +
                        std::to_string(budgets.size()));
  }
  for (std::size_t k = 0; k < budgets.size(); ++k) {
    if (budgets[k] < 0 || static_cast<std::size_t>(budgets[k]) > num_sensors) {
      throw InvalidParams("budgets: s_" + std::to_string(k) + " = " +
                          std::to_string(budgets[k]) + " outside [0, m]");
    }
  }
}

StepResult greedy_step(const OracleContext &ctx, const Schedule &fixed_prefix, std::size_t k,
                       int budget, const GreedyOptions &options,
                       std::optional<double> base_entropy) {
  check_step_inputs(ctx, fixed_prefix, k, budget);
  const auto start = Clock::now();
  CountingOracle oracle(ctx, options.record_call_times);
  const std::size_t m = ctx.num_sensors();

  StepResult result;
  double base = base_entropy ? *base_entropy : oracle(fixed_prefix);
  Schedule current = fixed_prefix;
  std::vector<int> remaining(m);
  for (std::size_t i = 0; i < m; ++i) remaining[i] = static_cast<int>(i);

  while (!remaining.empty()) {
    if (static_cast<int>(result.set.size()) >= budget) break;

    std::vector<Schedule> candidates;
    candidates.reserve(remaining.size());
    for (int i : remaining) candidates.push_back(current.with_added(k, i));
    const std::vector<double> values = oracle.batch(candidates, options.threads);

    // Highest gain, lowest index on ties (remaining is ascending).
    std::size_t best = 0;
    double best_gain = clamp_gain(base - values[0]);
    for (std::size_t j = 1; j < remaining.size(); ++j) {
      const double gain = clamp_gain(base - values[j]);
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    check_gain(best_gain, k);
    if (best_gain <= 0.0 && options.stop_on_nonpositive_gain) break;

    const int pick = remaining[best];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    if (static_cast<int>(result.set.size()) + 1 > budget) {
      // Oversized candidate; cannot trigger for single-sensor candidates.
      continue;
    }
    result.set.push_back(pick);
    result.trace.picks.push_back({pick, best_gain});
    current = std::move(candidates[best]);
    base = values[best];
  }

  std::sort(result.set.begin(), result.set.end());
  result.entropy = base;
  result.trace.oracle_calls = oracle.calls();
  result.trace.wall_ms = elapsed_ms(start);
  result.call_seconds = oracle.take_seconds();
  return result;
}

StepResult lazy_greedy_step(const OracleContext &ctx, const Schedule &fixed_prefix,
                            std::size_t k, int budget, const GreedyOptions &options,
                            std::optional<double> base_entropy) {
  check_step_inputs(ctx, fixed_prefix, k, budget);
  const auto start = Clock::now();
  CountingOracle oracle(ctx, options.record_call_times);
  const std::size_t m = ctx.num_sensors();

  StepResult result;
  double base = base_entropy ? *base_entropy : oracle(fixed_prefix);
  Schedule current = fixed_prefix;

  struct Entry {
    double bound;       // gain when last evaluated; upper bound afterwards
    double value;       // objective with this sensor added, at evaluation time
    int sensor;
    std::size_t stamp;  // pick iteration of the last evaluation
  };
  // Max-heap on bound; lower sensor index first on equal bounds.
  auto lower_priority = [](const Entry &a, const Entry &b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.sensor > b.sensor;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(lower_priority);

  if (budget > 0) {
    for (std::size_t i = 0; i < m; ++i) {
      const int s = static_cast<int>(i);
      const double h = oracle(current.with_added(k, s));
      heap.push({clamp_gain(base - h), h, s, 0});
    }
  }

  std::size_t iteration = 0;
  while (!heap.empty() && static_cast<int>(result.set.size()) < budget) {
    Entry top = heap.top();
    heap.pop();
    if (top.stamp != iteration) {
      top.value = oracle(current.with_added(k, top.sensor));
      top.bound = clamp_gain(base - top.value);
      top.stamp = iteration;
      heap.push(top);
      continue;
    }
    check_gain(top.bound, k);
    if (top.bound <= 0.0 && options.stop_on_nonpositive_gain) break;
    if (static_cast<int>(result.set.size()) + 1 > budget) continue;
    result.set.push_back(top.sensor);
    result.trace.picks.push_back({top.sensor, top.bound});
    current = current.with_added(k, top.sensor);
    base = top.value;
    ++iteration;
  }

  std::sort(result.set.begin(), result.set.end());
  result.entropy = base;
  result.trace.oracle_calls = oracle.calls();
  result.trace.wall_ms = elapsed_ms(start);
  result.call_seconds = oracle.take_seconds();
  return result;
}

GreedyResult greedy_schedule(const OracleContext &ctx, const std::vector<int> &budgets,
                             const GreedyOptions &options) {
  check_budgets(budgets, ctx.horizon(), ctx.num_sensors());
  GreedyResult result;
  result.schedule = Schedule::empty(budgets, ctx.num_sensors());
  double base = ctx.prior_entropy();
  for (std::size_t k = 0; k < ctx.horizon(); ++k) {
    StepResult step = options.lazy
                          ? lazy_greedy_step(ctx, result.schedule, k, budgets[k], options, base)
                          : greedy_step(ctx, result.schedule, k, budgets[k], options, base);
    result.schedule = result.schedule.with_set(k, std::move(step.set));
    base = step.entropy;
    result.trace.steps.push_back(std::move(step.trace));
    result.trace.call_seconds.insert(result.trace.call_seconds.end(),
                                     step.call_seconds.begin(), step.call_seconds.end());
  }
  result.entropy = base;
  return result;
}

Schedule random_schedule(const std::vector<int> &budgets, std::size_t num_sensors,
                         std::uint64_t seed) {
  for (int b : budgets) {
    if (b < 0 || static_cast<std::size_t>(b) > num_sensors) {
      throw InvalidParams("random_schedule: budget outside [0, m]");
    }
  }
  std::mt19937_64 rng(seed);
  // Rejection sampling keeps the draw identical across standard libraries.
  auto uniform_below = [&rng](std::uint64_t bound) {
    const std::uint64_t limit = rng.max() - (rng.max() % bound);
    std::uint64_t x;
    do {
      x = rng();
    } while (x >= limit);
    return x % bound;
  };
  std::vector<std::vector<int>> sets(budgets.size());
  std::vector<int> pool(num_sensors);
  for (std::size_t k = 0; k < budgets.size(); ++k) {
    for (std::size_t i = 0; i < num_sensors; ++i) pool[i] = static_cast<int>(i);
    const auto take = static_cast<std::size_t>(budgets[k]);
    for (std::size_t j = 0; j < take; ++j) {
      const auto pick = j + uniform_below(num_sensors - j);
      std::swap(pool[j], pool[pick]);
    }
    sets[k].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return Schedule(std::move(sets), budgets, num_sensors);
}

}  // namespace senssched
