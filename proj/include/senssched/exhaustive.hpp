#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "senssched/entropy_oracle.hpp"

namespace senssched {

enum class EnumerationMode {
  exact_budget,  // |S_k| = s_k
  up_to_budget,  // |S_k| <= s_k
};

struct ExhaustiveOptions {
  EnumerationMode mode = EnumerationMode::up_to_budget;
  std::uint64_t cap = 1'000'000;
  bool keep_table = false;
  unsigned threads = 1;
};

struct EnumerationResult {
  double opt_cost = 0.0;  // nats
  double max_cost = 0.0;  // nats
  Schedule opt_schedule;
  Schedule max_schedule;
  std::uint64_t num_enumerated = 0;
  /// Every feasible schedule with its cost, in enumeration order.
  std::optional<std::vector<std::pair<Schedule, double>>> full_table;
};

/// Feasible index sets for one step, ordered by size then lexicographically.
std::vector<std::vector<int>> step_candidates(std::size_t num_sensors, int budget,
                                              EnumerationMode mode);

/// Number of feasible schedules, saturating at UINT64_MAX.
std::uint64_t count_schedules(std::size_t num_sensors, const std::vector<int> &budgets,
                              EnumerationMode mode);

/// Brute-force minimum and maximum of the objective over all feasible
/// schedules. Schedules are enumerated with step 1 varying slowest.
EnumerationResult exhaustive_optimum(const OracleContext &ctx, const std::vector<int> &budgets,
                                     const ExhaustiveOptions &options = {});

struct BoundCertificate {
  enum class Kind {
    ratio,            // non-degenerate: ratio = (cost - OPT) / (MAX - OPT)
    certified_equal,  // MAX == OPT and cost == OPT
    not_certified,    // MAX == OPT but cost differs
  };
  Kind kind = Kind::ratio;
  double ratio = 0.0;
  double opt_cost = 0.0;
  double max_cost = 0.0;

  /// Ratio within 1/2 (plus slack), or certified equal.
  bool within(double bound = 0.5, double slack = 1e-9) const;
};

BoundCertificate certify_bound(double greedy_cost, const EnumerationResult &enumeration);

/// Runs an up-to-budget enumeration, then certifies.
BoundCertificate certify_bound(const OracleContext &ctx, const std::vector<int> &budgets,
                               double greedy_cost, const ExhaustiveOptions &options = {});

/// CSV with one column per step ("0;2" style sorted index lists) and cost_nats.
void write_table_csv(std::ostream &out, const EnumerationResult &result);

}  // namespace senssched
