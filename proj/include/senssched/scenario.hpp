#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "senssched/exhaustive.hpp"
#include "senssched/scheduler.hpp"

namespace senssched {

struct BenchSettings {
  std::vector<std::size_t> K_values{25, 50, 100};
  int repetitions = 5;
  bool dense = true;
  /// Oracle calls timed per repetition on random schedules; 0 runs full greedy
  /// with per-call instrumentation instead.
  int sparse_calls = 0;
  int dense_calls = 20;
};

/*
 * A fully resolved scenario. `resolved` echoes every field with defaults
 * filled in; writing it back out gives a config that reproduces the run.
 */
struct Scenario {
  nlohmann::json resolved;

  std::uint64_t seed = 0;
  std::vector<int> budgets;
  std::string linearization = "prior_mean";  // or "receding"
  std::vector<std::string> schedulers;
  EnumerationMode exhaustive_mode = EnumerationMode::up_to_budget;
  std::uint64_t exhaustive_cap = 1'000'000;
  bool write_exhaustive_table = false;
  bool stop_on_nonpositive_gain = true;
  unsigned threads = 1;
  std::string output_dir = "out";
  BenchSettings bench;

  /// Prior at the configured horizon.
  GaussianPrior prior() const;
  /// Prior with the horizon overridden (scaling sweeps).
  GaussianPrior prior(std::size_t K) const;
  SensorSuite suite() const;
  std::size_t horizon() const;
};

/// Validates and resolves a config. Throws ConfigError naming the bad field.
Scenario parse_scenario(const nlohmann::json &config);
Scenario load_scenario(const std::filesystem::path &path);

/// Deterministic child seed for a named stochastic component.
std::uint64_t child_seed(std::uint64_t root, const std::string &tag);

struct SchedulerRow {
  std::string scheduler;
  double entropy = 0.0;
  double mutual_info = 0.0;
  std::size_t oracle_calls = 0;
  double wall_ms = 0.0;
  std::optional<BoundCertificate> bound;
  Schedule schedule;
};

struct RunSummary {
  std::vector<SchedulerRow> rows;
  std::optional<GreedyTrace> greedy_trace;
  std::optional<GreedyTrace> lazy_trace;
  std::optional<EnumerationResult> enumeration;
};

/*
 * Runs the requested schedulers and writes into `output_dir`:
 *   results.csv   scheduler,entropy_nats,mutual_info_nats,oracle_calls[,bound_ratio]
 *   trace.csv     k,pick_order,sensor,gain_nats          (eager greedy, else lazy)
 *   trace_lazy.csv                                       (when both ran)
 *   timings.csv   scheduler,wall_ms
 *   manifest.json resolved config
 *   exhaustive_table.csv                                 (when requested)
 * results.csv and trace files are deterministic for a fixed config.
 */
RunSummary run_scenario(const Scenario &scenario, const std::filesystem::path &output_dir);

struct BenchRow {
  std::string regime;  // "sparse" or "dense"
  std::size_t K = 0;
  int repetition = 0;
  double wall_ms = 0.0;
  std::size_t oracle_calls = 0;
  double per_call_median_us = 0.0;
};

struct BenchSummaryRow {
  std::string regime;
  std::size_t K = 0;
  double median_wall_ms = 0.0;
  double median_per_call_us = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<BenchSummaryRow> summary;
};

/// Per-oracle-call timing sweep over K, for the configured prior and, when
/// enabled, its densified copy. Writes timings.csv, bench_summary.csv and
/// manifest.json into `output_dir` (skipped when empty).
BenchResult run_scaling_benchmark(const Scenario &scenario,
                                  const std::filesystem::path &output_dir);

std::string certificate_text(const BoundCertificate &cert);

double median(std::vector<double> values);

}  // namespace senssched
