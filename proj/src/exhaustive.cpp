#include "senssched/exhaustive.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "senssched/errors.hpp"
#include "senssched/format.hpp"
#include "senssched/parallel.hpp"
#include "senssched/scheduler.hpp"

namespace senssched {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t r) {
  if (r > n) return 0;
  r = std::min(r, n - r);
  std::uint64_t out = 1;
  for (std::uint64_t j = 1; j <= r; ++j) {
    out = out * (n - r + j) / j;  // exact: out * (n-r+j) is divisible by j here
  }
  return out;
}

void append_combinations(std::size_t m, int size, std::vector<std::vector<int>> &out) {
  std::vector<int> c(static_cast<std::size_t>(size));
  for (int j = 0; j < size; ++j) c[static_cast<std::size_t>(j)] = j;
  while (true) {
    out.push_back(c);
    int j = size - 1;
    while (j >= 0 && c[static_cast<std::size_t>(j)] == static_cast<int>(m) - size + j) --j;
    if (j < 0) return;
    ++c[static_cast<std::size_t>(j)];
    for (int l = j + 1; l < size; ++l) {
      c[static_cast<std::size_t>(l)] = c[static_cast<std::size_t>(l - 1)] + 1;
    }
  }
}

}  // namespace

std::vector<std::vector<int>> step_candidates(std::size_t num_sensors, int budget,
                                              EnumerationMode mode) {
  std::vector<std::vector<int>> out;
  const int lo = (mode == EnumerationMode::exact_budget) ? budget : 0;
  for (int size = lo; size <= budget; ++size) {
    if (static_cast<std::size_t>(size) > num_sensors) break;
    append_combinations(num_sensors, size, out);
  }
  return out;
}

std::uint64_t count_schedules(std::size_t num_sensors, const std::vector<int> &budgets,
                              EnumerationMode mode) {
  std::uint64_t total = 1;
  for (int b : budgets) {
    std::uint64_t per_step = 0;
    const int lo = (mode == EnumerationMode::exact_budget) ? b : 0;
    for (int size = lo; size <= b; ++size) per_step += binomial(num_sensors, static_cast<std::uint64_t>(size));
    total = saturating_mul(total, per_step);
  }
  return total;
}

EnumerationResult exhaustive_optimum(const OracleContext &ctx, const std::vector<int> &budgets,
                                     const ExhaustiveOptions &options) {
  check_budgets(budgets, ctx.horizon(), ctx.num_sensors());
  const std::size_t m = ctx.num_sensors();
  const std::size_t K = ctx.horizon();
  const std::uint64_t count = count_schedules(m, budgets, options.mode);
  if (count > options.cap) {
    throw TooLarge("exhaustive enumeration of " +
                   (count == kSaturated ? std::string("more than 2^64") : std::to_string(count)) +
                   " schedules exceeds the cap of " + std::to_string(options.cap));
  }

  std::vector<std::vector<std::vector<int>>> per_step(K);
  for (std::size_t k = 0; k < K; ++k) per_step[k] = step_candidates(m, budgets[k], options.mode);

  // Mixed-radix decoding of a linear index; the last step varies fastest.
  auto decode = [&](std::uint64_t index) {
    std::vector<std::vector<int>> sets(K);
    for (std::size_t kk = K; kk-- > 0;) {
      const std::uint64_t radix = per_step[kk].size();
      sets[kk] = per_step[kk][index % radix];
      index /= radix;
    }
    return Schedule(std::move(sets), budgets, m);
  };

  std::vector<double> costs(count);
  parallel_for(count, options.threads,
               [&](std::size_t j) { costs[j] = conditional_entropy(ctx, decode(j)); });

  EnumerationResult result;
  result.num_enumerated = count;
  std::uint64_t argmin = 0;
  std::uint64_t argmax = 0;
  for (std::uint64_t j = 1; j < count; ++j) {
    if (costs[j] < costs[argmin]) argmin = j;
    if (costs[j] > costs[argmax]) argmax = j;
  }
  result.opt_cost = costs[argmin];
  result.max_cost = costs[argmax];
  result.opt_schedule = decode(argmin);
  result.max_schedule = decode(argmax);
  if (options.keep_table) {
    result.full_table.emplace();
    result.full_table->reserve(count);
    for (std::uint64_t j = 0; j < count; ++j) result.full_table->emplace_back(decode(j), costs[j]);
  }
  return result;
}

bool BoundCertificate::within(double bound, double slack) const {
  switch (kind) {
    case Kind::ratio:
      return ratio <= bound + slack;
    case Kind::certified_equal:
      return true;
    case Kind::not_certified:
      return false;
  }
  return false;
}

BoundCertificate certify_bound(double greedy_cost, const EnumerationResult &enumeration) {
  BoundCertificate cert;
  cert.opt_cost = enumeration.opt_cost;
  cert.max_cost = enumeration.max_cost;
  const double range = enumeration.max_cost - enumeration.opt_cost;
  if (range <= 1e-12) {
    const bool equal = std::abs(greedy_cost - enumeration.opt_cost) <= 1e-9;
    cert.kind = equal ? BoundCertificate::Kind::certified_equal
                      : BoundCertificate::Kind::not_certified;
    cert.ratio = equal ? 0.0 : std::numeric_limits<double>::infinity();
    return cert;
  }
  cert.kind = BoundCertificate::Kind::ratio;
  cert.ratio = (greedy_cost - enumeration.opt_cost) / range;
  return cert;
}

BoundCertificate certify_bound(const OracleContext &ctx, const std::vector<int> &budgets,
                               double greedy_cost, const ExhaustiveOptions &options) {
  ExhaustiveOptions opts = options;
  opts.mode = EnumerationMode::up_to_budget;
  opts.keep_table = false;
  return certify_bound(greedy_cost, exhaustive_optimum(ctx, budgets, opts));
}

void write_table_csv(std::ostream &out, const EnumerationResult &result) {
  if (!result.full_table || result.full_table->empty()) {
    throw InvalidParams("write_table_csv: enumeration was run without keep_table");
  }
  const std::size_t K = result.full_table->front().first.horizon();
  for (std::size_t k = 0; k < K; ++k) out << "step_" << k << ',';
  out << "cost_nats\n";
  for (const auto &[schedule, cost] : *result.full_table) {
    for (std::size_t k = 0; k < K; ++k) {
      const auto &set = schedule.set(k);
      for (std::size_t j = 0; j < set.size(); ++j) {
        if (j > 0) out << ';';
        out << set[j];
      }
      out << ',';
    }
    out << format_real(cost) << '\n';
  }
}

}  // namespace senssched
