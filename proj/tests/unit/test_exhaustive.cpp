#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "instances.hpp"
#include "oracles.hpp"
#include "senssched/errors.hpp"
#include "senssched/exhaustive.hpp"
#include "senssched/scheduler.hpp"

using namespace senssched;

namespace {

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

std::uint64_t choose(std::uint64_t n, std::uint64_t r) {
  if (r > n) return 0;
  double out = 1.0;
  for (std::uint64_t j = 1; j <= r; ++j) out = out * static_cast<double>(n - r + j) / static_cast<double>(j);
  return static_cast<std::uint64_t>(std::llround(out));
}

}  // namespace

TEST_CASE("one sensor, one step") {
  const auto prior = build_tracking_prior(1, 1, 1.0, 0.0);
  const OracleContext ctx(prior, SensorSuite(1, {sensors::linear_coordinate(1, 0, scalar(1.0))}));
  ExhaustiveOptions opts;
  opts.keep_table = true;
  const auto e = exhaustive_optimum(ctx, {1}, opts);
  CHECK(e.num_enumerated == 2);
  REQUIRE(e.full_table);
  CHECK(e.full_table->at(0).first.set(0).empty());
  CHECK(e.full_table->at(1).first.set(0) == std::vector<int>{0});
  CHECK(e.opt_cost == conditional_entropy(ctx, Schedule({{0}}, {1}, 1)));
  CHECK(e.max_cost == ctx.prior_entropy());
  CHECK(e.opt_schedule.set(0) == std::vector<int>{0});
  CHECK(e.max_schedule.set(0).empty());
}

TEST_CASE("full budgets make the full schedule optimal") {
  const auto inst = instances::random_instance(6, instances::PriorKind::gauss_markov, 2, 2, 3);
  const OracleContext ctx(inst.prior, inst.suite);
  const auto e = exhaustive_optimum(ctx, {3, 3});
  const Schedule full({{0, 1, 2}, {0, 1, 2}}, {3, 3}, 3);
  CHECK(e.opt_cost == doctest::Approx(conditional_entropy(ctx, full)).epsilon(1e-12));
  CHECK(e.max_cost == doctest::Approx(ctx.prior_entropy()).epsilon(1e-12));
}

TEST_CASE("enumeration agrees with an independent bitmask re-implementation") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto inst = instances::random_instance(seed, static_cast<instances::PriorKind>(seed % 3), 1, 2, 4);
    const OracleContext ctx(inst.prior, inst.suite);
    for (bool exact : {false, true}) {
      ExhaustiveOptions opts;
      opts.mode = exact ? EnumerationMode::exact_budget : EnumerationMode::up_to_budget;
      const auto e = exhaustive_optimum(ctx, {2, 2}, opts);
      const auto all = oracle::enumerate_bitmask(4, {2, 2}, exact);
      CHECK(e.num_enumerated == all.size());
      double opt = INFINITY;
      double max = -INFINITY;
      for (const auto &s : all) {
        const double h = oracle::entropy_long_form(inst.prior, inst.suite, s, inst.prior.mean());
        opt = std::min(opt, h);
        max = std::max(max, h);
      }
      CHECK(oracle::rel_err(e.opt_cost, opt) <= 1e-9);
      CHECK(oracle::rel_err(e.max_cost, max) <= 1e-9);
      CHECK(e.opt_cost <= e.max_cost);
    }
    const auto g = greedy_schedule(ctx, {2, 2});
    const auto cert = certify_bound(ctx, {2, 2}, g.entropy);
    CHECK(cert.kind == BoundCertificate::Kind::ratio);
    CHECK(cert.ratio <= 0.5 + 1e-9);
    CHECK(cert.within());
    CHECK(cert.opt_cost <= g.entropy + 1e-12);
    CHECK(g.entropy <= cert.max_cost + 1e-12);
  }
}

TEST_CASE("schedule counts") {
  CHECK(count_schedules(4, {2, 2}, EnumerationMode::up_to_budget) == 11 * 11);
  CHECK(count_schedules(4, {2, 2}, EnumerationMode::exact_budget) == 36);
  CHECK(count_schedules(5, {0, 5, 1}, EnumerationMode::up_to_budget) == 1 * 32 * 6);
  CHECK(count_schedules(5, {0, 5, 1}, EnumerationMode::exact_budget) == 1 * 1 * 5);
  for (std::size_t m = 1; m <= 8; ++m) {
    for (int s = 0; s <= static_cast<int>(m); ++s) {
      std::uint64_t up_to = 0;
      for (int j = 0; j <= s; ++j) up_to += choose(m, static_cast<std::uint64_t>(j));
      CHECK(count_schedules(m, {s, s}, EnumerationMode::up_to_budget) == up_to * up_to);
      CHECK(count_schedules(m, {s}, EnumerationMode::exact_budget) == choose(m, static_cast<std::uint64_t>(s)));
      CHECK(step_candidates(m, s, EnumerationMode::up_to_budget).size() == up_to);
    }
  }
  const std::vector<int> many(40, 10);
  CHECK(count_schedules(20, many, EnumerationMode::up_to_budget) ==
        std::numeric_limits<std::uint64_t>::max());
}

TEST_CASE("step candidates are ordered by size then lexicographically") {
  const auto c = step_candidates(4, 2, EnumerationMode::up_to_budget);
  const std::vector<std::vector<int>> expected{{},     {0},    {1},    {2},    {3},   {0, 1},
                                               {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  CHECK(c == expected);
  const auto exact = step_candidates(4, 2, EnumerationMode::exact_budget);
  CHECK(exact.size() == 6);
  CHECK(exact.front() == std::vector<int>{0, 1});
}

TEST_CASE("table order varies the last step fastest") {
  const auto inst = instances::random_instance(3, instances::PriorKind::tracking, 1, 2, 2);
  const OracleContext ctx(inst.prior, inst.suite);
  ExhaustiveOptions opts;
  opts.keep_table = true;
  const auto e = exhaustive_optimum(ctx, {1, 1}, opts);
  REQUIRE(e.full_table->size() == 9);
  std::vector<std::string> order;
  for (const auto &row : *e.full_table) order.push_back(row.first.to_string());
  const std::vector<std::string> expected{"|",  "|0",  "|1",  "0|", "0|0",
                                          "0|1", "1|", "1|0", "1|1"};
  CHECK(order == expected);
  for (const auto &[s, h] : *e.full_table) CHECK(h == conditional_entropy(ctx, s));

  std::ostringstream csv;
  write_table_csv(csv, e);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "step_0,step_1,cost_nats");
  std::getline(lines, line);
  CHECK(line.rfind(",,", 0) == 0);
  std::getline(lines, line);
  CHECK(line.rfind(",0,", 0) == 0);

  const auto no_table = exhaustive_optimum(ctx, {1, 1});
  CHECK_FALSE(no_table.full_table.has_value());
  std::ostringstream sink;
  CHECK_THROWS_AS(write_table_csv(sink, no_table), InvalidParams);
}

TEST_CASE("cap is enforced before any evaluation") {
  const auto inst = instances::random_instance(3, instances::PriorKind::tracking, 1, 3, 10);
  const OracleContext ctx(inst.prior, inst.suite);
  ExhaustiveOptions small;
  small.cap = 100;
  CHECK_THROWS_AS(exhaustive_optimum(ctx, {2, 2, 2}, small), TooLarge);
  CHECK_THROWS_AS(exhaustive_optimum(ctx, {10, 10, 10}), TooLarge);
}

TEST_CASE("up-to-budget optimum is attained at full budget") {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto inst = instances::random_instance(seed, static_cast<instances::PriorKind>(seed % 3), 2, 2, 4);
    const OracleContext ctx(inst.prior, inst.suite);
    const auto up_to = exhaustive_optimum(ctx, {2, 1});
    ExhaustiveOptions exact;
    exact.mode = EnumerationMode::exact_budget;
    const auto at_budget = exhaustive_optimum(ctx, {2, 1}, exact);
    CHECK(at_budget.opt_cost <= up_to.opt_cost + 1e-9);
    CHECK(at_budget.opt_cost >= up_to.opt_cost - 1e-12);
  }
}

TEST_CASE("parallel enumeration matches sequential") {
  const auto inst = instances::random_instance(17, instances::PriorKind::dense, 2, 3, 4);
  const OracleContext ctx(inst.prior, inst.suite);
  ExhaustiveOptions threaded;
  threaded.threads = 3;
  threaded.keep_table = true;
  const auto a = exhaustive_optimum(ctx, {2, 1, 2});
  const auto b = exhaustive_optimum(ctx, {2, 1, 2}, threaded);
  CHECK(a.opt_cost == b.opt_cost);
  CHECK(a.max_cost == b.max_cost);
  CHECK(a.opt_schedule == b.opt_schedule);
  CHECK(b.full_table->size() == b.num_enumerated);
}

TEST_CASE("certificate cases") {
  EnumerationResult e;
  e.opt_cost = 1.0;
  e.max_cost = 3.0;
  CHECK(certify_bound(1.0, e).ratio == 0.0);
  CHECK(certify_bound(3.0, e).ratio == 1.0);
  CHECK_FALSE(certify_bound(3.0, e).within());
  CHECK(certify_bound(2.0, e).ratio == 0.5);
  CHECK(certify_bound(2.0, e).within());
  CHECK(certify_bound(2.0 + 1e-9, e).within());
  CHECK_FALSE(certify_bound(2.0 + 1e-8, e).within());

  EnumerationResult flat;
  flat.opt_cost = 2.0;
  flat.max_cost = 2.0 + 1e-13;
  const auto eq = certify_bound(2.0 + 5e-10, flat);
  CHECK(eq.kind == BoundCertificate::Kind::certified_equal);
  CHECK(eq.within());
  const auto bad = certify_bound(2.1, flat);
  CHECK(bad.kind == BoundCertificate::Kind::not_certified);
  CHECK_FALSE(bad.within());
}

TEST_CASE("degenerate instance certifies equality") {
  // A sensor with zero Jacobian leaves every schedule at the prior entropy.
  const auto prior = build_gauss_markov_prior(scalar(0.5), scalar(1.0), scalar(1.0), VectorXd::Zero(1), 2);
  const OracleContext ctx(prior, SensorSuite(1, {sensors::quadratic(scalar(0.0), scalar(1.0))}));
  const auto g = greedy_schedule(ctx, {1, 1});
  const auto cert = certify_bound(ctx, {1, 1}, g.entropy);
  CHECK(cert.kind == BoundCertificate::Kind::certified_equal);
}
