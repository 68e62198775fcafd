#include <doctest.h>

#include <cmath>
#include <random>

#include "instances.hpp"
#include "oracles.hpp"
#include "senssched/entropy_oracle.hpp"
#include "senssched/errors.hpp"

using namespace senssched;

namespace {

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

VectorXd vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// n = 1, K = 1, unit prior variance, one direct sensor with unit noise.
OracleContext conjugate_context(PriorForm form) {
  GaussianPrior prior(1, 1, VectorXd::Zero(1), std::move(form));
  SensorSuite suite(1, {sensors::linear_coordinate(1, 0, scalar(1.0))});
  return OracleContext(std::move(prior), std::move(suite));
}

Schedule full_schedule(std::size_t K, std::size_t m) {
  std::vector<std::vector<int>> sets(K);
  for (auto &s : sets) {
    for (std::size_t i = 0; i < m; ++i) s.push_back(static_cast<int>(i));
  }
  return Schedule(sets, std::vector<int>(K, static_cast<int>(m)), m);
}

Schedule schedule_from_mask(std::uint32_t mask, std::size_t K, std::size_t m) {
  std::vector<std::vector<int>> sets(K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << (k * m + i))) sets[k].push_back(static_cast<int>(i));
    }
  }
  return Schedule(sets, std::vector<int>(K, static_cast<int>(m)), m);
}

// A sensor measuring the first two coordinates at once, with correlated noise.
Sensor planar_position(Index n) {
  MatrixXd noise(2, 2);
  noise << 0.5, 0.2, 0.2, 0.8;
  return Sensor(
      "planar_position", n, 2, [](const VectorXd &x) { return VectorXd(x.head(2)); },
      [n](const VectorXd &) {
        MatrixXd j = MatrixXd::Zero(2, n);
        j(0, 0) = 1.0;
        j(1, 1) = 1.0;
        return j;
      },
      noise);
}

}  // namespace

TEST_CASE("scalar conjugate case in both forms") {
  const double expected = 0.5 * std::log(2.0 * M_PI * M_E * 0.5);
  CHECK(expected == doctest::Approx(1.07236).epsilon(1e-5));
  const Schedule one({{0}}, {1}, 1);

  const auto prec = conjugate_context(PrecisionDense{scalar(1.0)});
  CHECK(conditional_entropy_precision_form(prec, one) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(information_increment(prec, one).block(0)(0, 0) == doctest::Approx(1.0));
  CHECK(posterior_covariance(prec, one)(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(mutual_information(prec, one) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(mutual_information(prec, one) == doctest::Approx(0.34657).epsilon(1e-5));

  const auto cov = conjugate_context(CovarianceDense{scalar(1.0)});
  CHECK(conditional_entropy_covariance_form(cov, one) == doctest::Approx(expected).epsilon(1e-14));

  const auto sparse_cov = conjugate_context(CovarianceSparse{BlockTridiagonalMatrix({scalar(1.0)}, {})});
  CHECK(conditional_entropy(sparse_cov, one) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("empty schedule gives the prior entropy exactly") {
  for (auto kind : {instances::PriorKind::tracking, instances::PriorKind::gauss_markov,
                    instances::PriorKind::dense}) {
    const auto inst = instances::random_instance(77, kind, 2, 3, 3);
    const auto forms = instances::both_forms(inst);
    const Schedule none = Schedule::empty({3, 3, 3}, 3);
    const double h0 = prior_entropy(inst.prior);
    CHECK(forms.precision.prior_entropy() == prior_entropy(forms.precision.prior()));
    CHECK(forms.covariance.prior_entropy() == prior_entropy(forms.covariance.prior()));
    CHECK(conditional_entropy_covariance_form(forms.covariance, none) == forms.covariance.prior_entropy());
    CHECK(oracle::rel_err(conditional_entropy_precision_form(forms.precision, none), h0) <= 1e-12);
    CHECK(mutual_information(forms.covariance, none) == 0.0);
    const MatrixXd post = posterior_covariance(forms.precision, none);
    CHECK((post - inst.prior.dense_covariance()).norm() <= 1e-9 * post.norm());
  }
}

TEST_CASE("seeded nonlinear instance: precision and covariance forms agree") {
  // n = 2, K = 3, range and linear sensors, sparse covariance prior.
  std::mt19937_64 rng(2024);
  VectorXd mean = oracle::random_matrix(rng, 6, 1, 2.0);
  const auto prior = build_tracking_prior(2, 3, 1.5, 0.3, mean);
  const SensorSuite suite(2, {sensors::range(vec({4, 1}), scalar(0.3)),
                              sensors::linear_coordinate(2, 0, scalar(0.5)),
                              sensors::range(vec({-3, 2}), scalar(1.2))});
  const OracleContext cov(prior, suite);
  const OracleContext prec(convert_dense(prior), suite, prior.mean());
  for (std::uint32_t mask = 0; mask < (1u << 9); ++mask) {
    const Schedule s = schedule_from_mask(mask, 3, 3);
    const double a = conditional_entropy_covariance_form(cov, s);
    const double b = conditional_entropy_precision_form(prec, s);
    CHECK(oracle::rel_err(a, b) <= 1e-8);
  }
}

TEST_CASE("dense covariance prior agrees with the densely inverted precision") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = instances::random_instance(seed, instances::PriorKind::dense, 2, 3, 4);
    const auto forms = instances::both_forms(inst);
    std::mt19937_64 rng(seed);
    for (int j = 0; j < 20; ++j) {
      const Schedule s = schedule_from_mask(static_cast<std::uint32_t>(rng()) & 0xFFF, 3, 4);
      CHECK(oracle::rel_err(conditional_entropy(forms.covariance, s),
                            conditional_entropy(forms.precision, s)) <= 1e-8);
    }
  }
}

TEST_CASE("dispatch follows the stored representation") {
  const auto tr = instances::random_instance(5, instances::PriorKind::tracking, 2, 3, 3);
  const OracleContext cov(tr.prior, tr.suite);
  const auto gm = instances::random_instance(5, instances::PriorKind::gauss_markov, 2, 3, 3);
  const OracleContext prec(gm.prior, gm.suite);
  const OracleContext dense_prec(densify(gm.prior), gm.suite);
  const Schedule s({{0, 2}, {1}, {}}, {3, 3, 3}, 3);
  CHECK(conditional_entropy(cov, s) == conditional_entropy_covariance_form(cov, s));
  CHECK(conditional_entropy(prec, s) == conditional_entropy_precision_form(prec, s));
  CHECK(conditional_entropy(dense_prec, s) == conditional_entropy_precision_form(dense_prec, s));
  CHECK(oracle::rel_err(conditional_entropy(dense_prec, s), conditional_entropy(prec, s)) <= 1e-10);
}

TEST_CASE("formulas refuse the missing representation unless conversion is enabled") {
  const auto tr = instances::random_instance(9, instances::PriorKind::tracking, 2, 2, 2);
  const auto gm = instances::random_instance(9, instances::PriorKind::gauss_markov, 2, 2, 2);
  const Schedule s({{0}, {1}}, {2, 2}, 2);
  const OracleContext cov(tr.prior, tr.suite);
  const OracleContext prec(gm.prior, gm.suite);
  CHECK_THROWS_AS(conditional_entropy_precision_form(cov, s), WrongForm);
  CHECK_THROWS_AS(posterior_covariance(cov, s), WrongForm);
  CHECK_THROWS_AS(conditional_entropy_covariance_form(prec, s), WrongForm);

  OracleOptions convert;
  convert.allow_form_conversion = true;
  const OracleContext cov_c(tr.prior, tr.suite, std::nullopt, convert);
  const OracleContext prec_c(gm.prior, gm.suite, std::nullopt, convert);
  REQUIRE(cov_c.converted_precision().has_value());
  REQUIRE(prec_c.converted_covariance().has_value());
  CHECK(oracle::rel_err(conditional_entropy_precision_form(cov_c, s),
                        conditional_entropy_covariance_form(cov_c, s)) <= 1e-9);
  CHECK(oracle::rel_err(conditional_entropy_precision_form(prec_c, s),
                        conditional_entropy_covariance_form(prec_c, s)) <= 1e-9);
}

TEST_CASE("posterior covariance matches the long-form expression") {
  for (auto kind : {instances::PriorKind::tracking, instances::PriorKind::gauss_markov,
                    instances::PriorKind::dense}) {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      const auto inst = instances::random_instance(seed, kind, 2, 3, 3);
      const auto forms = instances::both_forms(inst);
      const Schedule s({{0, 1}, {2}, {0, 2}}, {3, 3, 3}, 3);
      const auto [C, R] = oracle::explicit_measurement_model(inst.suite, s, inst.prior.mean());
      const MatrixXd expected = oracle::posterior_long_form(inst.prior.dense_covariance(), C, R);
      const MatrixXd got = posterior_covariance(forms.precision, s);
      CHECK((got - expected).norm() <= 1e-9 * std::max(1.0, expected.norm()));

      const double h = conditional_entropy(forms.covariance, s);
      const double prop2 = 0.5 * (static_cast<double>(got.rows()) * kLog2PiE + logdet_dense(got));
      CHECK(oracle::rel_err(h, prop2) <= 1e-9);
      CHECK(oracle::rel_err(h, oracle::entropy_long_form(inst.prior, inst.suite, s, inst.prior.mean())) <= 1e-8);
    }
  }
}

TEST_CASE("multi-row sensors: constants cancel by measurement rows") {
  const auto tr = build_tracking_prior(3, 2, 1.0, 0.4);
  const SensorSuite suite(3, {planar_position(3), sensors::linear_coordinate(3, 2, scalar(0.7))});
  const OracleContext cov(tr, suite);
  const OracleContext prec(convert_dense(tr), suite);
  for (std::uint32_t mask = 0; mask < 16; ++mask) {
    const Schedule s = schedule_from_mask(mask, 2, 2);
    CHECK(oracle::rel_err(conditional_entropy(cov, s), conditional_entropy(prec, s)) <= 1e-9);
    CHECK(oracle::rel_err(conditional_entropy(cov, s),
                          oracle::entropy_long_form(tr, suite, s, tr.mean())) <= 1e-9);
  }
}

TEST_CASE("mutual information is non-negative and grows with the selection") {
  for (auto kind : {instances::PriorKind::tracking, instances::PriorKind::gauss_markov,
                    instances::PriorKind::dense}) {
    const auto inst = instances::random_instance(31, kind, 2, 2, 3);
    const OracleContext ctx(inst.prior, inst.suite);
    std::vector<double> mi(1u << 6);
    for (std::uint32_t mask = 0; mask < mi.size(); ++mask) {
      mi[mask] = mutual_information(ctx, schedule_from_mask(mask, 2, 3));
      CHECK(mi[mask] >= -1e-9);
    }
    for (std::uint32_t a = 0; a < mi.size(); ++a) {
      for (std::uint32_t bit = 0; bit < 6; ++bit) {
        if (!(a & (1u << bit))) CHECK(mi[a | (1u << bit)] >= mi[a] - 1e-9);
      }
    }
  }
}

TEST_CASE("finite-difference jacobians barely move the objective") {
  const auto inst = instances::random_instance(8, instances::PriorKind::gauss_markov, 2, 3, 4);
  std::vector<Sensor> fd_sensors;
  for (const auto &s : inst.suite.sensors()) {
    fd_sensors.emplace_back(
        s.kind() + "_fd", s.input_dim(), s.output_dim(),
        [s](const VectorXd &x) { return s.measure(x); },
        [s](const VectorXd &x) {
          return oracle::fd_jacobian([&](const VectorXd &v) { return s.measure(v); }, x);
        },
        s.noise_cov());
  }
  const OracleContext analytic(inst.prior, inst.suite);
  const OracleContext numeric(inst.prior, SensorSuite(2, fd_sensors));
  const Schedule s = full_schedule(3, 4);
  CHECK(std::abs(conditional_entropy(analytic, s) - conditional_entropy(numeric, s)) <= 1e-4);
}

TEST_CASE("innovation factorization retries with jitter at round-off level") {
  // Two near-noiseless copies of the same sensor make R + C Sigma C^T singular
  // in floating point.
  const SensorSuite suite(1, {sensors::linear_coordinate(1, 0, scalar(1e-17)),
                              sensors::linear_coordinate(1, 0, scalar(1e-17))});
  const Schedule both({{0, 1}}, {2}, 2);
  const OracleContext dense(GaussianPrior(1, 1, VectorXd::Zero(1), CovarianceDense{scalar(1.0)}), suite);
  const OracleContext sparse(build_tracking_prior(1, 1, 1.0, 0.0), suite);
  double h_dense = 0.0;
  double h_sparse = 0.0;
  CHECK_NOTHROW(h_dense = conditional_entropy_covariance_form(dense, both));
  CHECK_NOTHROW(h_sparse = conditional_entropy_covariance_form(sparse, both));
  CHECK(std::isfinite(h_dense));
  CHECK(h_dense == doctest::Approx(h_sparse));
  CHECK(h_dense < dense.prior_entropy());
}

TEST_CASE("context validation") {
  const auto inst = instances::random_instance(3, instances::PriorKind::tracking, 2, 2, 2);
  CHECK_THROWS_AS(OracleContext(inst.prior, inst.suite, VectorXd::Zero(3)), DimensionMismatch);
  CHECK_THROWS_AS(OracleContext(inst.prior, SensorSuite(3, {sensors::linear_coordinate(3, 0, scalar(1.0))})),
                  DimensionMismatch);
  const OracleContext ctx(inst.prior, inst.suite);
  CHECK_THROWS_AS(conditional_entropy(ctx, Schedule::empty({1}, 2)), DimensionMismatch);
  CHECK_THROWS_AS(conditional_entropy(ctx, Schedule::empty({1, 1}, 3)), DimensionMismatch);
  CHECK((ctx.linearization() - inst.prior.mean()).norm() == 0.0);
}

TEST_CASE("map linearization without measurements is the prior mean") {
  const auto inst = instances::random_instance(4, instances::PriorKind::gauss_markov, 2, 3, 2);
  const auto est = map_linearization(inst.prior, inst.suite, Schedule::empty({1, 1, 1}, 2), {});
  CHECK(est.converged);
  CHECK((est.estimate - inst.prior.mean()).norm() == 0.0);
}

TEST_CASE("map linearization in the scalar conjugate case") {
  const SensorSuite suite(1, {sensors::linear_coordinate(1, 0, scalar(1.0))});
  const Schedule one({{0}}, {1}, 1);
  for (PriorForm form : {PriorForm{PrecisionDense{scalar(1.0)}}, PriorForm{CovarianceDense{scalar(1.0)}},
                         PriorForm{CovarianceSparse{BlockTridiagonalMatrix({scalar(1.0)}, {})}}}) {
    const GaussianPrior prior(1, 1, VectorXd::Zero(1), form);
    const auto est = map_linearization(prior, suite, one, {VectorXd::Constant(1, 2.0)});
    CHECK(est.converged);
    CHECK(est.estimate(0) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("map linearization with linear sensors reaches the Gaussian posterior mean in one step") {
  std::mt19937_64 rng(12);
  for (auto kind : {instances::PriorKind::tracking, instances::PriorKind::gauss_markov,
                    instances::PriorKind::dense}) {
    const auto inst0 = instances::random_instance(12, kind, 2, 3, 1);
    const SensorSuite suite(2, {sensors::linear_coordinate(2, 0, scalar(0.4)),
                                sensors::linear_coordinate(2, 1, scalar(0.9))});
    const Schedule past({{0, 1}, {1}, {0}}, {2, 2, 2}, 2);
    std::vector<VectorXd> y{oracle::random_matrix(rng, 2, 1), oracle::random_matrix(rng, 1, 1),
                            oracle::random_matrix(rng, 1, 1)};
    VectorXd stacked(4);
    stacked << y[0], y[1], y[2];
    const auto [C, R] = oracle::explicit_measurement_model(suite, past, inst0.prior.mean());
    const MatrixXd Sigma = inst0.prior.dense_covariance();
    const VectorXd expected =
        inst0.prior.mean() +
        Sigma * C.transpose() * (C * Sigma * C.transpose() + R).fullPivLu().solve(stacked - C * inst0.prior.mean());

    GaussNewtonOptions one_step;
    one_step.max_iterations = 1;
    const auto est = map_linearization(inst0.prior, suite, past, y, one_step);
    CHECK((est.estimate - expected).norm() <= 1e-9 * std::max(1.0, expected.norm()));
    const auto full = map_linearization(inst0.prior, suite, past, y);
    CHECK(full.converged);
    CHECK(full.iterations <= 2);
  }
}

TEST_CASE("map linearization with nonlinear sensors is a stationary point") {
  const auto inst = instances::random_instance(21, instances::PriorKind::gauss_markov, 2, 3, 3);
  const SensorSuite suite(2, {sensors::range(vec({3, 3}), scalar(0.2)),
                              sensors::range(vec({-3, 1}), scalar(0.2)),
                              sensors::linear_coordinate(2, 1, scalar(0.5))});
  const Schedule past({{0, 1}, {2}, {0, 2}}, {3, 3, 3}, 3);
  std::vector<VectorXd> y;
  for (std::size_t k = 0; k < 3; ++k) {
    const VectorXd xk = inst.prior.mean().segment(static_cast<Index>(k) * 2, 2) + vec({0.3, -0.2});
    y.push_back(stacked_measurement(suite, past.set(k), xk));
  }
  for (const GaussianPrior &prior : {inst.prior, convert_dense(inst.prior)}) {
    const auto est = map_linearization(prior, suite, past, y);
    REQUIRE(est.converged);
    // Gradient of the negative log posterior vanishes at the MAP.
    const MatrixXd P = prior.dense_precision();
    VectorXd grad = P * (est.estimate - prior.mean());
    for (std::size_t k = 0; k < 3; ++k) {
      const VectorXd xk = est.estimate.segment(static_cast<Index>(k) * 2, 2);
      const VectorXd r = y[k] - stacked_measurement(suite, past.set(k), xk);
      MatrixXd Jk(r.size(), 2);
      MatrixXd Rk = MatrixXd::Zero(r.size(), r.size());
      Index row = 0;
      for (int i : past.set(k)) {
        Jk.row(row) = suite[i].jacobian(xk);
        Rk(row, row) = suite[i].noise_cov()(0, 0);
        ++row;
      }
      grad.segment(static_cast<Index>(k) * 2, 2) -= Jk.transpose() * Rk.inverse() * r;
    }
    CHECK(grad.lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("map linearization validates measurement shapes") {
  const auto inst = instances::random_instance(4, instances::PriorKind::tracking, 1, 2, 2);
  const SensorSuite suite(1, {sensors::linear_coordinate(1, 0, scalar(1.0))});
  const Schedule past({{0}, {}}, {1, 1}, 1);
  CHECK_THROWS_AS(map_linearization(inst.prior, suite, past, {VectorXd::Zero(2), VectorXd()}),
                  DimensionMismatch);
  CHECK_THROWS_AS(map_linearization(inst.prior, suite, past, {VectorXd::Zero(1)}), DimensionMismatch);
}
