#include "senssched/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "senssched/errors.hpp"
#include "senssched/format.hpp"

namespace senssched {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

// ---- json helpers --------------------------------------------------------

const json &require(const json &obj, const std::string &key, const std::string &path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(path + "." + key, "missing required field");
  }
  return obj.at(key);
}

double as_real(const json &v, const std::string &path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

std::int64_t as_int(const json &v, const std::string &path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<std::int64_t>();
}

std::string as_string(const json &v, const std::string &path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

VectorXd as_vector(const json &v, const std::string &path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Index>(i)) = as_real(v[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

MatrixXd as_matrix(const json &v, const std::string &path) {
  if (v.is_number()) {
    return MatrixXd::Constant(1, 1, v.get<double>());
  }
  if (!v.is_array() || v.empty() || !v[0].is_array()) {
    throw ConfigError(path, "expected a matrix (array of rows)");
  }
  const auto rows = v.size();
  const auto cols = v[0].size();
  MatrixXd out(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!v[r].is_array() || v[r].size() != cols) {
      throw ConfigError(path, "matrix rows must have equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out(static_cast<Index>(r), static_cast<Index>(c)) =
          as_real(v[r][c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return out;
}

json to_json(const VectorXd &v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json to_json(const MatrixXd &m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

// Any library error raised while building an object from config becomes a
// ConfigError on that field.
template <class Fn>
auto with_field(const std::string &path, Fn &&fn) {
  try {
    return fn();
  } catch (const ConfigError &) {
    throw;
  } catch (const Error &e) {
    throw ConfigError(path, e.what());
  }
}

// ---- resolution ----------------------------------------------------------

json resolve_prior(const json &p) {
  const std::string path = "prior";
  if (!p.is_object()) throw ConfigError(path, "expected an object");
  const std::string kind = as_string(require(p, "kind", path), path + ".kind");
  json out;
  out["kind"] = kind;
  std::string storage = p.contains("storage") ? as_string(p["storage"], path + ".storage") : "sparse";
  if (storage != "sparse" && storage != "dense") {
    throw ConfigError(path + ".storage", "expected \"sparse\" or \"dense\"");
  }
  out["storage"] = storage;

  const auto K = as_int(require(p, "K", path), path + ".K");
  if (K <= 0) throw ConfigError(path + ".K", "must be positive");
  out["K"] = K;

  if (kind == "tracking") {
    const auto n = as_int(require(p, "n", path), path + ".n");
    if (n <= 0) throw ConfigError(path + ".n", "must be positive");
    out["n"] = n;
    out["marginal_var"] = as_real(require(p, "marginal_var", path), path + ".marginal_var");
    out["neighbor_corr"] = as_real(require(p, "neighbor_corr", path), path + ".neighbor_corr");
    const VectorXd mean = p.contains("mean") ? as_vector(p["mean"], path + ".mean")
                                             : VectorXd::Zero(n * K);
    if (mean.size() != n * K) throw ConfigError(path + ".mean", "must have length n*K");
    out["mean"] = to_json(mean);
  } else if (kind == "gauss_markov") {
    const MatrixXd A = as_matrix(require(p, "A", path), path + ".A");
    const Index n = A.rows();
    out["n"] = n;
    out["A"] = to_json(A);
    out["Q"] = to_json(as_matrix(require(p, "Q", path), path + ".Q"));
    out["Sigma0"] = to_json(as_matrix(require(p, "Sigma0", path), path + ".Sigma0"));
    const VectorXd mu0 = p.contains("mu0") ? as_vector(p["mu0"], path + ".mu0") : VectorXd::Zero(n);
    out["mu0"] = to_json(mu0);
  } else if (kind == "dense_custom") {
    const auto n = as_int(require(p, "n", path), path + ".n");
    if (n <= 0) throw ConfigError(path + ".n", "must be positive");
    out["n"] = n;
    const std::string form = as_string(require(p, "form", path), path + ".form");
    if (form != "covariance" && form != "precision") {
      throw ConfigError(path + ".form", "expected \"covariance\" or \"precision\"");
    }
    out["form"] = form;
    out["matrix"] = to_json(as_matrix(require(p, "matrix", path), path + ".matrix"));
    const VectorXd mean = p.contains("mean") ? as_vector(p["mean"], path + ".mean")
                                             : VectorXd::Zero(n * K);
    out["mean"] = to_json(mean);
  } else {
    throw ConfigError(path + ".kind", "unknown prior kind \"" + kind +
                                          "\" (tracking, gauss_markov, dense_custom)");
  }
  return out;
}

json resolve_sensor(const json &s, Index n, const std::string &path) {
  if (!s.is_object()) throw ConfigError(path, "expected an object");
  const std::string kind = as_string(require(s, "kind", path), path + ".kind");
  json out;
  out["kind"] = kind;
  if (kind == "linear_coordinate") {
    out["axis"] = as_int(require(s, "axis", path), path + ".axis");
  } else if (kind == "range") {
    out["anchor"] = to_json(as_vector(require(s, "anchor", path), path + ".anchor"));
  } else if (kind == "bearing") {
    out["anchor"] = to_json(as_vector(require(s, "anchor", path), path + ".anchor"));
  } else if (kind == "quadratic") {
    out["weight"] = s.contains("weight") ? to_json(as_matrix(s["weight"], path + ".weight"))
                                         : to_json(MatrixXd(MatrixXd::Identity(n, n)));
  } else {
    throw ConfigError(path + ".kind", "unknown sensor kind \"" + kind +
                                          "\" (linear_coordinate, range, bearing, quadratic)");
  }
  if (s.contains("noise_cov")) {
    out["noise_cov"] = to_json(as_matrix(s["noise_cov"], path + ".noise_cov"));
  } else {
    const double var = s.contains("noise_var") ? as_real(s["noise_var"], path + ".noise_var") : 1.0;
    out["noise_cov"] = to_json(MatrixXd(MatrixXd::Constant(1, 1, var)));
  }
  return out;
}

Sensor build_sensor(const json &s, Index n, const std::string &path) {
  return with_field(path, [&] {
    const std::string kind = s["kind"];
    const MatrixXd noise = as_matrix(s["noise_cov"], path + ".noise_cov");
    if (kind == "linear_coordinate") {
      return sensors::linear_coordinate(n, s["axis"].get<Index>(), noise);
    }
    if (kind == "range") {
      const VectorXd anchor = as_vector(s["anchor"], path + ".anchor");
      if (anchor.size() != n) throw ConfigError(path + ".anchor", "must have length n");
      return sensors::range(anchor, noise);
    }
    if (kind == "bearing") {
      return sensors::bearing(n, as_vector(s["anchor"], path + ".anchor"), noise);
    }
    const MatrixXd w = as_matrix(s["weight"], path + ".weight");
    if (w.rows() != n) throw ConfigError(path + ".weight", "must be n x n");
    return sensors::quadratic(w, noise);
  });
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Portable standard normal draws (Box-Muller on 53-bit uniforms).
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  VectorXd vector(Index size) {
    VectorXd v(size);
    for (Index i = 0; i < size; ++i) v(i) = next();
    return v;
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string write_trace(const GreedyTrace &trace) {
  std::string out = "k,pick_order,sensor,gain_nats\n";
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto &picks = trace.steps[k].picks;
    for (std::size_t j = 0; j < picks.size(); ++j) {
      out += std::to_string(k) + ',' + std::to_string(j) + ',' +
             std::to_string(picks[j].sensor) + ',' + format_real(picks[j].gain) + '\n';
    }
  }
  return out;
}

struct RecedingOutcome {
  GreedyResult greedy;
  double prior_entropy = 0.0;
};

// Plan step by step, re-linearizing at the MAP estimate given the simulated
// measurements of the steps already scheduled.
RecedingOutcome run_receding(const Scenario &sc, const GaussianPrior &prior,
                             const SensorSuite &suite, const GreedyOptions &options) {
  const Index n = prior.state_dim();
  const std::size_t K = prior.horizon();
  NormalSource normals(child_seed(sc.seed, "simulation"));

  const MatrixXd cov = prior.dense_covariance();
  const Eigen::LLT<MatrixXd> cov_llt = checked_llt(cov);
  const VectorXd truth = prior.mean() + cov_llt.matrixL() * normals.vector(prior.batch_dim());

  RecedingOutcome out;
  auto &result = out.greedy;
  result.schedule = Schedule::empty(sc.budgets, suite.size());
  std::vector<VectorXd> measurements(K, VectorXd(0));
  for (std::size_t k = 0; k < K; ++k) {
    const MapEstimate map = map_linearization(prior, suite, result.schedule, measurements);
    const OracleContext ctx(prior, suite, map.estimate);
    out.prior_entropy = ctx.prior_entropy();
    const double base = conditional_entropy(ctx, result.schedule);
    StepResult step = options.lazy
                          ? lazy_greedy_step(ctx, result.schedule, k, sc.budgets[k], options, base)
                          : greedy_step(ctx, result.schedule, k, sc.budgets[k], options, base);
    step.trace.oracle_calls += 1;  // base evaluation at the new linearization
    const VectorXd xk = truth.segment(static_cast<Index>(k) * n, n);
    VectorXd y = stacked_measurement(suite, step.set, xk);
    Index r = 0;
    for (int i : step.set) {
      const auto p = suite[i].output_dim();
      const Eigen::LLT<MatrixXd> noise_llt(suite[i].noise_cov(k));
      y.segment(r, p) += noise_llt.matrixL() * normals.vector(p);
      r += p;
    }
    measurements[k] = std::move(y);
    result.schedule = result.schedule.with_set(k, std::move(step.set));
    result.entropy = step.entropy;
    result.trace.steps.push_back(std::move(step.trace));
  }
  return out;
}

}  // namespace

std::uint64_t child_seed(std::uint64_t root, const std::string &tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(root ^ splitmix64(h));
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

Scenario parse_scenario(const json &config) {
  if (!config.is_object()) throw ConfigError("<root>", "expected an object");
  Scenario sc;
  json &r = sc.resolved;

  if (config.contains("seed")) {
    const auto seed = as_int(config["seed"], "seed");
    if (seed < 0) throw ConfigError("seed", "must be non-negative");
    sc.seed = static_cast<std::uint64_t>(seed);
  }
  r["seed"] = sc.seed;

  r["prior"] = resolve_prior(require(config, "prior", "<root>"));
  const Index n = r["prior"]["n"].get<Index>();
  const auto K = r["prior"]["K"].get<std::size_t>();

  const json &sensor_list = require(config, "sensors", "<root>");
  if (!sensor_list.is_array() || sensor_list.empty()) {
    throw ConfigError("sensors", "expected a non-empty array");
  }
  r["sensors"] = json::array();
  for (std::size_t i = 0; i < sensor_list.size(); ++i) {
    r["sensors"].push_back(resolve_sensor(sensor_list[i], n, "sensors[" + std::to_string(i) + "]"));
  }
  const std::size_t m = sensor_list.size();

  if (config.contains("budgets")) {
    const json &b = config["budgets"];
    if (!b.is_array()) throw ConfigError("budgets", "expected an array");
    for (std::size_t k = 0; k < b.size(); ++k) {
      sc.budgets.push_back(static_cast<int>(as_int(b[k], "budgets[" + std::to_string(k) + "]")));
    }
  } else if (config.contains("budget")) {
    sc.budgets.assign(K, static_cast<int>(as_int(config["budget"], "budget")));
  } else {
    throw ConfigError("budgets", "missing (give \"budgets\" per step or a uniform \"budget\")");
  }
  if (sc.budgets.size() != K) {
    throw ConfigError("budgets", "expected " + std::to_string(K) + " entries (one per step)");
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (sc.budgets[k] < 0 || static_cast<std::size_t>(sc.budgets[k]) > m) {
      throw ConfigError("budgets[" + std::to_string(k) + "]", "must lie in [0, number of sensors]");
    }
  }
  r["budgets"] = sc.budgets;

  if (config.contains("linearization")) {
    sc.linearization = as_string(config["linearization"], "linearization");
    if (sc.linearization != "prior_mean" && sc.linearization != "receding") {
      throw ConfigError("linearization", "expected \"prior_mean\" or \"receding\"");
    }
  }
  r["linearization"] = sc.linearization;

  if (config.contains("schedulers")) {
    const json &s = config["schedulers"];
    if (!s.is_array() || s.empty()) throw ConfigError("schedulers", "expected a non-empty array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto name = as_string(s[i], "schedulers[" + std::to_string(i) + "]");
      if (name != "greedy" && name != "lazy" && name != "random" && name != "exhaustive") {
        throw ConfigError("schedulers[" + std::to_string(i) + "]",
                          "unknown scheduler \"" + name + "\" (greedy, lazy, random, exhaustive)");
      }
      if (seen.insert(name).second) sc.schedulers.push_back(name);
    }
  } else {
    sc.schedulers = {"greedy"};
  }
  r["schedulers"] = sc.schedulers;

  if (config.contains("stop_on_nonpositive_gain")) {
    if (!config["stop_on_nonpositive_gain"].is_boolean()) {
      throw ConfigError("stop_on_nonpositive_gain", "expected a boolean");
    }
    sc.stop_on_nonpositive_gain = config["stop_on_nonpositive_gain"].get<bool>();
  }
  r["stop_on_nonpositive_gain"] = sc.stop_on_nonpositive_gain;

  json ex = config.value("exhaustive", json::object());
  if (!ex.is_object()) throw ConfigError("exhaustive", "expected an object");
  if (ex.contains("mode")) {
    const auto mode = as_string(ex["mode"], "exhaustive.mode");
    if (mode == "exact_budget") {
      sc.exhaustive_mode = EnumerationMode::exact_budget;
    } else if (mode != "up_to_budget") {
      throw ConfigError("exhaustive.mode", "expected \"up_to_budget\" or \"exact_budget\"");
    }
  }
  if (ex.contains("cap")) {
    const auto cap = as_int(ex["cap"], "exhaustive.cap");
    if (cap <= 0) throw ConfigError("exhaustive.cap", "must be positive");
    sc.exhaustive_cap = static_cast<std::uint64_t>(cap);
  }
  if (ex.contains("write_table")) {
    if (!ex["write_table"].is_boolean()) throw ConfigError("exhaustive.write_table", "expected a boolean");
    sc.write_exhaustive_table = ex["write_table"].get<bool>();
  }
  r["exhaustive"] = {
      {"mode", sc.exhaustive_mode == EnumerationMode::exact_budget ? "exact_budget" : "up_to_budget"},
      {"cap", sc.exhaustive_cap},
      {"write_table", sc.write_exhaustive_table}};

  if (config.contains("threads")) {
    const auto t = as_int(config["threads"], "threads");
    if (t <= 0) throw ConfigError("threads", "must be positive");
    sc.threads = static_cast<unsigned>(t);
  }
  r["threads"] = sc.threads;

  if (config.contains("output_dir")) sc.output_dir = as_string(config["output_dir"], "output_dir");
  r["output_dir"] = sc.output_dir;

  json b = config.value("bench", json::object());
  if (!b.is_object()) throw ConfigError("bench", "expected an object");
  if (b.contains("K_values")) {
    if (!b["K_values"].is_array() || b["K_values"].empty()) {
      throw ConfigError("bench.K_values", "expected a non-empty array");
    }
    sc.bench.K_values.clear();
    for (std::size_t i = 0; i < b["K_values"].size(); ++i) {
      const auto v = as_int(b["K_values"][i], "bench.K_values[" + std::to_string(i) + "]");
      if (v <= 0) throw ConfigError("bench.K_values[" + std::to_string(i) + "]", "must be positive");
      sc.bench.K_values.push_back(static_cast<std::size_t>(v));
    }
  }
  if (b.contains("repetitions")) {
    sc.bench.repetitions = static_cast<int>(as_int(b["repetitions"], "bench.repetitions"));
    if (sc.bench.repetitions <= 0) throw ConfigError("bench.repetitions", "must be positive");
  }
  if (b.contains("dense")) {
    if (!b["dense"].is_boolean()) throw ConfigError("bench.dense", "expected a boolean");
    sc.bench.dense = b["dense"].get<bool>();
  }
  if (b.contains("sparse_calls")) {
    sc.bench.sparse_calls = static_cast<int>(as_int(b["sparse_calls"], "bench.sparse_calls"));
    if (sc.bench.sparse_calls < 0) throw ConfigError("bench.sparse_calls", "must be >= 0");
  }
  if (b.contains("dense_calls")) {
    sc.bench.dense_calls = static_cast<int>(as_int(b["dense_calls"], "bench.dense_calls"));
    if (sc.bench.dense_calls < 0) throw ConfigError("bench.dense_calls", "must be >= 0");
  }
  r["bench"] = {{"K_values", sc.bench.K_values},
                {"repetitions", sc.bench.repetitions},
                {"dense", sc.bench.dense},
                {"sparse_calls", sc.bench.sparse_calls},
                {"dense_calls", sc.bench.dense_calls}};

  // Build once so construction errors surface as config errors now.
  (void)sc.prior();
  (void)sc.suite();
  return sc;
}

Scenario load_scenario(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json config;
  try {
    config = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error &e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return parse_scenario(config);
}

std::size_t Scenario::horizon() const { return resolved["prior"]["K"].get<std::size_t>(); }

GaussianPrior Scenario::prior() const { return prior(horizon()); }

GaussianPrior Scenario::prior(std::size_t K) const {
  const json &p = resolved["prior"];
  const std::string kind = p["kind"];
  const Index n = p["n"].get<Index>();
  const auto Kcfg = p["K"].get<std::size_t>();
  auto mean_for = [&](const char *field) -> std::optional<VectorXd> {
    const VectorXd mean = as_vector(p[field], std::string("prior.") + field);
    if (K == Kcfg) return mean;
    if (!mean.isZero(0.0)) {
      throw ConfigError(std::string("prior.") + field,
                        "a nonzero mean cannot be resized to another horizon");
    }
    return VectorXd::Zero(n * static_cast<Index>(K));
  };

  GaussianPrior prior = with_field("prior", [&] {
    if (kind == "tracking") {
      return build_tracking_prior(n, K, p["marginal_var"].get<double>(),
                                  p["neighbor_corr"].get<double>(), mean_for("mean"));
    }
    if (kind == "gauss_markov") {
      return build_gauss_markov_prior(as_matrix(p["A"], "prior.A"), as_matrix(p["Q"], "prior.Q"),
                                      as_matrix(p["Sigma0"], "prior.Sigma0"),
                                      as_vector(p["mu0"], "prior.mu0"), K);
    }
    if (K != Kcfg) {
      throw ConfigError("prior.K", "dense_custom priors have a fixed horizon");
    }
    const MatrixXd mat = as_matrix(p["matrix"], "prior.matrix");
    VectorXd mean = *mean_for("mean");
    if (p["form"] == "covariance") {
      return GaussianPrior(n, K, std::move(mean), CovarianceDense{mat});
    }
    return GaussianPrior(n, K, std::move(mean), PrecisionDense{mat});
  });
  if (p["storage"] == "dense" && prior.is_sparse()) {
    return densify(prior);
  }
  return prior;
}

SensorSuite Scenario::suite() const {
  const Index n = resolved["prior"]["n"].get<Index>();
  std::vector<Sensor> list;
  const json &s = resolved["sensors"];
  for (std::size_t i = 0; i < s.size(); ++i) {
    list.push_back(build_sensor(s[i], n, "sensors[" + std::to_string(i) + "]"));
  }
  return with_field("sensors", [&] { return SensorSuite(n, std::move(list)); });
}

std::string certificate_text(const BoundCertificate &cert) {
  switch (cert.kind) {
    case BoundCertificate::Kind::ratio:
      return format_real(cert.ratio);
    case BoundCertificate::Kind::certified_equal:
      return "certified_equal";
    case BoundCertificate::Kind::not_certified:
      return "not_certified";
  }
  return "";
}

RunSummary run_scenario(const Scenario &sc, const std::filesystem::path &output_dir) {
  const GaussianPrior prior = sc.prior();
  const SensorSuite suite = sc.suite();
  const OracleContext ctx(prior, suite);
  const bool receding = sc.linearization == "receding";

  GreedyOptions options;
  options.threads = sc.threads;
  options.stop_on_nonpositive_gain = sc.stop_on_nonpositive_gain;

  RunSummary summary;
  for (const auto &name : sc.schedulers) {
    SchedulerRow row;
    row.scheduler = name;
    const auto start = Clock::now();
    if (name == "greedy" || name == "lazy") {
      GreedyOptions opts = options;
      opts.lazy = (name == "lazy");
      GreedyResult result;
      double h_prior = ctx.prior_entropy();
      if (receding) {
        auto outcome = run_receding(sc, prior, suite, opts);
        result = std::move(outcome.greedy);
        h_prior = outcome.prior_entropy;
      } else {
        result = greedy_schedule(ctx, sc.budgets, opts);
      }
      row.entropy = result.entropy;
      row.mutual_info = h_prior - result.entropy;
      row.oracle_calls = result.trace.oracle_calls();
      row.schedule = result.schedule;
      (opts.lazy ? summary.lazy_trace : summary.greedy_trace) = std::move(result.trace);
    } else if (name == "random") {
      row.schedule = random_schedule(sc.budgets, suite.size(), child_seed(sc.seed, "random"));
      row.entropy = conditional_entropy(ctx, row.schedule);
      row.mutual_info = ctx.prior_entropy() - row.entropy;
      row.oracle_calls = 1;
    } else {
      ExhaustiveOptions ex;
      ex.mode = sc.exhaustive_mode;
      ex.cap = sc.exhaustive_cap;
      ex.keep_table = sc.write_exhaustive_table;
      ex.threads = sc.threads;
      summary.enumeration = exhaustive_optimum(ctx, sc.budgets, ex);
      row.entropy = summary.enumeration->opt_cost;
      row.mutual_info = ctx.prior_entropy() - row.entropy;
      row.oracle_calls = summary.enumeration->num_enumerated;
      row.schedule = summary.enumeration->opt_schedule;
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    summary.rows.push_back(std::move(row));
  }

  // The bound is defined against the up-to-budget MAX; exact-budget runs
  // supply OPT only, so MAX is taken as the empty-schedule cost (monotonicity).
  if (summary.enumeration) {
    EnumerationResult range = *summary.enumeration;
    if (sc.exhaustive_mode == EnumerationMode::exact_budget) {
      range.max_cost = std::max(range.max_cost, ctx.prior_entropy());
    }
    for (auto &row : summary.rows) {
      const bool comparable = !(receding && (row.scheduler == "greedy" || row.scheduler == "lazy"));
      if (comparable) row.bound = certify_bound(row.entropy, range);
    }
  }

  if (!output_dir.empty()) {
    std::filesystem::create_directories(output_dir);
    std::string results = "scheduler,entropy_nats,mutual_info_nats,oracle_calls";
    if (summary.enumeration) results += ",bound_ratio";
    results += '\n';
    std::string timings = "scheduler,wall_ms\n";
    for (const auto &row : summary.rows) {
      results += row.scheduler + ',' + format_real(row.entropy) + ',' + format_real(row.mutual_info) +
                 ',' + std::to_string(row.oracle_calls);
      if (summary.enumeration) {
        results += ',' + (row.bound ? certificate_text(*row.bound) : std::string("n/a"));
      }
      results += '\n';
      timings += row.scheduler + ',' + format_real(row.wall_ms) + '\n';
    }
    write_file(output_dir / "results.csv", results);
    write_file(output_dir / "timings.csv", timings);
    if (summary.greedy_trace) {
      write_file(output_dir / "trace.csv", write_trace(*summary.greedy_trace));
      if (summary.lazy_trace) {
        write_file(output_dir / "trace_lazy.csv", write_trace(*summary.lazy_trace));
      }
    } else if (summary.lazy_trace) {
      write_file(output_dir / "trace.csv", write_trace(*summary.lazy_trace));
    }
    if (summary.enumeration && summary.enumeration->full_table) {
      std::ofstream table(output_dir / "exhaustive_table.csv", std::ios::binary);
      write_table_csv(table, *summary.enumeration);
    }
    write_file(output_dir / "manifest.json", sc.resolved.dump(2) + '\n');
  }
  return summary;
}

BenchResult run_scaling_benchmark(const Scenario &sc, const std::filesystem::path &output_dir) {
  const SensorSuite suite = sc.suite();
  if (std::adjacent_find(sc.budgets.begin(), sc.budgets.end(), std::not_equal_to<>()) !=
      sc.budgets.end()) {
    throw ConfigError("budgets", "scaling benchmark needs a uniform budget");
  }
  const int budget = sc.budgets.front();

  BenchResult result;
  std::vector<std::string> regimes{"sparse"};
  if (sc.bench.dense) regimes.emplace_back("dense");

  // Repetitions are the outer loop so that drifts in machine speed hit every K alike.
  for (const auto &regime : regimes) {
    std::vector<OracleContext> contexts;
    for (std::size_t K : sc.bench.K_values) {
      GaussianPrior prior = sc.prior(K);
      if (regime == "sparse" && !prior.is_sparse()) {
        throw ConfigError("prior.storage", "scaling benchmark needs a block-tridiagonal prior");
      }
      if (regime == "dense") prior = densify(prior);
      contexts.emplace_back(std::move(prior), suite);
    }
    const int calls = regime == "sparse" ? sc.bench.sparse_calls : sc.bench.dense_calls;
    const std::size_t num_K = sc.bench.K_values.size();
    std::vector<std::vector<double>> walls(num_K);
    std::vector<std::vector<double>> per_calls(num_K);
    std::vector<std::vector<BenchRow>> rows(num_K);

    for (int rep = 0; rep < sc.bench.repetitions; ++rep) {
      for (std::size_t j = 0; j < num_K; ++j) {
        const std::size_t K = sc.bench.K_values[j];
        const OracleContext &ctx = contexts[j];
        const std::vector<int> budgets(K, budget);
        BenchRow row{regime, K, rep, 0.0, 0, 0.0};
        std::vector<double> seconds;
        const auto start = Clock::now();
        if (calls == 0) {
          GreedyOptions opts;
          opts.record_call_times = true;
          opts.threads = 1;
          auto greedy = greedy_schedule(ctx, budgets, opts);
          seconds = std::move(greedy.trace.call_seconds);
        } else {
          const auto seed = child_seed(sc.seed, regime + "/" + std::to_string(K) + "/" +
                                                    std::to_string(rep));
          for (int c = 0; c < calls; ++c) {
            const Schedule s = random_schedule(budgets, suite.size(), seed + static_cast<std::uint64_t>(c));
            const auto t0 = Clock::now();
            volatile double h = conditional_entropy(ctx, s);
            (void)h;
            seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
          }
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        row.oracle_calls = seconds.size();
        row.per_call_median_us = 1e6 * median(seconds);
        walls[j].push_back(row.wall_ms);
        per_calls[j].push_back(row.per_call_median_us);
        rows[j].push_back(row);
      }
    }
    for (std::size_t j = 0; j < num_K; ++j) {
      result.rows.insert(result.rows.end(), rows[j].begin(), rows[j].end());
      result.summary.push_back({regime, sc.bench.K_values[j], median(walls[j]), median(per_calls[j])});
    }
  }

  if (!output_dir.empty()) {
    std::filesystem::create_directories(output_dir);
    std::string rows = "regime,K,repetition,wall_ms,oracle_calls,per_call_median_us\n";
    for (const auto &r : result.rows) {
      rows += r.regime + ',' + std::to_string(r.K) + ',' + std::to_string(r.repetition) + ',' +
              format_real(r.wall_ms) + ',' + std::to_string(r.oracle_calls) + ',' +
              format_real(r.per_call_median_us) + '\n';
    }
    std::string summary = "regime,K,median_wall_ms,median_per_call_us\n";
    for (const auto &s : result.summary) {
      summary += s.regime + ',' + std::to_string(s.K) + ',' + format_real(s.median_wall_ms) + ',' +
                 format_real(s.median_per_call_us) + '\n';
    }
    write_file(output_dir / "timings.csv", rows);
    write_file(output_dir / "bench_summary.csv", summary);
    write_file(output_dir / "manifest.json", sc.resolved.dump(2) + '\n');
  }
  return result;
}

}  // namespace senssched
