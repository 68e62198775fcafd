#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "senssched/errors.hpp"
#include "senssched/format.hpp"
#include "senssched/scenario.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string output;
  unsigned threads = 0;
};

void add_common(CLI::App *cmd, CommonArgs &args) {
  cmd->add_option("-c,--config", args.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--output", args.output, "Output directory (overrides output_dir)");
  cmd->add_option("-t,--threads", args.threads, "Worker threads (overrides threads)");
}

senssched::Scenario load(const CommonArgs &args) {
  auto sc = senssched::load_scenario(args.config);
  if (args.threads > 0) {
    sc.threads = args.threads;
    sc.resolved["threads"] = args.threads;
  }
  if (!args.output.empty()) {
    sc.output_dir = args.output;
    sc.resolved["output_dir"] = args.output;
  }
  return sc;
}

void print_rows(const senssched::RunSummary &summary) {
  for (const auto &row : summary.rows) {
    std::cout << row.scheduler << ": H = " << senssched::format_real(row.entropy)
              << " nats, I = " << senssched::format_real(row.mutual_info)
              << " nats, oracle calls = " << row.oracle_calls;
    if (row.bound) std::cout << ", bound ratio = " << senssched::certificate_text(*row.bound);
    std::cout << "\n  schedule " << row.schedule.to_string() << '\n';
  }
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Greedy sensor scheduling for Gaussian-process batch state estimation"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto *run = app.add_subcommand("run", "Run the schedulers listed in a scenario");
  add_common(run, run_args);

  CommonArgs bench_args;
  int repetitions = 0;
  auto *bench = app.add_subcommand("bench", "Per-oracle-call timing sweep over the horizon");
  add_common(bench, bench_args);
  bench->add_option("-r,--repetitions", repetitions, "Repetitions per configuration");

  CommonArgs certify_args;
  auto *certify = app.add_subcommand("certify", "Check the greedy bound against exhaustive search");
  add_common(certify, certify_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto sc = load(run_args);
      print_rows(senssched::run_scenario(sc, sc.output_dir));
      std::cout << "wrote " << sc.output_dir << '\n';
    } else if (*bench) {
      auto sc = load(bench_args);
      if (repetitions > 0) {
        sc.bench.repetitions = repetitions;
        sc.resolved["bench"]["repetitions"] = repetitions;
      }
      const auto result = senssched::run_scaling_benchmark(sc, sc.output_dir);
      for (const auto &s : result.summary) {
        std::cout << s.regime << " K=" << s.K << ": median per call "
                  << senssched::format_real(s.median_per_call_us) << " us, median wall "
                  << senssched::format_real(s.median_wall_ms) << " ms\n";
      }
      std::cout << "wrote " << sc.output_dir << '\n';
    } else if (*certify) {
      auto sc = load(certify_args);
      sc.schedulers = {"greedy", "exhaustive"};
      sc.resolved["schedulers"] = sc.schedulers;
      sc.linearization = "prior_mean";
      sc.resolved["linearization"] = sc.linearization;
      const auto summary = senssched::run_scenario(sc, sc.output_dir);
      print_rows(summary);
      const auto &cert = *summary.rows.front().bound;
      const bool ok = cert.within();
      std::cout << (ok ? "PASS" : "FAIL") << ": (H_greedy - OPT) / (MAX - OPT) = "
                << senssched::certificate_text(cert) << " (OPT "
                << senssched::format_real(cert.opt_cost) << ", MAX "
                << senssched::format_real(cert.max_cost) << ")\n";
      return ok ? EXIT_SUCCESS : 2;
    }
  } catch (const senssched::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return EXIT_SUCCESS;
}
