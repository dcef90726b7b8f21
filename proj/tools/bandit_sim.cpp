// bandit_sim: command-line driver for budget-allocation bandit experiments.
//
//   bandit_sim run      --config run.json   [--out results.csv] [--seed N] [--jobs N] [--quiet]
//   bandit_sim sweep    --config sweep.json [--out summary.csv] ...
//   bandit_sim diagnose --config run.json   [--out results.csv] ...
//   bandit_sim oracle   --config query.json [--out result.json]
//
// Exit codes: 0 success, 1 runtime error, 2 configuration error. A failing diagnostic is
// reported in the table, not through the exit code.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "budget_bandit/config.hpp"
#include "budget_bandit/harness.hpp"

namespace bb = budget_bandit;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
  bool quiet = false;
};

std::size_t resolve_jobs(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("BANDIT_SIM_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw bb::ConfigError("BANDIT_SIM_JOBS must be a positive integer");
  }
  return 1;
}

// CSV goes to --out when given, otherwise to stdout; summaries then go to stderr.
void emit(const Options& opt, const std::string& payload) {
  if (opt.out_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(opt.out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write \"" + opt.out_path + "\"");
  out << payload;
}

std::ostream& summary(const Options& opt) {
  return opt.out_path.empty() ? std::cerr : std::cout;
}

double mean_final_regret(const bb::ExperimentResult& r) {
  double s = 0.0;
  for (const auto& run : r.runs) s += run.final_regret();
  return s / static_cast<double>(r.runs.size());
}

bb::ExperimentConfig load_experiment(const Options& opt) {
  auto cfg = bb::parse_experiment_config(bb::load_json_file(opt.config_path));
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

int cmd_run(const Options& opt) {
  const auto cfg = load_experiment(opt);
  const auto result = bb::run_experiment(cfg, resolve_jobs(opt.jobs));
  emit(opt, bb::results_csv(result));
  if (!opt.quiet) {
    const auto report = bb::good_event_diagnostic(result);
    summary(opt) << "mean final regret: " << bb::format_real(mean_final_regret(result)) << '\n'
                 << "good-event violation rate: " << bb::format_real(report.observed) << '\n';
  }
  return 0;
}

int cmd_sweep(const Options& opt) {
  auto cfg = bb::parse_sweep_config(bb::load_json_file(opt.config_path));
  if (opt.seed) cfg.seed = *opt.seed;
  bb::SweepOptions so;
  so.delta_override = cfg.delta_override;
  so.jobs = resolve_jobs(opt.jobs);
  const auto rows = bb::run_sweep(cfg.generator, cfg.horizons, cfg.replications, cfg.seed, so);
  emit(opt, bb::sweep_csv(bb::family_name(cfg.generator), bb::family_k(cfg.generator), rows));
  if (!opt.quiet) {
    const auto pts = bb::sweep_points(rows);
    if (pts.size() < bb::kMinFitPoints) {
      summary(opt) << "slope: insufficient points\n";
    } else {
      const auto fit = bb::fit_scaling(pts);
      summary(opt) << "slope: " << bb::format_real(fit.slope)
                   << " (r^2 = " << bb::format_real(fit.r_squared) << ")\n";
    }
  }
  return 0;
}

std::string bound_text(const bb::DiagnosticReport& r) {
  if (r.vacuous) return "bound ≥ 1 (vacuous)";
  return bb::format_real(r.bound);
}

int cmd_diagnose(const Options& opt) {
  const auto cfg = load_experiment(opt);
  const auto result = bb::run_experiment(cfg, resolve_jobs(opt.jobs));
  if (!opt.out_path.empty()) emit(opt, bb::results_csv(result));
  const bb::DiagnosticReport reports[] = {bb::good_event_diagnostic(result),
                                          bb::completion_count_diagnostic(result)};
  std::cout << "diagnostic\tbound\tobserved\tthreshold\tresult\n";
  for (const auto& r : reports) {
    std::cout << r.name << '\t' << bound_text(r) << '\t' << bb::format_real(r.observed) << '\t'
              << bb::format_real(r.threshold) << '\t' << (r.pass ? "pass" : "FAIL");
    if (r.name == "completion_count" && r.active_runs == 0) std::cout << " (antecedent never fired)";
    std::cout << '\n';
  }
  return 0;
}

int cmd_oracle(const Options& opt) {
  const auto query = bb::parse_oracle_query(bb::load_json_file(opt.config_path));
  const auto result = bb::solve(query);
  emit(opt, bb::oracle_result_to_json(result).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-allocation bandit simulator"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed_flag = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config file")->required();
    sub->add_option("--out", opt.out_path, "Output file (default: stdout)");
    sub->add_option("--seed", seed_flag, "Override the config's master seed");
    sub->add_option("--jobs", opt.jobs, "Worker threads (default: $BANDIT_SIM_JOBS or 1)");
    sub->add_flag("--quiet", opt.quiet, "Suppress summaries");
  };
  auto* run = app.add_subcommand("run", "Simulate replications and write the results CSV");
  auto* sweep = app.add_subcommand("sweep", "Sweep horizons and fit the regret scaling slope");
  auto* diagnose = app.add_subcommand("diagnose", "Check concentration diagnostics against bounds");
  auto* oracle = app.add_subcommand("oracle", "Solve one inner maximization and print JSON");
  for (auto* sub : {run, sweep, diagnose, oracle}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    for (auto* sub : {run, sweep, diagnose, oracle}) {
      if (sub->count("--seed") > 0) opt.seed = seed_flag;
    }
    if (run->parsed()) return cmd_run(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (diagnose->parsed()) return cmd_diagnose(opt);
    return cmd_oracle(opt);
  } catch (const bb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
