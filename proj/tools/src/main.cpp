// ctfilter command line: run, validate and list scenario configs.
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#ifdef CTFILTER_CLI11_PACKAGE
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include "ctfilter/runner.hpp"
#include "ctfilter/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

void print_summary(const ctf::RunResult& result) {
  const auto& s = result.scenario;
  std::cout << s.name << " (" << ctf::to_string(s.kind) << "): " << s.n_trials << " trial(s), seed " << s.seed
            << ", output " << s.output_dir.string() << "\n";
  for (const auto& f : s.filters) {
    std::cout << "  " << std::left << std::setw(16) << f.label;
    int failed = 0;
    for (const auto& tr : result.trials) {
      const auto* r = tr.find(f.label);
      failed += !r || !r->ok;
    }
    std::set<std::string> names;
    for (const auto& tr : result.trials) {
      if (const auto* r = tr.find(f.label)) {
        for (const auto& [name, value] : r->metrics) names.insert(name);
      }
    }
    for (const auto& name : names) {
      const auto m = result.aggregate(f.label, name);
      std::cout << " " << name << "=" << std::setprecision(5) << m.mean;
      if (m.n > 1) std::cout << "+-" << std::setprecision(2) << m.stderr_;
    }
    if (failed) std::cout << " failed=" << failed;
    std::cout << "\n";
  }
  for (const auto& tr : result.trials) {
    if (!tr.ok) std::cerr << "trial " << tr.trial << ": " << tr.error << "\n";
    for (const auto& f : tr.filters) {
      if (!f.ok) std::cerr << "trial " << tr.trial << ", " << f.label << ": " << f.error << "\n";
    }
  }
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, std::optional<int> trials,
            std::optional<std::string> out, std::optional<int> workers) {
  ctf::Scenario scenario;
  try {
    scenario = ctf::load_scenario_file(config);
  } catch (const ctf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  ctf::RunOptions opts;
  opts.seed = seed;
  opts.trials = trials;
  if (!out) out = env("CTFILTER_OUT_DIR");
  if (out) opts.out_dir = *out;
  if (!workers) {
    if (auto w = env("CTFILTER_WORKERS")) {
      try {
        workers = std::stoi(*w);
      } catch (const std::exception&) {
        std::cerr << "config error: CTFILTER_WORKERS is not an integer\n";
        return kConfigError;
      }
    }
  }
  opts.workers = workers.value_or(1);

  ctf::RunResult result;
  try {
    result = ctf::run_scenario(scenario, opts);
  } catch (const ctf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
  print_summary(result);
  std::cerr << "wall time " << std::fixed << std::setprecision(2) << result.wall_seconds << " s";
  if (scenario.runtime_budget_s > 0.0) {
    std::cerr << " (budget " << scenario.runtime_budget_s << " s"
              << (result.wall_seconds > scenario.runtime_budget_s ? ", EXCEEDED" : "") << ")";
  }
  std::cerr << "\n";
  return result.failures() > 0 ? kRuntimeError : kOk;
}

int cmd_validate(const std::string& config) {
  try {
    const auto s = ctf::load_scenario_file(config);
    std::cout << config << ": ok (" << ctf::to_string(s.kind) << ", " << s.filters.size() << " filter(s), "
              << s.grid.n_steps << " steps, " << s.n_trials << " trial(s))\n";
    return kOk;
  } catch (const ctf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
}

void print_table(const char* title, const std::vector<ctf::NamedEntry>& entries) {
  std::cout << title << ":\n";
  for (const auto& e : entries) std::cout << "  " << std::left << std::setw(18) << e.name << e.description << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time filtering experiments"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials, workers;
  std::optional<std::string> out;

  auto* run = app.add_subcommand("run", "Run a scenario config");
  run->add_option("config", config, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--trials", trials, "Override the number of trials")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "Output directory (env CTFILTER_OUT_DIR)");
  run->add_option("--workers", workers, "Parallel trials (env CTFILTER_WORKERS)")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a scenario config without running it");
  validate->add_option("config", config, "Scenario JSON file")->required();

  auto* list = app.add_subcommand("list-scenarios", "List scenario kinds, families and filters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run) return cmd_run(config, seed, trials, out, workers);
  if (*validate) return cmd_validate(config);
  if (*list) {
    print_table("scenarios", ctf::scenario_kinds());
    print_table("families", ctf::family_kinds());
    print_table("filters", ctf::filter_kinds());
  }
  return kOk;
}
