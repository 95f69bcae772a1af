// Experiment runner: simulates one path per trial, runs every configured
// filter on the same observation stream, scores it and writes per-trial files.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctfilter/scenario.hpp"

namespace ctf {

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::filesystem::path> out_dir;
  int workers = 1;
  bool write_files = true;
  /// Keep per-step belief summaries in memory (FilterResult::trajectory).
  bool keep_trajectories = false;
};

struct FilterResult {
  std::string label;
  std::string type;
  bool ok = true;
  std::string error;
  std::map<std::string, double> metrics;
  Diagnostics diag;

  /// One row per grid step, aligned with the path; columns named in `columns`.
  std::vector<std::string> columns;
  Mat trajectory;
};

struct TrialResult {
  int trial = 0;
  bool ok = true;      ///< false when the path could not be simulated
  std::string error;
  Diagnostics sim_diag;
  std::vector<FilterResult> filters;
  double wall_seconds = 0.0;

  /// Truth aligned with the grid: states (n_steps x dim) or labels.
  Mat states;
  std::vector<int> labels;

  const FilterResult* find(const std::string& label) const;
};

struct MetricSummary {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

struct RunResult {
  Scenario scenario;  ///< with command-line overrides applied
  std::vector<TrialResult> trials;
  double wall_seconds = 0.0;

  /// Across-trial mean and standard error of one metric of one filter,
  /// over the trials where the filter succeeded.
  MetricSummary aggregate(const std::string& label, const std::string& metric) const;
  int failures() const;

  /// Deterministic run summary (no wall-clock fields).
  nlohmann::json summary() const;
};

/// Runs every trial. Errors raised inside a filter are recorded on that
/// filter; errors raised while simulating are recorded on the trial. Neither
/// stops the run.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

}  // namespace ctf
