// Declarative scenario configs: a JSON document names a scenario kind, its
// model parameters, the time grid, the filters to run and where to write
// results. See docs/scenario-config.md for the schema.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctfilter/exact_filters.hpp"
#include "ctfilter/gaussian_approx.hpp"
#include "ctfilter/model.hpp"
#include "ctfilter/particle.hpp"
#include "ctfilter/pde_oracle.hpp"
#include "ctfilter/simulate.hpp"

namespace ctf {

/// The config document is malformed or describes an invalid experiment.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ScenarioKind { hmm_binary, piet_clicks, double_well, linear_gaussian, custom };
enum class SignalKind { discrete_hmm, markov_chain, jump_diffusion };
enum class ObsKind { discrete, gaussian, point_process };

std::string to_string(ScenarioKind kind);

struct FilterSpec {
  std::string type;
  std::string label;  ///< unique within a scenario; names the output file

  Scheme scheme = Scheme::euler;            // pp_finite_state, log_odds
  int particles = 1000;                     // bpf, fbpf
  std::optional<ResampleSpec> resample;     // bpf; empty = never resample
  GaussianClosureSpec closure;              // adf
  double xmin = -5.0, xmax = 5.0;           // grid
  int cells = 500;                          // grid
  GridFilterOptions grid;                   // grid
};

struct OutputSpec {
  int stride = 1;          ///< write every stride-th step to trajectory CSVs
  bool paths = true;       ///< write the simulated path of every trial
  bool trajectories = true;
  int oracle_bins = 50;    ///< bins for the L1 distance to the grid filter
  int oracle_every = 100;  ///< steps between L1 snapshots
  std::optional<std::pair<double, double>> oracle_range;  ///< default: grid domain
};

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::custom;
  SignalKind signal = SignalKind::jump_diffusion;
  ObsKind obs = ObsKind::gaussian;

  std::uint64_t seed = 1;
  int n_trials = 1;
  TimeGrid grid;
  std::filesystem::path output_dir = "out";
  double runtime_budget_s = 0.0;  ///< 0 = no budget declared
  OutputSpec output;

  // discrete_hmm
  DiscreteHMMModel hmm;
  // markov_chain
  MarkovChainModel chain;
  Mat h_matrix;   ///< l x n, Gaussian observations of a chain
  Mat noise_cov;  ///< Sigma_y for a chain
  Mat rates;      ///< l x n, point-process observations of a chain
  // jump_diffusion
  JumpDiffusionModel model;
  std::shared_ptr<const GaussianObsModel> gaussian_obs;
  std::shared_ptr<const PointProcessObsModel> pp_obs;

  std::vector<FilterSpec> filters;
  nlohmann::json source;  ///< the document this scenario was loaded from
};

/// Parses and validates a config. Throws ConfigError with a readable message.
Scenario load_scenario(const nlohmann::json& doc);
Scenario load_scenario_file(const std::filesystem::path& file);

/// Builds a registered function family from its JSON description, e.g.
/// {"family": "gaussian_bump", "gains": [50, 50], "centers": [[-1, 1]], "widths": [0.05, 0.05]}.
VectorFnPtr make_family(const nlohmann::json& spec, int in_dim);

struct NamedEntry {
  std::string name;
  std::string description;
};
std::vector<NamedEntry> scenario_kinds();
std::vector<NamedEntry> family_kinds();
std::vector<NamedEntry> filter_kinds();

}  // namespace ctf
