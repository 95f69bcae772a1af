#include "ctfilter/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <set>
#include <thread>

#include "ctfilter/families.hpp"
#include "ctfilter/io.hpp"
#include "ctfilter/metrics.hpp"

namespace ctf {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;
using IntVec = Eigen::VectorXi;

std::string trial_dir_name(int trial) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%04d", trial);
  return buf;
}

/// Snapshot steps at which approximate filters are compared with the grid oracle.
bool is_snapshot(int k, const OutputSpec& out) { return (k + 1) % out.oracle_every == 0; }

struct OracleTrack {
  double lo = 0.0, hi = 1.0;
  int bins = 1;
  std::map<int, BinnedMass> snapshots;  ///< step -> binned oracle density
  bool available() const { return !snapshots.empty(); }
};

std::vector<std::string> indexed(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

GaussianBelief prior_belief(const InitialDistribution& init) {
  if (!init.is_gaussian()) throw ModelError("Gaussian filters need a Gaussian or point prior");
  return GaussianBelief{init.mean(), init.cov()};
}

GridDensity prior_density(const InitialDistribution& init, const FilterSpec& f) {
  const GaussianBelief b = prior_belief(init);
  const double var = b.cov(0, 0);
  if (var > 0.0) return GridDensity::gaussian(f.xmin, f.xmax, f.cells, b.mean(0), var);
  GridDensity d{f.xmin, f.xmax, Vec::Zero(f.cells)};
  const int i = static_cast<int>(std::floor((b.mean(0) - f.xmin) / d.dx()));
  if (i < 0 || i >= f.cells) throw ModelError("grid filter: point prior outside the grid domain");
  d.values(i) = 1.0 / d.dx();
  return d;
}

void score_discrete(FilterResult& res, const std::vector<int>& decisions, const std::vector<int>& truth) {
  res.metrics["accuracy"] = metric_accuracy(decisions, truth);
  res.metrics["decision_correct"] = decisions.back() == truth.back() ? 1.0 : 0.0;
}

void score_continuous(FilterResult& res, const Mat& means, const Mat& truth) {
  res.metrics["rmse"] = metric_rmse(means, truth);
}

void score_l1(FilterResult& res, const std::vector<double>& l1) {
  if (l1.empty()) return;
  double s = 0.0;
  for (double v : l1) s += v;
  res.metrics["l1_to_oracle"] = s / static_cast<double>(l1.size());
}

// ---------------------------------------------------------------------------
// Finite-state scenarios

void run_hmm(const Scenario& s, const FilterSpec&, const HMMPath& path, FilterResult& res, Mat& rows) {
  const int n = s.hmm.n_states();
  res.columns = concat(indexed("p_", n), {"map"});
  rows.resize(static_cast<Eigen::Index>(path.symbols.size()), n + 1);
  DiscreteBelief b{s.hmm.initial_dist};
  std::vector<int> decisions(path.symbols.size());
  for (std::size_t k = 0; k < path.symbols.size(); ++k) {
    b = hmm_filter_step(b, s.hmm, path.symbols[k]);
    decisions[k] = map_estimate(b);
    rows.row(static_cast<Eigen::Index>(k)) << b.probs.transpose(), decisions[k];
  }
  score_discrete(res, decisions, path.labels);
}

void run_chain_filter(const Scenario& s, const FilterSpec& f, const PathRecord& path, FilterResult& res,
                      Mat& rows) {
  const int n = s.chain.n_states();
  const int steps = s.grid.n_steps;
  const double dt = s.grid.dt;
  std::vector<int> decisions(static_cast<std::size_t>(steps));
  if (f.type == "log_odds") {
    res.columns = {"alpha", "map"};
    rows.resize(steps, 2);
    DiscreteBelief b0{s.chain.initial_dist};
    double alpha = log_odds(b0);
    IntVec dN(path.dN.cols());
    for (int k = 0; k < steps; ++k) {
      dN = path.dN.row(k).transpose();
      alpha = log_odds_step(alpha, s.chain, s.rates, dN, dt, f.scheme);
      if (!std::isfinite(alpha)) throw NumericalError("log_odds: non-finite log-odds at step " + std::to_string(k));
      decisions[static_cast<std::size_t>(k)] = alpha >= 0.0 ? 0 : 1;
      rows.row(k) << alpha, decisions[static_cast<std::size_t>(k)];
    }
  } else {
    res.columns = concat(indexed("p_", n), {"map"});
    rows.resize(steps, n + 1);
    DiscreteBelief b{s.chain.initial_dist};
    Mat precision;
    if (f.type == "wonham") precision = s.noise_cov.inverse();
    IntVec dN(path.dN.cols());
    for (int k = 0; k < steps; ++k) {
      if (f.type == "wonham") {
        b = wonham_step_precision(b, s.chain, s.h_matrix, precision, path.dY.row(k).transpose(), dt, &res.diag);
      } else {
        dN = path.dN.row(k).transpose();
        b = pp_finite_state_step(b, s.chain, s.rates, dN, dt, f.scheme, &res.diag);
      }
      decisions[static_cast<std::size_t>(k)] = map_estimate(b);
      rows.row(k) << b.probs.transpose(), decisions[static_cast<std::size_t>(k)];
    }
  }
  score_discrete(res, decisions, path.labels);
}

// ---------------------------------------------------------------------------
// Jump-diffusion scenarios

void run_gaussian_filter(const Scenario& s, const FilterSpec& f, const PathRecord& path, const OracleTrack& oracle,
                         FilterResult& res, Mat& rows) {
  const int d = s.model.dim;
  const int steps = s.grid.n_steps;
  const double dt = s.grid.dt;
  res.columns = concat(indexed("mean_", d), indexed("var_", d));
  rows.resize(steps, 2 * d);
  GaussianBelief b = prior_belief(s.model.initial);
  std::optional<LinearGaussianSystem> sys;
  if (f.type == "kbf") {
    const auto& F = dynamic_cast<const LinearFn&>(*s.model.drift);
    const auto& H = dynamic_cast<const LinearFn&>(*s.gaussian_obs->h_ptr());
    sys = LinearGaussianSystem{F.matrix(), H.matrix(), s.model.diffusion_cov(b.mean, s.grid.t0),
                               s.gaussian_obs->noise_cov()};
    sys->validate();
  }
  std::vector<double> l1;
  IntVec dN(path.dN.cols());
  for (int k = 0; k < steps; ++k) {
    const double t = s.grid.time(k);
    if (f.type == "kbf") {
      b = kalman_bucy_step(b, *sys, path.dY.row(k).transpose(), dt, &res.diag);
    } else if (f.type == "ekbf") {
      b = ekbf_step(b, s.model, *s.gaussian_obs, path.dY.row(k).transpose(), dt, &res.diag, t);
    } else {
      dN = path.dN.row(k).transpose();
      if (f.type == "pp_ekbf") {
        b = pp_ekbf_step(b, s.model, *s.pp_obs, dN, dt, &res.diag, t);
      } else {
        b = adf_pp_step(b, s.model, *s.pp_obs, f.closure, dN, dt, &res.diag, t);
      }
    }
    if (!b.mean.allFinite() || !b.cov.allFinite()) {
      throw NumericalError(f.type + ": non-finite belief at step " + std::to_string(k));
    }
    rows.row(k) << b.mean.transpose(), b.cov.diagonal().transpose();
    if (d == 1 && oracle.available() && is_snapshot(k, s.output)) {
      l1.push_back(binned_l1(bin_gaussian(b.mean(0), b.cov(0, 0), oracle.lo, oracle.hi, oracle.bins),
                             oracle.snapshots.at(k)));
    }
  }
  score_continuous(res, rows.leftCols(d), path.states);
  score_l1(res, l1);
}

void run_particle_filter(const Scenario& s, const FilterSpec& f, const PathRecord& path, const OracleTrack& oracle,
                         std::uint64_t seed, FilterResult& res, Mat& rows) {
  const int d = s.model.dim;
  const int steps = s.grid.n_steps;
  const double dt = s.grid.dt;
  res.columns = concat(concat(indexed("mean_", d), indexed("var_", d)), {"ess"});
  rows.resize(steps, 2 * d + 1);
  Rng rng(seed);
  ParticleEnsemble ens = ParticleEnsemble::from_prior(s.model.initial, f.particles, rng);
  std::vector<double> l1;
  double ess_sum = 0.0;
  int resamples = 0;
  IntVec dN(path.dN.cols());
  for (int k = 0; k < steps; ++k) {
    const double t = s.grid.time(k);
    if (f.type == "fbpf") {
      fbpf_step(ens, s.model, *s.gaussian_obs, path.dY.row(k).transpose(), dt, rng, t);
    } else {
      bpf_propagate(ens, s.model, dt, rng, t);
      if (s.obs == ObsKind::gaussian) {
        bpf_reweight_gaussian(ens, *s.gaussian_obs, path.dY.row(k).transpose(), dt, t + dt);
      } else {
        dN = path.dN.row(k).transpose();
        bpf_reweight_pp(ens, *s.pp_obs, dN, dt, t + dt);
      }
    }
    const Vec w = ens.weights();
    const double e = 1.0 / w.squaredNorm();
    const Vec mean = ens.positions.transpose() * w;
    if (!mean.allFinite()) throw NumericalError(f.type + ": non-finite ensemble mean at step " + std::to_string(k));
    const Vec var = (ens.positions.rowwise() - mean.transpose()).array().square().matrix().transpose() * w;
    rows.row(k) << mean.transpose(), var.transpose(), e;
    ess_sum += e / f.particles;
    if (d == 1 && oracle.available() && is_snapshot(k, s.output)) {
      const Histogram h = weighted_histogram(ens, oracle.lo, oracle.hi, oracle.bins);
      l1.push_back(binned_l1(bin_histogram(h), oracle.snapshots.at(k)));
    }
    if (f.resample && maybe_resample(ens, *f.resample, rng)) ++resamples;
  }
  score_continuous(res, rows.leftCols(d), path.states);
  score_l1(res, l1);
  res.metrics["ess_fraction_mean"] = ess_sum / steps;
  if (f.type == "bpf") res.metrics["resamples"] = resamples;
}

/// Runs a grid filter; when `track` is set its snapshots become the oracle.
void run_grid_filter(const Scenario& s, const FilterSpec& f, const PathRecord& path, OracleTrack* track,
                     const OracleTrack& oracle, FilterResult& res, Mat& rows) {
  const int steps = s.grid.n_steps;
  const double dt = s.grid.dt;
  res.columns = {"mean_0", "var_0"};
  rows.resize(steps, 2);
  const FokkerPlanckOperator op(s.model, f.xmin, f.xmax, f.cells, s.grid.t0, &res.diag);
  GridDensity p = prior_density(s.model.initial, f);
  if (track) {
    track->lo = s.output.oracle_range ? s.output.oracle_range->first : f.xmin;
    track->hi = s.output.oracle_range ? s.output.oracle_range->second : f.xmax;
    track->bins = s.output.oracle_bins;
  }
  std::vector<double> l1;
  IntVec dN(path.dN.cols());
  for (int k = 0; k < steps; ++k) {
    const double t = s.grid.time(k);
    if (s.obs == ObsKind::gaussian) {
      p = kushner_step(p, op, *s.gaussian_obs, path.dY.row(k).transpose(), dt, f.grid, &res.diag, t);
    } else {
      dN = path.dN.row(k).transpose();
      p = pp_kushner_step(p, op, *s.pp_obs, dN, dt, f.grid, &res.diag, t);
    }
    rows.row(k) << p.mean(), p.variance();
    if (!is_snapshot(k, s.output)) continue;
    if (track) {
      track->snapshots[k] = bin_density(p, track->lo, track->hi, track->bins);
    } else if (oracle.available()) {
      l1.push_back(binned_l1(bin_density(p, oracle.lo, oracle.hi, oracle.bins), oracle.snapshots.at(k)));
    }
  }
  score_continuous(res, rows.leftCols(1), path.states);
  score_l1(res, l1);
}

// ---------------------------------------------------------------------------
// Output

void write_trajectory(const std::filesystem::path& file, const std::string& time_col, const Scenario& s,
                      const FilterResult& res, const Mat& rows) {
  auto os = open_output(file);
  CsvWriter csv(os, concat({time_col}, res.columns));
  const bool discrete_time = s.signal == SignalKind::discrete_hmm;
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    if ((k + 1) % s.output.stride != 0 && k + 1 != rows.rows()) continue;
    if (discrete_time) {
      csv << static_cast<int>(k + 1);
    } else {
      csv << s.grid.time(static_cast<int>(k) + 1);
    }
    for (Eigen::Index c = 0; c < rows.cols(); ++c) csv << rows(k, c);
    csv.end_row();
  }
}

void write_hmm_path(const std::filesystem::path& file, const HMMPath& path) {
  auto os = open_output(file);
  CsvWriter csv(os, {"n", "x", "y"});
  for (std::size_t k = 0; k < path.labels.size(); ++k) {
    csv << static_cast<int>(k + 1) << path.labels[k] << path.symbols[k];
    csv.end_row();
  }
}

json diag_json(const Diagnostics& d) {
  return {{"clamp_events", d.clamp_events},
          {"clamped_mass", d.clamped_mass},
          {"max_clamp_fraction", d.max_clamp_fraction},
          {"fallbacks", d.fallbacks},
          {"warnings", d.warnings}};
}

// ---------------------------------------------------------------------------

TrialResult run_trial(const Scenario& s, int trial, const RunOptions& opt, const std::filesystem::path& out_dir) {
  const auto start = Clock::now();
  TrialResult tr;
  tr.trial = trial;
  const auto seed = [&](Stream st, std::uint64_t offset = 0) {
    return stream_seed(s.seed, static_cast<std::uint64_t>(trial), st, offset);
  };
  const std::filesystem::path dir = out_dir / trial_dir_name(trial);

  HMMPath hmm_path;
  PathRecord path;
  try {
    switch (s.signal) {
      case SignalKind::discrete_hmm:
        hmm_path = simulate_hmm(s.hmm, s.grid.n_steps, seed(Stream::signal));
        tr.labels = hmm_path.labels;
        break;
      case SignalKind::markov_chain:
        path = simulate_markov_chain(s.chain, s.grid, seed(Stream::signal));
        if (s.obs == ObsKind::gaussian) {
          path.dY = simulate_gaussian_obs(path.labels, s.h_matrix, s.noise_cov, s.grid, seed(Stream::observation));
        } else {
          path.dN = simulate_pp_obs(path.labels, s.rates, s.grid, seed(Stream::observation), &tr.sim_diag);
        }
        tr.labels = path.labels;
        break;
      case SignalKind::jump_diffusion:
        path = simulate_jump_diffusion(s.model, s.grid, seed(Stream::signal), &tr.sim_diag);
        if (s.obs == ObsKind::gaussian) {
          path.dY = simulate_gaussian_obs(path.states, *s.gaussian_obs, s.grid, seed(Stream::observation));
        } else {
          path.dN = simulate_pp_obs(path.states, *s.pp_obs, s.grid, seed(Stream::observation), &tr.sim_diag);
        }
        tr.states = path.states;
        break;
    }
    if (opt.write_files && s.output.paths) {
      if (s.signal == SignalKind::discrete_hmm) {
        write_hmm_path(dir / "path.csv", hmm_path);
      } else {
        write_path_csv(path, dir / "path.csv");
      }
    }
  } catch (const std::exception& e) {
    tr.ok = false;
    tr.error = e.what();
    tr.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return tr;
  }

  // Grid filters run first so that the first one can serve as the oracle.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < s.filters.size(); ++i) {
    if (s.filters[i].type == "grid") order.push_back(i);
  }
  for (std::size_t i = 0; i < s.filters.size(); ++i) {
    if (s.filters[i].type != "grid") order.push_back(i);
  }

  OracleTrack oracle;
  bool oracle_taken = false;
  tr.filters.resize(s.filters.size());
  for (std::size_t i : order) {
    const FilterSpec& f = s.filters[i];
    FilterResult& res = tr.filters[i];
    res.label = f.label;
    res.type = f.type;
    Mat rows;
    try {
      if (f.type == "hmm") {
        run_hmm(s, f, hmm_path, res, rows);
      } else if (f.type == "wonham" || f.type == "pp_finite_state" || f.type == "log_odds") {
        run_chain_filter(s, f, path, res, rows);
      } else if (f.type == "kbf" || f.type == "ekbf" || f.type == "pp_ekbf" || f.type == "adf") {
        run_gaussian_filter(s, f, path, oracle, res, rows);
      } else if (f.type == "bpf" || f.type == "fbpf") {
        run_particle_filter(s, f, path, oracle, seed(Stream::filter, i), res, rows);
      } else if (f.type == "grid") {
        OracleTrack* track = oracle_taken ? nullptr : &oracle;
        oracle_taken = true;
        run_grid_filter(s, f, path, track, oracle, res, rows);
      } else {
        throw ModelError("unknown filter type '" + f.type + "'");
      }
      if (opt.write_files && s.output.trajectories) {
        write_trajectory(dir / (f.label + ".csv"), s.signal == SignalKind::discrete_hmm ? "n" : "t", s, res, rows);
      }
      if (opt.keep_trajectories) res.trajectory = std::move(rows);
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
      res.metrics.clear();
    }
  }
  tr.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return tr;
}

}  // namespace

const FilterResult* TrialResult::find(const std::string& label) const {
  for (const auto& f : filters) {
    if (f.label == label) return &f;
  }
  return nullptr;
}

MetricSummary RunResult::aggregate(const std::string& label, const std::string& metric) const {
  std::vector<double> v;
  for (const auto& tr : trials) {
    const FilterResult* f = tr.find(label);
    if (!f || !f->ok) continue;
    auto it = f->metrics.find(metric);
    if (it != f->metrics.end()) v.push_back(it->second);
  }
  MetricSummary out;
  out.n = static_cast<int>(v.size());
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.mean = sum / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss / (out.n - 1) / out.n);
  }
  return out;
}

int RunResult::failures() const {
  int n = 0;
  for (const auto& tr : trials) {
    if (!tr.ok) {
      ++n;
      continue;
    }
    for (const auto& f : tr.filters) n += !f.ok;
  }
  return n;
}

json RunResult::summary() const {
  const Scenario& s = scenario;
  json out;
  out["scenario"] = s.name;
  out["kind"] = to_string(s.kind);
  out["seed"] = s.seed;
  out["n_trials"] = s.n_trials;
  out["grid"] = {{"t0", s.grid.t0}, {"dt", s.grid.dt}, {"n_steps", s.grid.n_steps}};

  json filters = json::array();
  for (const auto& f : s.filters) {
    json jf;
    jf["label"] = f.label;
    jf["type"] = f.type;
    int ok = 0;
    std::set<std::string> names;
    Diagnostics total;
    for (const auto& tr : trials) {
      const FilterResult* r = tr.find(f.label);
      if (!r) continue;
      ok += r->ok;
      for (const auto& [name, value] : r->metrics) names.insert(name);
      total.merge(r->diag);
    }
    jf["n_ok"] = ok;
    jf["n_failed"] = static_cast<int>(trials.size()) - ok;
    json metrics = json::object();
    for (const auto& name : names) {
      const MetricSummary m = aggregate(f.label, name);
      metrics[name] = {{"mean", m.mean}, {"stderr", m.stderr_}, {"n", m.n}};
    }
    jf["metrics"] = metrics;
    jf["diagnostics"] = {{"clamp_events", total.clamp_events},
                         {"fallbacks", total.fallbacks},
                         {"warnings", total.warnings.size()}};
    filters.push_back(std::move(jf));
  }
  out["filters"] = filters;

  json jt = json::array();
  for (const auto& tr : trials) {
    json t;
    t["trial"] = tr.trial;
    t["ok"] = tr.ok;
    if (!tr.ok) t["error"] = tr.error;
    if (!tr.sim_diag.warnings.empty()) t["simulation_warnings"] = tr.sim_diag.warnings;
    json fs = json::object();
    for (const auto& f : tr.filters) {
      json jf;
      jf["ok"] = f.ok;
      if (!f.ok) jf["error"] = f.error;
      jf["metrics"] = f.metrics;
      jf["diagnostics"] = diag_json(f.diag);
      fs[f.label] = std::move(jf);
    }
    t["filters"] = std::move(fs);
    jt.push_back(std::move(t));
  }
  out["trials"] = jt;
  return out;
}

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  const auto start = Clock::now();
  RunResult result;
  result.scenario = scenario;
  Scenario& s = result.scenario;
  if (options.seed) {
    s.seed = *options.seed;
    s.source["seed"] = s.seed;
  }
  if (options.trials) {
    if (*options.trials < 1) throw ConfigError("trials must be >= 1");
    s.n_trials = *options.trials;
    s.source["n_trials"] = s.n_trials;
  }
  if (options.out_dir) s.output_dir = *options.out_dir;
  if (options.workers < 1) throw ConfigError("workers must be >= 1");

  if (options.write_files) {
    std::filesystem::create_directories(s.output_dir);
    write_json(s.source, s.output_dir / "config.json");
  }

  result.trials.resize(static_cast<std::size_t>(s.n_trials));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < s.n_trials; i = next++) {
      result.trials[static_cast<std::size_t>(i)] = run_trial(s, i, options, s.output_dir);
    }
  };
  const int n_workers = std::min(options.workers, s.n_trials);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (options.write_files) write_json(result.summary(), s.output_dir / "summary.json");
  result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

}  // namespace ctf
