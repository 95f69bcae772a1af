#include "ctfilter/simulate.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace ctf {

namespace {

constexpr double kRateStepWarn = 0.1;

void fill_normal(VecRef z, Rng& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
}

[[noreturn]] void non_finite(const char* what, int step) {
  throw NumericalError(std::string("simulate: non-finite ") + what + " at step " + std::to_string(step));
}

}  // namespace

void TimeGrid::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ModelError("TimeGrid: dt must be positive and finite");
  if (n_steps <= 0) throw ModelError("TimeGrid: n_steps must be positive");
  if (!std::isfinite(t0) || !std::isfinite(horizon())) throw ModelError("TimeGrid: horizon must be finite");
}

TimeGrid TimeGrid::over(double horizon, double dt, double t0) {
  if (!(dt > 0.0)) throw ModelError("TimeGrid: dt must be positive");
  const double steps = std::round(horizon / dt);
  if (!(steps >= 1.0) || steps > std::numeric_limits<int>::max()) {
    throw ModelError("TimeGrid: horizon must cover at least one step");
  }
  TimeGrid g{t0, dt, static_cast<int>(steps)};
  g.validate();
  return g;
}

int sample_categorical(VecCRef probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng) * probs.sum();
  double acc = 0.0;
  int last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) <= 0.0) continue;
    acc += probs(i);
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

PathRecord simulate_markov_chain(const MarkovChainModel& model, const TimeGrid& grid,
                                 std::uint64_t seed) {
  model.validate();
  grid.validate();
  Rng rng(seed);
  PathRecord rec;
  rec.grid = grid;
  rec.seed = seed;
  rec.initial_label = sample_categorical(model.initial_dist, rng);
  rec.labels.resize(grid.n_steps);

  std::exponential_distribution<double> holding;
  int state = rec.initial_label;
  auto draw_next_jump = [&](int s, double now) {
    const double rate = -model.generator(s, s);
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return now + holding(rng) / rate;
  };
  double next_jump = draw_next_jump(state, grid.t0);
  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k + 1);
    while (next_jump <= t) {
      Vec out = model.generator.row(state).transpose();
      out(state) = 0.0;
      state = sample_categorical(out, rng);
      next_jump = draw_next_jump(state, next_jump);
    }
    rec.labels[k] = state;
  }
  return rec;
}

PathRecord simulate_jump_diffusion(const JumpDiffusionModel& model, const TimeGrid& grid,
                                   std::uint64_t seed, Diagnostics* diag) {
  model.validate();
  grid.validate();
  Rng rng(seed);
  const int n = model.dim;
  PathRecord rec;
  rec.grid = grid;
  rec.seed = seed;
  rec.initial_state = model.initial.sample(rng);
  rec.states.resize(grid.n_steps, n);

  const int noise_dim = model.diffusion->cols();
  const int n_jump = model.n_jump_channels();
  const double sqdt = std::sqrt(grid.dt);
  Vec x = rec.initial_state;
  Vec f(n), xi(noise_dim), lam(n_jump);
  Mat G(n, noise_dim), J(n, n_jump);
  const bool constant_g = model.diffusion->is_constant();
  if (constant_g) model.diffusion->eval(x, grid.t0, G);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  bool warned = false;

  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k);
    model.drift->eval(x, t, f);
    if (!constant_g) model.diffusion->eval(x, t, G);
    fill_normal(xi, rng);
    Vec next = x + f * grid.dt + sqdt * (G * xi);
    if (n_jump > 0) {
      model.jump_rate->eval(x, t, lam);
      model.jump_amplitude->eval(x, t, J);
      for (int c = 0; c < n_jump; ++c) {
        const double p = lam(c) * grid.dt;
        if (!(lam(c) >= 0.0)) throw ModelError("simulate_jump_diffusion: negative jump rate");
        if (p > kRateStepWarn && !warned) {
          warned = true;
          if (diag) diag->warn("simulate_jump_diffusion: jump rate * dt exceeds 0.1");
        }
        if (unif(rng) < p) next += J.col(c);
      }
    }
    if (!next.allFinite()) non_finite("state", k);
    x = std::move(next);
    rec.states.row(k) = x.transpose();
  }
  return rec;
}

Mat simulate_gaussian_obs(const Mat& states, const GaussianObsModel& model, const TimeGrid& grid,
                          std::uint64_t seed) {
  grid.validate();
  check_dim(states.rows() == grid.n_steps, "simulate_gaussian_obs: states not aligned with grid");
  check_dim(states.cols() == model.state_dim(), "simulate_gaussian_obs: state dimension");
  Rng rng(seed);
  const int l = model.obs_dim();
  const double sqdt = std::sqrt(grid.dt);
  Mat dY(grid.n_steps, l);
  Vec h(l), xi(l);
  Vec x(states.cols());
  for (int k = 0; k < grid.n_steps; ++k) {
    x = states.row(k).transpose();
    model.h().eval(x, grid.time(k + 1), h);
    if (!h.allFinite()) non_finite("observation function", k);
    fill_normal(xi, rng);
    dY.row(k) = (h * grid.dt + sqdt * (model.noise_sqrt() * xi)).transpose();
  }
  return dY;
}

Mat simulate_gaussian_obs(const std::vector<int>& labels, const Mat& h_matrix, const Mat& noise_cov,
                          const TimeGrid& grid, std::uint64_t seed) {
  grid.validate();
  check_dim(static_cast<int>(labels.size()) == grid.n_steps,
            "simulate_gaussian_obs: labels not aligned with grid");
  const auto l = h_matrix.rows();
  check_dim(noise_cov.rows() == l && noise_cov.cols() == l, "simulate_gaussian_obs: noise covariance shape");
  Eigen::LLT<Mat> llt(noise_cov);
  if (llt.info() != Eigen::Success) throw ModelError("simulate_gaussian_obs: noise covariance not positive definite");
  const Mat L = llt.matrixL();
  Rng rng(seed);
  const double sqdt = std::sqrt(grid.dt);
  Mat dY(grid.n_steps, l);
  Vec xi(l);
  for (int k = 0; k < grid.n_steps; ++k) {
    const int s = labels[k];
    check_dim(s >= 0 && s < h_matrix.cols(), "simulate_gaussian_obs: label out of range");
    fill_normal(xi, rng);
    dY.row(k) = (h_matrix.col(s) * grid.dt + sqdt * (L * xi)).transpose();
  }
  return dY;
}

namespace {

template <class RateAt>
IntMat bernoulli_events(int n_steps, int l, double dt, std::uint64_t seed, Diagnostics* diag,
                        RateAt&& rate_at) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  IntMat dN = IntMat::Zero(n_steps, l);
  Vec h(l);
  bool warned = false;
  for (int k = 0; k < n_steps; ++k) {
    rate_at(k, h);
    for (int j = 0; j < l; ++j) {
      if (!(h(j) >= 0.0) || !std::isfinite(h(j))) {
        throw ModelError("simulate_pp_obs: rate must be finite and nonnegative");
      }
      const double p = h(j) * dt;
      if (p > kRateStepWarn && !warned) {
        warned = true;
        if (diag) diag->warn("simulate_pp_obs: rate * dt exceeds 0.1");
      }
      // Always draw so the stream stays aligned regardless of the rate.
      const double u = unif(rng);
      dN(k, j) = u < std::min(p, 1.0) ? 1 : 0;
    }
  }
  return dN;
}

}  // namespace

IntMat simulate_pp_obs(const Mat& states, const PointProcessObsModel& model, const TimeGrid& grid,
                       std::uint64_t seed, Diagnostics* diag) {
  grid.validate();
  check_dim(states.rows() == grid.n_steps, "simulate_pp_obs: states not aligned with grid");
  check_dim(states.cols() == model.state_dim(), "simulate_pp_obs: state dimension");
  Vec x(states.cols());
  return bernoulli_events(grid.n_steps, model.obs_dim(), grid.dt, seed, diag, [&](int k, Vec& h) {
    x = states.row(k).transpose();
    model.rate().eval(x, grid.time(k + 1), h);
  });
}

IntMat simulate_pp_obs(const std::vector<int>& labels, const Mat& rates, const TimeGrid& grid,
                       std::uint64_t seed, Diagnostics* diag) {
  grid.validate();
  check_dim(static_cast<int>(labels.size()) == grid.n_steps, "simulate_pp_obs: labels not aligned with grid");
  return bernoulli_events(grid.n_steps, static_cast<int>(rates.rows()), grid.dt, seed, diag,
                          [&](int k, Vec& h) {
                            check_dim(labels[k] >= 0 && labels[k] < rates.cols(),
                                      "simulate_pp_obs: label out of range");
                            h = rates.col(labels[k]);
                          });
}

HMMPath simulate_hmm(const DiscreteHMMModel& model, int n_steps, std::uint64_t seed) {
  model.validate();
  if (n_steps <= 0) throw ModelError("simulate_hmm: n_steps must be positive");
  Rng rng(seed);
  HMMPath path;
  path.initial_label = sample_categorical(model.initial_dist, rng);
  path.labels.resize(n_steps);
  path.symbols.resize(n_steps);
  int state = path.initial_label;
  for (int n = 0; n < n_steps; ++n) {
    state = sample_categorical(model.transition.col(state), rng);
    path.labels[n] = state;
    path.symbols[n] = sample_categorical(model.emission.col(state), rng);
  }
  return path;
}

}  // namespace ctf
