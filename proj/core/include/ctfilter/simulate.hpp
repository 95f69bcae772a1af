// Seeded simulation of hidden-state paths and observation records.
//
// Time convention: step k covers (t_k, t_{k+1}] with t_k = t0 + k dt. Row k of
// `states`/`labels` is the hidden state at t_{k+1}, and dY/dN row k is the
// observation increment over that interval, generated from that state. The
// state at t0 is kept separately in `initial_state` / `initial_label`.
#pragma once

#include <cstdint>
#include <vector>

#include "ctfilter/model.hpp"

namespace ctf {

using IntMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct TimeGrid {
  double t0 = 0.0;
  double dt = 1e-3;
  int n_steps = 0;

  /// t0 + k dt.
  double time(int k) const { return t0 + k * dt; }
  double horizon() const { return n_steps * dt; }
  /// Throws ModelError unless dt > 0, n_steps > 0 and the horizon is finite.
  void validate() const;

  static TimeGrid over(double horizon, double dt, double t0 = 0.0);
};

struct PathRecord {
  TimeGrid grid;
  std::uint64_t seed = 0;

  // Jump-diffusion signals.
  Vec initial_state;
  Mat states;  ///< n_steps x dim

  // Finite-state signals.
  int initial_label = -1;
  std::vector<int> labels;  ///< n_steps

  Mat dY;     ///< n_steps x l, Gaussian observations (empty otherwise)
  IntMat dN;  ///< n_steps x l, event counts (empty otherwise)

  bool is_finite_state() const { return !labels.empty(); }
  int state_dim() const { return static_cast<int>(states.cols()); }
};

/// Exact event-time simulation of the chain, sampled onto the grid.
PathRecord simulate_markov_chain(const MarkovChainModel& model, const TimeGrid& grid,
                                 std::uint64_t seed);

/// Euler-Maruyama with Bernoulli(lambda dt) jumps:
/// X_{k+1} = X_k + f dt + G sqrt(dt) xi + J eta.
/// Warns through `diag` when max lambda dt exceeds 0.1; throws NumericalError
/// when a callback returns a non-finite value.
PathRecord simulate_jump_diffusion(const JumpDiffusionModel& model, const TimeGrid& grid,
                                   std::uint64_t seed, Diagnostics* diag = nullptr);

/// dY_k = h(X_k) dt + Sigma_y^{1/2} sqrt(dt) xi_k for a jump-diffusion path.
Mat simulate_gaussian_obs(const Mat& states, const GaussianObsModel& model, const TimeGrid& grid,
                          std::uint64_t seed);

/// Finite-state variant: h(i) is column i of `h_matrix` (l x n).
Mat simulate_gaussian_obs(const std::vector<int>& labels, const Mat& h_matrix, const Mat& noise_cov,
                          const TimeGrid& grid, std::uint64_t seed);

/// dN_{k,i} ~ Bernoulli(min(h_i(X_k) dt, 1)). Negative rates throw ModelError.
IntMat simulate_pp_obs(const Mat& states, const PointProcessObsModel& model, const TimeGrid& grid,
                       std::uint64_t seed, Diagnostics* diag = nullptr);

/// Finite-state variant: rates(j, i) is the rate of channel j in state i.
IntMat simulate_pp_obs(const std::vector<int>& labels, const Mat& rates, const TimeGrid& grid,
                       std::uint64_t seed, Diagnostics* diag = nullptr);

/// Discrete-time HMM: X_0 ~ initial_dist, then for n = 1..n_steps a
/// transition followed by an emission Y_n from X_n.
struct HMMPath {
  int initial_label = -1;
  std::vector<int> labels;
  std::vector<int> symbols;
};

HMMPath simulate_hmm(const DiscreteHMMModel& model, int n_steps, std::uint64_t seed);

/// Draws an index from a probability vector.
int sample_categorical(VecCRef probs, Rng& rng);

}  // namespace ctf
