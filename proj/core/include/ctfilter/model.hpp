// Signal and observation models and their infinitesimal generators.
#pragma once

#include <functional>
#include <optional>
#include <span>

#include "ctfilter/functions.hpp"
#include "ctfilter/rng.hpp"
#include "ctfilter/types.hpp"

namespace ctf {

// ---------------------------------------------------------------------------
// Finite-state signals
// ---------------------------------------------------------------------------

/// Continuous-time Markov chain on {0, ..., n-1}.
///
/// `generator` is A = dP/dt at 0: A(i, j) is the rate of jumping from i to j,
/// so rows sum to zero and probability vectors evolve as dp/dt = A^T p.
struct MarkovChainModel {
  Mat generator;
  Vec initial_dist;

  int n_states() const { return static_cast<int>(generator.rows()); }

  /// Throws ModelError unless rows sum to 0, off-diagonals are >= 0 and the
  /// initial distribution lies on the simplex (tolerance 1e-12).
  void validate() const;

  /// Two states switching with the same hazard in both directions.
  static MarkovChainModel symmetric_two_state(double hazard);
};

/// Returns A phi, i.e. the generator applied to a function on the states.
Vec apply_generator(const MarkovChainModel& model, VecCRef phi);

/// Discrete-time HMM. `transition` is P^T (column-stochastic: column j is the
/// distribution of the next state given current state j). `emission(y, i)` is
/// p(Y = y | X = i).
struct DiscreteHMMModel {
  Mat transition;
  Mat emission;
  Vec initial_dist;

  int n_states() const { return static_cast<int>(transition.rows()); }
  int n_symbols() const { return static_cast<int>(emission.rows()); }
  void validate() const;

  /// Two hidden states with stay probabilities alpha (state 0) and beta
  /// (state 1), observed through a binary symmetric channel with flip
  /// probability delta.
  static DiscreteHMMModel binary(double alpha, double beta, double delta);
};

// ---------------------------------------------------------------------------
// Jump-diffusion signals
// ---------------------------------------------------------------------------

/// Distribution of X_0. Gaussian priors carry their moments so that Gaussian
/// filters and grid solvers can be initialised exactly.
class InitialDistribution {
 public:
  using Sampler = std::function<Vec(Rng&)>;
  using Density = std::function<double(VecCRef)>;

  InitialDistribution() = default;

  static InitialDistribution gaussian(Vec mean, Mat cov);
  static InitialDistribution point(Vec x);
  static InitialDistribution custom(int dim, Sampler sampler, Density density = {});

  int dim() const { return dim_; }
  Vec sample(Rng& rng) const;
  bool has_density() const { return static_cast<bool>(density_); }
  double density(VecCRef x) const;

  bool is_gaussian() const { return gaussian_; }
  /// Only available for Gaussian and point priors.
  const Vec& mean() const;
  const Mat& cov() const;

 private:
  int dim_ = 0;
  bool gaussian_ = false;
  Vec mean_;
  Mat cov_;
  Mat cov_sqrt_;
  Sampler sampler_;
  Density density_;
};

/// dX = f(X,t) dt + G(X,t) dW + J(X,t) dN, with dN_k ~ Poisson(lambda_k(X) dt).
///
/// `jump_amplitude` and `jump_rate` may both be null for a pure diffusion.
struct JumpDiffusionModel {
  int dim = 0;
  VectorFnPtr drift;
  MatrixFnPtr diffusion;
  MatrixFnPtr jump_amplitude;
  VectorFnPtr jump_rate;
  InitialDistribution initial;

  bool has_jumps() const { return jump_amplitude != nullptr && jump_rate != nullptr; }
  int n_jump_channels() const { return has_jumps() ? jump_rate->out_dim() : 0; }

  /// G G^T at (x, t).
  Mat diffusion_cov(VecCRef x, double t = 0.0) const;

  /// Checks shapes, lambda(x) >= 0 and G G^T symmetric PSD at every probe.
  void validate(std::span<const Vec> probes = {}) const;
};

/// Scalar test function with optional analytic derivatives.
struct ObservableFn {
  std::function<double(VecCRef)> value;
  std::function<Vec(VecCRef)> gradient;
  std::function<Mat(VecCRef)> hessian;

  /// Gradient, falling back to central differences with step
  /// max(1e-5, 1e-5 |x_i|) when no analytic gradient is supplied.
  Vec gradient_at(VecCRef x) const;
  Mat hessian_at(VecCRef x) const;

  /// Throws ModelError if supplied derivatives disagree with central
  /// differences beyond `rel_tol` at any probe.
  void validate_derivatives(std::span<const Vec> probes, double rel_tol = 1e-5) const;
};

/// (A phi)(x) = f . grad phi + 1/2 tr(G G^T hess phi)
///              + sum_k lambda_k(x) [phi(x + J_k) - phi(x)].
double apply_generator(const JumpDiffusionModel& model, const ObservableFn& phi, VecCRef x,
                       double t = 0.0);

// ---------------------------------------------------------------------------
// Observation models
// ---------------------------------------------------------------------------

/// dY = h(X, t) dt + Sigma_y^{1/2} dV with constant Sigma_y.
class GaussianObsModel {
 public:
  GaussianObsModel(VectorFnPtr obs_fn, Mat noise_cov);

  int obs_dim() const { return obs_fn_->out_dim(); }
  int state_dim() const { return obs_fn_->in_dim(); }
  const VectorFn& h() const { return *obs_fn_; }
  const VectorFnPtr& h_ptr() const { return obs_fn_; }
  const Mat& noise_cov() const { return noise_cov_; }
  const Mat& noise_precision() const { return noise_precision_; }
  /// Lower Cholesky factor of Sigma_y.
  const Mat& noise_sqrt() const { return noise_sqrt_; }

 private:
  VectorFnPtr obs_fn_;
  Mat noise_cov_;
  Mat noise_precision_;
  Mat noise_sqrt_;
};

/// dN_i ~ Poisson(h_i(X) dt). `reference_rate` is the rate of the reference
/// measure and only enters unnormalized quantities.
class PointProcessObsModel {
 public:
  explicit PointProcessObsModel(VectorFnPtr rate_fn, double reference_rate = 1.0);

  int obs_dim() const { return rate_fn_->out_dim(); }
  int state_dim() const { return rate_fn_->in_dim(); }
  const VectorFn& rate() const { return *rate_fn_; }
  const VectorFnPtr& rate_ptr() const { return rate_fn_; }
  double reference_rate() const { return reference_rate_; }

  /// Throws ModelError if any rate is negative at a probe.
  void validate(std::span<const Vec> probes) const;

 private:
  VectorFnPtr rate_fn_;
  double reference_rate_;
};

}  // namespace ctf
