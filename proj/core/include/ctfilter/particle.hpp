// Weighted (bootstrap) and unweighted (constant-gain feedback) particle
// filters in continuous time.
//
// Weights are kept as log-weights normalised so that sum exp(log_w) = 1.
// Per-step loops visit particles in index order, so reductions are
// reproducible for a fixed seed.
#pragma once

#include <iosfwd>
#include <vector>

#include "ctfilter/exact_filters.hpp"
#include "ctfilter/model.hpp"
#include "ctfilter/rng.hpp"

namespace ctf {

struct ParticleEnsemble {
  RowMat positions;  ///< M x n, one particle per row
  Vec log_weights;   ///< length M, normalised

  int size() const { return static_cast<int>(positions.rows()); }
  int dim() const { return static_cast<int>(positions.cols()); }

  /// M draws from `prior` with uniform weights.
  static ParticleEnsemble from_prior(const InitialDistribution& prior, int M, Rng& rng);
  /// Given positions with uniform weights.
  static ParticleEnsemble uniform(RowMat positions);

  Vec weights() const;
  /// Max-subtraction log-normalisation. Throws NumericalError if every
  /// log-weight is -inf or NaN (degenerate ensemble).
  void normalize();
  /// True if every log-weight equals -log M exactly.
  bool is_uniform() const;
  /// Resets weights to exactly 1/M.
  void reset_weights();

  Vec mean() const;
  /// Weighted covariance with denominator 1 (not 1 - sum w^2).
  Mat cov() const;
};

struct ResampleSpec {
  enum class Scheme { systematic, multinomial };

  Scheme scheme = Scheme::systematic;
  double ess_threshold = 0.5;  ///< resample when ESS < threshold * M

  void validate() const;
};

/// One Euler-Maruyama step of the prior dynamics for every particle.
void bpf_propagate(ParticleEnsemble& ens, const JumpDiffusionModel& model, double dt, Rng& rng,
                   double t = 0.0);

/// log w_i += h_i^T R^{-1} dY - 1/2 h_i^T R^{-1} h_i dt, then normalise.
void bpf_reweight_gaussian(ParticleEnsemble& ens, const GaussianObsModel& obs, VecCRef dY, double dt,
                           double t = 0.0);

/// log w_i += sum_j log h_j(X_i) dN_j - h_j(X_i) dt, then normalise.
/// Particles with zero rate on an active channel get weight zero.
void bpf_reweight_pp(ParticleEnsemble& ens, const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                     double t = 0.0);

/// The discrete-time bootstrap recipe: multiply each weight by the density
/// of the observation dY / dt ~ N(h(X_i), Sigma_y / dt), then normalise.
void bootstrap_discrete_reweight(ParticleEnsemble& ens, const GaussianObsModel& obs, VecCRef dY,
                                 double dt, double t = 0.0);

/// Euler step of the weight SDE in linear (not log) weights:
///   dw_i = w_i (h_i - hbar)^T R^{-1} (dY - hbar dt).
/// Negative weights are clamped to zero and recorded in `diag`.
void weight_sde_step(ParticleEnsemble& ens, const GaussianObsModel& obs, VecCRef dY, double dt,
                     Diagnostics* diag = nullptr, double t = 0.0);

/// Point-process form: dw_i = w_i sum_j (h_j(X_i) - hbar_j) / hbar_j (dN_j - hbar_j dt).
void weight_sde_step(ParticleEnsemble& ens, const PointProcessObsModel& obs, IntVecCRef dN,
                     double dt, Diagnostics* diag = nullptr, double t = 0.0);

/// Effective sample size 1 / sum w_i^2.
double ess(const ParticleEnsemble& ens);

/// Draws M offspring and resets the weights to 1/M. Offspring are stored in
/// ascending parent order.
void resample(ParticleEnsemble& ens, ResampleSpec::Scheme scheme, Rng& rng);

/// Resamples if ESS < threshold * M; returns whether it did.
bool maybe_resample(ParticleEnsemble& ens, const ResampleSpec& spec, Rng& rng);

/// Constant gain K = (1/M) sum_i X_i (h(X_i) - hbar)^T (n x l).
Mat fbpf_gain(const ParticleEnsemble& ens, const GaussianObsModel& obs, double t = 0.0);

/// One constant-gain feedback particle filter step:
///   dX_i = f(X_i) dt + G dB_i + K R^{-1} [dY - (h(X_i) + hbar) dt / 2].
/// The gain and hbar are computed from the ensemble before any particle
/// moves. Throws ModelError if the ensemble weights are not uniform.
void fbpf_step(ParticleEnsemble& ens, const JumpDiffusionModel& model, const GaussianObsModel& obs,
               VecCRef dY, double dt, Rng& rng, double t = 0.0);

struct Histogram {
  double xmin = 0.0;
  double xmax = 1.0;
  Vec density;              ///< per bin, integrates to the mass inside [xmin, xmax)
  double outside_mass = 0;  ///< weight falling outside the range

  double bin_width() const { return (xmax - xmin) / static_cast<double>(density.size()); }
  double center(int i) const { return xmin + (i + 0.5) * bin_width(); }
};

/// Weighted histogram of coordinate `coord` of the ensemble.
Histogram weighted_histogram(const ParticleEnsemble& ens, double xmin, double xmax, int bins,
                             int coord = 0);

/// CSV with columns i, x_0.., weight.
void write_ensemble_csv(const ParticleEnsemble& ens, std::ostream& os);

}  // namespace ctf
