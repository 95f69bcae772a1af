// Closed-form filters: discrete-time HMM and Kalman, continuous-time Wonham,
// Kalman-Bucy and the finite-state point-process filter.
//
// Continuous-time steps are Euler-Maruyama steps of the filtering SDEs driven
// by one observation increment. Each step predicts and corrects with the
// increment of the interval it covers (see simulate.hpp for the time grid).
#pragma once

#include <vector>

#include "ctfilter/belief.hpp"
#include "ctfilter/model.hpp"

namespace ctf {

using IntVecCRef = Eigen::Ref<const Eigen::VectorXi>;

/// dX = A X dt + Sigma_x^{1/2} dW, dY = B X dt + Sigma_y^{1/2} dV, or the
/// discrete-time analogue X_n = A X_{n-1} + noise, Y_n = B X_n + noise.
struct LinearGaussianSystem {
  Mat A;
  Mat B;
  Mat Sigma_x;
  Mat Sigma_y;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int obs_dim() const { return static_cast<int>(B.rows()); }
  void validate() const;
};

/// Time-stepping variants for the finite-state point-process filter.
///
/// `euler` is the plain Euler step of the filtering SDE. `split` applies the
/// exact transition matrix exp(A^T dt) and then the exact Bayes factor
/// prod_j h_j^{dN_j} exp(-h_j dt); it has no O(dt) drift error, so the
/// probability and log-odds forms agree to rounding.
enum class Scheme { euler, split };

DiscreteBelief hmm_filter_step(const DiscreteBelief& belief, const DiscreteHMMModel& model, int y);

GaussianBelief kalman_discrete_step(const GaussianBelief& belief, const LinearGaussianSystem& sys,
                                    VecCRef y);

/// One Wonham step. `h_matrix` (l x n) holds h(i) in column i. Negative
/// probabilities are clamped to zero (recorded in `diag`) before renormalising.
DiscreteBelief wonham_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                           const Mat& h_matrix, const Mat& noise_cov, VecCRef dY, double dt,
                           Diagnostics* diag = nullptr);

/// Same, with a precomputed Sigma_y^{-1}.
DiscreteBelief wonham_step_precision(const DiscreteBelief& belief, const MarkovChainModel& model,
                                     const Mat& h_matrix, const Mat& noise_precision, VecCRef dY,
                                     double dt, Diagnostics* diag = nullptr);

GaussianBelief kalman_bucy_step(const GaussianBelief& belief, const LinearGaussianSystem& sys,
                                VecCRef dY, double dt, Diagnostics* diag = nullptr);

/// Finite-state point-process filter; rates(j, i) is the rate of channel j
/// in state i. Throws NumericalError if an event arrives on a channel whose
/// predicted rate is zero.
DiscreteBelief pp_finite_state_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                                    const Mat& rates, IntVecCRef dN, double dt,
                                    Scheme scheme = Scheme::euler, Diagnostics* diag = nullptr);

/// Log-odds alpha = log(p_0 / p_1) for the symmetric two-state click task:
/// hazard a in both directions, channel 0 fires at r_plus in state 0 and
/// r_minus in state 1, channel 1 the other way round.
double log_odds_step(double alpha, double hazard, double r_plus, double r_minus, int dN0, int dN1,
                     double dt, Scheme scheme = Scheme::euler);

/// Log-odds step for a general two-state chain and arbitrary positive rates
/// (l x 2); the absence of events contributes (h_{j1} - h_{j0}) dt per channel.
double log_odds_step(double alpha, const MarkovChainModel& model, const Mat& rates, IntVecCRef dN,
                     double dt, Scheme scheme = Scheme::euler);

/// log(p_0 / p_1) of a two-state belief.
double log_odds(const DiscreteBelief& belief);

// ---------------------------------------------------------------------------
// Folds over an observation record. Entry k of the result is the belief
// after consuming row k of the observations.

std::vector<DiscreteBelief> run_hmm_filter(const DiscreteHMMModel& model,
                                           const std::vector<int>& symbols,
                                           const DiscreteBelief& init);

std::vector<DiscreteBelief> run_wonham(const MarkovChainModel& model, const Mat& h_matrix,
                                       const Mat& noise_cov, const Mat& dY, double dt,
                                       const DiscreteBelief& init, Diagnostics* diag = nullptr);

std::vector<GaussianBelief> run_kalman_bucy(const LinearGaussianSystem& sys, const Mat& dY,
                                            double dt, const GaussianBelief& init,
                                            Diagnostics* diag = nullptr);

std::vector<DiscreteBelief> run_pp_finite_state(const MarkovChainModel& model, const Mat& rates,
                                                const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>& dN,
                                                double dt, const DiscreteBelief& init,
                                                Scheme scheme = Scheme::euler,
                                                Diagnostics* diag = nullptr);

namespace detail {

/// Shared Euler update for Kalman-Bucy and the EKBF:
///   mean += f dt + cov H^T R^{-1} (dY - h dt)
///   cov  += (F cov + cov F^T + Q - cov H^T R^{-1} H cov) dt
/// Keeping both filters on one code path makes them agree bit for bit on
/// linear models.
void gaussian_obs_euler_update(GaussianBelief& b, VecCRef f, MatCRef F, MatCRef Q, VecCRef h,
                               MatCRef H, MatCRef R_inv, VecCRef dY, double dt,
                               Diagnostics* diag);

}  // namespace detail

}  // namespace ctf
