// Gaussian approximate filters for nonlinear models: the extended
// Kalman-Bucy filter, its point-process analogue and a Gaussian assumed
// density filter for point-process observations.
#pragma once

#include <vector>

#include "ctfilter/belief.hpp"
#include "ctfilter/exact_filters.hpp"
#include "ctfilter/model.hpp"

namespace ctf {

/// How Gaussian expectations are evaluated inside the ADF.
struct GaussianClosureSpec {
  enum class Method { analytic, gauss_hermite };

  Method method = Method::analytic;
  int quad_order = 21;  ///< odd, >= 5

  void validate() const;
};

/// Moments of g under N(mean, cov) per `spec`. With the analytic method, a
/// function without closed-form moments falls back to quadrature and the
/// fallback is counted in `diag`.
void closure_moments(const VectorFn& g, const Vec& mean, const Mat& cov, bool second_order,
                     const GaussianClosureSpec& spec, GaussianMoments& out,
                     Diagnostics* diag = nullptr, double t = 0.0);

/// Euler step of the EKBF (local linearisation around the mean). Requires
/// Jacobians of the drift and the observation function; the signal must
/// have no jumps.
GaussianBelief ekbf_step(const GaussianBelief& belief, const JumpDiffusionModel& model,
                         const GaussianObsModel& obs, VecCRef dY, double dt,
                         Diagnostics* diag = nullptr, double t = 0.0);

/// The matrix S_i entering the event term of the point-process EKBF
/// covariance update: (Sigma - L^{-1})^{-1} with L the Hessian of log h_i at
/// the mean, or zero when L = 0. Evaluated as (L Sigma - I)^{-1} L, which is
/// algebraically identical and stays defined for singular L. If L Sigma - I
/// has condition number above 1e12 the zero branch is used and a warning is
/// recorded.
Mat pp_ekbf_event_matrix(const Mat& cov, const Mat& log_hessian, Diagnostics* diag = nullptr);

/// Euler step of the point-process EKBF. Requires Jacobians of the drift and
/// Jacobians and Hessians of the rates. Throws NumericalError if an event
/// arrives where log h_i(mean) is not finite.
GaussianBelief pp_ekbf_step(const GaussianBelief& belief, const JumpDiffusionModel& model,
                            const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                            Diagnostics* diag = nullptr, double t = 0.0);

/// Euler step of the Gaussian ADF for point-process observations followed by
/// a PSD clamp of the covariance. Throws NumericalError if some <h_i> <= 0.
GaussianBelief adf_pp_step(const GaussianBelief& belief, const JumpDiffusionModel& model,
                           const PointProcessObsModel& obs, const GaussianClosureSpec& closure,
                           IntVecCRef dN, double dt, Diagnostics* diag = nullptr, double t = 0.0);

std::vector<GaussianBelief> run_ekbf(const JumpDiffusionModel& model, const GaussianObsModel& obs,
                                     const Mat& dY, double dt, double t0, const GaussianBelief& init,
                                     Diagnostics* diag = nullptr);

std::vector<GaussianBelief> run_pp_ekbf(const JumpDiffusionModel& model, const PointProcessObsModel& obs,
                                        const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>& dN,
                                        double dt, double t0, const GaussianBelief& init,
                                        Diagnostics* diag = nullptr);

std::vector<GaussianBelief> run_adf_pp(const JumpDiffusionModel& model, const PointProcessObsModel& obs,
                                       const GaussianClosureSpec& closure,
                                       const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>& dN,
                                       double dt, double t0, const GaussianBelief& init,
                                       Diagnostics* diag = nullptr);

}  // namespace ctf
