#include "ctfilter/exact_filters.hpp"

#include <cmath>
#include <string>

#include "ctfilter/linalg.hpp"

namespace ctf {

namespace {

void check_belief(const DiscreteBelief& b, int n, const char* what) {
  check_dim(b.probs.size() == n, what);
}

// Clamps negative entries to zero and renormalises in place.
void project_to_simplex(Vec& p, Diagnostics* diag, const char* what) {
  if (!p.allFinite()) throw NumericalError(std::string(what) + ": non-finite probabilities");
  double removed = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) < 0.0) {
      removed -= p(i);
      p(i) = 0.0;
    }
  }
  const double total = p.sum();
  if (!(total > 0.0)) throw NumericalError(std::string(what) + ": belief collapsed to zero mass");
  if (removed > 0.0 && diag) diag->record_clamp(removed, total + removed);
  p /= total;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_two_state(const MarkovChainModel& model, const Mat& rates, IntVecCRef dN) {
  check_dim(model.n_states() == 2, "log_odds_step: model must have two states");
  check_dim(rates.cols() == 2 && rates.rows() == dN.size(), "log_odds_step: rates must be l x 2");
  if (!((rates.array() > 0.0).all())) throw ModelError("log_odds_step: rates must be positive");
}

// Exact two-state transition of the log-odds over dt.
double log_odds_transition(double alpha, double a01, double a10, double dt) {
  const double s = a01 + a10;
  if (s <= 0.0) return alpha;
  const double keep = std::exp(-s * dt);
  const double move = -std::expm1(-s * dt);
  const double p0 = sigmoid(alpha) * keep + (a10 / s) * move;
  const double p1 = sigmoid(-alpha) * keep + (a01 / s) * move;
  return std::log(p0) - std::log(p1);
}

DiscreteBelief pp_split_step(const DiscreteBelief& belief, const Mat& transition, const Mat& rates,
                             IntVecCRef dN, double dt) {
  Vec p = transition * belief.probs;
  const auto n = p.size();
  Vec logw = Vec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < rates.rows(); ++j) {
      const double h = rates(j, i);
      if (dN(j) > 0) logw(i) += h > 0.0 ? dN(j) * std::log(h) : -INFINITY;
      logw(i) -= h * dt;
    }
  }
  double top = -INFINITY;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p(i) > 0.0) top = std::max(top, logw(i));
  }
  if (!std::isfinite(top)) throw NumericalError("pp_finite_state_step: event with zero predicted rate");
  for (Eigen::Index i = 0; i < n; ++i) p(i) = p(i) > 0.0 ? p(i) * std::exp(logw(i) - top) : 0.0;
  const double total = p.sum();
  if (!(total > 0.0)) throw NumericalError("pp_finite_state_step: event with zero predicted rate");
  return {p / total};
}

DiscreteBelief pp_euler_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                             const Mat& rates, IntVecCRef dN, double dt, Diagnostics* diag) {
  const Vec& p = belief.probs;
  Vec next = p + model.generator.transpose() * p * dt;
  for (Eigen::Index j = 0; j < rates.rows(); ++j) {
    const double hbar = rates.row(j).dot(p);
    if (dN(j) > 0 && !(hbar > 0.0)) {
      throw NumericalError("pp_finite_state_step: event with zero predicted rate");
    }
    const double innov = dN(j) > 0 ? dN(j) / hbar - dt : -dt;
    next.array() += p.array() * (rates.row(j).transpose().array() - hbar) * innov;
  }
  project_to_simplex(next, diag, "pp_finite_state_step");
  return {next};
}

void check_pp_args(const DiscreteBelief& belief, const MarkovChainModel& model, const Mat& rates,
                   IntVecCRef dN, double dt) {
  check_belief(belief, model.n_states(), "pp_finite_state_step: belief length");
  check_dim(rates.cols() == model.n_states(), "pp_finite_state_step: rates must be l x n");
  check_dim(dN.size() == rates.rows(), "pp_finite_state_step: dN length");
  if (!(dt > 0.0)) throw ModelError("pp_finite_state_step: dt must be positive");
  if ((rates.array() < 0.0).any()) throw ModelError("pp_finite_state_step: negative rate");
}

}  // namespace

void LinearGaussianSystem::validate() const {
  const auto n = A.rows();
  check_dim(n > 0 && A.cols() == n, "LinearGaussianSystem: A must be square");
  check_dim(B.cols() == n && B.rows() > 0, "LinearGaussianSystem: B must be l x n");
  check_dim(Sigma_x.rows() == n && Sigma_x.cols() == n, "LinearGaussianSystem: Sigma_x shape");
  check_dim(Sigma_y.rows() == B.rows() && Sigma_y.cols() == B.rows(), "LinearGaussianSystem: Sigma_y shape");
  Mat q = Sigma_x;
  if (!q.isApprox(q.transpose(), 1e-12) && q.norm() > 0.0) throw ModelError("LinearGaussianSystem: Sigma_x not symmetric");
  if (clamp_psd(q) && (q - Sigma_x).norm() > 1e-12 * std::max(1.0, Sigma_x.norm())) {
    throw ModelError("LinearGaussianSystem: Sigma_x not PSD");
  }
  if (Eigen::LLT<Mat>(Sigma_y).info() != Eigen::Success) {
    throw ModelError("LinearGaussianSystem: Sigma_y must be positive definite");
  }
}

DiscreteBelief hmm_filter_step(const DiscreteBelief& belief, const DiscreteHMMModel& model, int y) {
  check_belief(belief, model.n_states(), "hmm_filter_step: belief length");
  check_dim(y >= 0 && y < model.n_symbols(), "hmm_filter_step: symbol out of range");
  Vec q = model.transition * belief.probs;
  q.array() *= model.emission.row(y).transpose().array();
  const double z = q.sum();
  if (!(z > 0.0)) throw NumericalError("hmm_filter_step: observation has zero likelihood");
  return {q / z};
}

GaussianBelief kalman_discrete_step(const GaussianBelief& belief, const LinearGaussianSystem& sys,
                                    VecCRef y) {
  check_dim(belief.mean.size() == sys.state_dim(), "kalman_discrete_step: belief dimension");
  check_dim(y.size() == sys.obs_dim(), "kalman_discrete_step: observation dimension");
  const Vec pred_mean = sys.A * belief.mean;
  Mat pred_cov = sys.A * belief.cov * sys.A.transpose() + sys.Sigma_x;
  symmetrize(pred_cov);
  const Mat S = sys.B * pred_cov * sys.B.transpose() + sys.Sigma_y;
  Eigen::LDLT<Mat> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array() <= 0.0).any()) {
    throw NumericalError("kalman_discrete_step: singular innovation covariance");
  }
  // K = P B^T S^{-1}, computed as (S^{-1} B P)^T.
  const Mat K = ldlt.solve(sys.B * pred_cov).transpose();
  GaussianBelief out;
  out.mean = pred_mean + K * (y - sys.B * pred_mean);
  const auto n = sys.state_dim();
  out.cov = (Mat::Identity(n, n) - K * sys.B) * pred_cov;
  symmetrize(out.cov);
  return out;
}

DiscreteBelief wonham_step_precision(const DiscreteBelief& belief, const MarkovChainModel& model,
                                     const Mat& h_matrix, const Mat& noise_precision, VecCRef dY,
                                     double dt, Diagnostics* diag) {
  check_belief(belief, model.n_states(), "wonham_step: belief length");
  check_dim(h_matrix.cols() == model.n_states(), "wonham_step: h must be l x n");
  check_dim(dY.size() == h_matrix.rows(), "wonham_step: dY length");
  check_dim(noise_precision.rows() == h_matrix.rows() && noise_precision.cols() == h_matrix.rows(),
            "wonham_step: noise covariance shape");
  if (!(dt > 0.0)) throw ModelError("wonham_step: dt must be positive");
  const Vec& p = belief.probs;
  const Vec hbar = h_matrix * p;
  const Vec weighted_innov = noise_precision * (dY - hbar * dt);
  // (h_i - hbar)^T R^{-1} (dY - hbar dt) for every state i.
  const Vec gain = (h_matrix.transpose() * weighted_innov).array() - hbar.dot(weighted_innov);
  Vec next = p + model.generator.transpose() * p * dt;
  next.array() += p.array() * gain.array();
  project_to_simplex(next, diag, "wonham_step");
  return {next};
}

DiscreteBelief wonham_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                           const Mat& h_matrix, const Mat& noise_cov, VecCRef dY, double dt,
                           Diagnostics* diag) {
  return wonham_step_precision(belief, model, h_matrix, spd_inverse(noise_cov, "wonham_step"), dY,
                               dt, diag);
}

namespace detail {

void gaussian_obs_euler_update(GaussianBelief& b, VecCRef f, MatCRef F, MatCRef Q, VecCRef h,
                               MatCRef H, MatCRef R_inv, VecCRef dY, double dt,
                               Diagnostics* diag) {
  const Mat PHt = b.cov * H.transpose();
  const Mat gain = PHt * R_inv;
  const Mat FP = F * b.cov;
  Mat dcov = FP + FP.transpose() + Q - gain * PHt.transpose();
  b.mean += f * dt + gain * (dY - h * dt);
  b.cov += dcov * dt;
  clamp_psd(b.cov, diag);
  if (!b.mean.allFinite() || !b.cov.allFinite()) {
    throw NumericalError("Gaussian filter step produced non-finite values");
  }
}

}  // namespace detail

GaussianBelief kalman_bucy_step(const GaussianBelief& belief, const LinearGaussianSystem& sys,
                                VecCRef dY, double dt, Diagnostics* diag) {
  check_dim(belief.mean.size() == sys.state_dim() && belief.cov.rows() == sys.state_dim(),
            "kalman_bucy_step: belief dimension");
  check_dim(dY.size() == sys.obs_dim(), "kalman_bucy_step: dY length");
  if (!(dt > 0.0)) throw ModelError("kalman_bucy_step: dt must be positive");
  GaussianBelief out = belief;
  const Vec f = sys.A * belief.mean;
  const Vec h = sys.B * belief.mean;
  detail::gaussian_obs_euler_update(out, f, sys.A, sys.Sigma_x, h, sys.B,
                                    spd_inverse(sys.Sigma_y, "kalman_bucy_step"), dY, dt, diag);
  return out;
}

DiscreteBelief pp_finite_state_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                                    const Mat& rates, IntVecCRef dN, double dt, Scheme scheme,
                                    Diagnostics* diag) {
  check_pp_args(belief, model, rates, dN, dt);
  if (scheme == Scheme::split) {
    return pp_split_step(belief, expm(model.generator.transpose() * dt), rates, dN, dt);
  }
  return pp_euler_step(belief, model, rates, dN, dt, diag);
}

double log_odds_step(double alpha, double hazard, double r_plus, double r_minus, int dN0, int dN1,
                     double dt, Scheme scheme) {
  if (!(r_plus > 0.0 && r_minus > 0.0)) throw ModelError("log_odds_step: rates must be positive");
  const double jump = std::log(r_plus / r_minus) * (dN0 - dN1);
  if (scheme == Scheme::split) return log_odds_transition(alpha, hazard, hazard, dt) + jump;
  return alpha - 2.0 * hazard * std::sinh(alpha) * dt + jump;
}

double log_odds_step(double alpha, const MarkovChainModel& model, const Mat& rates, IntVecCRef dN,
                     double dt, Scheme scheme) {
  check_two_state(model, rates, dN);
  const double a01 = model.generator(0, 1);
  const double a10 = model.generator(1, 0);
  double next = scheme == Scheme::split
                    ? log_odds_transition(alpha, a01, a10, dt)
                    : alpha + (a10 * (1.0 + std::exp(-alpha)) - a01 * (1.0 + std::exp(alpha))) * dt;
  for (Eigen::Index j = 0; j < rates.rows(); ++j) {
    next += (rates(j, 1) - rates(j, 0)) * dt;
    if (dN(j) != 0) next += dN(j) * std::log(rates(j, 0) / rates(j, 1));
  }
  return next;
}

double log_odds(const DiscreteBelief& belief) {
  check_dim(belief.probs.size() == 2, "log_odds: belief must have two states");
  return std::log(belief.probs(0)) - std::log(belief.probs(1));
}

std::vector<DiscreteBelief> run_hmm_filter(const DiscreteHMMModel& model,
                                           const std::vector<int>& symbols,
                                           const DiscreteBelief& init) {
  std::vector<DiscreteBelief> out;
  out.reserve(symbols.size());
  DiscreteBelief b = init;
  for (int y : symbols) {
    b = hmm_filter_step(b, model, y);
    out.push_back(b);
  }
  return out;
}

std::vector<DiscreteBelief> run_wonham(const MarkovChainModel& model, const Mat& h_matrix,
                                       const Mat& noise_cov, const Mat& dY, double dt,
                                       const DiscreteBelief& init, Diagnostics* diag) {
  const Mat precision = spd_inverse(noise_cov, "run_wonham");
  std::vector<DiscreteBelief> out;
  out.reserve(static_cast<std::size_t>(dY.rows()));
  DiscreteBelief b = init;
  for (Eigen::Index k = 0; k < dY.rows(); ++k) {
    b = wonham_step_precision(b, model, h_matrix, precision, dY.row(k).transpose(), dt, diag);
    out.push_back(b);
  }
  return out;
}

std::vector<GaussianBelief> run_kalman_bucy(const LinearGaussianSystem& sys, const Mat& dY,
                                            double dt, const GaussianBelief& init,
                                            Diagnostics* diag) {
  sys.validate();
  std::vector<GaussianBelief> out;
  out.reserve(static_cast<std::size_t>(dY.rows()));
  GaussianBelief b = init;
  for (Eigen::Index k = 0; k < dY.rows(); ++k) {
    b = kalman_bucy_step(b, sys, dY.row(k).transpose(), dt, diag);
    out.push_back(b);
  }
  return out;
}

std::vector<DiscreteBelief> run_pp_finite_state(const MarkovChainModel& model, const Mat& rates,
                                                const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>& dN,
                                                double dt, const DiscreteBelief& init, Scheme scheme,
                                                Diagnostics* diag) {
  std::vector<DiscreteBelief> out;
  out.reserve(static_cast<std::size_t>(dN.rows()));
  const Mat transition = scheme == Scheme::split ? expm(model.generator.transpose() * dt) : Mat();
  DiscreteBelief b = init;
  Eigen::VectorXi events(dN.cols());
  for (Eigen::Index k = 0; k < dN.rows(); ++k) {
    events = dN.row(k).transpose();
    check_pp_args(b, model, rates, events, dt);
    b = scheme == Scheme::split ? pp_split_step(b, transition, rates, events, dt)
                                : pp_euler_step(b, model, rates, events, dt, diag);
    out.push_back(b);
  }
  return out;
}

}  // namespace ctf
