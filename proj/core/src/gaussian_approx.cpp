#include "ctfilter/gaussian_approx.hpp"

#include <cmath>
#include <string>

#include "ctfilter/linalg.hpp"
#include "ctfilter/quadrature.hpp"

namespace ctf {

namespace {

constexpr double kMaxEventCondition = 1e12;

void check_gaussian_step(const GaussianBelief& b, const JumpDiffusionModel& model, double dt,
                         const char* what) {
  check_dim(b.mean.size() == model.dim && b.cov.rows() == model.dim && b.cov.cols() == model.dim,
            what);
  if (model.has_jumps()) throw ModelError(std::string(what) + ": signal must not have jumps");
  if (!(dt > 0.0)) throw ModelError(std::string(what) + ": dt must be positive");
}

void finish(GaussianBelief& b, Diagnostics* diag, const char* what) {
  clamp_psd(b.cov, diag);
  if (!b.mean.allFinite() || !b.cov.allFinite()) {
    throw NumericalError(std::string(what) + ": non-finite mean or covariance");
  }
}

}  // namespace

void GaussianClosureSpec::validate() const {
  if (method == Method::gauss_hermite && (quad_order < 5 || quad_order % 2 == 0)) {
    throw ModelError("GaussianClosureSpec: quadrature order must be odd and >= 5");
  }
}

void closure_moments(const VectorFn& g, const Vec& mean, const Mat& cov, bool second_order,
                     const GaussianClosureSpec& spec, GaussianMoments& out, Diagnostics* diag,
                     double t) {
  spec.validate();
  if (spec.method == GaussianClosureSpec::Method::analytic) {
    if (g.gaussian_moments(mean, cov, second_order, out)) return;
    if (diag) {
      ++diag->fallbacks;
      diag->warn("closure: no closed-form moments, using Gauss-Hermite quadrature");
    }
  }
  const int order = spec.quad_order >= 5 && spec.quad_order % 2 == 1 ? spec.quad_order : 21;
  quadrature_moments(g, mean, cov, order, second_order, out, t);
}

GaussianBelief ekbf_step(const GaussianBelief& belief, const JumpDiffusionModel& model,
                         const GaussianObsModel& obs, VecCRef dY, double dt, Diagnostics* diag,
                         double t) {
  check_gaussian_step(belief, model, dt, "ekbf_step");
  check_dim(obs.state_dim() == model.dim, "ekbf_step: observation model dimension");
  check_dim(dY.size() == obs.obs_dim(), "ekbf_step: dY length");
  if (!model.drift->has_jacobian() || !obs.h().has_jacobian()) {
    throw ModelError("ekbf_step: drift and observation function need Jacobians");
  }
  const Vec& mu = belief.mean;
  const Vec f = (*model.drift)(mu, t);
  const Mat F = model.drift->jacobian_at(mu, t);
  const Vec h = obs.h()(mu, t);
  const Mat H = obs.h().jacobian_at(mu, t);
  const Mat Q = model.diffusion_cov(mu, t);
  GaussianBelief out = belief;
  detail::gaussian_obs_euler_update(out, f, F, Q, h, H, obs.noise_precision(), dY, dt, diag);
  return out;
}

Mat pp_ekbf_event_matrix(const Mat& cov, const Mat& log_hessian, Diagnostics* diag) {
  const auto n = cov.rows();
  if ((log_hessian.array() == 0.0).all()) return Mat::Zero(n, n);
  const Mat M = log_hessian * cov - Mat::Identity(n, n);
  const Eigen::JacobiSVD<Mat> svd(M);
  const Vec& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (!(cond <= kMaxEventCondition)) {
    if (diag) {
      ++diag->fallbacks;
      diag->warn("pp_ekbf: ill-conditioned event matrix, using the zero branch");
    }
    return Mat::Zero(n, n);
  }
  Mat S = M.fullPivLu().solve(log_hessian);
  symmetrize(S);
  return S;
}

GaussianBelief pp_ekbf_step(const GaussianBelief& belief, const JumpDiffusionModel& model,
                            const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                            Diagnostics* diag, double t) {
  check_gaussian_step(belief, model, dt, "pp_ekbf_step");
  check_dim(obs.state_dim() == model.dim, "pp_ekbf_step: observation model dimension");
  check_dim(dN.size() == obs.obs_dim(), "pp_ekbf_step: dN length");
  const VectorFn& rate = obs.rate();
  if (!model.drift->has_jacobian() || !rate.has_jacobian() || !rate.has_hessian()) {
    throw ModelError("pp_ekbf_step: drift Jacobian and rate Jacobian/Hessian are required");
  }
  const auto n = model.dim;
  const Vec& mu = belief.mean;
  const Mat& P = belief.cov;
  const Vec f = (*model.drift)(mu, t);
  const Mat F = model.drift->jacobian_at(mu, t);
  const Mat Q = model.diffusion_cov(mu, t);
  const Mat Dh = rate.jacobian_at(mu, t);

  Vec mean_drive = Vec::Zero(n);
  Mat curvature = Mat::Zero(n, n);
  Mat H(n, n), L(n, n);
  Vec grad_log(n);
  for (int i = 0; i < obs.obs_dim(); ++i) {
    // grad log h_i (dN_i - h_i dt) = grad log h_i dN_i - grad h_i dt.
    mean_drive -= Dh.row(i).transpose() * dt;
    rate.hessian(i, mu, t, H);
    curvature += H * dt;
    if (dN(i) != 0) {
      if (!std::isfinite(rate.log_component(i, mu, t))) {
        throw NumericalError("pp_ekbf_step: event where the rate at the mean is zero");
      }
      rate.log_gradient(i, mu, t, grad_log);
      rate.log_hessian(i, mu, t, L);
      mean_drive += grad_log * dN(i);
      curvature += pp_ekbf_event_matrix(P, L, diag) * dN(i);
    }
  }
  const Mat FP = F * P;
  GaussianBelief out;
  out.mean = mu + f * dt + P * mean_drive;
  out.cov = P + (FP + FP.transpose() + Q) * dt - P * curvature * P;
  finish(out, diag, "pp_ekbf_step");
  return out;
}

GaussianBelief adf_pp_step(const GaussianBelief& belief, const JumpDiffusionModel& model,
                           const PointProcessObsModel& obs, const GaussianClosureSpec& closure,
                           IntVecCRef dN, double dt, Diagnostics* diag, double t) {
  check_gaussian_step(belief, model, dt, "adf_pp_step");
  check_dim(obs.state_dim() == model.dim, "adf_pp_step: observation model dimension");
  check_dim(dN.size() == obs.obs_dim(), "adf_pp_step: dN length");
  const Vec& mu = belief.mean;
  const Mat& P = belief.cov;

  GaussianMoments fm, hm;
  closure_moments(*model.drift, mu, P, false, closure, fm, diag, t);
  closure_moments(obs.rate(), mu, P, true, closure, hm, diag, t);
  const Mat Q = model.diffusion_cov(mu, t);

  GaussianBelief out;
  out.mean = mu + fm.mean * dt;
  out.cov = P + (fm.cross_cov + fm.cross_cov.transpose() + Q) * dt;
  for (int i = 0; i < obs.obs_dim(); ++i) {
    const double hbar = hm.mean(i);
    if (!(hbar > 0.0)) throw NumericalError("adf_pp_step: expected rate must be positive");
    const Vec c = hm.cross_cov.row(i).transpose();
    const double innov = dN(i) - hbar * dt;
    out.mean += c / hbar * innov;
    Mat coeff = (hm.second[i] - c * mu.transpose() - mu * c.transpose()) / hbar;
    out.cov += coeff * innov;
    if (dN(i) != 0) out.cov -= c * c.transpose() / (hbar * hbar) * dN(i);
  }
  finish(out, diag, "adf_pp_step");
  return out;
}

std::vector<GaussianBelief> run_ekbf(const JumpDiffusionModel& model, const GaussianObsModel& obs,
                                     const Mat& dY, double dt, double t0, const GaussianBelief& init,
                                     Diagnostics* diag) {
  std::vector<GaussianBelief> out;
  out.reserve(static_cast<std::size_t>(dY.rows()));
  GaussianBelief b = init;
  for (Eigen::Index k = 0; k < dY.rows(); ++k) {
    b = ekbf_step(b, model, obs, dY.row(k).transpose(), dt, diag, t0 + k * dt);
    out.push_back(b);
  }
  return out;
}

std::vector<GaussianBelief> run_pp_ekbf(const JumpDiffusionModel& model, const PointProcessObsModel& obs,
                                        const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>& dN,
                                        double dt, double t0, const GaussianBelief& init,
                                        Diagnostics* diag) {
  std::vector<GaussianBelief> out;
  out.reserve(static_cast<std::size_t>(dN.rows()));
  GaussianBelief b = init;
  Eigen::VectorXi events(dN.cols());
  for (Eigen::Index k = 0; k < dN.rows(); ++k) {
    events = dN.row(k).transpose();
    b = pp_ekbf_step(b, model, obs, events, dt, diag, t0 + k * dt);
    out.push_back(b);
  }
  return out;
}

std::vector<GaussianBelief> run_adf_pp(const JumpDiffusionModel& model, const PointProcessObsModel& obs,
                                       const GaussianClosureSpec& closure,
                                       const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>& dN,
                                       double dt, double t0, const GaussianBelief& init,
                                       Diagnostics* diag) {
  std::vector<GaussianBelief> out;
  out.reserve(static_cast<std::size_t>(dN.rows()));
  GaussianBelief b = init;
  Eigen::VectorXi events(dN.cols());
  for (Eigen::Index k = 0; k < dN.rows(); ++k) {
    events = dN.row(k).transpose();
    b = adf_pp_step(b, model, obs, closure, events, dt, diag, t0 + k * dt);
    out.push_back(b);
  }
  return out;
}

}  // namespace ctf
