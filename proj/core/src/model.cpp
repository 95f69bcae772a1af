#include "ctfilter/model.hpp"

#include <cmath>
#include <string>

#include "ctfilter/linalg.hpp"

namespace ctf {

namespace {

constexpr double kSimplexTol = 1e-12;

void check_simplex(const Vec& p, const char* what) {
  if (p.size() == 0 || !p.allFinite() || (p.array() < -kSimplexTol).any() ||
      std::abs(p.sum() - 1.0) > kSimplexTol * static_cast<double>(p.size())) {
    throw ModelError(std::string(what) + ": not a probability vector");
  }
}

double fd_step(double x) { return std::max(1e-5, 1e-5 * std::abs(x)); }

}  // namespace

// ---------------------------------------------------------------------------
// Finite-state models

void MarkovChainModel::validate() const {
  const auto n = generator.rows();
  check_dim(n > 0 && generator.cols() == n, "MarkovChainModel: generator must be square");
  check_dim(initial_dist.size() == n, "MarkovChainModel: initial distribution length");
  if (!generator.allFinite()) throw ModelError("MarkovChainModel: non-finite generator");
  for (Eigen::Index i = 0; i < n; ++i) {
    double scale = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && generator(i, j) < 0.0) {
        throw ModelError("MarkovChainModel: negative off-diagonal rate");
      }
      scale = std::max(scale, std::abs(generator(i, j)));
    }
    if (std::abs(generator.row(i).sum()) > kSimplexTol * std::max(1.0, scale)) {
      throw ModelError("MarkovChainModel: generator rows must sum to zero");
    }
  }
  check_simplex(initial_dist, "MarkovChainModel initial distribution");
}

MarkovChainModel MarkovChainModel::symmetric_two_state(double hazard) {
  if (!(hazard >= 0.0)) throw ModelError("symmetric_two_state: hazard must be >= 0");
  MarkovChainModel m;
  m.generator.resize(2, 2);
  m.generator << -hazard, hazard, hazard, -hazard;
  m.initial_dist = Vec::Constant(2, 0.5);
  return m;
}

Vec apply_generator(const MarkovChainModel& model, VecCRef phi) {
  check_dim(phi.size() == model.n_states(), "apply_generator: function length != number of states");
  return model.generator * phi;
}

void DiscreteHMMModel::validate() const {
  const auto n = transition.rows();
  check_dim(n > 0 && transition.cols() == n, "DiscreteHMMModel: transition must be square");
  check_dim(emission.cols() == n && emission.rows() > 0, "DiscreteHMMModel: emission shape");
  check_dim(initial_dist.size() == n, "DiscreteHMMModel: initial distribution length");
  for (Eigen::Index j = 0; j < n; ++j) {
    check_simplex(transition.col(j), "DiscreteHMMModel transition column");
    check_simplex(emission.col(j), "DiscreteHMMModel emission column");
  }
  check_simplex(initial_dist, "DiscreteHMMModel initial distribution");
}

DiscreteHMMModel DiscreteHMMModel::binary(double alpha, double beta, double delta) {
  DiscreteHMMModel m;
  m.transition.resize(2, 2);
  m.transition << alpha, 1.0 - beta, 1.0 - alpha, beta;
  m.emission.resize(2, 2);
  m.emission << 1.0 - delta, delta, delta, 1.0 - delta;
  m.initial_dist = Vec::Constant(2, 0.5);
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// InitialDistribution

InitialDistribution InitialDistribution::gaussian(Vec mean, Mat cov) {
  check_dim(mean.size() > 0 && cov.rows() == mean.size() && cov.cols() == mean.size(),
            "InitialDistribution: covariance shape");
  if (!cov.isApprox(cov.transpose(), 1e-12)) throw ModelError("InitialDistribution: covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff())) {
    throw ModelError("InitialDistribution: covariance not PSD");
  }
  InitialDistribution d;
  d.dim_ = static_cast<int>(mean.size());
  d.gaussian_ = true;
  d.mean_ = std::move(mean);
  d.cov_ = std::move(cov);
  d.cov_sqrt_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Eigen::LLT<Mat> llt(d.cov_);
  if (llt.info() == Eigen::Success) {
    const double log_norm = llt.matrixLLT().diagonal().array().log().sum() +
                            0.5 * d.dim_ * std::log(2.0 * M_PI);
    d.density_ = [m = d.mean_, llt, log_norm](VecCRef x) {
      const Vec z = llt.matrixL().solve(x - m);
      return std::exp(-0.5 * z.squaredNorm() - log_norm);
    };
  }
  return d;
}

InitialDistribution InitialDistribution::point(Vec x) {
  check_dim(x.size() > 0, "InitialDistribution: empty point");
  InitialDistribution d;
  d.dim_ = static_cast<int>(x.size());
  d.gaussian_ = true;
  d.cov_ = Mat::Zero(x.size(), x.size());
  d.cov_sqrt_ = d.cov_;
  d.mean_ = std::move(x);
  return d;
}

InitialDistribution InitialDistribution::custom(int dim, Sampler sampler, Density density) {
  check_dim(dim > 0, "InitialDistribution: dimension must be positive");
  if (!sampler) throw ModelError("InitialDistribution: custom prior needs a sampler");
  InitialDistribution d;
  d.dim_ = dim;
  d.sampler_ = std::move(sampler);
  d.density_ = std::move(density);
  return d;
}

Vec InitialDistribution::sample(Rng& rng) const {
  if (sampler_) {
    Vec x = sampler_(rng);
    check_dim(x.size() == dim_, "InitialDistribution: sampler returned wrong dimension");
    return x;
  }
  if (!gaussian_) throw ModelError("InitialDistribution: uninitialised prior");
  std::normal_distribution<double> normal;
  Vec z(dim_);
  for (int i = 0; i < dim_; ++i) z(i) = normal(rng);
  return mean_ + cov_sqrt_ * z;
}

double InitialDistribution::density(VecCRef x) const {
  if (!density_) throw ModelError("InitialDistribution: prior has no density");
  return density_(x);
}

const Vec& InitialDistribution::mean() const {
  if (!gaussian_) throw ModelError("InitialDistribution: mean only stored for Gaussian priors");
  return mean_;
}

const Mat& InitialDistribution::cov() const {
  if (!gaussian_) throw ModelError("InitialDistribution: covariance only stored for Gaussian priors");
  return cov_;
}

// ---------------------------------------------------------------------------
// Jump-diffusion models

Mat JumpDiffusionModel::diffusion_cov(VecCRef x, double t) const {
  const Mat G = (*diffusion)(x, t);
  return G * G.transpose();
}

void JumpDiffusionModel::validate(std::span<const Vec> probes) const {
  check_dim(dim > 0, "JumpDiffusionModel: dimension must be positive");
  if (!drift || !diffusion) throw ModelError("JumpDiffusionModel: drift and diffusion are required");
  check_dim(drift->in_dim() == dim && drift->out_dim() == dim, "JumpDiffusionModel: drift shape");
  check_dim(diffusion->in_dim() == dim && diffusion->rows() == dim, "JumpDiffusionModel: diffusion shape");
  if ((jump_amplitude == nullptr) != (jump_rate == nullptr)) {
    throw ModelError("JumpDiffusionModel: jump amplitude and jump rate must be given together");
  }
  if (has_jumps()) {
    check_dim(jump_amplitude->in_dim() == dim && jump_amplitude->rows() == dim &&
                  jump_amplitude->cols() == jump_rate->out_dim() && jump_rate->in_dim() == dim,
              "JumpDiffusionModel: jump shapes");
  }
  check_dim(initial.dim() == dim, "JumpDiffusionModel: initial distribution dimension");
  for (const Vec& x : probes) {
    check_dim(x.size() == dim, "JumpDiffusionModel: probe dimension");
    const Vec f = (*drift)(x);
    if (!f.allFinite()) throw ModelError("JumpDiffusionModel: drift not finite at probe");
    const Mat Q = diffusion_cov(x);
    if (!Q.allFinite()) throw ModelError("JumpDiffusionModel: diffusion not finite at probe");
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    if (Eigen::SelfAdjointEigenSolver<Mat>(Q, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() < -1e-12 * scale) {
      throw ModelError("JumpDiffusionModel: G G^T not PSD at probe");
    }
    if (has_jumps()) {
      const Vec lam = (*jump_rate)(x);
      if (!lam.allFinite() || (lam.array() < 0.0).any()) {
        throw ModelError("JumpDiffusionModel: negative jump rate at probe");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Observables and the generator

Vec ObservableFn::gradient_at(VecCRef x) const {
  if (gradient) return gradient(x);
  const auto n = x.size();
  Vec g(n);
  Vec xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = fd_step(x(i));
    xp(i) = x(i) + h;
    const double fp = value(xp);
    xp(i) = x(i) - h;
    const double fm = value(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Mat ObservableFn::hessian_at(VecCRef x) const {
  if (hessian) return hessian(x);
  const auto n = x.size();
  Mat H(n, n);
  Vec xp = x;
  const double f0 = value(x);
  // The Hessian needs a larger step than the gradient to keep roundoff small.
  auto step = [](double xi) { return std::max(1e-4, 1e-4 * std::abs(xi)); };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = step(x(i));
    xp(i) = x(i) + hi;
    const double fp = value(xp);
    xp(i) = x(i) - hi;
    const double fm = value(xp);
    xp(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = step(x(j));
      double acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          xp(i) = x(i) + si * hi;
          xp(j) = x(j) + sj * hj;
          acc += si * sj * value(xp);
        }
      }
      xp(i) = x(i);
      xp(j) = x(j);
      H(i, j) = H(j, i) = acc / (4.0 * hi * hj);
    }
  }
  return H;
}

void ObservableFn::validate_derivatives(std::span<const Vec> probes, double rel_tol) const {
  ObservableFn numeric{value, {}, {}};
  for (const Vec& x : probes) {
    if (gradient) {
      const Vec a = gradient(x);
      const Vec b = numeric.gradient_at(x);
      if ((a - b).norm() > rel_tol * std::max(1.0, b.norm())) {
        throw ModelError("ObservableFn: gradient disagrees with finite differences");
      }
    }
    if (hessian) {
      const Mat a = hessian(x);
      const Mat b = numeric.hessian_at(x);
      // Second differences carry O(1e-8 / h^2) roundoff, so loosen the bound.
      if ((a - b).norm() > std::max(rel_tol, 1e-3) * std::max(1.0, b.norm())) {
        throw ModelError("ObservableFn: Hessian disagrees with finite differences");
      }
    }
  }
}

double apply_generator(const JumpDiffusionModel& model, const ObservableFn& phi, VecCRef x,
                       double t) {
  check_dim(x.size() == model.dim, "apply_generator: state dimension");
  const Vec f = (*model.drift)(x, t);
  const Mat Q = model.diffusion_cov(x, t);
  double out = f.dot(phi.gradient_at(x));
  if (Q.cwiseAbs().maxCoeff() > 0.0) out += 0.5 * (Q.cwiseProduct(phi.hessian_at(x))).sum();
  if (model.has_jumps()) {
    const Vec lam = (*model.jump_rate)(x, t);
    const Mat J = (*model.jump_amplitude)(x, t);
    const double base = phi.value(x);
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      if (lam(k) != 0.0) out += lam(k) * (phi.value(x + J.col(k)) - base);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Observation models

GaussianObsModel::GaussianObsModel(VectorFnPtr obs_fn, Mat noise_cov)
    : obs_fn_(std::move(obs_fn)), noise_cov_(std::move(noise_cov)) {
  if (!obs_fn_) throw ModelError("GaussianObsModel: missing observation function");
  const auto m = obs_fn_->out_dim();
  check_dim(noise_cov_.rows() == m && noise_cov_.cols() == m, "GaussianObsModel: noise covariance shape");
  if (!noise_cov_.isApprox(noise_cov_.transpose(), 1e-12)) {
    throw ModelError("GaussianObsModel: noise covariance not symmetric");
  }
  Eigen::LLT<Mat> llt(noise_cov_);
  if (llt.info() != Eigen::Success) throw ModelError("GaussianObsModel: noise covariance must be positive definite");
  noise_sqrt_ = llt.matrixL();
  noise_precision_ = spd_inverse(noise_cov_, "GaussianObsModel");
}

PointProcessObsModel::PointProcessObsModel(VectorFnPtr rate_fn, double reference_rate)
    : rate_fn_(std::move(rate_fn)), reference_rate_(reference_rate) {
  if (!rate_fn_) throw ModelError("PointProcessObsModel: missing rate function");
  if (!(reference_rate_ > 0.0)) throw ModelError("PointProcessObsModel: reference rate must be positive");
}

void PointProcessObsModel::validate(std::span<const Vec> probes) const {
  for (const Vec& x : probes) {
    check_dim(x.size() == state_dim(), "PointProcessObsModel: probe dimension");
    const Vec h = (*rate_fn_)(x);
    if (!h.allFinite() || (h.array() < 0.0).any()) {
      throw ModelError("PointProcessObsModel: negative rate at probe");
    }
  }
}

}  // namespace ctf
