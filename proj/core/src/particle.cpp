#include "ctfilter/particle.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "ctfilter/io.hpp"
#include "ctfilter/linalg.hpp"

namespace ctf {

namespace {

void fill_normal(RowMat& z, Rng& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = normal(rng);
  }
}

void check_finite_positions(const ParticleEnsemble& ens, const char* what) {
  if (!ens.positions.allFinite()) throw NumericalError(std::string(what) + ": non-finite particle position");
}

void set_from_linear_weights(ParticleEnsemble& ens, const Vec& w) {
  ens.log_weights = w.array().log().matrix();
  ens.normalize();
}

}  // namespace

ParticleEnsemble ParticleEnsemble::from_prior(const InitialDistribution& prior, int M, Rng& rng) {
  if (M <= 0) throw ModelError("ParticleEnsemble: need at least one particle");
  RowMat x(M, prior.dim());
  for (int i = 0; i < M; ++i) x.row(i) = prior.sample(rng).transpose();
  return uniform(std::move(x));
}

ParticleEnsemble ParticleEnsemble::uniform(RowMat positions) {
  if (positions.rows() == 0) throw ModelError("ParticleEnsemble: need at least one particle");
  ParticleEnsemble e;
  e.positions = std::move(positions);
  e.reset_weights();
  return e;
}

Vec ParticleEnsemble::weights() const { return log_weights.array().exp().matrix(); }

void ParticleEnsemble::reset_weights() {
  log_weights = Vec::Constant(positions.rows(), -std::log(static_cast<double>(positions.rows())));
}

bool ParticleEnsemble::is_uniform() const {
  const double lw = -std::log(static_cast<double>(positions.rows()));
  return log_weights.size() == positions.rows() && (log_weights.array() == lw).all();
}

void ParticleEnsemble::normalize() {
  double top = -std::numeric_limits<double>::infinity();
  double bottom = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < log_weights.size(); ++i) {
    const double v = log_weights(i);
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw NumericalError("ParticleEnsemble: invalid log-weight");
    }
    top = std::max(top, v);
    bottom = std::min(bottom, v);
  }
  if (!std::isfinite(top)) throw NumericalError("ParticleEnsemble: all weights underflowed (degenerate ensemble)");
  if (top == bottom) {
    // Equal weights: set them to exactly 1/M instead of accumulating rounding.
    reset_weights();
    return;
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < log_weights.size(); ++i) sum += std::exp(log_weights(i) - top);
  const double shift = top + std::log(sum);
  log_weights.array() -= shift;
}

Vec ParticleEnsemble::mean() const {
  const Vec w = weights();
  return positions.transpose() * w;
}

Mat ParticleEnsemble::cov() const {
  const Vec w = weights();
  const Vec m = positions.transpose() * w;
  const RowMat centered = positions.rowwise() - m.transpose();
  Mat c = centered.transpose() * w.asDiagonal() * centered;
  symmetrize(c);
  return c;
}

void ResampleSpec::validate() const {
  if (!(ess_threshold > 0.0 && ess_threshold <= 1.0)) {
    throw ModelError("ResampleSpec: ESS threshold must lie in (0, 1]");
  }
}

void bpf_propagate(ParticleEnsemble& ens, const JumpDiffusionModel& model, double dt, Rng& rng,
                   double t) {
  check_dim(ens.dim() == model.dim, "bpf_propagate: particle dimension");
  if (!(dt > 0.0)) throw ModelError("bpf_propagate: dt must be positive");
  const auto M = ens.size();
  RowMat f;
  model.drift->eval_rows(ens.positions, t, f);
  const int d = model.diffusion->cols();
  RowMat z(M, d);
  fill_normal(z, rng);
  const double sqdt = std::sqrt(dt);
  RowMat next = ens.positions + f * dt;
  if (model.diffusion->is_constant()) {
    const Mat G = (*model.diffusion)(ens.positions.row(0).transpose(), t);
    next.noalias() += sqdt * z * G.transpose();
  } else {
    Mat G(model.dim, d);
    for (Eigen::Index i = 0; i < M; ++i) {
      model.diffusion->eval(ens.positions.row(i).transpose(), t, G);
      next.row(i) += sqdt * (G * z.row(i).transpose()).transpose();
    }
  }
  if (model.has_jumps()) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int k = model.n_jump_channels();
    RowMat lam;
    model.jump_rate->eval_rows(ens.positions, t, lam);
    Mat J(model.dim, k);
    for (Eigen::Index i = 0; i < M; ++i) {
      model.jump_amplitude->eval(ens.positions.row(i).transpose(), t, J);
      for (int c = 0; c < k; ++c) {
        if (unif(rng) < lam(i, c) * dt) next.row(i) += J.col(c).transpose();
      }
    }
  }
  ens.positions = std::move(next);
  check_finite_positions(ens, "bpf_propagate");
}

void bpf_reweight_gaussian(ParticleEnsemble& ens, const GaussianObsModel& obs, VecCRef dY, double dt,
                           double t) {
  check_dim(ens.dim() == obs.state_dim(), "bpf_reweight_gaussian: particle dimension");
  check_dim(dY.size() == obs.obs_dim(), "bpf_reweight_gaussian: dY length");
  RowMat H;
  obs.h().eval_rows(ens.positions, t, H);
  const Mat& R_inv = obs.noise_precision();
  const Vec v = R_inv * dY;
  const RowMat HR = H * R_inv;
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    ens.log_weights(i) += H.row(i).dot(v) - 0.5 * HR.row(i).dot(H.row(i)) * dt;
  }
  ens.normalize();
}

void bpf_reweight_pp(ParticleEnsemble& ens, const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                     double t) {
  check_dim(ens.dim() == obs.state_dim(), "bpf_reweight_pp: particle dimension");
  check_dim(dN.size() == obs.obs_dim(), "bpf_reweight_pp: dN length");
  RowMat H;
  obs.rate().eval_rows(ens.positions, t, H);
  Vec x(ens.dim());
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    double inc = 0.0;
    for (int j = 0; j < obs.obs_dim(); ++j) {
      inc -= H(i, j) * dt;
      if (dN(j) != 0) {
        x = ens.positions.row(i).transpose();
        const double lh = obs.rate().log_component(j, x, t);
        inc += std::isnan(lh) ? -std::numeric_limits<double>::infinity() : lh * dN(j);
      }
    }
    ens.log_weights(i) += inc;
  }
  ens.normalize();
}

void bootstrap_discrete_reweight(ParticleEnsemble& ens, const GaussianObsModel& obs, VecCRef dY,
                                 double dt, double t) {
  check_dim(ens.dim() == obs.state_dim(), "bootstrap_discrete_reweight: particle dimension");
  check_dim(dY.size() == obs.obs_dim(), "bootstrap_discrete_reweight: dY length");
  // Likelihood of y = dY / dt under N(h(X_i), Sigma_y / dt), up to a constant.
  const Vec y = dY / dt;
  const Mat precision = obs.noise_precision() * dt;
  RowMat H;
  obs.h().eval_rows(ens.positions, t, H);
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    const Vec r = y - H.row(i).transpose();
    ens.log_weights(i) += -0.5 * r.dot(precision * r);
  }
  ens.normalize();
}

void weight_sde_step(ParticleEnsemble& ens, const GaussianObsModel& obs, VecCRef dY, double dt,
                     Diagnostics* diag, double t) {
  check_dim(ens.dim() == obs.state_dim(), "weight_sde_step: particle dimension");
  check_dim(dY.size() == obs.obs_dim(), "weight_sde_step: dY length");
  RowMat H;
  obs.h().eval_rows(ens.positions, t, H);
  Vec w = ens.weights();
  const Vec hbar = H.transpose() * w;
  const Vec v = obs.noise_precision() * (dY - hbar * dt);
  const double base = hbar.dot(v);
  double removed = 0.0;
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    w(i) += w(i) * (H.row(i).dot(v) - base);
    if (w(i) < 0.0) {
      removed -= w(i);
      w(i) = 0.0;
    }
  }
  if (removed > 0.0 && diag) diag->record_clamp(removed, w.sum() + removed);
  set_from_linear_weights(ens, w);
}

void weight_sde_step(ParticleEnsemble& ens, const PointProcessObsModel& obs, IntVecCRef dN,
                     double dt, Diagnostics* diag, double t) {
  check_dim(ens.dim() == obs.state_dim(), "weight_sde_step: particle dimension");
  check_dim(dN.size() == obs.obs_dim(), "weight_sde_step: dN length");
  RowMat H;
  obs.rate().eval_rows(ens.positions, t, H);
  Vec w = ens.weights();
  const Vec hbar = H.transpose() * w;
  Vec scale(obs.obs_dim());
  for (int j = 0; j < obs.obs_dim(); ++j) {
    if (dN(j) != 0 && !(hbar(j) > 0.0)) throw NumericalError("weight_sde_step: event with zero expected rate");
    // (h - hbar) / hbar (dN - hbar dt) with the no-event case kept finite.
    scale(j) = dN(j) != 0 ? dN(j) / hbar(j) - dt : -dt;
  }
  double removed = 0.0;
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    double g = 0.0;
    for (int j = 0; j < obs.obs_dim(); ++j) g += (H(i, j) - hbar(j)) * scale(j);
    w(i) += w(i) * g;
    if (w(i) < 0.0) {
      removed -= w(i);
      w(i) = 0.0;
    }
  }
  if (removed > 0.0 && diag) diag->record_clamp(removed, w.sum() + removed);
  set_from_linear_weights(ens, w);
}

double ess(const ParticleEnsemble& ens) {
  const Vec w = ens.weights();
  return 1.0 / w.squaredNorm();
}

void resample(ParticleEnsemble& ens, ResampleSpec::Scheme scheme, Rng& rng) {
  const auto M = ens.size();
  const Vec w = ens.weights();
  const double total = w.sum();
  if (!(total > 0.0)) throw NumericalError("resample: all weights are zero");
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Sorted points in [0, 1): stratified for systematic, uniform order
  // statistics (normalised exponential spacings) for multinomial.
  Vec u(M);
  if (scheme == ResampleSpec::Scheme::systematic) {
    const double u0 = unif(rng);
    for (Eigen::Index i = 0; i < M; ++i) u(i) = (static_cast<double>(i) + u0) / static_cast<double>(M);
  } else {
    std::exponential_distribution<double> expo(1.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) {
      acc += expo(rng);
      u(i) = acc;
    }
    acc += expo(rng);
    u /= acc;
  }

  RowMat next(M, ens.dim());
  double cum = w(0) / total;
  Eigen::Index parent = 0;
  for (Eigen::Index i = 0; i < M; ++i) {
    while (u(i) >= cum && parent < M - 1) {
      ++parent;
      cum += w(parent) / total;
    }
    // Rounding can leave the last point just above the final cumulative sum
    // and land on a zero-weight tail; fall back to the last live parent.
    Eigen::Index chosen = parent;
    while (w(chosen) == 0.0 && chosen > 0) --chosen;
    next.row(i) = ens.positions.row(chosen);
  }
  ens.positions = std::move(next);
  ens.reset_weights();
}

bool maybe_resample(ParticleEnsemble& ens, const ResampleSpec& spec, Rng& rng) {
  spec.validate();
  if (ess(ens) >= spec.ess_threshold * ens.size()) return false;
  resample(ens, spec.scheme, rng);
  return true;
}

Mat fbpf_gain(const ParticleEnsemble& ens, const GaussianObsModel& obs, double t) {
  check_dim(ens.dim() == obs.state_dim(), "fbpf_gain: particle dimension");
  RowMat H;
  obs.h().eval_rows(ens.positions, t, H);
  const Eigen::RowVectorXd hbar = H.colwise().mean();
  const RowMat centered = H.rowwise() - hbar;
  return ens.positions.transpose() * centered / static_cast<double>(ens.size());
}

void fbpf_step(ParticleEnsemble& ens, const JumpDiffusionModel& model, const GaussianObsModel& obs,
               VecCRef dY, double dt, Rng& rng, double t) {
  check_dim(ens.dim() == model.dim && obs.state_dim() == model.dim, "fbpf_step: particle dimension");
  check_dim(dY.size() == obs.obs_dim(), "fbpf_step: dY length");
  if (model.has_jumps()) throw ModelError("fbpf_step: signal must not have jumps");
  if (!ens.is_uniform()) throw ModelError("fbpf_step: feedback particle filter requires uniform weights");
  const auto M = ens.size();

  RowMat H;
  obs.h().eval_rows(ens.positions, t, H);
  const Eigen::RowVectorXd hbar = H.colwise().mean();
  const Mat K = ens.positions.transpose() * (H.rowwise() - hbar) / static_cast<double>(M);
  const Mat gain = K * obs.noise_precision();

  // Innovation of every particle: dY - (h_i + hbar) dt / 2.
  RowMat innov = (-0.5 * dt) * (H.rowwise() + hbar);
  innov.rowwise() += dY.transpose();

  RowMat f;
  model.drift->eval_rows(ens.positions, t, f);
  const int d = model.diffusion->cols();
  RowMat z(M, d);
  fill_normal(z, rng);
  const double sqdt = std::sqrt(dt);
  RowMat next = ens.positions + f * dt;
  next.noalias() += innov * gain.transpose();
  if (model.diffusion->is_constant()) {
    const Mat G = (*model.diffusion)(ens.positions.row(0).transpose(), t);
    next.noalias() += sqdt * z * G.transpose();
  } else {
    Mat G(model.dim, d);
    for (Eigen::Index i = 0; i < M; ++i) {
      model.diffusion->eval(ens.positions.row(i).transpose(), t, G);
      next.row(i) += sqdt * (G * z.row(i).transpose()).transpose();
    }
  }
  ens.positions = std::move(next);
  check_finite_positions(ens, "fbpf_step");
}

Histogram weighted_histogram(const ParticleEnsemble& ens, double xmin, double xmax, int bins, int coord) {
  if (!(xmax > xmin) || bins <= 0) throw ModelError("weighted_histogram: invalid range or bin count");
  check_dim(coord >= 0 && coord < ens.dim(), "weighted_histogram: coordinate out of range");
  Histogram h;
  h.xmin = xmin;
  h.xmax = xmax;
  h.density = Vec::Zero(bins);
  const double width = (xmax - xmin) / bins;
  const Vec w = ens.weights();
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    const double x = ens.positions(i, coord);
    if (x < xmin || x >= xmax) {
      h.outside_mass += w(i);
      continue;
    }
    const int b = std::min(bins - 1, static_cast<int>((x - xmin) / width));
    h.density(b) += w(i);
  }
  h.density /= width;
  return h;
}

void write_ensemble_csv(const ParticleEnsemble& ens, std::ostream& os) {
  std::vector<std::string> header{"i"};
  for (int c = 0; c < ens.dim(); ++c) header.push_back("x_" + std::to_string(c));
  header.emplace_back("weight");
  CsvWriter csv(os, header);
  const Vec w = ens.weights();
  for (int i = 0; i < ens.size(); ++i) {
    csv << i;
    for (int c = 0; c < ens.dim(); ++c) csv << ens.positions(i, c);
    csv << w(i);
    csv.end_row();
  }
}

}  // namespace ctf
