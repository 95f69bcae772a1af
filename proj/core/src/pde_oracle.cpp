#include "ctfilter/pde_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "ctfilter/io.hpp"

namespace ctf {

namespace {

// B(z) = z / (e^z - 1), the Bernoulli function of the Scharfetter-Gummel flux.
double bernoulli_fn(double z) {
  if (std::abs(z) < 1e-10) return 1.0 - 0.5 * z;
  return z / std::expm1(z);
}

void check_dt(double dt, const char* what) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ModelError(std::string(what) + ": dt must be positive");
}

void clamp_and_record(Vec& p, Diagnostics* diag, const char* what) {
  if (!p.allFinite()) throw NumericalError(std::string(what) + ": non-finite density");
  double removed = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) < 0.0) {
      removed -= p(i);
      p(i) = 0.0;
    }
  }
  if (removed > 0.0 && diag) diag->record_clamp(removed, p.sum() + removed);
}

void renormalize(Vec& p, double cell, const char* what) {
  const double mass = p.sum() * cell;
  if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericalError(std::string(what) + ": density lost all mass");
  p /= mass;
}

// Gaussian-observation factor applied to cell values p with observation
// values H (l x n). `cell` is the quadrature weight of one cell.
void gaussian_update(Vec& p, double cell, const Mat& H, const Mat& R_inv, VecCRef dY, double dt,
                     ObsUpdate mode, bool normalized, Diagnostics* diag, const char* what) {
  check_dim(dY.size() == H.rows(), "grid filter: dY length");
  const Vec v = R_inv * dY;
  const Mat RH = R_inv * H;
  const auto n = p.size();
  if (normalized) {
    const double mass = p.sum() * cell;
    if (!(mass > 0.0)) throw NumericalError(std::string(what) + ": density lost all mass");
    if (mode == ObsUpdate::linearized) {
      const Vec hbar = H * p * (cell / mass);
      const Vec w = R_inv * (dY - hbar * dt);
      const double base = hbar.dot(w);
      for (Eigen::Index i = 0; i < n; ++i) p(i) *= 1.0 + H.col(i).dot(w) - base;
      clamp_and_record(p, diag, what);
    } else {
      Vec e(n);
      for (Eigen::Index i = 0; i < n; ++i) e(i) = H.col(i).dot(v) - 0.5 * H.col(i).dot(RH.col(i)) * dt;
      const double top = e.maxCoeff();
      for (Eigen::Index i = 0; i < n; ++i) p(i) *= std::exp(e(i) - top);
    }
    renormalize(p, cell, what);
    return;
  }
  if (mode == ObsUpdate::linearized) {
    for (Eigen::Index i = 0; i < n; ++i) p(i) *= 1.0 + H.col(i).dot(v);
    clamp_and_record(p, diag, what);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) p(i) *= std::exp(H.col(i).dot(v) - 0.5 * H.col(i).dot(RH.col(i)) * dt);
  }
}

// Point-process factor; rates (l x n). `reference` > 0 selects the
// unnormalised update relative to that rate.
void pp_update(Vec& p, double cell, const Mat& rates, IntVecCRef dN, double dt, ObsUpdate mode,
               double reference, Diagnostics* diag, const char* what) {
  check_dim(dN.size() == rates.rows(), "grid filter: dN length");
  const auto n = p.size();
  const auto l = rates.rows();
  const bool normalized = reference <= 0.0;
  if (mode == ObsUpdate::linearized) {
    Vec factor = Vec::Ones(n);
    if (normalized) {
      const double mass = p.sum() * cell;
      if (!(mass > 0.0)) throw NumericalError(std::string(what) + ": density lost all mass");
      for (Eigen::Index j = 0; j < l; ++j) {
        const double hbar = rates.row(j).dot(p) * cell / mass;
        if (dN(j) != 0 && !(hbar > 0.0)) throw NumericalError(std::string(what) + ": event with zero predicted rate");
        const double innov = dN(j) != 0 ? dN(j) / hbar - dt : -dt;
        factor.array() *= 1.0 + (rates.row(j).transpose().array() - hbar) * innov;
      }
    } else {
      for (Eigen::Index j = 0; j < l; ++j) {
        factor.array() *= 1.0 + (rates.row(j).transpose().array() / reference - 1.0) * (dN(j) - reference * dt);
      }
    }
    p.array() *= factor.array();
    clamp_and_record(p, diag, what);
  } else {
    Vec logf = Vec::Zero(n);
    for (Eigen::Index j = 0; j < l; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double h = rates(j, i);
        if (dN(j) != 0) {
          logf(i) += h > 0.0 ? dN(j) * std::log(normalized ? h : h / reference)
                             : -std::numeric_limits<double>::infinity();
        }
        logf(i) -= normalized ? h * dt : (h - reference) * dt;
      }
    }
    double top = 0.0;
    if (normalized) {
      top = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (p(i) > 0.0) top = std::max(top, logf(i));
      }
      if (!std::isfinite(top)) throw NumericalError(std::string(what) + ": event with zero predicted rate");
    }
    for (Eigen::Index i = 0; i < n; ++i) p(i) = p(i) > 0.0 ? p(i) * std::exp(logf(i) - top) : 0.0;
  }
  if (normalized) renormalize(p, cell, what);
}

void master_equation_predict(Vec& p, const MarkovChainModel& model, double dt, int substeps) {
  const int m = std::max(1, substeps);
  const double h = dt / m;
  const double max_rate = (-model.generator.diagonal()).maxCoeff();
  if (max_rate * h > 1.0) throw StabilityError("master equation step: dt exceeds 1 / max exit rate");
  const Mat At = model.generator.transpose();
  for (int s = 0; s < m; ++s) p += At * p * h;
}

void check_grid_match(const GridDensity& dens, const FokkerPlanckOperator& op) {
  check_dim(dens.n_cells() == op.n_cells() && dens.xmin == op.xmin() && dens.xmax == op.xmax(),
            "grid filter: density and operator grids differ");
}

}  // namespace

// ---------------------------------------------------------------------------
// GridDensity

Vec GridDensity::centers() const {
  Vec c(n_cells());
  for (int i = 0; i < n_cells(); ++i) c(i) = center(i);
  return c;
}

void GridDensity::normalize() { renormalize(values, dx(), "GridDensity"); }

double GridDensity::expectation(const std::function<double(double)>& fn) const {
  double acc = 0.0;
  for (int i = 0; i < n_cells(); ++i) acc += fn(center(i)) * values(i);
  return acc * dx() / mass();
}

double GridDensity::mean() const {
  return expectation([](double x) { return x; });
}

double GridDensity::variance() const {
  const double m = mean();
  return expectation([m](double x) { return (x - m) * (x - m); });
}

void GridDensity::validate() const {
  if (!(xmax > xmin) || values.size() < 2) throw ModelError("GridDensity: invalid grid");
  if (!values.allFinite() || (values.array() < 0.0).any()) {
    throw ModelError("GridDensity: values must be finite and nonnegative");
  }
}

GridDensity GridDensity::from_density(double xmin, double xmax, int n_cells,
                                      const std::function<double(double)>& density) {
  if (!(xmax > xmin) || n_cells < 2) throw ModelError("GridDensity: invalid grid");
  GridDensity g{xmin, xmax, Vec(n_cells)};
  for (int i = 0; i < n_cells; ++i) g.values(i) = density(g.center(i));
  g.validate();
  g.normalize();
  return g;
}

GridDensity GridDensity::gaussian(double xmin, double xmax, int n_cells, double mean, double var) {
  if (var < 0.0) throw ModelError("GridDensity: negative variance");
  GridDensity g{xmin, xmax, Vec::Zero(n_cells)};
  if (var == 0.0 || std::sqrt(var) < 0.5 * g.dx()) {
    const int i = std::clamp(static_cast<int>(std::floor((mean - xmin) / g.dx())), 0, n_cells - 1);
    g.values(i) = 1.0;
    g.normalize();
    return g;
  }
  return from_density(xmin, xmax, n_cells,
                      [=](double x) { return std::exp(-0.5 * (x - mean) * (x - mean) / var); });
}

// ---------------------------------------------------------------------------
// FokkerPlanckOperator

FokkerPlanckOperator::FokkerPlanckOperator(const JumpDiffusionModel& model, double xmin, double xmax,
                                           int n_cells, double t, Diagnostics* diag)
    : n_cells_(n_cells), xmin_(xmin), xmax_(xmax), dx_((xmax - xmin) / n_cells) {
  if (model.dim != 1) throw ModelError("FokkerPlanckOperator: only one-dimensional models are supported");
  if (!(xmax > xmin) || n_cells < 3) throw ModelError("FokkerPlanckOperator: invalid grid");
  if (!model.drift || !model.diffusion) throw ModelError("FokkerPlanckOperator: drift and diffusion are required");
  auto eval_f = [&](double x) { return (*model.drift)(Vec::Constant(1, x), t)(0); };
  auto eval_d = [&](double x) {
    const Mat G = (*model.diffusion)(Vec::Constant(1, x), t);
    return 0.5 * (G * G.transpose())(0, 0);
  };

  right_.resize(n_cells - 1);
  left_.resize(n_cells - 1);
  Vec d_center(n_cells);
  for (int i = 0; i < n_cells; ++i) d_center(i) = eval_d(xmin + (i + 0.5) * dx_);
  for (int i = 0; i < n_cells - 1; ++i) {
    const double xf = xmin + (i + 1) * dx_;
    const double D = eval_d(xf);
    const double v = eval_f(xf) - (d_center(i + 1) - d_center(i)) / dx_;
    if (!std::isfinite(D) || !std::isfinite(v)) throw NumericalError("FokkerPlanckOperator: non-finite coefficients");
    if (D <= 0.0) {
      right_(i) = std::max(v, 0.0);
      left_(i) = std::max(-v, 0.0);
    } else {
      const double pe = v * dx_ / D;
      right_(i) = D / dx_ * bernoulli_fn(-pe);
      left_(i) = D / dx_ * bernoulli_fn(pe);
    }
  }

  const int k = model.n_jump_channels();
  jump_rate_ = Vec::Zero(static_cast<Eigen::Index>(k) * n_cells);
  if (k > 0) {
    if (!model.jump_amplitude->is_constant()) {
      throw ModelError("FokkerPlanckOperator: jump amplitudes must be constant");
    }
    const Mat J = (*model.jump_amplitude)(Vec::Zero(1), t);
    for (int c = 0; c < k; ++c) {
      const double cells = J(0, c) / dx_;
      const long s = std::lround(cells);
      if (std::abs(cells - static_cast<double>(s)) > 0.1 && diag) {
        diag->warn("FokkerPlanckOperator: jump amplitude is not a multiple of the cell width");
      }
      shifts_.push_back(static_cast<int>(s));
      for (int i = 0; i < n_cells; ++i) {
        const double lam = (*model.jump_rate)(Vec::Constant(1, xmin + (i + 0.5) * dx_), t)(c);
        if (!(lam >= 0.0)) throw ModelError("FokkerPlanckOperator: negative jump rate");
        jump_rate_(static_cast<Eigen::Index>(c) * n_cells + i) = lam;
      }
    }
  }

  double max_out = 0.0;
  for (int i = 0; i < n_cells; ++i) {
    double out = 0.0;
    if (i < n_cells - 1) out += right_(i) / dx_;
    if (i > 0) out += left_(i - 1) / dx_;
    for (int c = 0; c < k; ++c) {
      const int target = i + shifts_[c];
      if (shifts_[c] != 0 && target >= 0 && target < n_cells) {
        out += jump_rate_(static_cast<Eigen::Index>(c) * n_cells + i);
      }
    }
    max_out = std::max(max_out, out);
  }
  max_dt_ = max_out > 0.0 ? 1.0 / max_out : std::numeric_limits<double>::infinity();
}

int FokkerPlanckOperator::substeps_for(double dt) const {
  if (!std::isfinite(max_dt_)) return 1;
  return std::max(1, static_cast<int>(std::ceil(dt / max_dt_ * (1.0 - 1e-12))));
}

void FokkerPlanckOperator::step(Vec& p, double dt) const {
  check_dim(p.size() == n_cells_, "FokkerPlanckOperator: density length");
  check_dt(dt, "FokkerPlanckOperator");
  if (dt > max_dt_ * (1.0 + 1e-12)) {
    throw StabilityError("fokker_planck_step: dt " + format_double(dt) + " exceeds the stable limit " +
                         format_double(max_dt_) + "; use substeps");
  }
  const double r = dt / dx_;
  const Vec old = p;
  for (int i = 0; i < n_cells_ - 1; ++i) {
    const double flux = right_(i) * old(i) - left_(i) * old(i + 1);
    p(i) -= r * flux;
    p(i + 1) += r * flux;
  }
  for (std::size_t c = 0; c < shifts_.size(); ++c) {
    const int s = shifts_[c];
    if (s == 0) continue;
    const double* lam = jump_rate_.data() + c * static_cast<std::size_t>(n_cells_);
    for (int i = 0; i < n_cells_; ++i) {
      const int target = i + s;
      if (target < 0 || target >= n_cells_) continue;
      const double moved = dt * lam[i] * old(i);
      p(i) -= moved;
      p(target) += moved;
    }
  }
}

void FokkerPlanckOperator::advance(Vec& p, double dt, int substeps) const {
  check_dt(dt, "FokkerPlanckOperator");
  const int m = substeps > 0 ? substeps : substeps_for(dt);
  const double h = dt / m;
  for (int s = 0; s < m; ++s) step(p, h);
}

GridDensity fokker_planck_step(const GridDensity& dens, const JumpDiffusionModel& model, double dt,
                               Diagnostics* diag, double t) {
  const FokkerPlanckOperator op(model, dens.xmin, dens.xmax, dens.n_cells(), t, diag);
  GridDensity out = dens;
  op.step(out.values, dt);
  clamp_and_record(out.values, diag, "fokker_planck_step");
  out.normalize();
  return out;
}

// ---------------------------------------------------------------------------
// Filters on the grid

Mat grid_values(const VectorFn& fn, const GridDensity& dens, double t) {
  check_dim(fn.in_dim() == 1, "grid_values: function must take a scalar state");
  const RowMat x = dens.centers();
  RowMat out;
  fn.eval_rows(x, t, out);
  return out.transpose();
}

GridDensity kushner_step(const GridDensity& dens, const FokkerPlanckOperator& op,
                         const GaussianObsModel& obs, VecCRef dY, double dt,
                         const GridFilterOptions& opts, Diagnostics* diag, double t) {
  check_grid_match(dens, op);
  check_dt(dt, "kushner_step");
  GridDensity out = dens;
  op.advance(out.values, dt, opts.substeps);
  const Mat H = grid_values(obs.h(), dens, t + dt);
  gaussian_update(out.values, dens.dx(), H, obs.noise_precision(), dY, dt, opts.update, true, diag,
                  "kushner_step");
  return out;
}

GridDensity kushner_step(const GridDensity& dens, const JumpDiffusionModel& model,
                         const GaussianObsModel& obs, VecCRef dY, double dt,
                         const GridFilterOptions& opts, Diagnostics* diag, double t) {
  const FokkerPlanckOperator op(model, dens.xmin, dens.xmax, dens.n_cells(), t, diag);
  return kushner_step(dens, op, obs, dY, dt, opts, diag, t);
}

GridDensity zakai_step(const GridDensity& dens, const FokkerPlanckOperator& op,
                       const GaussianObsModel& obs, VecCRef dY, double dt,
                       const GridFilterOptions& opts, Diagnostics* diag, double t) {
  check_grid_match(dens, op);
  check_dt(dt, "zakai_step");
  GridDensity out = dens;
  op.advance(out.values, dt, opts.substeps);
  const Mat H = grid_values(obs.h(), dens, t + dt);
  gaussian_update(out.values, dens.dx(), H, obs.noise_precision(), dY, dt, opts.update, false, diag,
                  "zakai_step");
  return out;
}

GridDensity zakai_step(const GridDensity& dens, const JumpDiffusionModel& model,
                       const GaussianObsModel& obs, VecCRef dY, double dt,
                       const GridFilterOptions& opts, Diagnostics* diag, double t) {
  const FokkerPlanckOperator op(model, dens.xmin, dens.xmax, dens.n_cells(), t, diag);
  return zakai_step(dens, op, obs, dY, dt, opts, diag, t);
}

GridDensity pp_kushner_step(const GridDensity& dens, const FokkerPlanckOperator& op,
                            const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                            const GridFilterOptions& opts, Diagnostics* diag, double t) {
  check_grid_match(dens, op);
  check_dt(dt, "pp_kushner_step");
  GridDensity out = dens;
  op.advance(out.values, dt, opts.substeps);
  const Mat rates = grid_values(obs.rate(), dens, t + dt);
  pp_update(out.values, dens.dx(), rates, dN, dt, opts.update, 0.0, diag, "pp_kushner_step");
  return out;
}

GridDensity pp_kushner_step(const GridDensity& dens, const JumpDiffusionModel& model,
                            const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                            const GridFilterOptions& opts, Diagnostics* diag, double t) {
  const FokkerPlanckOperator op(model, dens.xmin, dens.xmax, dens.n_cells(), t, diag);
  return pp_kushner_step(dens, op, obs, dN, dt, opts, diag, t);
}

GridDensity pp_zakai_step(const GridDensity& dens, const FokkerPlanckOperator& op,
                          const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                          const GridFilterOptions& opts, Diagnostics* diag, double t) {
  check_grid_match(dens, op);
  check_dt(dt, "pp_zakai_step");
  GridDensity out = dens;
  op.advance(out.values, dt, opts.substeps);
  const Mat rates = grid_values(obs.rate(), dens, t + dt);
  pp_update(out.values, dens.dx(), rates, dN, dt, opts.update, obs.reference_rate(), diag,
            "pp_zakai_step");
  return out;
}

DiscreteBelief kushner_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                            const Mat& h_matrix, const Mat& noise_cov, VecCRef dY, double dt,
                            const GridFilterOptions& opts, Diagnostics* diag) {
  check_dim(belief.probs.size() == model.n_states() && h_matrix.cols() == model.n_states(),
            "kushner_step: finite-state shapes");
  check_dt(dt, "kushner_step");
  Vec p = belief.probs;
  master_equation_predict(p, model, dt, opts.substeps);
  clamp_and_record(p, diag, "kushner_step");
  Eigen::LLT<Mat> llt(noise_cov);
  if (llt.info() != Eigen::Success) throw ModelError("kushner_step: noise covariance not positive definite");
  const Mat R_inv = llt.solve(Mat::Identity(noise_cov.rows(), noise_cov.cols()));
  gaussian_update(p, 1.0, h_matrix, R_inv, dY, dt, opts.update, true, diag, "kushner_step");
  return {p};
}

DiscreteBelief pp_kushner_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                               const Mat& rates, IntVecCRef dN, double dt,
                               const GridFilterOptions& opts, Diagnostics* diag) {
  check_dim(belief.probs.size() == model.n_states() && rates.cols() == model.n_states(),
            "pp_kushner_step: finite-state shapes");
  check_dt(dt, "pp_kushner_step");
  Vec p = belief.probs;
  master_equation_predict(p, model, dt, opts.substeps);
  clamp_and_record(p, diag, "pp_kushner_step");
  pp_update(p, 1.0, rates, dN, dt, opts.update, 0.0, diag, "pp_kushner_step");
  return {p};
}

void write_density_csv(const GridDensity& dens, std::ostream& os) {
  CsvWriter csv(os, {"x", "p"});
  for (int i = 0; i < dens.n_cells(); ++i) {
    csv << dens.center(i) << dens.values(i);
    csv.end_row();
  }
}

}  // namespace ctf
