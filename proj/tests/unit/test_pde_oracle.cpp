#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ctfilter/exact_filters.hpp"
#include "ctfilter/families.hpp"
#include "ctfilter/pde_oracle.hpp"
#include "ctfilter/simulate.hpp"
#include "oracles.hpp"

using namespace ctf;

namespace {

JumpDiffusionModel scalar_model(VectorFnPtr drift, double g) {
  JumpDiffusionModel m;
  m.dim = 1;
  m.drift = std::move(drift);
  m.diffusion = make_constant_matrix(1, Mat::Constant(1, 1, g));
  m.initial = InitialDistribution::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  return m;
}

VectorFnPtr linear_fn(double a) { return std::make_shared<LinearFn>(Mat::Constant(1, 1, a), Vec::Zero(1)); }

VectorFnPtr constant_fn(double c) { return LinearFn::constant(1, Vec::Constant(1, c)); }

double l1_to(const GridDensity& d, const std::function<double(double)>& pdf) {
  double s = 0.0;
  for (int i = 0; i < d.n_cells(); ++i) s += std::abs(d.values(i) - pdf(d.center(i))) * d.dx();
  return s;
}

double l1(const GridDensity& a, const GridDensity& b) { return (a.values - b.values).cwiseAbs().sum() * a.dx(); }

GridDensity relax(const JumpDiffusionModel& m, GridDensity d, double horizon, double dt) {
  const FokkerPlanckOperator op(m, d.xmin, d.xmax, d.n_cells());
  const int n = static_cast<int>(std::lround(horizon / dt));
  for (int k = 0; k < n; ++k) op.advance(d.values, dt);
  d.normalize();
  return d;
}

Eigen::VectorXi events(std::initializer_list<int> e) {
  Eigen::VectorXi v(static_cast<Eigen::Index>(e.size()));
  int i = 0;
  for (int x : e) v(i++) = x;
  return v;
}

}  // namespace

// -----------------------------------------------------------------------------
// Fokker-Planck

TEST(FokkerPlanck, NoDynamicsIsIdentity) {
  const auto d = GridDensity::gaussian(-3, 3, 120, 0.4, 0.3);
  const auto out = fokker_planck_step(d, scalar_model(constant_fn(0.0), 0.0), 0.01);
  EXPECT_LT((out.values - d.values).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(FokkerPlanck, OrnsteinUhlenbeckStationaryLaw) {
  const auto m = scalar_model(linear_fn(-1.0), 1.0);
  const auto d = relax(m, GridDensity::gaussian(-6, 6, 800, 1.0, 0.2), 10.0, 1e-3);
  EXPECT_LE(l1_to(d, [](double x) { return oracle::normal_pdf(x, 0.0, 0.5); }), 1e-3);
}

TEST(FokkerPlanck, GridRefinementConverges) {
  // The exponentially fitted flux reproduces the OU stationary profile to
  // rounding on any grid, so refinement is measured on the transient from
  // N(1, 0.1) at t = 1.
  const auto m = scalar_model(linear_fn(-1.0), 1.0);
  const double mu = std::exp(-1.0), var = 0.1 * std::exp(-2.0) + 0.5 * (1.0 - std::exp(-2.0));
  auto err = [&](int cells) {
    auto d = GridDensity::gaussian(-4, 4, cells, 1.0, 0.1);
    const FokkerPlanckOperator op(m, -4, 4, cells);
    op.advance(d.values, 1.0);
    return l1_to(d, [&](double x) { return oracle::normal_pdf(x, mu, var); });
  };
  const double coarse = err(80), fine = err(160);
  EXPECT_GE(coarse / fine, 3.0);
}

TEST(FokkerPlanck, DoubleWellStationaryLaw) {
  const auto m = scalar_model(std::make_shared<DoubleWellDrift>(1, 4.0), std::sqrt(2.0));
  const auto d = relax(m, GridDensity::gaussian(-3, 3, 600, 0.0, 0.5), 8.0, 1e-3);
  const auto gibbs = GridDensity::from_density(-3, 3, 600, [](double x) {
    return oracle::gibbs_density(x, [](double y) { return 4.0 * (y * y * y * y / 4.0 - y * y / 2.0); }, 2.0);
  });
  EXPECT_LE(l1(d, gibbs), 5e-3);
  int argmax_right = 300;
  for (int i = 300; i < 600; ++i)
    if (d.values(i) > d.values(argmax_right)) argmax_right = i;
  EXPECT_LE(std::abs(d.center(argmax_right) - 1.0), d.dx());
  EXPECT_LT((d.values - d.values.reverse()).cwiseAbs().maxCoeff(), 1e-10 * d.values.maxCoeff());
  EXPECT_LT(d.values(300), d.values(argmax_right));
}

TEST(FokkerPlanck, MassIsConservedWithoutRenormalisation) {
  const auto m = scalar_model(std::make_shared<DoubleWellDrift>(1, 4.0), std::sqrt(2.0));
  const FokkerPlanckOperator op(m, -3, 3, 300);
  auto d = GridDensity::gaussian(-3, 3, 300, 0.5, 0.4);
  for (int k = 0; k < 200; ++k) {
    const double before = d.values.sum() * d.dx();
    op.step(d.values, op.max_stable_dt());
    EXPECT_LE(std::abs(d.values.sum() * d.dx() - before), 1e-10);
  }
  EXPECT_GE(d.values.minCoeff(), 0.0);
}

TEST(FokkerPlanck, JumpsMoveMassByWholeCells) {
  JumpDiffusionModel m = scalar_model(constant_fn(0.0), 0.0);
  m.jump_amplitude = make_constant_matrix(1, Mat::Constant(1, 1, 0.5));
  m.jump_rate = constant_fn(2.0);
  const FokkerPlanckOperator op(m, -2, 2, 40);  // dx = 0.1, shift = 5 cells
  GridDensity d{-2, 2, Vec::Zero(40)};
  d.values(10) = 1.0 / d.dx();
  const double dt = 0.01;
  op.step(d.values, dt);
  EXPECT_NEAR(d.values(10) * d.dx(), 1.0 - 2.0 * dt, 1e-14);
  EXPECT_NEAR(d.values(15) * d.dx(), 2.0 * dt, 1e-14);
  EXPECT_NEAR(d.mass(), 1.0, 1e-14);
}

TEST(FokkerPlanck, UnstableStepIsRejected) {
  const auto m = scalar_model(linear_fn(-1.0), 1.0);
  const FokkerPlanckOperator op(m, -6, 6, 800);
  Vec p = GridDensity::gaussian(-6, 6, 800, 0.0, 1.0).values;
  EXPECT_THROW(op.step(p, 10.0 * op.max_stable_dt()), StabilityError);
  EXPECT_GE(op.substeps_for(10.0 * op.max_stable_dt()), 10);
  EXPECT_NO_THROW(op.advance(p, 10.0 * op.max_stable_dt()));
}

// -----------------------------------------------------------------------------
// Kushner and Zakai

TEST(Kushner, ConstantObservationEqualsFokkerPlanck) {
  const auto m = scalar_model(std::make_shared<DoubleWellDrift>(1, 1.0), 1.0);
  const auto d = GridDensity::gaussian(-3, 3, 200, 0.2, 0.5);
  const double dt = 2e-4;
  const GaussianObsModel obs(constant_fn(1.5), Mat::Identity(1, 1));
  const auto a = kushner_step(d, m, obs, Vec::Constant(1, 0.4), dt);
  const auto b = fokker_planck_step(d, m, dt);
  EXPECT_LT((a.values - b.values).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Kushner, TracksKalmanBucyOnLinearModel) {
  const auto m = scalar_model(linear_fn(-1.0), 1.0);
  const GaussianObsModel obs(linear_fn(1.0), Mat::Constant(1, 1, 0.5));
  const LinearGaussianSystem sys{Mat::Constant(1, 1, -1.0), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Constant(1, 1, 0.5)};
  const auto grid = TimeGrid::over(1.0, 1e-4);
  auto sim = m;
  const auto path = simulate_jump_diffusion(sim, grid, 3);
  const Mat dY = simulate_gaussian_obs(path.states, obs, grid, 4);
  const auto kb = run_kalman_bucy(sys, dY, grid.dt, GaussianBelief{Vec::Zero(1), Mat::Ones(1, 1)});
  const FokkerPlanckOperator op(m, -6, 6, 800);
  auto d = GridDensity::gaussian(-6, 6, 800, 0.0, 1.0);
  Diagnostics diag;
  double mean_err = 0.0, var_err = 0.0;
  for (int k = 0; k < grid.n_steps; ++k) {
    d = kushner_step(d, op, obs, dY.row(k).transpose(), grid.dt, {ObsUpdate::exponential, 0}, &diag);
    mean_err = std::max(mean_err, std::abs(d.mean() - kb[k].mean(0)) / std::sqrt(kb[k].cov(0, 0)));
    var_err = std::max(var_err, std::abs(d.variance() - kb[k].cov(0, 0)) / kb[k].cov(0, 0));
  }
  EXPECT_LE(mean_err, 1e-3);
  EXPECT_LE(var_err, 1e-3);
  EXPECT_EQ(diag.clamp_events, 0u);
}

TEST(Kushner, TwoAtomEmbeddingMatchesWonham) {
  const auto m = MarkovChainModel::symmetric_two_state(1.5);
  const Mat h{{0.0, 2.0}};
  const Mat R = Mat::Identity(1, 1) * 0.5;
  const DiscreteBelief p{Vec{{0.3, 0.7}}};
  auto gap = [&](double dt) {
    const Vec dY = Vec::Constant(1, 1.2 * dt);
    const auto a = kushner_step(p, m, h, R, dY, dt, {ObsUpdate::linearized, 1});
    const auto b = wonham_step(p, m, h, R, dY, dt);
    return (a.probs - b.probs).cwiseAbs().maxCoeff();
  };
  const double g1 = gap(1e-3), g2 = gap(5e-4);
  EXPECT_LT(g1, 1e-5);
  EXPECT_NEAR(g1 / g2, 4.0, 0.4);
}

TEST(Zakai, ZeroObservationKeepsMass) {
  const auto m = scalar_model(linear_fn(-1.0), 1.0);
  const GaussianObsModel obs(constant_fn(0.0), Mat::Identity(1, 1));
  auto d = GridDensity::gaussian(-5, 5, 200, 0.0, 1.0);
  for (int k = 0; k < 100; ++k) d = zakai_step(d, m, obs, Vec::Constant(1, 0.3), 1e-3, {ObsUpdate::linearized, 0});
  EXPECT_NEAR(d.mass(), 1.0, 1e-12);
}

TEST(Zakai, MassTracksNormalisingConstant) {
  const auto m = scalar_model(linear_fn(-1.0), 1.0);
  const GaussianObsModel obs(linear_fn(1.0), Mat::Constant(1, 1, 0.5));
  const FokkerPlanckOperator op(m, -5, 5, 200);
  auto d = GridDensity::gaussian(-5, 5, 200, 0.5, 0.3);
  const Vec dY = Vec::Constant(1, 2e-3);
  const double dt = 1e-4;
  auto pred = d;
  op.advance(pred.values, dt);
  const double hbar = pred.mean();
  const auto out = zakai_step(d, op, obs, dY, dt, {ObsUpdate::linearized, 0});
  EXPECT_NEAR(std::log(out.mass() / d.mass()), std::log1p(hbar / 0.5 * dY(0)), 1e-12);
  EXPECT_NEAR(std::log(out.mass() / d.mass()), hbar / 0.5 * dY(0), 1e-5);
}

TEST(Zakai, NormalisedPathConvergesToKushner) {
  // The linearized Kushner factor carries the -<h> dt Ito correction that the
  // Zakai factor leaves to dY^2, so per step they differ by a multiple of
  // dY^2 - Sigma_y dt and the path gap shrinks like sqrt(dt).
  const auto m = scalar_model(linear_fn(-1.0), 1.0);
  const GaussianObsModel obs(linear_fn(1.0), Mat::Constant(1, 1, 0.5));
  const auto fine = TimeGrid::over(1.0, 1e-4);
  const auto path = simulate_jump_diffusion(m, fine, 5);
  const Mat dY_fine = simulate_gaussian_obs(path.states, obs, fine, 6);
  const FokkerPlanckOperator op(m, -5, 5, 200);
  auto gap = [&](int stride, ObsUpdate update) {
    const double dt = fine.dt * stride;
    auto kd = GridDensity::gaussian(-5, 5, 200, 0.0, 1.0);
    auto zd = kd;
    double sum = 0.0;
    for (int k = 0; k < fine.n_steps / stride; ++k) {
      const Vec dY = dY_fine.middleRows(k * stride, stride).colwise().sum().transpose();
      kd = kushner_step(kd, op, obs, dY, dt, {update, 0});
      zd = zakai_step(zd, op, obs, dY, dt, {update, 0});
      auto zn = zd;
      zn.normalize();
      sum += l1(kd, zn) * dt;
    }
    return sum;
  };
  const double ratio = gap(10, ObsUpdate::linearized) / gap(1, ObsUpdate::linearized);
  EXPECT_GT(ratio, 2.2);
  EXPECT_LT(ratio, 4.5);
  // The exact likelihood-ratio factors differ only by normalisation.
  EXPECT_LT(gap(10, ObsUpdate::exponential), 1e-12);
}

// -----------------------------------------------------------------------------
// Point-process filters

TEST(PointProcessKushner, ConstantRateEqualsFokkerPlanck) {
  const auto m = scalar_model(std::make_shared<DoubleWellDrift>(1, 1.0), 1.0);
  const auto d = GridDensity::gaussian(-3, 3, 200, 0.2, 0.5);
  const PointProcessObsModel obs(constant_fn(4.0));
  const auto a = pp_kushner_step(d, m, obs, events({1}), 2e-4);
  const auto b = fokker_planck_step(d, m, 2e-4);
  EXPECT_LT((a.values - b.values).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(PointProcessKushner, TwoAtomEmbeddingMatchesFiniteStateFilter) {
  const auto m = MarkovChainModel::symmetric_two_state(1.0);
  const Mat rates{{30.0, 10.0}, {10.0, 30.0}};
  const DiscreteBelief p{Vec{{0.4, 0.6}}};
  auto gap = [&](double dt, const Eigen::VectorXi& dN) {
    const auto a = pp_kushner_step(p, m, rates, dN, dt, {ObsUpdate::linearized, 1});
    const auto b = pp_finite_state_step(p, m, rates, dN, dt);
    return (a.probs - b.probs).cwiseAbs().maxCoeff();
  };
  const double q1 = gap(1e-3, events({0, 0})), q2 = gap(5e-4, events({0, 0}));
  EXPECT_LT(q1, 1e-4);
  EXPECT_NEAR(q1 / q2, 4.0, 0.4);
  // With an event the two orderings of prediction and jump differ at O(dt).
  EXPECT_LT(gap(1e-3, events({1, 0})), 1e-2);
  EXPECT_LT(gap(1e-4, events({1, 0})), 1e-3);
}

TEST(PointProcessKushner, EventShiftsMassTowardFiringSensor) {
  const auto m = scalar_model(std::make_shared<DoubleWellDrift>(1, 4.0), std::sqrt(2.0));
  const PointProcessObsModel obs(
      std::make_shared<GaussianBumpRate>(Vec::Constant(2, 50.0), Mat{{-1.0, 1.0}}, Vec::Constant(2, 0.05)));
  const FokkerPlanckOperator op(m, -3, 3, 600);
  const auto prior = GridDensity::from_density(-3, 3, 600, [](double x) {
    return std::exp(-(x * x * x * x - 2 * x * x));
  });
  auto right_mass = [](const GridDensity& d) { return d.expectation([](double x) { return x > 0 ? 1.0 : 0.0; }); };
  const GridFilterOptions opts{ObsUpdate::linearized, 0};
  const auto after_right = pp_kushner_step(prior, op, obs, events({0, 1}), 1e-3, opts);
  const auto after_left = pp_kushner_step(prior, op, obs, events({1, 0}), 1e-3, opts);
  EXPECT_GT(right_mass(after_right), 0.9);
  EXPECT_LT(right_mass(after_left), 0.1);
  EXPECT_NEAR(after_right.mass(), 1.0, 1e-10);
}

TEST(PointProcessZakai, ReferenceRateSilenceKeepsMass) {
  const auto m = scalar_model(linear_fn(-1.0), 1.0);
  const PointProcessObsModel obs(constant_fn(2.0), 2.0);
  const FokkerPlanckOperator op(m, -5, 5, 200);
  auto d = GridDensity::gaussian(-5, 5, 200, 0.0, 1.0);
  for (int k = 0; k < 50; ++k) d = pp_zakai_step(d, op, obs, events({0}), 1e-3, {ObsUpdate::linearized, 0});
  EXPECT_NEAR(d.mass(), 1.0, 1e-12);
}

TEST(GridDensity, MomentsOfGaussianPrior) {
  const auto d = GridDensity::gaussian(-8, 8, 1600, 0.7, 0.9);
  EXPECT_NEAR(d.mass(), 1.0, 1e-12);
  EXPECT_NEAR(d.mean(), 0.7, 1e-6);
  EXPECT_NEAR(d.variance(), 0.9, 1e-4);
  const auto point = GridDensity::gaussian(-1, 1, 20, 0.33, 0.0);
  EXPECT_NEAR(point.values.maxCoeff() * point.dx(), 1.0, 1e-14);
}
