#include <cmath>

#include <gtest/gtest.h>

#include "ctfilter/families.hpp"
#include "ctfilter/gaussian_approx.hpp"
#include "ctfilter/quadrature.hpp"
#include "ctfilter/simulate.hpp"

using namespace ctf;

namespace {

JumpDiffusionModel diffusion(VectorFnPtr drift, Mat G) {
  JumpDiffusionModel m;
  m.dim = static_cast<int>(G.rows());
  m.drift = std::move(drift);
  m.diffusion = make_constant_matrix(m.dim, std::move(G));
  m.initial = InitialDistribution::gaussian(Vec::Zero(m.dim), Mat::Identity(m.dim, m.dim));
  return m;
}

GaussianBelief scalar_belief(double m, double v) { return {Vec::Constant(1, m), Mat::Constant(1, 1, v)}; }

Eigen::VectorXi events(std::initializer_list<int> e) {
  Eigen::VectorXi v(static_cast<Eigen::Index>(e.size()));
  int i = 0;
  for (int x : e) v(i++) = x;
  return v;
}

}  // namespace

// -----------------------------------------------------------------------------
// EKBF

TEST(Ekbf, LinearModelEqualsKalmanBucy) {
  const Mat A{{0.0, 1.0}, {-2.0, -0.5}};
  const Mat B{{1.0, 0.3}};
  const Mat G{{0.3, 0.0}, {0.1, 0.5}};
  const Mat R = Mat::Constant(1, 1, 0.05);
  const auto model = diffusion(std::make_shared<LinearFn>(A, Vec::Zero(2)), G);
  const GaussianObsModel obs(std::make_shared<LinearFn>(B, Vec::Zero(1)), R);
  const LinearGaussianSystem sys{A, B, G * G.transpose(), R};

  const auto grid = TimeGrid::over(5.0, 1e-3);
  const auto path = simulate_jump_diffusion(model, grid, 3);
  const Mat dY = simulate_gaussian_obs(path.states, obs, grid, 4);
  const GaussianBelief init{Vec{{0.5, 0.0}}, Mat::Identity(2, 2)};
  const auto kb = run_kalman_bucy(sys, dY, grid.dt, init);
  const auto ek = run_ekbf(model, obs, dY, grid.dt, 0.0, init);
  double err = 0.0;
  for (int k = 0; k < grid.n_steps; ++k) {
    err = std::max(err, (kb[k].mean - ek[k].mean).cwiseAbs().maxCoeff());
    err = std::max(err, (kb[k].cov - ek[k].cov).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(err, 1e-10);
}

TEST(Ekbf, DoubleWellOriginIsUnstable) {
  const auto model = diffusion(std::make_shared<DoubleWellDrift>(1, 4.0), Mat::Constant(1, 1, 0.0));
  const GaussianObsModel obs(LinearFn::constant(1, Vec::Constant(1, 2.0)), Mat::Identity(1, 1));
  const double dt = 1e-3, S = 0.3;
  const auto out = ekbf_step(scalar_belief(0.0, S), model, obs, Vec::Constant(1, 0.7), dt);
  // F(0) = 4, so dSigma = 2 F Sigma dt.
  EXPECT_NEAR(out.cov(0, 0), S + 8.0 * S * dt, 1e-15);
  EXPECT_NEAR(model.drift->jacobian_at(Vec::Constant(1, 0.5))(0, 0), -12.0 * 0.25 + 4.0, 1e-15);
}

TEST(Ekbf, ConstantObservationIsIgnored) {
  const auto model = diffusion(std::make_shared<DoubleWellDrift>(1, 4.0), Mat::Constant(1, 1, 0.5));
  const GaussianObsModel obs(LinearFn::constant(1, Vec::Constant(1, 1.0)), Mat::Identity(1, 1) * 0.1);
  const double dt = 1e-2, mu = 0.4;
  for (double dY : {-3.0, 0.0, 5.0}) {
    const auto out = ekbf_step(scalar_belief(mu, 0.2), model, obs, Vec::Constant(1, dY), dt);
    EXPECT_NEAR(out.mean(0), mu - 4.0 * mu * (mu * mu - 1.0) * dt, 1e-15);
  }
}

TEST(Ekbf, MissingJacobianIsRejected) {
  const auto model = diffusion(make_vector_fn(1, 1, [](VecCRef x, double, VecRef o) { o = -x; }),
                               Mat::Identity(1, 1));
  const GaussianObsModel obs(std::make_shared<LinearFn>(Mat::Identity(1, 1), Vec::Zero(1)), Mat::Identity(1, 1));
  EXPECT_THROW(ekbf_step(scalar_belief(0.0, 1.0), model, obs, Vec::Zero(1), 1e-3), ModelError);
}

// -----------------------------------------------------------------------------
// Point-process EKBF

TEST(PpEkbf, EventMatrixZeroBranch) {
  const Mat S = pp_ekbf_event_matrix(Mat::Identity(2, 2), Mat::Zero(2, 2));
  EXPECT_EQ(S.norm(), 0.0);
}

TEST(PpEkbf, EventMatrixScalarBump) {
  for (double s : {0.05, 0.3, 1.0}) {
    for (double v : {1e-3, 0.1, 2.0}) {
      const Mat S = pp_ekbf_event_matrix(Mat::Constant(1, 1, v), Mat::Constant(1, 1, -1.0 / (s * s)));
      EXPECT_NEAR(S(0, 0), 1.0 / (v + s * s), 1e-12 / (v + s * s));
    }
  }
}

TEST(PpEkbf, EventMatrixMatchesDirectFormula) {
  const Mat P{{0.5, 0.1}, {0.1, 0.3}};
  const Mat L{{-4.0, 1.0}, {1.0, -2.0}};
  const Mat direct = (P - L.inverse()).inverse();
  EXPECT_LT((pp_ekbf_event_matrix(P, L) - direct).norm(), 1e-12);
}

TEST(PpEkbf, NearSingularEventMatrixFallsBack) {
  Diagnostics diag;
  // L Sigma = I exactly.
  const Mat S = pp_ekbf_event_matrix(Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 0.5), &diag);
  EXPECT_EQ(S.norm(), 0.0);
  EXPECT_EQ(diag.fallbacks, 1u);
  EXPECT_FALSE(diag.warnings.empty());
}

TEST(PpEkbf, BumpEventIsGaussianBayesUpdate) {
  const double s = 0.2, v = 0.5, c = 0.3;
  const auto model = diffusion(LinearFn::constant(1, Vec::Zero(1)), Mat::Zero(1, 1));
  const PointProcessObsModel obs(
      std::make_shared<GaussianBumpRate>(Vec::Constant(1, 50.0), Mat::Constant(1, 1, c), Vec::Constant(1, s)));
  // Vanishing dt isolates the event term: the posterior of a N(mu, v) prior
  // times a Gaussian likelihood of width s centred at c.
  const double mu = 0.1;
  const auto out = pp_ekbf_step(scalar_belief(mu, v), model, obs, events({1}), 1e-14);
  EXPECT_NEAR(out.cov(0, 0), v * s * s / (v + s * s), 1e-10);
  EXPECT_NEAR(out.mean(0), mu + v * (c - mu) / (s * s), 1e-10);
}

TEST(PpEkbf, ExponentialRateVarianceIgnoresEvents) {
  const auto model = diffusion(std::make_shared<DoubleWellDrift>(1, 1.0), Mat::Constant(1, 1, 0.5));
  const PointProcessObsModel obs(std::make_shared<ExponentialRate>(Vec::Constant(2, 5.0), Mat{{1.5}, {-0.7}}));
  const auto b = scalar_belief(0.3, 0.4);
  const auto quiet = pp_ekbf_step(b, model, obs, events({0, 0}), 1e-3);
  for (auto e : {events({1, 0}), events({0, 1}), events({1, 1})}) {
    const auto loud = pp_ekbf_step(b, model, obs, e, 1e-3);
    EXPECT_EQ(loud.cov(0, 0), quiet.cov(0, 0));
    EXPECT_NE(loud.mean(0), quiet.mean(0));
  }
}

TEST(PpEkbf, ConstantRateIsPurePrediction) {
  const Mat A{{-1.0, 0.5}, {0.0, -0.3}};
  const Mat G = Mat::Identity(2, 2) * 0.4;
  const auto model = diffusion(std::make_shared<LinearFn>(A, Vec::Zero(2)), G);
  const PointProcessObsModel obs(LinearFn::constant(2, Vec::Constant(3, 7.0)));
  const GaussianBelief b{Vec{{1.0, -1.0}}, Mat{{0.4, 0.1}, {0.1, 0.2}}};
  const double dt = 1e-3;
  const auto out = pp_ekbf_step(b, model, obs, events({0, 0, 0}), dt);
  const Mat expected = b.cov + (A * b.cov + b.cov * A.transpose() + G * G.transpose()) * dt;
  EXPECT_LT((out.cov - expected).norm(), 1e-15);
  EXPECT_LT((out.mean - (b.mean + A * b.mean * dt)).norm(), 1e-15);
}

TEST(PpEkbf, EventAtNonPositiveRateThrows) {
  const auto model = diffusion(LinearFn::constant(1, Vec::Zero(1)), Mat::Identity(1, 1));
  const PointProcessObsModel obs(std::make_shared<LinearFn>(Mat::Identity(1, 1), Vec::Zero(1)));
  EXPECT_THROW(pp_ekbf_step(scalar_belief(-1.0, 1.0), model, obs, events({1}), 1e-3), NumericalError);
}

// -----------------------------------------------------------------------------
// Assumed density filter

TEST(AdfPp, ExponentialRateVarianceIgnoresEvents) {
  const auto model = diffusion(std::make_shared<LinearFn>(Mat::Constant(1, 1, -1.0), Vec::Zero(1)),
                               Mat::Constant(1, 1, 0.5));
  const PointProcessObsModel obs(std::make_shared<ExponentialRate>(Vec::Constant(1, 4.0), Mat::Constant(1, 1, 1.3)));
  const GaussianClosureSpec closure;
  for (double v : {0.05, 0.5, 2.0}) {
    const auto b = scalar_belief(0.2, v);
    const auto quiet = adf_pp_step(b, model, obs, closure, events({0}), 1e-3);
    const auto loud = adf_pp_step(b, model, obs, closure, events({1}), 1e-3);
    EXPECT_NEAR(loud.cov(0, 0), quiet.cov(0, 0), 1e-13 * v);
    // The mean jumps by beta Sigma.
    EXPECT_NEAR(loud.mean(0) - quiet.mean(0), 1.3 * v, 1e-13);
  }
}

TEST(AdfPp, ConstantRateIsMomentMatchedPrediction) {
  const auto model = diffusion(std::make_shared<DoubleWellDrift>(1, 2.0), Mat::Constant(1, 1, 0.7));
  const PointProcessObsModel obs(LinearFn::constant(1, Vec::Constant(1, 3.0)));
  const double mu = 0.4, v = 0.3, dt = 1e-3;
  const auto out = adf_pp_step(scalar_belief(mu, v), model, obs, GaussianClosureSpec{}, events({1}), dt);
  // E[-2 X (X^2 - 1)] under N(mu, v).
  const double ef = -2.0 * (mu * mu * mu + 3.0 * mu * v - mu);
  EXPECT_NEAR(out.mean(0), mu + ef * dt, 1e-15);
}

TEST(AdfPp, LinearDriftReducesToKalmanPrediction) {
  const Mat A{{-1.0, 0.5}, {0.2, -0.3}};
  const Mat G = Mat::Identity(2, 2) * 0.4;
  const auto model = diffusion(std::make_shared<LinearFn>(A, Vec::Zero(2)), G);
  const PointProcessObsModel obs(LinearFn::constant(2, Vec::Constant(1, 2.0)));
  const GaussianBelief b{Vec{{1.0, -1.0}}, Mat{{0.4, 0.1}, {0.1, 0.2}}};
  const double dt = 1e-3;
  const auto out = adf_pp_step(b, model, obs, GaussianClosureSpec{}, events({0}), dt);
  const Mat expected = b.cov + (A * b.cov + b.cov * A.transpose() + G * G.transpose()) * dt;
  EXPECT_LT((out.cov - expected).norm(), 1e-14);
  EXPECT_LT((out.mean - (b.mean + A * b.mean * dt)).norm(), 1e-15);
}

TEST(AdfPp, AnalyticAndQuadratureClosuresAgreeOnBump) {
  const GaussianBumpRate bump(Vec{{50.0, 30.0}}, Mat{{-1.0, 0.8}}, Vec{{0.5, 0.4}});
  GaussianClosureSpec analytic, quad;
  quad.method = GaussianClosureSpec::Method::gauss_hermite;
  for (double mu : {-1.2, 0.0, 0.9}) {
    for (double v : {0.02, 0.1}) {
      GaussianMoments a, q;
      const Vec m = Vec::Constant(1, mu);
      const Mat c = Mat::Constant(1, 1, v);
      closure_moments(bump, m, c, true, analytic, a);
      closure_moments(bump, m, c, true, quad, q);
      EXPECT_LT((a.mean - q.mean).cwiseAbs().maxCoeff(), 1e-8);
      EXPECT_LT((a.cross_cov - q.cross_cov).cwiseAbs().maxCoeff(), 1e-8);
      for (int k = 0; k < 2; ++k) EXPECT_LT((a.second[k] - q.second[k]).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(AdfPp, SoftplusFallsBackToQuadrature) {
  const SoftplusRate rate(Vec::Constant(1, 10.0), Mat::Constant(1, 1, 2.0), Vec::Zero(1));
  Diagnostics diag;
  GaussianMoments m;
  closure_moments(rate, Vec::Zero(1), Mat::Constant(1, 1, 0.3), true, GaussianClosureSpec{}, m, &diag);
  EXPECT_EQ(diag.fallbacks, 1u);
  EXPECT_GT(m.mean(0), 10.0 * std::log(2.0));  // Jensen: softplus is convex
}

TEST(AdfPp, ClosureSpecValidation) {
  GaussianClosureSpec s;
  s.method = GaussianClosureSpec::Method::gauss_hermite;
  s.quad_order = 20;
  EXPECT_THROW(s.validate(), ModelError);
  s.quad_order = 3;
  EXPECT_THROW(s.validate(), ModelError);
  s.quad_order = 7;
  EXPECT_NO_THROW(s.validate());
}

TEST(AdfPp, CovarianceStaysPsdOnBumpScenario) {
  const auto model = diffusion(std::make_shared<DoubleWellDrift>(1, 4.0), Mat::Constant(1, 1, std::sqrt(2.0)));
  const PointProcessObsModel obs(
      std::make_shared<GaussianBumpRate>(Vec::Constant(2, 50.0), Mat{{-1.0, 1.0}}, Vec::Constant(2, 0.05)));
  auto sim = model;
  sim.initial = InitialDistribution::point(Vec::Constant(1, 1.0));
  const auto grid = TimeGrid::over(10.0, 1e-3);
  const auto path = simulate_jump_diffusion(sim, grid, 12);
  const IntMat dN = simulate_pp_obs(path.states, obs, grid, 13);
  Diagnostics diag;
  const auto traj = run_adf_pp(model, obs, GaussianClosureSpec{}, dN, grid.dt, 0.0, scalar_belief(0.0, 1.0), &diag);
  for (const auto& b : traj) {
    ASSERT_TRUE(std::isfinite(b.mean(0)));
    ASSERT_GE(b.cov(0, 0), 0.0);
  }
}
