#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ctfilter/exact_filters.hpp"
#include "ctfilter/simulate.hpp"
#include "oracles.hpp"

using namespace ctf;

namespace {

DiscreteBelief belief(std::initializer_list<double> p) {
  DiscreteBelief b;
  b.probs = Vec(static_cast<Eigen::Index>(p.size()));
  int i = 0;
  for (double v : p) b.probs(i++) = v;
  return b;
}

LinearGaussianSystem scalar_system(double a, double b, double q, double r) {
  return {Mat::Constant(1, 1, a), Mat::Constant(1, 1, b), Mat::Constant(1, 1, q), Mat::Constant(1, 1, r)};
}

GaussianBelief scalar_belief(double m, double v) { return {Vec::Constant(1, m), Mat::Constant(1, 1, v)}; }

Mat click_rates(double r_plus, double r_minus) { return Mat{{r_plus, r_minus}, {r_minus, r_plus}}; }

}  // namespace

// -----------------------------------------------------------------------------
// Discrete-time HMM

TEST(HmmFilter, UninformativeChannelOnlyPropagates) {
  const auto m = DiscreteHMMModel::binary(0.8, 0.7, 0.5);
  const auto p = belief({0.3, 0.7});
  const auto out = hmm_filter_step(p, m, 1);
  const Vec expected = m.transition * p.probs;
  EXPECT_LT((out.probs - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HmmFilter, HandComputedBayesStep) {
  const auto m = DiscreteHMMModel::binary(0.9, 0.9, 0.1);
  const auto out = hmm_filter_step(belief({0.5, 0.5}), m, 1);
  EXPECT_NEAR(out.probs(0), 0.1, 1e-15);
  EXPECT_NEAR(out.probs(1), 0.9, 1e-15);
}

TEST(HmmFilter, MatchesPathEnumeration) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = DiscreteHMMModel::binary(u(rng), u(rng), u(rng) * 0.5);
    const double p0 = u(rng);
    const auto init = belief({p0, 1.0 - p0});
    std::vector<int> ys;
    for (int n = 0; n < 3 + rep % 6; ++n) ys.push_back(static_cast<int>(rng() % 2));
    const auto traj = run_hmm_filter(m, ys, init);
    const Vec oracle_post = oracle::hmm_enumeration(m.transition, m.emission, init.probs, ys);
    EXPECT_LT((traj.back().probs - oracle_post).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(HmmFilter, ThreeStatesMatchEnumeration) {
  DiscreteHMMModel m;
  m.transition = Mat{{0.7, 0.1, 0.3}, {0.2, 0.8, 0.3}, {0.1, 0.1, 0.4}};
  m.emission = Mat{{0.6, 0.2, 0.1}, {0.3, 0.3, 0.2}, {0.1, 0.5, 0.7}};
  m.initial_dist = Vec{{0.2, 0.3, 0.5}};
  const std::vector<int> ys{2, 0, 1, 1, 2};
  const auto traj = run_hmm_filter(m, ys, DiscreteBelief{m.initial_dist});
  const Vec expected = oracle::hmm_enumeration(m.transition, m.emission, m.initial_dist, ys);
  EXPECT_LT((traj.back().probs - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HmmFilter, ImpossibleObservationThrows) {
  const auto m = DiscreteHMMModel::binary(1.0, 1.0, 0.0);
  EXPECT_THROW(hmm_filter_step(belief({1.0, 0.0}), m, 1), NumericalError);
}

TEST(MapEstimate, TiesGoToStateZero) {
  EXPECT_EQ(map_estimate(belief({0.5, 0.5})), 0);
  EXPECT_EQ(map_estimate(belief({0.4999, 0.5001})), 1);
}

// -----------------------------------------------------------------------------
// Discrete Kalman

TEST(KalmanDiscrete, NoObservationIsPurePrediction) {
  LinearGaussianSystem sys{Mat{{0.9, 0.1}, {0.0, 0.8}}, Mat::Zero(1, 2), Mat::Identity(2, 2) * 0.1,
                           Mat::Identity(1, 1)};
  GaussianBelief b{Vec{{1.0, -1.0}}, Mat{{1.0, 0.2}, {0.2, 0.5}}};
  const auto out = kalman_discrete_step(b, sys, Vec::Constant(1, 3.0));
  EXPECT_LT((out.mean - sys.A * b.mean).norm(), 1e-15);
  const Mat pred = sys.A * b.cov * sys.A.transpose() + sys.Sigma_x;
  EXPECT_LT((out.cov - pred).norm(), 1e-15);
}

TEST(KalmanDiscrete, HugeNoiseGivesPrediction) {
  const auto sys = scalar_system(0.5, 1.0, 0.2, 1e12);
  const auto out = kalman_discrete_step(scalar_belief(2.0, 1.0), sys, Vec::Constant(1, 100.0));
  EXPECT_NEAR(out.mean(0), 1.0, 1e-6);
  EXPECT_NEAR(out.cov(0, 0), 0.45, 0.45e-6);
}

TEST(KalmanDiscrete, ProductOfGaussians) {
  const auto sys = scalar_system(1.0, 1.0, 0.0, 1.0);
  const auto out = kalman_discrete_step(scalar_belief(0.0, 1.0), sys, Vec::Constant(1, 2.0));
  EXPECT_NEAR(out.mean(0), 1.0, 1e-15);
  EXPECT_NEAR(out.cov(0, 0), 0.5, 1e-15);
}

// -----------------------------------------------------------------------------
// Wonham

TEST(Wonham, IdenticalColumnsGiveMasterEquation) {
  MarkovChainModel m;
  m.generator = Mat{{-1.0, 0.6, 0.4}, {0.5, -0.5, 0.0}, {0.2, 0.3, -0.5}};
  m.initial_dist = Vec::Constant(3, 1.0 / 3.0);
  const Mat h = Mat::Constant(2, 3, 0.7);
  const auto p = belief({0.2, 0.5, 0.3});
  const double dt = 1e-2;
  const auto out = wonham_step(p, m, h, Mat::Identity(2, 2), Vec{{0.3, -0.1}}, dt);
  const Vec expected = p.probs + m.generator.transpose() * p.probs * dt;
  EXPECT_LT((out.probs - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Wonham, StrongSignalTracksState) {
  const auto m = MarkovChainModel::symmetric_two_state(0.5);
  const auto grid = TimeGrid::over(100.0, 1e-3);
  const Mat h{{0.0, 1.0}};
  const Mat R = Mat::Constant(1, 1, 0.01);
  auto path = simulate_markov_chain(m, grid, 17);
  path.dY = simulate_gaussian_obs(path.labels, h, R, grid, 18);
  Diagnostics diag;
  const auto traj = run_wonham(m, h, R, path.dY, grid.dt, DiscreteBelief::uniform(2), &diag);
  int hits = 0;
  for (int k = 0; k < grid.n_steps; ++k) {
    traj[k].validate();
    hits += map_estimate(traj[k]) == path.labels[k];
  }
  EXPECT_GT(hits / double(grid.n_steps), 0.9);
}

TEST(Wonham, VanishingSignalRecoversPrior) {
  const auto m = MarkovChainModel::symmetric_two_state(1.0);
  const auto grid = TimeGrid::over(5.0, 1e-3);
  const auto path = simulate_markov_chain(m, grid, 1);
  const Mat noise = simulate_gaussian_obs(std::vector<int>(grid.n_steps, 0), Mat::Zero(1, 2),
                                          Mat::Identity(1, 1), grid, 2);
  const auto init = belief({0.9, 0.1});
  // Prior path: Euler master equation.
  std::vector<Vec> prior;
  Vec p = init.probs;
  for (int k = 0; k < grid.n_steps; ++k) {
    p += m.generator.transpose() * p * grid.dt;
    prior.push_back(p);
  }
  double last = 1e300;
  for (double c : {1.0, 0.1, 0.01, 0.001}) {
    const Mat h{{0.0, c}};
    Mat dY = noise;
    for (int k = 0; k < grid.n_steps; ++k) dY(k, 0) += h(0, path.labels[k]) * grid.dt;
    const auto traj = run_wonham(m, h, Mat::Identity(1, 1), dY, grid.dt, init);
    double sup = 0.0;
    for (int k = 0; k < grid.n_steps; ++k) sup = std::max(sup, (traj[k].probs - prior[k]).cwiseAbs().maxCoeff());
    EXPECT_LT(sup, last);
    last = sup;
  }
  EXPECT_LT(last, 1e-3);
}

TEST(Wonham, ClampIsRecorded) {
  const auto m = MarkovChainModel::symmetric_two_state(0.1);
  Diagnostics diag;
  const auto out = wonham_step(belief({0.999, 0.001}), m, Mat{{0.0, 10.0}}, Mat::Identity(1, 1) * 0.01,
                               Vec::Constant(1, -50.0), 0.1, &diag);
  out.validate();
  EXPECT_EQ(diag.clamp_events, 1u);
  EXPECT_GT(diag.clamped_mass, 0.0);
}

// -----------------------------------------------------------------------------
// Kalman-Bucy

TEST(KalmanBucy, StationaryRiccatiRoot) {
  const auto sys = scalar_system(-1.0, 1.0, 1.0, 1.0);
  const auto grid = TimeGrid::over(20.0, 1e-3);
  const Mat dY = Mat::Zero(grid.n_steps, 1);
  const auto traj = run_kalman_bucy(sys, dY, grid.dt, scalar_belief(0.0, 1.0));
  EXPECT_NEAR(traj.back().cov(0, 0), std::sqrt(2.0) - 1.0, 1e-6);
  EXPECT_NEAR(traj.back().cov(0, 0), oracle::riccati_root(-1.0, 1.0, 1.0, 1.0), 1e-6);
}

TEST(KalmanBucy, LyapunovGrowthWithoutObservations) {
  const auto sys = scalar_system(0.0, 0.0, 1.0, 1.0);
  const auto grid = TimeGrid::over(3.0, 1e-3);
  const auto traj = run_kalman_bucy(sys, Mat::Zero(grid.n_steps, 1), grid.dt, scalar_belief(0.0, 0.5));
  EXPECT_NEAR(traj.back().cov(0, 0), 3.5, 1e-9);
}

TEST(KalmanBucy, VarianceIsObservationIndependent) {
  LinearGaussianSystem sys{Mat{{0.0, 1.0}, {-1.0, -0.3}}, Mat{{1.0, 0.0}}, Mat::Identity(2, 2) * 0.2,
                           Mat::Identity(1, 1) * 0.05};
  const auto grid = TimeGrid::over(2.0, 1e-3);
  Rng rng(3);
  std::normal_distribution<double> n01;
  Mat dY1(grid.n_steps, 1), dY2(grid.n_steps, 1);
  for (int k = 0; k < grid.n_steps; ++k) {
    dY1(k, 0) = n01(rng) * 0.03;
    dY2(k, 0) = n01(rng) * 0.03 + 0.01;
  }
  const GaussianBelief init{Vec::Zero(2), Mat::Identity(2, 2)};
  Diagnostics diag;
  const auto a = run_kalman_bucy(sys, dY1, grid.dt, init, &diag);
  const auto b = run_kalman_bucy(sys, dY2, grid.dt, init, &diag);
  for (int k = 0; k < grid.n_steps; ++k) {
    ASSERT_TRUE((a[k].cov.array() == b[k].cov.array()).all());
    ASSERT_EQ(a[k].cov, a[k].cov.transpose());
  }
  EXPECT_EQ(diag.clamp_events, 0u);
  EXPECT_GT((a.back().mean - b.back().mean).norm(), 0.0);
}

// -----------------------------------------------------------------------------
// Finite-state point process and log-odds

TEST(PointProcessFiniteState, EqualRatesGiveMasterEquation) {
  MarkovChainModel m;
  m.generator = Mat{{-2.0, 2.0}, {0.5, -0.5}};
  m.initial_dist = Vec{{0.5, 0.5}};
  const auto p = belief({0.3, 0.7});
  const double dt = 1e-2;
  const auto out = pp_finite_state_step(p, m, Mat::Constant(2, 2, 5.0), Eigen::Vector2i(1, 0), dt);
  const Vec expected = p.probs + m.generator.transpose() * p.probs * dt;
  EXPECT_LT((out.probs - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PointProcessFiniteState, SymmetricSilenceKeepsEqualOdds) {
  const auto m = MarkovChainModel::symmetric_two_state(1.0);
  for (auto scheme : {Scheme::euler, Scheme::split}) {
    const auto out = pp_finite_state_step(belief({0.5, 0.5}), m, click_rates(20.0, 5.0), Eigen::Vector2i(0, 0),
                                          1e-3, scheme);
    EXPECT_NEAR(out.probs(0), 0.5, 1e-15);
  }
}

TEST(PointProcessFiniteState, EventWithZeroRateThrows) {
  const auto m = MarkovChainModel::symmetric_two_state(1.0);
  EXPECT_THROW(pp_finite_state_step(belief({1.0, 0.0}), m, Mat{{0.0, 3.0}}, Eigen::Matrix<int, 1, 1>(1), 1e-3),
               NumericalError);
}

TEST(LogOdds, Examples) {
  EXPECT_EQ(log_odds_step(0.0, 2.0, 20.0, 5.0, 0, 0, 1e-3), 0.0);
  EXPECT_EQ(log_odds_step(0.0, 2.0, 20.0, 5.0, 0, 0, 1e-3, Scheme::split), 0.0);
  EXPECT_NEAR(log_odds_step(0.3, 0.0, 20.0, 5.0, 1, 0, 1e-3), 0.3 + std::log(4.0), 1e-15);
  EXPECT_NEAR(log_odds_step(0.3, 0.0, 20.0, 5.0, 0, 1, 1e-3), 0.3 - std::log(4.0), 1e-15);
  const double a = 1.5, alpha = 0.8, dt = 1e-3;
  EXPECT_NEAR(log_odds_step(alpha, a, 20.0, 5.0, 0, 0, dt), alpha - 2 * a * std::sinh(alpha) * dt, 1e-15);
}

TEST(LogOdds, ClickTaskPathwiseConsistency) {
  const double a = 1.0, r_plus = 30.0, r_minus = 10.0;
  const auto m = MarkovChainModel::symmetric_two_state(a);
  const auto grid = TimeGrid::over(10.0, 1e-4);
  const Mat rates = click_rates(r_plus, r_minus);
  auto path = simulate_markov_chain(m, grid, 41);
  path.dN = simulate_pp_obs(path.labels, rates, grid, 42);
  const auto traj = run_pp_finite_state(m, rates, path.dN, grid.dt, DiscreteBelief::uniform(2), Scheme::split);
  double alpha = 0.0, sup = 0.0;
  for (int k = 0; k < grid.n_steps; ++k) {
    alpha = log_odds_step(alpha, a, r_plus, r_minus, path.dN(k, 0), path.dN(k, 1), grid.dt, Scheme::split);
    sup = std::max(sup, std::abs(alpha - log_odds(traj[k])));
  }
  EXPECT_GT(path.dN.sum(), 100);
  EXPECT_LE(sup, 1e-6);
}

TEST(LogOdds, AsymmetricRatesConsistency) {
  MarkovChainModel m;
  m.generator = Mat{{-0.7, 0.7}, {1.3, -1.3}};
  m.initial_dist = Vec{{0.5, 0.5}};
  const Mat rates{{25.0, 4.0}, {6.0, 12.0}, {3.0, 3.5}};
  const auto grid = TimeGrid::over(10.0, 1e-4);
  auto path = simulate_markov_chain(m, grid, 5);
  path.dN = simulate_pp_obs(path.labels, rates, grid, 6);
  const auto traj = run_pp_finite_state(m, rates, path.dN, grid.dt, DiscreteBelief::uniform(2), Scheme::split);
  double alpha = 0.0, sup = 0.0;
  for (int k = 0; k < grid.n_steps; ++k) {
    alpha = log_odds_step(alpha, m, rates, path.dN.row(k).transpose(), grid.dt, Scheme::split);
    sup = std::max(sup, std::abs(alpha - log_odds(traj[k])));
  }
  EXPECT_LE(sup, 1e-6);
}

TEST(LogOdds, EulerDiscrepancyIsFirstOrder) {
  // Fixed click times so both resolutions see the same record.
  const double a = 1.0, r_plus = 30.0, r_minus = 10.0;
  const auto m = MarkovChainModel::symmetric_two_state(a);
  const Mat rates = click_rates(r_plus, r_minus);
  const std::vector<std::pair<double, int>> clicks{{0.31, 0}, {0.52, 0}, {0.9, 1}, {1.27, 0}, {1.6, 1}, {1.83, 1}};
  auto sup_gap = [&](double dt) {
    const auto grid = TimeGrid::over(2.0, dt);
    IntMat dN = IntMat::Zero(grid.n_steps, 2);
    for (auto [t, ch] : clicks) dN(static_cast<int>(std::floor(t / dt)), ch) = 1;
    const auto traj = run_pp_finite_state(m, rates, dN, dt, DiscreteBelief::uniform(2), Scheme::euler);
    double alpha = 0.0, sup = 0.0;
    for (int k = 0; k < grid.n_steps; ++k) {
      alpha = log_odds_step(alpha, a, r_plus, r_minus, dN(k, 0), dN(k, 1), dt, Scheme::euler);
      sup = std::max(sup, std::abs(alpha - log_odds(traj[k])));
    }
    return sup;
  };
  const double g1 = sup_gap(1e-3), g2 = sup_gap(5e-4);
  EXPECT_GT(g1, 1e-6);
  EXPECT_NEAR(g1 / g2, 2.0, 0.3);
}

TEST(PointProcessFiniteState, BeliefStaysOnSimplex) {
  MarkovChainModel m;
  m.generator = Mat{{-1.0, 0.5, 0.5}, {0.2, -0.4, 0.2}, {1.0, 1.0, -2.0}};
  m.initial_dist = Vec::Constant(3, 1.0 / 3.0);
  const Mat rates{{40.0, 1.0, 5.0}, {2.0, 30.0, 9.0}};
  const auto grid = TimeGrid::over(5.0, 1e-3);
  auto path = simulate_markov_chain(m, grid, 9);
  path.dN = simulate_pp_obs(path.labels, rates, grid, 10);
  for (auto scheme : {Scheme::euler, Scheme::split}) {
    const auto traj = run_pp_finite_state(m, rates, path.dN, grid.dt, DiscreteBelief::uniform(3), scheme);
    for (const auto& b : traj) ASSERT_NO_THROW(b.validate());
  }
}
