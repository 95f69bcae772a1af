#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ctfilter/families.hpp"
#include "ctfilter/model.hpp"
#include "generator_mc.hpp"

using namespace ctf;

namespace {

JumpDiffusionModel scalar_model(double drift, double diffusion, double jump, double rate) {
  JumpDiffusionModel m;
  m.dim = 1;
  m.drift = LinearFn::constant(1, Vec::Constant(1, drift));
  m.diffusion = make_constant_matrix(1, Mat::Constant(1, 1, diffusion));
  if (rate > 0.0 || jump != 0.0) {
    m.jump_amplitude = make_constant_matrix(1, Mat::Constant(1, 1, jump));
    m.jump_rate = LinearFn::constant(1, Vec::Constant(1, rate));
  }
  m.initial = InitialDistribution::point(Vec::Zero(1));
  return m;
}

ObservableFn square() {
  return {[](VecCRef x) { return x(0) * x(0); }, [](VecCRef x) { return Vec::Constant(1, 2.0 * x(0)); },
          [](VecCRef) { return Mat::Constant(1, 1, 2.0); }};
}

ObservableFn identity() {
  return {[](VecCRef x) { return x(0); }, [](VecCRef) { return Vec::Ones(1); },
          [](VecCRef) { return Mat::Zero(1, 1); }};
}

}  // namespace

// -----------------------------------------------------------------------------
// Markov chains

TEST(MarkovChain, ValidateRejectsBadGenerators) {
  MarkovChainModel m = MarkovChainModel::symmetric_two_state(0.5);
  EXPECT_NO_THROW(m.validate());

  MarkovChainModel bad_rows = m;
  bad_rows.generator(0, 0) = -0.4;
  EXPECT_THROW(bad_rows.validate(), ModelError);

  MarkovChainModel negative = m;
  negative.generator << 0.5, -0.5, 0.5, -0.5;
  EXPECT_THROW(negative.validate(), ModelError);

  MarkovChainModel bad_init = m;
  bad_init.initial_dist << 0.7, 0.4;
  EXPECT_THROW(bad_init.validate(), ModelError);
}

TEST(MarkovChain, GeneratorOfConstantIsZero) {
  MarkovChainModel m;
  m.generator.resize(3, 3);
  m.generator << -1.0, 0.4, 0.6, 0.2, -0.5, 0.3, 1.5, 0.5, -2.0;
  m.initial_dist = Vec::Constant(3, 1.0 / 3.0);
  m.validate();
  const Vec out = apply_generator(m, Vec::Constant(3, 4.2));
  EXPECT_LT(out.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MarkovChain, SymmetricTwoStateExample) {
  const auto m = MarkovChainModel::symmetric_two_state(0.5);
  const Vec out = apply_generator(m, Vec::Unit(2, 0));
  EXPECT_DOUBLE_EQ(out(0), -0.5);
  EXPECT_DOUBLE_EQ(out(1), 0.5);
}

TEST(MarkovChain, IndicatorPicksGeneratorColumn) {
  MarkovChainModel m;
  m.generator.resize(3, 3);
  m.generator << -1.0, 0.4, 0.6, 0.2, -0.5, 0.3, 1.5, 0.5, -2.0;
  m.initial_dist = Vec::Constant(3, 1.0 / 3.0);
  const Vec out = apply_generator(m, Vec::Unit(3, 2));
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(out(i), m.generator(i, 2));
}

TEST(MarkovChain, DimensionMismatchThrows) {
  const auto m = MarkovChainModel::symmetric_two_state(1.0);
  EXPECT_THROW(apply_generator(m, Vec::Zero(3)), DimensionError);
}

TEST(DiscreteHMM, BinaryModelIsColumnStochastic) {
  const auto m = DiscreteHMMModel::binary(0.9, 0.8, 0.2);
  EXPECT_NEAR(m.transition.col(0).sum(), 1.0, 1e-15);
  EXPECT_NEAR(m.transition.col(1).sum(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(m.transition(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(m.transition(1, 1), 0.8);
  EXPECT_THROW(DiscreteHMMModel::binary(1.2, 0.5, 0.1), ModelError);
}

// -----------------------------------------------------------------------------
// Jump-diffusion generator

TEST(JumpDiffusionGenerator, ConstantProcessHasZeroGenerator) {
  const auto m = scalar_model(0.0, 0.0, 0.0, 0.0);
  for (double x : {-1.0, 0.0, 2.5}) {
    EXPECT_DOUBLE_EQ(apply_generator(m, square(), Vec::Constant(1, x)), 0.0);
  }
}

TEST(JumpDiffusionGenerator, BrownianMotionOnSquare) {
  const auto m = scalar_model(0.0, 1.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(apply_generator(m, square(), Vec::Constant(1, 0.7)), 1.0);
}

TEST(JumpDiffusionGenerator, UnitJumpsOnIdentity) {
  const auto m = scalar_model(0.0, 0.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(apply_generator(m, identity(), Vec::Constant(1, -0.3)), 1.0);
}

TEST(JumpDiffusionGenerator, FiniteDifferenceFallbackMatchesAnalytic) {
  JumpDiffusionModel m;
  m.dim = 2;
  Mat A(2, 2);
  A << -1.0, 0.5, 0.2, -0.3;
  m.drift = std::make_shared<LinearFn>(A, Vec::Zero(2));
  Mat G(2, 2);
  G << 0.8, 0.0, 0.3, 0.5;
  m.diffusion = make_constant_matrix(2, G);
  m.initial = InitialDistribution::point(Vec::Zero(2));
  const ObservableFn analytic{
      [](VecCRef x) { return std::sin(x(0)) * x(1) * x(1); },
      [](VecCRef x) { return Vec{{std::cos(x(0)) * x(1) * x(1), 2.0 * std::sin(x(0)) * x(1)}}; },
      [](VecCRef x) {
        Mat H(2, 2);
        H << -std::sin(x(0)) * x(1) * x(1), 2.0 * std::cos(x(0)) * x(1), 2.0 * std::cos(x(0)) * x(1),
            2.0 * std::sin(x(0));
        return H;
      }};
  const ObservableFn numeric{analytic.value, {}, {}};
  const Vec x{{0.4, -1.3}};
  EXPECT_NEAR(apply_generator(m, numeric, x), apply_generator(m, analytic, x), 1e-5);
}

TEST(JumpDiffusionGenerator, LinearInTestFunction) {
  JumpDiffusionModel m = scalar_model(0.0, 0.7, 0.5, 0.0);
  m.drift = std::make_shared<DoubleWellDrift>(1, 4.0);
  m.jump_rate = std::make_shared<ExponentialRate>(Vec::Constant(1, 2.0), Mat::Constant(1, 1, 0.3));
  const ObservableFn a{[](VecCRef x) { return std::cos(x(0)); },
                       [](VecCRef x) { return Vec::Constant(1, -std::sin(x(0))); },
                       [](VecCRef x) { return Mat::Constant(1, 1, -std::cos(x(0))); }};
  const ObservableFn b = square();
  const double ca = 1.7, cb = -0.6;
  const ObservableFn combo{
      [&](VecCRef x) { return ca * a.value(x) + cb * b.value(x); },
      [&](VecCRef x) -> Vec { return ca * a.gradient(x) + cb * b.gradient(x); },
      [&](VecCRef x) -> Mat { return ca * a.hessian(x) + cb * b.hessian(x); }};
  for (double x : {-1.5, -0.2, 0.0, 0.9, 2.0}) {
    const Vec p = Vec::Constant(1, x);
    const double lhs = apply_generator(m, combo, p);
    const double rhs = ca * apply_generator(m, a, p) + cb * apply_generator(m, b, p);
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(JumpDiffusionGenerator, MatchesMonteCarloTimeDerivative) {
  JumpDiffusionModel m;
  m.dim = 1;
  m.drift = std::make_shared<DoubleWellDrift>(1, 1.0);
  m.diffusion = make_constant_matrix(1, Mat::Constant(1, 1, 0.8));
  m.initial = InitialDistribution::gaussian(Vec::Constant(1, 0.3), Mat::Constant(1, 1, 0.25));
  const ObservableFn phi{[](VecCRef x) { return std::exp(-x(0) * x(0)); },
                         [](VecCRef x) { return Vec::Constant(1, -2.0 * x(0) * std::exp(-x(0) * x(0))); },
                         [](VecCRef x) {
                           return Mat::Constant(1, 1, (4.0 * x(0) * x(0) - 2.0) * std::exp(-x(0) * x(0)));
                         }};
  const auto r = testing_support::generator_duality(m, phi, 20000, 1e-4, 17);
  EXPECT_LT(std::abs(r.diff), 3.0 * r.stderr_ + 1e-12) << "derivative " << r.derivative << " generator "
                                                      << r.generator;
}

// -----------------------------------------------------------------------------
// Validation of models and observables

TEST(JumpDiffusionModel, ValidateRejectsNegativeRate) {
  auto m = scalar_model(0.0, 1.0, 1.0, 1.0);
  m.jump_rate = std::make_shared<LinearFn>(Mat::Ones(1, 1), Vec::Zero(1));
  const std::vector<Vec> probes{Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
  EXPECT_THROW(m.validate(probes), ModelError);
}

TEST(JumpDiffusionModel, ValidateRequiresBothJumpParts) {
  auto m = scalar_model(0.0, 1.0, 0.0, 0.0);
  m.jump_rate = LinearFn::constant(1, Vec::Ones(1));
  EXPECT_THROW(m.validate(), ModelError);
}

TEST(ObservableFn, DerivativeCheckCatchesWrongGradient) {
  ObservableFn bad{[](VecCRef x) { return x(0) * x(0); }, [](VecCRef x) { return Vec::Constant(1, 3.0 * x(0)); },
                   {}};
  const std::vector<Vec> probes{Vec::Constant(1, 1.0)};
  EXPECT_THROW(bad.validate_derivatives(probes), ModelError);
  EXPECT_NO_THROW(square().validate_derivatives(probes));
}

TEST(InitialDistribution, GaussianSamplesHaveRequestedMoments) {
  Mat cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  const auto prior = InitialDistribution::gaussian(Vec{{1.0, -2.0}}, cov);
  Rng rng(5);
  const int n = 40000;
  Mat xs(2, n);
  for (int i = 0; i < n; ++i) xs.col(i) = prior.sample(rng);
  const Vec mean = xs.rowwise().mean();
  const Mat centered = xs.colwise() - mean;
  const Mat emp = centered * centered.transpose() / (n - 1);
  EXPECT_NEAR(mean(0), 1.0, 3.0 * std::sqrt(1.0 / n));
  EXPECT_NEAR(mean(1), -2.0, 3.0 * std::sqrt(0.5 / n));
  EXPECT_NEAR(emp(0, 1), 0.3, 0.03);
  EXPECT_NEAR(prior.density(Vec{{1.0, -2.0}}), 1.0 / (2.0 * M_PI * std::sqrt(cov.determinant())), 1e-12);
}

TEST(InitialDistribution, CustomPriorHasNoMoments) {
  const auto prior = InitialDistribution::custom(1, [](Rng&) { return Vec::Constant(1, 3.0); });
  Rng rng(1);
  EXPECT_DOUBLE_EQ(prior.sample(rng)(0), 3.0);
  EXPECT_THROW(prior.mean(), ModelError);
  EXPECT_THROW(prior.density(Vec::Zero(1)), ModelError);
}

TEST(ObservationModels, RejectInvalidNoiseAndRates) {
  auto h = std::make_shared<LinearFn>(Mat::Ones(1, 1), Vec::Zero(1));
  EXPECT_THROW(GaussianObsModel(h, Mat::Constant(1, 1, -1.0)), ModelError);
  EXPECT_THROW(GaussianObsModel(h, Mat::Identity(2, 2)), DimensionError);
  const GaussianObsModel ok(h, Mat::Constant(1, 1, 0.1));
  EXPECT_DOUBLE_EQ(ok.noise_precision()(0, 0), 10.0);

  PointProcessObsModel pp(h);
  const std::vector<Vec> probes{Vec::Constant(1, -1.0)};
  EXPECT_THROW(pp.validate(probes), ModelError);
  EXPECT_THROW(PointProcessObsModel(h, 0.0), ModelError);
}
