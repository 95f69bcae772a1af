// Per-step cost of the main filters.
#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "ctfilter/exact_filters.hpp"
#include "ctfilter/families.hpp"
#include "ctfilter/gaussian_approx.hpp"
#include "ctfilter/particle.hpp"
#include "ctfilter/pde_oracle.hpp"

using namespace ctf;

namespace {

JumpDiffusionModel double_well() {
  JumpDiffusionModel m;
  m.dim = 1;
  m.drift = std::make_shared<DoubleWellDrift>(1, 4.0);
  m.diffusion = make_constant_matrix(1, Mat::Constant(1, 1, std::sqrt(2.0)));
  m.initial = InitialDistribution::gaussian(Vec::Constant(1, 1.0), Mat::Constant(1, 1, 0.1));
  return m;
}

GaussianObsModel identity_obs() {
  return GaussianObsModel(std::make_shared<LinearFn>(Mat::Identity(1, 1), Vec::Zero(1)), Mat::Constant(1, 1, 0.1));
}

void BM_HmmStep(benchmark::State& state) {
  const auto m = DiscreteHMMModel::binary(0.9, 0.8, 0.2);
  DiscreteBelief b{Vec{{0.5, 0.5}}};
  int y = 0;
  for (auto _ : state) {
    b = hmm_filter_step(b, m, y);
    y ^= 1;
    benchmark::DoNotOptimize(b.probs.data());
  }
}
BENCHMARK(BM_HmmStep);

void BM_KalmanBucyStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const LinearGaussianSystem sys{-Mat::Identity(n, n), Mat::Identity(n, n), Mat::Identity(n, n),
                                 Mat::Identity(n, n)};
  GaussianBelief b{Vec::Zero(n), Mat::Identity(n, n)};
  const Vec dY = Vec::Constant(n, 1e-3);
  for (auto _ : state) {
    b = kalman_bucy_step(b, sys, dY, 1e-3);
    benchmark::DoNotOptimize(b.cov.data());
  }
}
BENCHMARK(BM_KalmanBucyStep)->Arg(1)->Arg(4)->Arg(16);

void BM_EkbfStep(benchmark::State& state) {
  const auto m = double_well();
  const auto obs = identity_obs();
  GaussianBelief b{Vec::Constant(1, 1.0), Mat::Constant(1, 1, 0.1)};
  const Vec dY = Vec::Constant(1, 1e-3);
  for (auto _ : state) {
    b = ekbf_step(b, m, obs, dY, 1e-3);
    benchmark::DoNotOptimize(b.mean.data());
  }
}
BENCHMARK(BM_EkbfStep);

void BM_BpfStep(benchmark::State& state) {
  const auto m = double_well();
  const auto obs = identity_obs();
  Rng rng(1);
  auto ens = ParticleEnsemble::from_prior(m.initial, static_cast<int>(state.range(0)), rng);
  const ResampleSpec rs;
  const Vec dY = Vec::Constant(1, 1e-3);
  for (auto _ : state) {
    bpf_propagate(ens, m, 1e-3, rng);
    bpf_reweight_gaussian(ens, obs, dY, 1e-3);
    maybe_resample(ens, rs, rng);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BpfStep)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_FbpfStep(benchmark::State& state) {
  const auto m = double_well();
  const auto obs = identity_obs();
  Rng rng(2);
  auto ens = ParticleEnsemble::from_prior(m.initial, static_cast<int>(state.range(0)), rng);
  const Vec dY = Vec::Constant(1, 1e-3);
  for (auto _ : state) fbpf_step(ens, m, obs, dY, 1e-3, rng);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FbpfStep)->Arg(1000)->Arg(10000);

void BM_KushnerStep(benchmark::State& state) {
  const auto m = double_well();
  const auto obs = identity_obs();
  const int cells = static_cast<int>(state.range(0));
  const FokkerPlanckOperator op(m, -3.5, 3.5, cells);
  GridFilterOptions opts;
  opts.substeps = 0;
  GridDensity p = GridDensity::gaussian(-3.5, 3.5, cells, 1.0, 0.1);
  const Vec dY = Vec::Constant(1, 1e-3);
  for (auto _ : state) {
    p = kushner_step(p, op, obs, dY, 1e-3, opts);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_KushnerStep)->Arg(350)->Arg(700);

}  // namespace

BENCHMARK_MAIN();
