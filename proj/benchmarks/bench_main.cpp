#include <benchmark/benchmark.h>

#include "snsld/chain.hpp"
#include "snsld/empirical.hpp"
#include "snsld/galerkin_model.hpp"
#include "snsld/rng.hpp"
#include "snsld/sde.hpp"
#include "snsld/transport.hpp"

namespace {

using namespace snsld;

GalerkinModel torus(int k) {
  TorusForcingSpec f;
  f.entries = {{0, 1.0}};
  TorusNoiseSpec n;
  n.amplitude = 0.5;
  return build_torus_model(k, f, n);
}

void BM_Nonlinearity(benchmark::State& state) {
  const auto model = torus(static_cast<int>(state.range(0)));
  NormalStream rng(1);
  State u(model.n_modes()), out(model.n_modes());
  for (int j = 0; j < model.n_modes(); ++j) u[j] = rng();
  for (auto _ : state) {
    model.nonlinearity_into(u.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["modes"] = model.n_modes();
  state.counters["terms"] = static_cast<double>(model.tensor().size());
}
BENCHMARK(BM_Nonlinearity)->Arg(2)->Arg(3)->Arg(4)->Arg(6);

void BM_Simulate(benchmark::State& state) {
  const auto model = torus(static_cast<int>(state.range(0)));
  const State u0 = State::Zero(model.n_modes());
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto traj = simulate(model, u0, 1.0, 1e-3, seed++);
    benchmark::DoNotOptimize(traj.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Simulate)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_PfEigen(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  NormalStream rng(2);
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) p(i, j) = 0.05 + rng.uniform();
    p.row(i) /= p.row(i).sum();
  }
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform();
  const auto kernel = tilt(FiniteChain::discrete(p), v);
  for (auto _ : state) benchmark::DoNotOptimize(pf_eigen(kernel).c);
}
BENCHMARK(BM_PfEigen)->Arg(2)->Arg(8)->Arg(32);

void BM_DualLipschitz(benchmark::State& state) {
  const auto model = torus(1);
  const auto a = simulate(model, State::Zero(model.n_modes()), 1.0, 0.01, 3);
  const auto b = simulate(model, State::Zero(model.n_modes()), 1.0, 0.01, 4);
  const auto mu1 = occupation_measure(a, 1.0);
  const auto mu2 = occupation_measure(b, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(dual_lipschitz(mu1, mu2, {MetricKind::state_norm}));
}
BENCHMARK(BM_DualLipschitz)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
