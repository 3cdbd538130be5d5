#include <benchmark/benchmark.h>

#include <random>

#include "ksent/benettin.hpp"
#include "ksent/kicked.hpp"
#include "ksent/quantum.hpp"
#include "ksent/riccati.hpp"
#include "ksent/sampler.hpp"
#include "ksent/systems.hpp"

using namespace ksent;

namespace {

SymMatrix random_sym(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m.at(i, j) = gauss(rng);
  return m;
}

void BM_sym_eigen(benchmark::State& state) {
  const SymMatrix m = random_sym(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(sym_eigen(m));
}
BENCHMARK(BM_sym_eigen)->Arg(3)->Arg(6);

void BM_sigma_rhs(benchmark::State& state) {
  const HamiltonianModel m = make_model("quartic3");
  const HessianBlocks k = m.blocks({0.3, -0.2, 0.1}, {0.9, 0.4, -0.5}, 0.0);
  const SymMatrix sigma = random_sym(3, 11);
  for (auto _ : state) benchmark::DoNotOptimize(sigma_rhs(sigma, k));
}
BENCHMARK(BM_sigma_rhs);

void BM_ks_integrand(benchmark::State& state) {
  const HamiltonianModel m = make_model("quartic3");
  const HessianBlocks k = m.blocks({0.3, -0.2, 0.1}, {0.9, 0.4, -0.5}, 0.0);
  const SymMatrix sigma = random_sym(3, 13);
  for (auto _ : state) benchmark::DoNotOptimize(ks_integrand(SigmaRep::direct, sigma, k));
}
BENCHMARK(BM_ks_integrand);

// One unit of quartic flow: 1000 joint orbit + Riccati + integrand steps.
void BM_riccati_unit_time(benchmark::State& state) {
  const HamiltonianModel m = make_model("quartic3");
  const TrajectoryState ic = sample_energy_surface(m, 1.0, 1);
  RiccatiOptions opt;
  opt.t_max = 1.0;
  opt.dt = 1e-3;
  opt.sample_every = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(evolve_ks(m, ic, opt));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_riccati_unit_time);

void BM_tangent_spectrum_unit_time(benchmark::State& state) {
  const HamiltonianModel m = make_model("quartic3");
  const TrajectoryState ic = sample_energy_surface(m, 1.0, 1);
  BenettinOptions opt;
  opt.t_max = 1.0;
  opt.dt = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(spectrum_continuous(m, ic, opt));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_tangent_spectrum_unit_time);

void BM_kick_step(benchmark::State& state) {
  const KickedModel m = make_kicked_model("rotor", {.kick_strength = 5.0, .period = 1.0});
  KickedState s = KickedState::initial({0.4}, {0.3});
  for (auto _ : state) benchmark::DoNotOptimize(kick_step(s, m));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_kick_step);

void BM_split_step(benchmark::State& state) {
  RotorParams params;
  params.grid = static_cast<int>(state.range(0));
  params.substeps = 1;
  WaveState psi = gaussian_state(params.grid, params.hbar, 3.14159, 0.4);
  for (auto _ : state) split_step(psi, params);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_split_step)->Arg(1024)->Arg(2048)->Arg(4096);

void BM_spectral_analyze(benchmark::State& state) {
  RotorParams params;
  WaveState psi = gaussian_state(params.grid, params.hbar, 3.14159, 0.4);
  for (int n = 0; n < 50; ++n) split_step(psi, params);  // spread the band first
  for (auto _ : state) benchmark::DoNotOptimize(analyze(psi, 1e-8));
}
BENCHMARK(BM_spectral_analyze);

}  // namespace

BENCHMARK_MAIN();
