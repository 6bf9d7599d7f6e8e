#include <random>

#include <benchmark/benchmark.h>

#include "dualflow/flow.hpp"
#include "dualflow/problems.hpp"

using namespace dualflow;

namespace {

WeightedVector gaussian(const Weights& w, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  WeightedVector v(w);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = scale * nd(rng);
  return v;
}

const Problem& deconvolution() {
  static const Problem p = gaussian_deconvolution_fixture(801, 1e-2, 0);
  return p;
}

const Problem& tomography() {
  static const Problem p = shepp_logan_fixture(64, 30, 95, 1e-2, 0);
  return p;
}

void BM_IntegralApply(benchmark::State& state) {
  const auto& op = *deconvolution().inverse.op;
  const WeightedVector x = gaussian(op.domain_weights(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
}
BENCHMARK(BM_IntegralApply);

void BM_IntegralAdjoint(benchmark::State& state) {
  const auto& op = *deconvolution().inverse.op;
  const WeightedVector l = gaussian(op.range_weights(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.adjoint_apply(l));
}
BENCHMARK(BM_IntegralAdjoint);

void BM_ProjectorApply(benchmark::State& state) {
  const auto& op = *tomography().inverse.op;
  const WeightedVector x = gaussian(op.domain_weights(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
}
BENCHMARK(BM_ProjectorApply);

void BM_ProjectorAdjoint(benchmark::State& state) {
  const auto& op = *tomography().inverse.op;
  const WeightedVector l = gaussian(op.range_weights(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(op.adjoint_apply(l));
}
BENCHMARK(BM_ProjectorAdjoint);

void BM_Rk4StepEntropy(benchmark::State& state) {
  const Problem& p = deconvolution();
  const DualState s = make_state(0.0, gaussian(p.inverse.op->range_weights(), 5, 0.1), p.inverse);
  for (auto _ : state) benchmark::DoNotOptimize(rk4_step(s, p.preset_dt, p.inverse));
}
BENCHMARK(BM_Rk4StepEntropy)->Unit(benchmark::kMicrosecond);

void BM_EulerStepEntropy(benchmark::State& state) {
  const Problem& p = deconvolution();
  const DualState s = make_state(0.0, gaussian(p.inverse.op->range_weights(), 5, 0.1), p.inverse);
  for (auto _ : state) benchmark::DoNotOptimize(euler_step(s, p.preset_dt, p.inverse));
}
BENCHMARK(BM_EulerStepEntropy)->Unit(benchmark::kMicrosecond);

void BM_SoftmaxConjGrad(benchmark::State& state) {
  const Problem& p = deconvolution();
  const WeightedVector xi = gaussian(p.inverse.op->domain_weights(), 6, 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(p.inverse.reg->conj_grad(xi));
}
BENCHMARK(BM_SoftmaxConjGrad);

// xi = A* lambda at a typical flow time, so the prox has real structure.
WeightedVector tv_input(std::uint64_t seed) {
  const Problem& p = tomography();
  const WeightedVector lambda = gaussian(p.inverse.op->range_weights(), seed, 0.05);
  return p.inverse.op->adjoint_apply(lambda);
}

void tv_prox(benchmark::State& state, TvSolver solver, bool warm) {
  TvProxSettings settings;
  settings.solver = solver;
  settings.max_iter = 100000;
  const TvStrongRegularizer reg(1.0, 64, 64, settings);
  const WeightedVector xi = tv_input(7);
  const WeightedVector xi_next = xi + 1e-3 * tv_input(8);
  ConjGradWorkspace ws;
  reg.conj_grad(xi, &ws);
  for (auto _ : state) {
    if (!warm) ws = ConjGradWorkspace{};
    benchmark::DoNotOptimize(reg.conj_grad(warm ? xi_next : xi, &ws));
    if (warm) {
      state.PauseTiming();
      reg.conj_grad(xi, &ws);
      state.ResumeTiming();
    }
  }
  state.counters["inner_iterations"] = ws.last_iterations;
}

void BM_TvProxDykstraCold(benchmark::State& state) { tv_prox(state, TvSolver::dykstra, false); }
void BM_TvProxDykstraWarm(benchmark::State& state) { tv_prox(state, TvSolver::dykstra, true); }
void BM_TvProxPdhgCold(benchmark::State& state) { tv_prox(state, TvSolver::pdhg, false); }
BENCHMARK(BM_TvProxDykstraCold)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TvProxDykstraWarm)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TvProxPdhgCold)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
