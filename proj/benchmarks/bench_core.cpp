#include <benchmark/benchmark.h>

#include "cmi/isotopy.hpp"
#include "cmi/labyrinth.hpp"

using namespace cmi;

namespace {

PeriodicPath catenoid_loop(int n) {
  return restrict_to_curve(catalog("catenoid").as_form(), homology_basis(default_annulus())[0], n);
}

void BM_Pi1Class(benchmark::State& state) {
  const PeriodicPath loop = catenoid_loop(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pi1_class(loop));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Pi1Class)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oN);

void BM_LoopPeriod(benchmark::State& state) {
  const HoloForm f = catalog("catenoid").as_form();
  const CurveChart c = homology_basis(default_annulus())[0];
  for (auto _ : state) benchmark::DoNotOptimize(loop_period(f, c));
}
BENCHMARK(BM_LoopPeriod);

void BM_SpinorForm(benchmark::State& state) {
  const HoloForm f = catalog("enneper_annulus").as_form();
  for (auto _ : state) benchmark::DoNotOptimize(spinor_form(f, default_annulus()));
}
BENCHMARK(BM_SpinorForm)->Unit(benchmark::kMillisecond);

void BM_SprayJacobian(benchmark::State& state) {
  const LoopSpray s = build_spray({{catenoid_loop(1024)}}, {Segment(0.07, 0.98)});
  for (auto _ : state) benchmark::DoNotOptimize(period_jacobian(s, 0));
}
BENCHMARK(BM_SprayJacobian)->Unit(benchmark::kMillisecond);

void BM_IntrinsicDistance(benchmark::State& state) {
  const HoloForm f = catalog("catenoid").as_form();
  DistanceOptions opt;
  opt.n_r = static_cast<int>(state.range(0));
  opt.n_theta = 4 * opt.n_r;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        intrinsic_distance([&](cplx z) { return metric_density(f, z); }, default_annulus(), 1.0, opt));
  state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_IntrinsicDistance)->RangeMultiplier(2)->Range(32, 256)->Unit(benchmark::kMillisecond)->Complexity();

void BM_LabyrinthCertify(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const Labyrinth l = build_labyrinth({0, 0, 1.0, 2.0}, N);
  for (auto _ : state) benchmark::DoNotOptimize(l.certify());
}
BENCHMARK(BM_LabyrinthCertify)->Arg(5)->Arg(10)->Arg(20);

void BM_FluxToZero(benchmark::State& state) {
  const SpinorImmersion u = spinor_catalog("catenoid");
  IsotopyOptions opt;
  opt.n_t = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(flux_to_zero(u, opt));
}
BENCHMARK(BM_FluxToZero)->Arg(32)->Arg(64)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
