#include <benchmark/benchmark.h>

#include <cmath>

#include "jumplab/chain.hpp"
#include "jumplab/functionals.hpp"
#include "jumplab/operators.hpp"
#include "jumplab/pathsim.hpp"

using namespace jumplab;

namespace {

const KernelSpec& stable_kernel() {
  static const KernelSpec J = KernelSpec::isotropic_stable(1, 0.5, 1.0);
  return J;
}

GeneratorMatrix generator(int n, GeneratorMode mode) {
  const Lattice lat = build_lattice(1, n, Point{-1.0}, Point{1.0});
  return assemble_generator(build_conductances(stable_kernel(), lat), mode, stable_kernel());
}

void BM_Conductances(benchmark::State& state) {
  const Lattice lat = build_lattice(1, static_cast<int>(state.range(0)), Point{-1.0}, Point{1.0});
  for (auto _ : state) benchmark::DoNotOptimize(build_conductances(stable_kernel(), lat).entries.data());
  state.counters["sites"] = static_cast<double>(lat.size());
}
BENCHMARK(BM_Conductances)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SemigroupApply(benchmark::State& state) {
  const GeneratorMatrix A = generator(static_cast<int>(state.range(0)), GeneratorMode::Conservative);
  Eigen::VectorXd f(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) f(i) = std::exp(-8.0 * std::pow(A.lattice().site(i)[0], 2));
  for (auto _ : state) benchmark::DoNotOptimize(semigroup_apply(A, 0.5, f).data());
}
BENCHMARK(BM_SemigroupApply)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SpectralDecompose(benchmark::State& state) {
  const GeneratorMatrix A = generator(static_cast<int>(state.range(0)), GeneratorMode::Killed);
  for (auto _ : state) benchmark::DoNotOptimize(spectral_decompose(A).eigenvalues.data());
}
BENCHMARK(BM_SpectralDecompose)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ChainPaths(benchmark::State& state) {
  const GeneratorMatrix A = generator(128, GeneratorMode::Killed);
  const ChainSimulator sim(A);
  const std::size_t x0 = A.lattice().nearest(Point{0.0});
  std::uint64_t path = 0;
  for (auto _ : state) {
    PathStream rng(1, path++);
    benchmark::DoNotOptimize(sim.run(x0, 0.1, rng, Ball{x0, 0.2}, false).end_time);
  }
}
BENCHMARK(BM_ChainPaths);

void BM_ComputeL(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(compute_L(stable_kernel(), Point{0.0}, 0.1, 0.5).total.value);
}
BENCHMARK(BM_ComputeL)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
