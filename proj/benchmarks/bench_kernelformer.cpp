#include <benchmark/benchmark.h>

#include <vector>

#include "kernelformer/construct.hpp"
#include "kernelformer/kernel.hpp"
#include "kernelformer/manifold.hpp"
#include "kernelformer/numerics.hpp"
#include "kernelformer/rng.hpp"
#include "kernelformer/serialize.hpp"
#include "kernelformer/structured_eval.hpp"

namespace {

constexpr int kAmbient = 10;

double bandwidth_of(int n) { return kf::bandwidth_for(n, 1.0, 1).h; }

kf::Prompt make_prompt(int n, uint64_t seed) {
  kf::Manifold m{kf::ManifoldKind::Circle, 1.0};
  kf::HolderFunction f = kf::make_holder_function(m, 1.0, 1.0, 1.0, 5, seed);
  kf::IsometricEmbedding e = kf::make_embedding(kAmbient, 2, seed + 1);
  return kf::generate_task(m, e, f, n, seed + 2);
}

void BM_BuildTransformer(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const double h = bandwidth_of(n);
  for (auto _ : state) {
    kf::TransformerSpec spec =
        kf::build_kernel_transformer(n, kAmbient, h, 1.0, 1.0);
    benchmark::DoNotOptimize(spec.arch.kappa);
  }
}
BENCHMARK(BM_BuildTransformer)->Arg(64)->Arg(512)->Arg(2048);

void BM_CompileValidate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  kf::TransformerSpec spec =
      kf::build_kernel_transformer(n, kAmbient, bandwidth_of(n), 1.0, 1.0);
  for (auto _ : state) {
    kf::CompiledForward fwd(spec);
    benchmark::DoNotOptimize(fwd.structured());
  }
}
BENCHMARK(BM_CompileValidate)->Arg(64)->Arg(512)->Arg(2048);

void BM_StructuredForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  kf::TransformerSpec spec =
      kf::build_kernel_transformer(n, kAmbient, bandwidth_of(n), 1.0, 1.0);
  kf::CompiledForward fwd(spec);
  kf::Prompt p = make_prompt(n, 11);
  for (auto _ : state) benchmark::DoNotOptimize(fwd(p));
}
BENCHMARK(BM_StructuredForward)->Arg(64)->Arg(512)->Arg(2048);

void BM_GenericForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  kf::TransformerSpec spec =
      kf::build_kernel_transformer(n, kAmbient, bandwidth_of(n), 1.0, 1.0);
  kf::Prompt p = make_prompt(n, 11);
  for (auto _ : state)
    benchmark::DoNotOptimize(kf::forward_generic(spec, p));
}
BENCHMARK(BM_GenericForward)->Arg(16)->Arg(64);

void BM_NwEstimate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  kf::Bandwidth h(bandwidth_of(n));
  kf::Prompt p = make_prompt(n, 11);
  for (auto _ : state) benchmark::DoNotOptimize(kf::nw_estimate(p, h));
}
BENCHMARK(BM_NwEstimate)->Arg(64)->Arg(512)->Arg(2048);

void BM_SpecRoundTrip(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  kf::TransformerSpec spec =
      kf::build_kernel_transformer(n, kAmbient, bandwidth_of(n), 1.0, 1.0);
  for (auto _ : state) {
    std::string s = kf::spec_to_string(spec);
    benchmark::DoNotOptimize(kf::spec_from_string(s).arch.kappa);
  }
}
BENCHMARK(BM_SpecRoundTrip)->Arg(64)->Arg(512);

void BM_CompensatedDot(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  kf::Rng rng(99);
  std::vector<double> a(len), b(len);
  for (int i = 0; i < len; ++i) {
    a[i] = rng.uniform(-1.0, 1.0);
    b[i] = rng.uniform(-1.0, 1.0);
  }
  for (auto _ : state) {
    kf::DotAccumulator acc;
    for (int i = 0; i < len; ++i) acc.add_product(a[i], b[i]);
    benchmark::DoNotOptimize(acc.value());
  }
}
BENCHMARK(BM_CompensatedDot)->Arg(256)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
