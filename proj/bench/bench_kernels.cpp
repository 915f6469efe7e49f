// Copyright (c) 2026 The PPN Engine Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts, plus the
// streaming pipeline at the ppn512 preset.
//
//   OMP_NUM_THREADS=4 ./bench_kernels --benchmark_filter=gemm

#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "../tests/alloc_counter.hpp"
#include "ppn/enhancer.hpp"
#include "ppn/eval.hpp"
#include "ppn/frame_spec.hpp"
#include "ppn/kernels.hpp"
#include "ppn/rng.hpp"

namespace {

using namespace ppn;

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.uniform(-1.0, 1.0));
  return v;
}

template <bool Parallel>
void BM_gemm_bt(benchmark::State& state) {
  const std::size_t m = std::size_t(state.range(0)), n = 512, k = 512;
  const auto a = random_vec(m * k, 1), b = random_vec(n * k, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::gemm_bt(a.data(), b.data(), c.data(), m, n, k);
    } else {
      kernels::serial::gemm_bt(a.data(), b.data(), c.data(), m, n, k);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["threads"] = Parallel ? max_threads() : 1;
  state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(m * n * k));
}
BENCHMARK(BM_gemm_bt<false>)->Name("gemm_bt/serial")->Arg(16)->Arg(200);
BENCHMARK(BM_gemm_bt<true>)->Name("gemm_bt/parallel")->Arg(16)->Arg(200);

template <bool Parallel>
void BM_gemm_atb(benchmark::State& state) {
  const std::size_t m = 512, n = 512, k = std::size_t(state.range(0));
  const auto a = random_vec(k * m, 3), b = random_vec(k * n, 4);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0f);
    if constexpr (Parallel) {
      kernels::gemm_atb(a.data(), b.data(), c.data(), m, n, k);
    } else {
      kernels::serial::gemm_atb(a.data(), b.data(), c.data(), m, n, k);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(m * n * k));
}
BENCHMARK(BM_gemm_atb<false>)->Name("gemm_atb/serial")->Arg(200);
BENCHMARK(BM_gemm_atb<true>)->Name("gemm_atb/parallel")->Arg(200);

template <bool Parallel>
void BM_matvec(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0)), k = n;
  const auto w = random_vec(n * k, 5), x = random_vec(k, 6);
  std::vector<float> y(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::matvec(w.data(), x.data(), y.data(), n, k);
    } else {
      kernels::serial::matvec(w.data(), x.data(), y.data(), n, k);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(n * k));
}
BENCHMARK(BM_matvec<false>)->Name("matvec/serial")->Arg(512)->Arg(1536);
BENCHMARK(BM_matvec<true>)->Name("matvec/parallel")->Arg(512)->Arg(1536);

template <bool Parallel>
void BM_lag_xcorr(benchmark::State& state) {
  const auto x = random_vec(kPitchHistory, 7);
  std::vector<double> out(kMaxPeriod - kMinPeriod + 1);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::lag_xcorr(x, kMaxPeriod, kPitchWindow, kMinPeriod, kMaxPeriod, out);
    } else {
      kernels::serial::lag_xcorr(x, kMaxPeriod, kPitchWindow, kMinPeriod, kMaxPeriod, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_lag_xcorr<false>)->Name("lag_xcorr/serial");
BENCHMARK(BM_lag_xcorr<true>)->Name("lag_xcorr/parallel");

void BM_stream(benchmark::State& state) {
  EnhancerModel model(EnhancerConfig::preset_named(state.range(0) ? "ppn1024" : "ppn512"));
  model.randomize(1);
  SpeakerEmbedding e{std::vector<float>(model.config().embedding_dim, 0.0f)};
  e.values[0] = 1.0f;
  BenchmarkReport r;
  for (auto _ : state) r = benchmark_stream(&model, e, 5.0, [] { return alloc_counter::count(); });
  state.counters["realtime_factor"] = r.realtime_factor;
  state.counters["cpu_percent"] = 100.0 * r.cpu_fraction;
  state.counters["allocations"] = double(r.allocations);
  state.SetLabel(state.range(0) ? "ppn1024" : "ppn512");
}
BENCHMARK(BM_stream)->Arg(0)->Arg(1)->Iterations(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
