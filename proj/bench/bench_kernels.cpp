// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "sdsi/corpus.hpp"
#include "sdsi/embedding.hpp"
#include "sdsi/kernels.hpp"

namespace {

using namespace sdsi;

const AudioBuffer& clip() {
  static const AudioBuffer a = make_noise(60.0, 0.1, 42);
  return a;
}

std::vector<std::vector<double>> unit_vectors(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& v : out) {
    double s = 0.0;
    for (auto& x : v) s += (x = nd(rng)) * x;
    for (auto& x : v) x /= std::sqrt(s);
  }
  return out;
}

template <auto Fn>
void BM_log_mel(benchmark::State& state) {
  const FrameSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(Fn(clip().samples, clip().sample_rate_hz, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(clip().samples.size()));
}

template <auto Fn>
void BM_resample(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(clip().samples, 48000, kCanonicalRate));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(clip().samples.size()));
}

template <auto Fn>
void BM_fir(benchmark::State& state) {
  const std::vector<double> taps(static_cast<std::size_t>(state.range(0)), 1.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(clip().samples, taps));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(clip().samples.size()));
}

template <auto Fn>
void BM_cosine_matrix(benchmark::State& state) {
  const auto vecs = unit_vectors(static_cast<std::size_t>(state.range(0)), 48);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(vecs));
}

template <auto Fn>
void BM_extract_batch(benchmark::State& state) {
  std::vector<AudioBuffer> clips;
  for (int i = 0; i < state.range(0); ++i) clips.push_back(make_noise(1.5, 0.1, static_cast<std::uint64_t>(i)));
  const BaselineBackend backend;
  for (auto _ : state) benchmark::DoNotOptimize(Fn(backend, clips));
}

BENCHMARK(BM_log_mel<kernels::log_mel_serial>)->Name("log_mel/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_log_mel<kernels::log_mel_parallel>)->Name("log_mel/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_resample<kernels::resample_serial>)->Name("resample/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_resample<kernels::resample_parallel>)->Name("resample/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fir<kernels::fir_filter_serial>)->Name("fir/serial")->Arg(63)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fir<kernels::fir_filter_parallel>)->Name("fir/parallel")->Arg(63)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_cosine_matrix<kernels::cosine_distance_matrix_serial>)->Name("cosine_matrix/serial")->Arg(400);
BENCHMARK(BM_cosine_matrix<kernels::cosine_distance_matrix_parallel>)->Name("cosine_matrix/parallel")->Arg(400);
BENCHMARK(BM_extract_batch<extract_batch_serial>)->Name("extract_batch/serial")->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_extract_batch<extract_batch_parallel>)->Name("extract_batch/parallel")->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
