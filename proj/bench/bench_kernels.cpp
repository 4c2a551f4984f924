#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "aghint/common.hpp"
#include "aghint/kernels.hpp"

namespace {

namespace k = aghint::kernels;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Omp>
void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * 64, 1), b = random_vec(64 * 64, 2);
  std::vector<double> c(n * 64);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0);
    if constexpr (Omp) k::omp::matmul_acc(a, b, c, n, 64, 64);
    else k::serial::matmul_acc(a, b, c, n, 64, 64);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}

// Segments of 8 edges over n rows with 64 features.
template <bool Omp>
void BM_segment_sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t deg = 8;
  const auto x = random_vec(n * 64, 3), w = random_vec(n * deg, 4);
  std::vector<std::int32_t> src(n * deg);
  std::mt19937_64 rng(5);
  for (auto& s : src) s = static_cast<std::int32_t>(rng() % n);
  std::vector<std::size_t> off(n + 1);
  for (std::size_t i = 0; i <= n; ++i) off[i] = i * deg;
  std::vector<double> out(n * 64);
  for (auto _ : state) {
    std::fill(out.begin(), out.end(), 0.0);
    if constexpr (Omp) k::omp::segment_weighted_sum_acc(x, 64, src, w, off, out);
    else k::serial::segment_weighted_sum_acc(x, 64, src, w, off, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Omp>
void BM_segment_softmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto logits = random_vec(n * 8, 6);
  std::vector<std::size_t> off(n + 1);
  for (std::size_t i = 0; i <= n; ++i) off[i] = i * 8;
  std::vector<double> out(n * 8);
  for (auto _ : state) {
    if constexpr (Omp) k::omp::segment_softmax(logits, off, out);
    else k::serial::segment_softmax(logits, off, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Omp>
void BM_jaccard(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t words = 4;
  std::mt19937_64 rng(7);
  std::vector<std::uint64_t> bits(n * words);
  for (auto& b : bits) b = rng() & rng();
  std::vector<float> out(n * n);
  for (auto _ : state) {
    if constexpr (Omp) k::omp::jaccard_matrix(bits, words, n, out);
    else k::serial::jaccard_matrix(bits, words, n, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_matmul<false>)->Arg(4096)->Name("matmul/serial");
BENCHMARK(BM_matmul<true>)->Arg(4096)->Name("matmul/omp");
BENCHMARK(BM_segment_sum<false>)->Arg(8192)->Name("segment_sum/serial");
BENCHMARK(BM_segment_sum<true>)->Arg(8192)->Name("segment_sum/omp");
BENCHMARK(BM_segment_softmax<false>)->Arg(65536)->Name("segment_softmax/serial");
BENCHMARK(BM_segment_softmax<true>)->Arg(65536)->Name("segment_softmax/omp");
BENCHMARK(BM_jaccard<false>)->Arg(2048)->Name("jaccard/serial");
BENCHMARK(BM_jaccard<true>)->Arg(2048)->Name("jaccard/omp");

BENCHMARK_MAIN();
