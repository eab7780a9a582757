// Throughput comparison of the serial reference kernels against the OpenMP
// paths. Both produce bit-identical results (see test_kernels); this target
// measures what the pragmas buy at various sizes.
//
// Run: ./bench/mmcse_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <vector>

#include "mmcse/kernels.hpp"
#include "mmcse/rng.hpp"

namespace k = mmcse::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    mmcse::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

void bm_matmul(benchmark::State& state, k::Mode mode) {
    const auto n = static_cast<k::index_t>(state.range(0));
    const auto a = random_vec(static_cast<std::size_t>(n * n), 1);
    const auto b = random_vec(static_cast<std::size_t>(n * n), 2);
    std::vector<double> c(static_cast<std::size_t>(n * n));
    k::set_mode(mode);
    for (auto _ : state) {
        k::matmul(c.data(), a.data(), b.data(), n, n, n, false);
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
    k::set_mode(k::Mode::Parallel);
}

void bm_bmm(benchmark::State& state, k::Mode mode) {
    const auto n = static_cast<k::index_t>(state.range(0));
    const k::index_t batch = 16;
    const auto a = random_vec(static_cast<std::size_t>(batch * n * n), 3);
    const auto b = random_vec(static_cast<std::size_t>(batch * n * n), 4);
    std::vector<double> c(static_cast<std::size_t>(batch * n * n));
    k::set_mode(mode);
    for (auto _ : state) {
        k::bmm(c.data(), a.data(), b.data(), batch, n, n, n, false);
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * batch * n * n * n);
    k::set_mode(k::Mode::Parallel);
}

void bm_softmax(benchmark::State& state, k::Mode mode) {
    const auto rows = static_cast<k::index_t>(state.range(0));
    const k::index_t cols = 128;
    const auto x = random_vec(static_cast<std::size_t>(rows * cols), 5);
    std::vector<double> y(x.size());
    k::set_mode(mode);
    for (auto _ : state) {
        k::softmax_rows(y.data(), x.data(), rows, cols);
        benchmark::DoNotOptimize(y.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * rows * cols);
    k::set_mode(k::Mode::Parallel);
}

void bm_sum(benchmark::State& state, k::Mode mode) {
    const auto n = static_cast<k::index_t>(state.range(0));
    const auto x = random_vec(static_cast<std::size_t>(n), 6);
    k::set_mode(mode);
    double acc = 0.0;
    for (auto _ : state) {
        acc += k::sum_all(x.data(), n);
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * n);
    k::set_mode(k::Mode::Parallel);
}

}  // namespace

BENCHMARK_CAPTURE(bm_matmul, serial, k::Mode::Serial)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK_CAPTURE(bm_matmul, openmp, k::Mode::Parallel)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK_CAPTURE(bm_bmm, serial, k::Mode::Serial)->Arg(32)->Arg(128);
BENCHMARK_CAPTURE(bm_bmm, openmp, k::Mode::Parallel)->Arg(32)->Arg(128);
BENCHMARK_CAPTURE(bm_softmax, serial, k::Mode::Serial)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(bm_softmax, openmp, k::Mode::Parallel)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(bm_sum, serial, k::Mode::Serial)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK_CAPTURE(bm_sum, openmp, k::Mode::Parallel)->Arg(1 << 16)->Arg(1 << 20);

BENCHMARK_MAIN();
