// Serial vs OpenMP timings of the per-step kernels on a random unit field over a perturbed metric.
#include <benchmark/benchmark.h>

#include <cmath>

#include "sfr/flows.hpp"
#include "sfr/foliation.hpp"
#include "sfr/riemann3.hpp"

using namespace sfr;

namespace {

Slice bench_slice(int n) {
    const ChartGrid g = make_box(0.0, 1.0, n);
    const auto m = make_metric(sample<Mat3>(g, [](const Vec3& x) {
        Mat3 a = Mat3::Identity();
        a(0, 1) = a(1, 0) = 0.1 * std::sin(2 * x[2]);
        a(2, 2) += 0.2 * std::cos(x[0] + x[1]);
        return a;
    }));
    auto U = sample<Vec3>(g, [](const Vec3& x) {
        return Vec3(1 + 0.3 * std::sin(3 * x[1]), 0.4 * std::cos(2 * x[0]), 0.2 * x[2]);
    });
    for (std::size_t p = 0; p < g.size(); ++p) U[p] /= std::sqrt(U[p].dot(m.g[p] * U[p]));
    return make_slice(0.0, m, U, Lapse{});
}

Exec exec_of(const benchmark::State& st) { return st.range(1) ? Exec::Parallel : Exec::Serial; }

void BM_christoffel3(benchmark::State& st) {
    const Slice s = bench_slice(int(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(christoffel3(s.g, exec_of(st)));
}

void BM_flow_rhs(benchmark::State& st) {
    const Slice s = bench_slice(int(st.range(0)));
    FlowSpec spec;
    spec.variant = FlowVariant::ConstCurvCFGR;
    for (auto _ : st) benchmark::DoNotOptimize(flow_rhs(s, spec, exec_of(st)));
}

void BM_diagnostics(benchmark::State& st) {
    const Slice s = bench_slice(int(st.range(0)));
    const Frame2 fr = complementary_frame(s.g, s.U);
    for (auto _ : st) benchmark::DoNotOptimize(diagnostics(s.g, s.U, fr, exec_of(st)));
}

}  // namespace

// args: grid points per axis, parallel (0/1)
BENCHMARK(BM_christoffel3)->ArgsProduct({{17, 33}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_flow_rhs)->ArgsProduct({{17, 33}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_diagnostics)->ArgsProduct({{17, 33}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
