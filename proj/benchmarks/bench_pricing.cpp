#include "heatprice/fd.hpp"
#include "heatprice/pricer.hpp"
#include "heatprice/theta.hpp"

#include <benchmark/benchmark.h>

using namespace heatprice;

namespace {

const ExponentialParams kParams{0.02, 0.01, 45.0, 0.1, 0.2};

SurfaceRequest table_request(Product p = Product::UpOutCall) {
    SurfaceRequest r;
    r.product = p;
    r.S0 = 60.0;
    r.H = 90.0;
    r.strikes = {50, 55, 60, 65, 70, 75, 80};
    r.maturities = {1.0 / 12.0, 0.3, 0.5, 1.0};
    return r;
}

} // namespace

static void BM_Theta3(benchmark::State& state) {
    const double w = static_cast<double>(state.range(0)) / 100.0;
    double z = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(theta3(z, w));
        z += 1e-3;
    }
}
BENCHMARK(BM_Theta3)->Arg(10)->Arg(50)->Arg(90)->Arg(99);

static void BM_ThetaDiff(benchmark::State& state) {
    double x = 10.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(theta_diff(x, 30.0, 90.0, 0.8));
        x += 1e-3;
    }
}
BENCHMARK(BM_ThetaDiff);

static void BM_Bundle(benchmark::State& state) {
    auto c = CoefficientCurve::exponential(kParams, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(make_bundle(c, 1.0));
}
BENCHMARK(BM_Bundle)->Unit(benchmark::kMicrosecond);

static void BM_EngineSetup(benchmark::State& state) {
    TransformBundle b = make_bundle(CoefficientCurve::exponential(kParams, 1.0), 1.0);
    for (auto _ : state) {
        UpOutEngine e(b, 90.0);
        benchmark::DoNotOptimize(e.kernel());
    }
}
BENCHMARK(BM_EngineSetup)->Unit(benchmark::kMicrosecond);

static void BM_EnginePrice(benchmark::State& state) {
    UpOutEngine e(make_bundle(CoefficientCurve::exponential(kParams, 1.0), 1.0), 90.0);
    for (auto _ : state) benchmark::DoNotOptimize(e.price(60.0, 60.0));
}
BENCHMARK(BM_EnginePrice)->Unit(benchmark::kMicrosecond);

static void BM_SurfaceSemi(benchmark::State& state) {
    auto c = CoefficientCurve::exponential(kParams, 1.0);
    SemiNumerics num;
    num.barrier.no_psi = state.range(0) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(price_surface_semi(c, table_request(), num));
}
BENCHMARK(BM_SurfaceSemi)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_SurfaceFD(benchmark::State& state) {
    auto c = CoefficientCurve::exponential(kParams, 1.0);
    FDNumerics num;
    num.N = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(price_surface_fd(c, table_request(), num));
}
BENCHMARK(BM_SurfaceFD)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond);

static void BM_SurfaceAmerican(benchmark::State& state) {
    auto c = CoefficientCurve::exponential({0.02, 0.03, 45.0, 0.1, 0.2}, 1.0);
    SemiNumerics num;
    for (auto _ : state) benchmark::DoNotOptimize(price_surface_semi(c, table_request(Product::AmericanCall), num));
}
BENCHMARK(BM_SurfaceAmerican)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
