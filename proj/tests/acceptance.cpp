// Acceptance gates 1-8. One line per criterion; exit status is the number of failures.

#include "heatprice/fd.hpp"
#include "heatprice/fredholm.hpp"
#include "heatprice/pricer.hpp"
#include "heatprice/theta.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace heatprice;
using Clock = std::chrono::steady_clock;

namespace {

const ExponentialParams kBase{0.02, 0.01, 45.0, 0.1, 0.2};
const oracle::ExpFamily kBaseExact{0.02, 0.01, 45.0, 0.1, 0.2};
constexpr double kS0 = 60.0, kH = 90.0;

SurfaceRequest base_case_request() {
    SurfaceRequest r;
    r.product = Product::UpOutCall;
    r.S0 = kS0;
    r.H = kH;
    r.strikes = {50, 55, 60, 65, 70, 75, 80};
    r.maturities = {1.0 / 12.0, 0.3, 0.5, 1.0};
    return r;
}

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome closed_form_regression() {
    auto t0 = Clock::now();
    auto curve = CoefficientCurve::exponential(kBase, 1.0);
    TransformBundle b = build_bundle(curve, solve_riccati(curve, 2000));
    double ew = 0, eg = 0, ek = 0;
    auto rel = [](double x, double ref) { return ref == 0.0 ? std::fabs(x) : std::fabs(x / ref - 1.0); };
    for (std::size_t i = 0; i < b.t_grid().size(); ++i) {
        double t = b.t_grid()[i];
        ew = std::max(ew, rel(b.w()[i], kBaseExact.w(t)));
        eg = std::max(eg, rel(b.g()[i], kBaseExact.g(t)));
        ek = std::max(ek, rel(b.k()[i], kBaseExact.k(t)));
    }
    // F(p) against quadrature of its defining integral, payoff built from the closed forms
    const double K = 60.0, T = 1.0;
    const double W = kBaseExact.int_w(T), K1 = K * std::exp(W), y0 = kH * kBaseExact.g(T);
    const double kT = kBaseExact.k(T);
    double ef = 0;
    const double tau0 = b.tau0();
    for (int i = 0; i < 20; ++i) {
        double p = std::pow(400.0, i / 19.0) / tau0;
        double sp = std::sqrt(p);
        double ref = -oracle::quad([&](double z) { return std::sinh(z * sp) * std::exp(-kT) * (z * std::exp(-W) - K); },
                                   K1, y0);
        ef = std::max(ef, rel(rhs_F(b, K, kH, p), ref));
    }
    double elapsed = ms_since(t0);
    bool pass = b.t_grid().size() == 2001 && std::max({ew, eg, ek, ef}) <= 1e-8 && b.a_vanishes() && elapsed < 1000.0;
    return {pass, fmt("2001 points: max rel err w %.1e g %.1e k %.1e; F(p) on 20 p %.1e (tol 1e-8); %.0f ms (< 1000)", ew,
                      eg, ek, ef, elapsed)};
}

struct SurfacePair {
    PriceSurface semi, fd;
    double semi_ms = 0, fd_ms = 0;
};

const SurfacePair& base_case_surfaces() {
    static SurfacePair s = [] {
        SurfacePair out;
        auto curve = CoefficientCurve::exponential(kBase, 1.0);
        auto t0 = Clock::now();
        out.semi = price_surface_semi(curve, base_case_request(), SemiNumerics{});
        out.semi_ms = ms_since(t0);
        t0 = Clock::now();
        out.fd = price_surface_fd(curve, base_case_request(), FDNumerics{201, 0.001, 4});
        out.fd_ms = ms_since(t0);
        return out;
    }();
    return s;
}

// criterion 2 tolerance; returns the worst ratio error / allowed
double surface_tolerance_ratio(const PriceSurface& semi, const PriceSurface& fd, double* worst_rel = nullptr) {
    double ratio = 0, wr = 0;
    for (std::size_t i = 0; i < fd.cells.size(); ++i) {
        double ref = fd.cells[i].price, x = semi.cells[i].price;
        double allowed = ref >= 0.05 ? 0.01 * ref : 0.005;
        ratio = std::max(ratio, std::fabs(x - ref) / allowed);
        if (ref >= 0.05) wr = std::max(wr, std::fabs(x / ref - 1.0));
    }
    if (worst_rel) *worst_rel = wr;
    return ratio;
}

Outcome cross_oracle_surface() {
    const SurfacePair& s = base_case_surfaces();
    double worst_rel;
    double ratio = surface_tolerance_ratio(s.semi, s.fd, &worst_rel);
    bool pass = s.semi.cells.size() == 28 && ratio <= 1.0 && s.semi_ms < 2000.0 && s.fd_ms < 30000.0;
    return {pass, fmt("28 cells vs FD N=201 dt=0.001: max rel err %.2e (tol 1e-2, 5e-3 abs below 0.05), "
                      "error/tolerance %.3f; semi %.1f ms (< 2000), FD %.1f ms (< 30000)",
                      worst_rel, ratio, s.semi_ms, s.fd_ms)};
}

Outcome constant_coefficient_exact() {
    const double sigma = 45.0, T = 0.5;
    auto curve = CoefficientCurve::piecewise_constant({0.0}, {{0.0, 0.0, sigma}}, T);
    UpOutEngine engine(make_bundle(curve, T), kH);
    double worst = 0;
    for (double K : {50.0, 55.0, 60.0, 65.0, 70.0}) {
        double ref = oracle::abm_double_barrier_call(kS0, K, kH, sigma, T);
        worst = std::max(worst, std::fabs(engine.price(kS0, K).price / ref - 1.0));
    }
    return {worst <= 1e-5, fmt("r=q=0, sigma=45, T=0.5, 5 strikes vs image-method closed form: max rel err %.2e (tol 1e-5)",
                               worst)};
}

Outcome fredholm_manufactured() {
    auto curve = CoefficientCurve::exponential(kBase, 1.0);
    TransformBundle b = make_bundle(curve, 1.0);
    const BarrierNumerics num;
    const double tau0 = b.tau0();
    TauNodes nodes = sqrt_gauss_nodes(tau0, num.n_tau);
    MovingBoundary y = moving_boundary(b, kH, nodes.tau);
    Matrix A = assemble_kernel(y, geometric_p_grid(tau0, num.n_p), nodes.weight);
    std::vector<double> truth(nodes.tau.size());
    for (std::size_t j = 0; j < truth.size(); ++j) truth[j] = std::sin(std::numbers::pi * nodes.tau[j] / tau0);
    Regularization reg;
    reg.diagonal = nodes.v;
    FredholmSolution sol = solve_psi(A, A.apply(truth), reg);
    double err = 0, norm = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        err = std::max(err, std::fabs(sol.psi[j] - truth[j]));
        norm = std::max(norm, std::fabs(truth[j]));
    }
    double recovery = err / norm;

    SemiNumerics n10, n20;
    n10.barrier.n_p = 10;
    n20.barrier.n_p = 20;
    PriceSurface s10 = price_surface_semi(curve, base_case_request(), n10);
    PriceSurface s20 = price_surface_semi(curve, base_case_request(), n20);
    double diff = 0;
    for (std::size_t i = 0; i < s10.cells.size(); ++i)
        diff = std::max(diff, std::fabs(s10.cells[i].price / s20.cells[i].price - 1.0));
    bool pass = recovery <= 0.05 && diff < 1e-3;
    return {pass, fmt("sin(pi tau/tau_max) recovery sup err %.2e of max (tol 5e-2, lambda %.1e); n_p=10 vs 20 on 28 "
                      "cells max rel diff %.2e (tol 1e-3)",
                      recovery, sol.regularization_lambda, diff)};
}

Outcome american_properties() {
    const double T = 1.0;
    // no dividends
    auto c0 = CoefficientCurve::exponential({0.02, 0.0, 45.0, 0.1, 0.2}, T);
    double q0_gap = 0;
    for (double K : {50.0, 60.0, 70.0}) {
        for (double Tm : {0.3, 1.0}) {
            AmericanResult r = price_american_call(make_bundle(c0, Tm), kS0, K);
            q0_gap = std::max(q0_gap, std::fabs(r.price / r.european - 1.0));
        }
    }
    // dividends: dominance over the lattice, FD comparison and boundary shape
    auto c3 = CoefficientCurve::exponential({0.02, 0.03, 45.0, 0.1, 0.2}, T);
    double dominance = 1e300;
    bool monotone = true;
    AmericanResult at60;
    for (double Tm : {1.0 / 12.0, 0.3, 0.5, 1.0}) {
        TransformBundle b = make_bundle(c3, Tm);
        for (double K : {50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0}) {
            AmericanResult r = price_american_call(b, kS0, K);
            dominance = std::min(dominance, r.price - std::max(kS0 - K, r.european));
            const auto& sb = r.boundary.S_B;
            // nodes run from maturity backwards, so the boundary must not decrease along the array
            for (std::size_t i = 1; i < sb.size(); ++i) monotone = monotone && sb[i] >= sb[i - 1] * (1.0 - 1e-12);
            if (K == 60.0 && Tm == 1.0) at60 = r;
        }
    }
    FDSolution fd = solve_american_projected(c3, american_grid(60.0, kH, T, 401, 0.001),
                                             [](double s) { return std::max(s - 60.0, 0.0); });
    double fd_price = fd.value_at(kS0);
    double fd_rel = std::fabs(at60.price / fd_price - 1.0);
    bool pass = q0_gap <= 1e-6 && dominance >= 0.0 && fd_rel <= 5e-3 && monotone;
    return {pass, fmt("q=0 gap %.1e (tol 1e-6); min(price - max(intrinsic, european)) %.2e (>= 0, 28 cells); "
                      "K=60 T=1 q0=0.03 %.5f vs FD %.5f rel %.1e (tol 5e-3); boundary S_B(t=0) %.1f, S_B(T) %.1f, %s",
                      q0_gap, dominance, at60.price, fd_price, fd_rel, at60.boundary.S_B.back(),
                      at60.boundary.S_B.front(), monotone ? "non-increasing in t on all cells" : "NOT monotone")};
}

Outcome theta_suite() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uz(-10.0, 10.0), uw(0.0, 0.99);
    double sym = 0;
    for (int i = 0; i < 2000; ++i) {
        double z = uz(rng), w = uw(rng), v = theta3(z, w);
        double scale = theta3(0.0, w);
        sym = std::max({sym, std::fabs(theta3(z + std::numbers::pi, w) - v) / scale, std::fabs(theta3(-z, w) - v) / scale});
    }
    // imaginary transformation: both sides of the switch agree with the independent series, on the scale
    // of sup_z theta_3 = theta_3(0, w)
    double ident = 0;
    for (double w : {0.5, 0.85, 0.9, 0.95, 0.99}) {
        double l = -std::log(w);
        double scale = static_cast<double>(oracle::theta3_hp(0.0, w, 400));
        for (int i = 0; i < 50; ++i) {
            double z = uz(rng);
            double modular = 0;
            for (int m = -60; m <= 60; ++m) modular += std::exp(-std::pow(z - m * std::numbers::pi, 2) / l);
            modular *= std::sqrt(std::numbers::pi / l);
            double direct = static_cast<double>(oracle::theta3_hp(z, w, 400));
            ident = std::max({ident, std::fabs(theta3(z, w) - direct) / scale, std::fabs(modular - direct) / scale});
        }
    }
    bool bound_ok = true;
    int checks = 0;
    for (double w : {0.1, 0.5, 0.9, 0.99}) {
        const double ref_tail = 2.0 * std::pow(w, 51.0 * 51.0) / (1.0 - w);
        for (int i = 0; i < 5; ++i) {
            double z = uz(rng);
            oracle::hp ref = oracle::theta3_hp(z, w, 50);
            for (std::size_t N = 1; N <= 50; ++N) {
                double bound = 2.0 * std::pow(w, static_cast<double>(N * N)) / (1.0 - w);
                if (bound < 1e3 * (ref_tail + 1e-15 * 1e3)) break;
                double err = std::fabs(static_cast<double>(ref - oracle::hp(theta3_partial(z, w, N))));
                bound_ok = bound_ok && err <= bound;
                ++checks;
            }
        }
    }
    bool pass = sym <= 1e-13 && ident <= 1e-13 && bound_ok;
    return {pass, fmt("periodicity/evenness %.1e, imaginary-transformation identity %.1e (tol 1e-13); truncation bound "
                      "2w^{N^2}/(1-w) %s in %d checks for w in {0.1,0.5,0.9,0.99}",
                      sym, ident, bound_ok ? "holds" : "VIOLATED", checks)};
}

double median_ms(const std::function<void()>& f, int reps) {
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
        auto t0 = Clock::now();
        f();
        t.push_back(ms_since(t0));
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

Outcome performance() {
    auto curve = CoefficientCurve::exponential(kBase, 1.0);
    SemiNumerics full, nopsi;
    nopsi.barrier.no_psi = true;
    PriceSurface semi, fd, dropped;
    // interleaved so that drifting machine load hits both modes alike
    std::vector<double> a, b;
    for (int i = 0; i < 15; ++i) {
        a.push_back(median_ms([&] { semi = price_surface_semi(curve, base_case_request(), full); }, 1));
        b.push_back(median_ms([&] { dropped = price_surface_semi(curve, base_case_request(), nopsi); }, 1));
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double t_semi = a[a.size() / 2], t_nopsi = b[b.size() / 2];
    double t_fd = median_ms([&] { fd = price_surface_fd(curve, base_case_request(), FDNumerics{201, 0.001, 4}); }, 3);
    double ratio = surface_tolerance_ratio(semi, fd);
    double speedup = t_fd / t_semi, saving = 1.0 - t_nopsi / t_semi;
    bool pass = ratio <= 1.0 && speedup >= 5.0 && saving >= 0.30;
    return {pass, fmt("median lattice times semi %.2f ms, no-psi %.2f ms, FD %.2f ms: speedup %.1fx (>= 5) at "
                      "error/tolerance %.2f; no-psi saves %.0f%% (>= 30%%)",
                      t_semi, t_nopsi, t_fd, speedup, ratio, 100.0 * saving)};
}

Outcome boundary_residual() {
    const PriceSurface& s = base_case_surfaces().semi;
    double worst = 0;
    for (const SurfaceCell& c : s.cells)
        worst = std::max({worst, std::fabs(c.u_at_zero) / c.max_payoff, std::fabs(c.u_at_boundary) / c.max_payoff});
    return {worst <= 1e-8, fmt("28 cells: max |u| at x=0 and x=y(tau0) relative to max payoff %.1e (tol 1e-8)", worst)};
}

} // namespace

int main() {
    const std::pair<const char*, Outcome (*)()> criteria[] = {
        {"closed-form regression", closed_form_regression},
        {"cross-oracle barrier surface", cross_oracle_surface},
        {"constant-coefficient exact check", constant_coefficient_exact},
        {"Fredholm manufactured solution", fredholm_manufactured},
        {"American properties", american_properties},
        {"theta-function suite", theta_suite},
        {"performance", performance},
        {"boundary-condition residual", boundary_residual},
    };
    int failures = 0, id = 0;
    for (const auto& [name, fn] : criteria) {
        ++id;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
