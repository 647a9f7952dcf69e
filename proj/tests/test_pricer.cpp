#include "heatprice/errors.hpp"
#include "heatprice/fd.hpp"
#include "heatprice/pricer.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace heatprice;

namespace {

const ExponentialParams kBase{0.02, 0.01, 45.0, 0.1, 0.2};
const std::vector<double> kStrikes{50, 55, 60, 65, 70, 75, 80};
const std::vector<double> kMaturities{1.0 / 12.0, 0.3, 0.5, 1.0};

CoefficientCurve base_case() { return CoefficientCurve::exponential(kBase, 1.0); }

CoefficientCurve flat(double r, double q, double sigma, double T) {
    return CoefficientCurve::piecewise_constant({0.0}, {{r, q, sigma}}, T);
}

SurfaceRequest base_case_request(Product product = Product::UpOutCall) {
    SurfaceRequest r;
    r.product = product;
    r.S0 = 60.0;
    r.H = 90.0;
    r.strikes = kStrikes;
    r.maturities = kMaturities;
    return r;
}

double rel(double x, double ref) { return std::fabs(x / ref - 1.0); }

} // namespace

TEST(UpOut, VanishesTowardsBarrier) {
    UpOutEngine e(make_bundle(base_case(), 1.0), 90.0);
    double far = e.price(0.9 * 90.0, 60.0).price;
    double near = e.price(0.999 * 90.0, 60.0).price;
    double at = e.price(90.0 * (1.0 - 1e-9), 60.0).price;
    EXPECT_LT(near, far);
    EXPECT_LT(at, 1e-4 * 60.0);
    try {
        e.price(90.0, 60.0);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::BarrierBreached);
    }
}

TEST(UpOut, DistantBarrierGivesVanilla) {
    auto c = flat(0.02, 0.01, 1.0, 1.0);
    UpOutEngine e(make_bundle(c, 1.0), 600.0);
    for (double K : {55.0, 60.0, 62.0}) {
        double v = price_vanilla(c, 60.0, K, 1.0);
        EXPECT_LT(rel(e.price(60.0, K).price, v), 1e-3) << K;
    }
}

TEST(UpOut, ImageMethodRoundTrip) {
    for (double sigma : {20.0, 45.0}) {
        for (double T : {0.25, 1.0}) {
            auto c = flat(0.0, 0.0, sigma, T);
            UpOutEngine e(make_bundle(c, T), 90.0);
            for (double K : {50.0, 60.0, 70.0, 80.0}) {
                double ref = oracle::abm_double_barrier_call(60.0, K, 90.0, sigma, T);
                EXPECT_LT(rel(e.price(60.0, K).price, ref), 1e-6) << sigma << " " << T << " " << K;
            }
        }
    }
}

TEST(UpOut, BoundaryValuesVanish) {
    auto c = base_case();
    for (double T : kMaturities) {
        UpOutEngine e(make_bundle(c, T), 90.0);
        for (double K : kStrikes) {
            BarrierResult r = e.price(60.0, K);
            if (r.max_payoff == 0.0) continue;
            EXPECT_LE(std::fabs(r.u_at_zero), 1e-10 * r.max_payoff);
            EXPECT_LE(std::fabs(r.u_at_boundary), 1e-10 * r.max_payoff);
        }
    }
}

TEST(UpOut, KinkAtOrAboveBarrier) {
    UpOutEngine e(make_bundle(base_case(), 0.5), 90.0);
    BarrierResult r = e.price(60.0, 95.0);
    EXPECT_EQ(r.price, 0.0);
}

TEST(Surface, ShapeAndDominance) {
    auto c = base_case();
    PriceSurface s = price_surface_semi(c, base_case_request(), SemiNumerics{});
    ASSERT_EQ(s.cells.size(), kStrikes.size() * kMaturities.size());
    for (std::size_t t = 0; t < kMaturities.size(); ++t) {
        for (std::size_t k = 0; k < kStrikes.size(); ++k) {
            const SurfaceCell& cell = s.at(k, t);
            EXPECT_GE(cell.price, 0.0);
            EXPECT_LE(cell.price, price_vanilla(c, 60.0, cell.K, cell.T));
            if (k > 0) EXPECT_LT(cell.price, s.at(k - 1, t).price);
        }
        EXPECT_LT(s.at(kStrikes.size() - 1, t).price, 0.1 * s.at(0, t).price);
    }
}

TEST(Surface, Convergence) {
    auto c = base_case();
    SemiNumerics base;
    SemiNumerics fine = base;
    fine.barrier.n_z = 2 * base.barrier.n_z - 1;
    fine.barrier.n_tau = 2 * base.barrier.n_tau;
    fine.barrier.n_p = 2 * base.barrier.n_p;
    PriceSurface a = price_surface_semi(c, base_case_request(), base);
    PriceSurface b = price_surface_semi(c, base_case_request(), fine);
    for (std::size_t i = 0; i < a.cells.size(); ++i)
        EXPECT_LT(rel(a.cells[i].price, b.cells[i].price), 5e-4) << a.cells[i].K << " " << a.cells[i].T;
}

TEST(Surface, ThreadCountDoesNotChangePrices) {
    auto c = base_case();
    PriceSurface a = price_surface_semi(c, base_case_request(), SemiNumerics{}, 1);
    PriceSurface b = price_surface_semi(c, base_case_request(), SemiNumerics{}, 4);
    for (std::size_t i = 0; i < a.cells.size(); ++i) EXPECT_EQ(a.cells[i].price, b.cells[i].price);
}

TEST(Surface, FluxTermIsMaterial) {
    // the boundary flux moves base-case prices by several percent, and including it is what brings
    // the price onto the finite-difference reference
    auto c = base_case();
    SemiNumerics full, bare;
    bare.barrier.no_psi = true;
    SurfaceRequest one = base_case_request();
    one.strikes = {60.0};
    one.maturities = {1.0};
    double p_full = price_surface_semi(c, one, full).cells[0].price;
    double p_bare = price_surface_semi(c, one, bare).cells[0].price;
    FDNumerics fd;
    fd.N = 401;
    fd.dt = 0.0005;
    double p_fd = price_surface_fd(c, one, fd).cells[0].price;
    EXPECT_GT(rel(p_bare, p_full), 5e-3);
    EXPECT_LT(rel(p_full, p_fd), 1e-3);
    EXPECT_GT(rel(p_bare, p_fd), 10.0 * rel(p_full, p_fd));
}

TEST(Surface, ErrorsCarryCell) {
    SurfaceRequest r = base_case_request();
    r.S0 = 95.0;
    try {
        price_surface_semi(base_case(), r, SemiNumerics{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BarrierBreached);
        EXPECT_TRUE(std::isfinite(e.strike()));
        EXPECT_TRUE(std::isfinite(e.maturity()));
    }
    r = base_case_request();
    r.strikes.clear();
    EXPECT_THROW(price_surface_semi(base_case(), r, SemiNumerics{}), Error);
}

TEST(Surface, CsvRoundTrip) {
    PriceSurface s = price_surface_semi(base_case(), base_case_request(), SemiNumerics{});
    auto path = std::filesystem::temp_directory_path() / "heatprice_surface.csv";
    write_surface_csv(s, path.string());
    {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        EXPECT_EQ(header, "K,T,price,method,psi_share,runtime_ms");
    }
    PriceSurface back = read_surface_csv(path.string());
    ASSERT_EQ(back.cells.size(), s.cells.size());
    EXPECT_EQ(back.method, "semi");
    EXPECT_EQ(back.strikes, s.strikes);
    EXPECT_EQ(back.maturities, s.maturities);
    for (std::size_t i = 0; i < s.cells.size(); ++i) {
        EXPECT_EQ(back.cells[i].price, s.cells[i].price);
        EXPECT_EQ(back.cells[i].K, s.cells[i].K);
        EXPECT_EQ(back.cells[i].T, s.cells[i].T);
        EXPECT_EQ(back.cells[i].psi_share, s.cells[i].psi_share);
    }
    {
        std::ofstream out(path);
        out << "strike,T,price\n50,1,2\n";
    }
    try {
        read_surface_csv(path.string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LatticeMismatch);
    }
    std::filesystem::remove(path);
}

TEST(Vanilla, DeterministicLimit) {
    auto c = CoefficientCurve::exponential({0.02, 0.01, 1e-9, 0.1, 0.0}, 1.0);
    double ir = c.integrate(Field::r, 0.0, 1.0), iq = c.integrate(Field::q, 0.0, 1.0);
    for (double K : {40.0, 60.0, 61.0}) {
        double ref = std::exp(-ir) * std::max(60.0 * std::exp(ir - iq) - K, 0.0);
        EXPECT_NEAR(price_vanilla(c, 60.0, K, 1.0), ref, 1e-8);
    }
}

TEST(Vanilla, ConstantCoefficientsClosedFormAndMonteCarlo) {
    const double r = 0.03, q = 0.01, s = 25.0, T = 0.75;
    auto c = flat(r, q, s, T);
    for (double K : {50.0, 60.0, 75.0}) {
        double v = price_vanilla(c, 60.0, K, T);
        EXPECT_LT(rel(v, oracle::bachelier_drift_call(60.0, K, r, q, s, T)), 1e-12);
        oracle::MonteCarlo mc = oracle::mc_bachelier_drift_call(60.0, K, r, q, s, T, 1000000, 20261016);
        EXPECT_LT(std::fabs(v - mc.mean), 3.0 * mc.stderr_) << K;
    }
}

TEST(Vanilla, BaseAgainstFd) {
    auto c = base_case();
    FDGrid g = vanilla_grid(60.0, 90.0, 1.0, 801, 0.0005);
    FDSolution fd = solve_backward(c, g, [](double S) { return std::max(S - 60.0, 0.0); }, false);
    EXPECT_LT(rel(price_vanilla(c, 60.0, 60.0, 1.0), fd.value_at(60.0)), 2e-3);
}

TEST(DownOut, ParityIsExact) {
    auto c = base_case();
    UpOutEngine e(make_bundle(c, 1.0), 90.0);
    for (double K : {50.0, 60.0, 70.0}) {
        double dao = price_barrier_do_call(c, e, 60.0, K);
        EXPECT_DOUBLE_EQ(dao + e.price(60.0, K).price, price_vanilla(c, 60.0, K, 1.0));
    }
}

TEST(DownOut, DistantUpperBarrier) {
    // only the paths absorbed at zero remain in the difference
    auto c = base_case();
    TransformBundle b = make_bundle(c, 1.0);
    UpOutEngine e(b, 6000.0);
    double van = price_vanilla(c, 60.0, 60.0, 1.0);
    double dao = price_barrier_do_call(c, e, 60.0, 60.0);
    EXPECT_LT(dao, 2e-3 * van);
    EXPECT_NEAR(dao, van - price_european_absorbed(b, 60.0, 60.0), 1e-4 * van);
}

TEST(DownOut, FiniteDifferenceComplement) {
    auto c = base_case();
    for (double S0 : {20.0, 35.0}) {
        for (double K : {20.0, 40.0}) {
            UpOutEngine e(make_bundle(c, 1.0), 90.0);
            double semi = price_barrier_do_call(c, e, S0, K);
            FDGrid g = vanilla_grid(K, 90.0, 1.0, 801, 0.0005);
            FDSolution fd = solve_barrier_complement(c, g, K, 90.0);
            double ref = fd.value_at(S0);
            EXPECT_LT(rel(semi, ref), 1e-2) << S0 << " " << K << " semi " << semi << " fd " << ref;
        }
    }
}

TEST(American, NoDividendIsEuropean) {
    auto c = flat(0.03, 0.0, 45.0, 1.0);
    TransformBundle b = make_bundle(c, 1.0);
    for (double K : {50.0, 60.0, 70.0}) {
        AmericanResult a = price_american_call(b, 60.0, K);
        EXPECT_TRUE(a.fallback);
        EXPECT_LT(rel(a.price, a.european), 1e-6);
    }
}

TEST(American, Dominance) {
    auto c = CoefficientCurve::exponential({0.02, 0.03, 45.0, 0.1, 0.2}, 1.0);
    for (double T : {0.3, 1.0}) {
        TransformBundle b = make_bundle(c, T);
        for (double K : {40.0, 50.0, 60.0, 70.0}) {
            AmericanResult a = price_american_call(b, 60.0, K);
            EXPECT_GE(a.price, std::max(60.0 - K, a.european)) << K << " " << T;
        }
    }
}

TEST(American, AgainstProjectedScheme) {
    auto c = CoefficientCurve::exponential({0.02, 0.03, 45.0, 0.1, 0.2}, 1.0);
    TransformBundle b = make_bundle(c, 1.0);
    for (double K : {50.0, 60.0}) {
        AmericanResult a = price_american_call(b, 60.0, K);
        FDGrid g = american_grid(K, 90.0, 1.0, 401, 0.0005);
        FDSolution fd = solve_american_projected(c, g, [K](double S) { return std::max(S - K, 0.0); });
        EXPECT_LT(rel(a.price, fd.value_at(60.0)), 5e-3) << K;
    }
}

TEST(American, DeepInExerciseRegion) {
    auto c = CoefficientCurve::exponential({0.0, 0.2, 45.0, 0.0, 0.0}, 1.0);
    AmericanResult a = price_american_call(make_bundle(c, 1.0), 400.0, 20.0);
    EXPECT_TRUE(a.exercised);
    EXPECT_EQ(a.price, 380.0);
}
