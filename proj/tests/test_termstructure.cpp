#include "heatprice/errors.hpp"
#include "heatprice/termstructure.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace heatprice;

namespace {

const ExponentialParams kBase{0.02, 0.01, 45.0, 0.1, 0.2};

CoefficientCurve base_case(double horizon = 1.0) { return CoefficientCurve::exponential(kBase, horizon); }

CoefficientCurve three_pieces() {
    return CoefficientCurve::piecewise_constant({0.0, 0.4, 0.7},
                                                {{0.03, 0.01, 40.0}, {0.02, 0.015, 35.0}, {0.01, 0.0, 50.0}}, 1.0);
}

CoefficientCurve sampled_curve() {
    std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<Coeffs> v{{0.02, 0.01, 45.0}, {0.021, 0.011, 43.0}, {0.023, 0.012, 40.0},
                          {0.022, 0.012, 38.0}, {0.02, 0.013, 37.0}};
    return CoefficientCurve::sampled(t, v, 1.0);
}

} // namespace

TEST(Eval, BaseAtOrigin) {
    Coeffs c = base_case().eval(0.0);
    EXPECT_EQ(c.r, 0.02);
    EXPECT_EQ(c.q, 0.01);
    EXPECT_EQ(c.sigma, 45.0);
}

TEST(Eval, ExponentialDecay) {
    Coeffs c = base_case(10.0).eval(10.0);
    EXPECT_NEAR(c.r, 0.0073576, 1e-7);
    EXPECT_DOUBLE_EQ(c.r, 0.02 * std::exp(-1.0));
    EXPECT_DOUBLE_EQ(c.sigma, 45.0 * std::exp(-2.0));
}

TEST(Eval, ClosedFormsToMachinePrecision) {
    auto c = base_case();
    oracle::ExpFamily ex{0.02, 0.01, 45.0, 0.1, 0.2};
    for (double t = 0.0; t <= 1.0; t += 0.01) {
        Coeffs v = c.eval(t);
        EXPECT_NEAR(v.r, ex.r0 * std::exp(-ex.rk * t), 1e-17);
        EXPECT_NEAR(v.sigma, ex.s0 * std::exp(-ex.sk * t), 1e-13);
        EXPECT_EQ(v.q, 0.01);
    }
}

TEST(Eval, SinglePieceIsConstant) {
    auto c = CoefficientCurve::piecewise_constant({0.0}, {{0.03, 0.0, 40.0}}, 2.0);
    for (double t : {0.0, 0.3, 1.7, 2.0}) {
        Coeffs v = c.eval(t);
        EXPECT_EQ(v.r, 0.03);
        EXPECT_EQ(v.q, 0.0);
        EXPECT_EQ(v.sigma, 40.0);
    }
}

TEST(Eval, PiecewiseLeftLimitAtKnot) {
    auto c = three_pieces();
    EXPECT_EQ(c.eval(0.4).sigma, 35.0);
    EXPECT_EQ(c.eval_left(0.4).sigma, 40.0);
}

TEST(Eval, OutOfDomain) {
    auto c = base_case();
    for (double t : {-1e-9, 1.0 + 1e-9, 5.0}) {
        try {
            c.eval(t);
            FAIL() << "no throw at t=" << t;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::OutOfDomain);
        }
    }
    EXPECT_THROW(c.integrate(Field::r, 0.5, 1.5), Error);
    EXPECT_THROW(c.integrate(Field::r, 0.6, 0.5), Error);
}

TEST(Eval, RejectsNonPositiveSigma) {
    EXPECT_THROW(CoefficientCurve::exponential({0.02, 0.01, 0.0, 0.1, 0.2}, 1.0), Error);
    EXPECT_THROW(CoefficientCurve::piecewise_constant({0.0}, {{0.0, 0.0, -1.0}}, 1.0), Error);
    EXPECT_THROW(CoefficientCurve::piecewise_constant({0.1}, {{0.0, 0.0, 1.0}}, 1.0), Error);
}

TEST(Eval, SampledInterpolatesKnots) {
    auto c = sampled_curve();
    EXPECT_DOUBLE_EQ(c.eval(0.5).sigma, 40.0);
    EXPECT_DOUBLE_EQ(c.eval(0.75).r, 0.022);
    // monotone between monotone samples
    double prev = c.eval(0.0).sigma;
    for (double t = 0.01; t <= 1.0; t += 0.01) {
        double s = c.eval(t).sigma;
        EXPECT_LE(s, prev + 1e-12);
        prev = s;
    }
}

TEST(Integrate, RateOverUnitInterval) {
    EXPECT_NEAR(base_case().integrate(Field::r, 0.0, 1.0), 0.01903252, 1e-8);
    EXPECT_DOUBLE_EQ(base_case().integrate(Field::r, 0.0, 1.0), 0.2 * (1.0 - std::exp(-0.1)));
}

TEST(Integrate, SigmaSquaredIsEffectiveVariance) {
    double T = 1.0;
    double v = base_case().integrate(Field::sigma_sq, 0.0, T);
    double ref = 45.0 * 45.0 * (1.0 - std::exp(-0.4 * T)) / 0.4;
    EXPECT_NEAR(v / ref, 1.0, 1e-14);
    auto avg = CoefficientCurve::piecewise_constant({0.0}, {{0.0, 0.0, std::sqrt(v / T)}}, T);
    EXPECT_NEAR(avg.integrate(Field::sigma_sq, 0.0, T) / v, 1.0, 1e-14);
}

TEST(Integrate, PiecewiseConstantQ) {
    auto c = CoefficientCurve::piecewise_constant({0.0}, {{0.0, 0.01, 30.0}}, 1.0);
    EXPECT_NEAR(c.integrate(Field::q, 0.0, 0.5), 0.005, 1e-17);
}

TEST(Integrate, AcrossKnots) {
    auto c = three_pieces();
    double ref = 40.0 * 40.0 * 0.4 + 35.0 * 35.0 * 0.3 + 50.0 * 50.0 * 0.3;
    EXPECT_NEAR(c.integrate(Field::sigma_sq, 0.0, 1.0) / ref, 1.0, 1e-14);
}

TEST(IntegrateProperty, Additivity) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const auto& c : {base_case(), three_pieces(), sampled_curve()}) {
        for (int i = 0; i < 100; ++i) {
            double t[3] = {U(rng), U(rng), U(rng)};
            std::sort(t, t + 3);
            for (Field f : {Field::r, Field::q, Field::sigma_sq}) {
                double whole = c.integrate(f, t[0], t[2]);
                double parts = c.integrate(f, t[0], t[1]) + c.integrate(f, t[1], t[2]);
                EXPECT_NEAR(whole, parts, 1e-12 * std::max(std::fabs(whole), 1e-300) + 1e-300);
            }
        }
    }
}

TEST(IntegrateProperty, AnalyticMatchesQuadrature) {
    auto c = base_case();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        double a = U(rng), b = U(rng);
        if (a > b) std::swap(a, b);
        if (b - a < 1e-6) continue;
        double an_r = c.integrate(Field::r, a, b);
        double qu_r = c.integrate([&](double s) { return c.eval(s).r; }, a, b);
        EXPECT_NEAR(qu_r / an_r, 1.0, 1e-9);
        double an_s = c.integrate(Field::sigma_sq, a, b);
        double qu_s = c.integrate([&](double s) { return c.eval(s).sigma * c.eval(s).sigma; }, a, b);
        EXPECT_NEAR(qu_s / an_s, 1.0, 1e-9);
        // independent Gauss-Kronrod
        EXPECT_NEAR(oracle::quad([&](double s) { return 0.02 * std::exp(-0.1 * s); }, a, b) / an_r, 1.0, 1e-12);
    }
}

TEST(IntegrateProperty, DerivativeMatchesCentredDifference) {
    const double h = 1e-6;
    for (const auto& c : {base_case(), sampled_curve()}) {
        for (double t = 0.05; t < 0.96; t += 0.07) {
            Coeffs d = c.derivative(t);
            Coeffs up = c.eval(t + h), dn = c.eval(t - h);
            double fr = (up.r - dn.r) / (2 * h);
            double fq = (up.q - dn.q) / (2 * h);
            double fs = (up.sigma - dn.sigma) / (2 * h);
            // relative, with the level of the coefficient as the floor for flat stretches
            Coeffs v = c.eval(t);
            EXPECT_NEAR(d.r, fr, 1e-5 * std::max(std::fabs(fr), v.r));
            EXPECT_NEAR(d.q, fq, 1e-5 * std::max(std::fabs(fq), v.q));
            EXPECT_NEAR(d.sigma, fs, 1e-5 * std::max(std::fabs(fs), v.sigma));
        }
    }
}

TEST(Integrate, CustomFunctionAndFailure) {
    auto c = base_case();
    EXPECT_NEAR(c.integrate([](double s) { return s * s; }, 0.0, 1.0), 1.0 / 3.0, 1e-14);
    try {
        integrate_adaptive([](double s) { return 1.0 / std::sqrt(std::fabs(s - 0.3)) * std::sin(1e4 / (s - 0.3)); },
                           0.0, 1.0, 1e-14, 0.0, 4);
        FAIL() << "expected QuadratureFailure";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::QuadratureFailure);
    }
}

TEST(Curve, WithHorizon) {
    auto c = base_case().with_horizon(0.5);
    EXPECT_EQ(c.horizon(), 0.5);
    EXPECT_THROW(c.eval(0.6), Error);
    EXPECT_THROW(base_case().with_horizon(2.0), Error);
}
