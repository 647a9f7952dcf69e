#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace heatprice {

enum class CurveKind { ExponentialFamily, PiecewiseConstant, Sampled };

// r, q per year; sigma is an absolute (normal) volatility.
struct Coeffs {
    double r = 0.0;
    double q = 0.0;
    double sigma = 0.0;
};

enum class Field { r, q, sigma_sq };

struct ExponentialParams {
    double r0 = 0.0;
    double q0 = 0.0;
    double sigma0 = 0.0;
    double r_k = 0.0;
    double sigma_k = 0.0;
};

class CoefficientCurve {
public:
    // r(t) = r0 e^{-r_k t}, q(t) = q0, sigma(t) = sigma0 e^{-sigma_k t}
    static CoefficientCurve exponential(const ExponentialParams& p, double horizon);
    // values[i] holds on [knots[i], knots[i+1]); knots[0] must be 0.
    static CoefficientCurve piecewise_constant(std::vector<double> knots, std::vector<Coeffs> values,
                                               double horizon);
    // Monotone cubic through (times[i], values[i]); times must cover [0, horizon].
    static CoefficientCurve sampled(std::vector<double> times, std::vector<Coeffs> values, double horizon);

    CurveKind kind() const { return kind_; }
    double horizon() const { return horizon_; }
    const ExponentialParams& exponential_params() const { return exp_; }

    Coeffs eval(double t) const;
    // Left limit at t; differs from eval only at piecewise-constant knots.
    Coeffs eval_left(double t) const;
    // (r', q', sigma')
    Coeffs derivative(double t) const;

    double integrate(Field f, double t0, double t1) const;
    double integrate(const std::function<double(double)>& f, double t0, double t1) const;

    // Same coefficients on a shorter horizon.
    CoefficientCurve with_horizon(double horizon) const;

private:
    struct Spline;

    CoefficientCurve() = default;
    void check_domain(double t) const;
    void check_interval(double t0, double t1) const;
    std::size_t piece(double t, bool left) const;

    CurveKind kind_ = CurveKind::ExponentialFamily;
    double horizon_ = 0.0;
    ExponentialParams exp_;
    std::vector<double> knots_;
    std::vector<Coeffs> values_;
    std::shared_ptr<const Spline> spline_;
};

// Adaptive Gauss-Kronrod on [a, b]; throws QuadratureFailure if the tolerance is not met.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double epsrel = 1e-10,
                          double epsabs = 1e-14, std::size_t limit = 2000);

} // namespace heatprice
