#include "heatprice/termstructure.hpp"

#include "heatprice/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace heatprice {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::EmptyPayoffRegion: return "EmptyPayoffRegion";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InvalidNome: return "InvalidNome";
    case ErrorCode::BarrierBreached: return "BarrierBreached";
    case ErrorCode::InstabilityDetected: return "InstabilityDetected";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::LatticeMismatch: return "LatticeMismatch";
    }
    return "Unknown";
}

namespace {

struct GslSpline {
    gsl_spline* s = nullptr;
    GslSpline(const std::vector<double>& x, const std::vector<double>& y) {
        const gsl_interp_type* type = x.size() >= 3 ? gsl_interp_steffen : gsl_interp_linear;
        s = gsl_spline_alloc(type, x.size());
        gsl_spline_init(s, x.data(), y.data(), x.size());
    }
    ~GslSpline() { gsl_spline_free(s); }
    GslSpline(const GslSpline&) = delete;
    GslSpline& operator=(const GslSpline&) = delete;

    // Null accelerator keeps evaluation reentrant.
    double value(double t) const { return gsl_spline_eval(s, t, nullptr); }
    double deriv(double t) const { return gsl_spline_eval_deriv(s, t, nullptr); }
    double integ(double a, double b) const { return gsl_spline_eval_integ(s, a, b, nullptr); }
};

double exp_integral(double c, double k, double t0, double t1) {
    // int_{t0}^{t1} c e^{-k s} ds
    if (k == 0.0) return c * (t1 - t0);
    return c * std::exp(-k * t0) * (-std::expm1(-k * (t1 - t0))) / k;
}

struct GslHandlerOff {
    gsl_error_handler_t* old;
    GslHandlerOff() : old(gsl_set_error_handler_off()) {}
    ~GslHandlerOff() { gsl_set_error_handler(old); }
};

} // namespace

struct CoefficientCurve::Spline {
    GslSpline r, q, sigma;
    Spline(const std::vector<double>& t, const std::vector<double>& rv, const std::vector<double>& qv,
           const std::vector<double>& sv)
        : r(t, rv), q(t, qv), sigma(t, sv) {}
};

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double epsrel,
                          double epsabs, std::size_t limit) {
    if (a == b) return 0.0;
    GslHandlerOff guard;
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(limit);
    gsl_function F;
    F.function = [](double x, void* p) { return (*static_cast<const std::function<double(double)>*>(p))(x); };
    F.params = const_cast<std::function<double(double)>*>(&f);
    double result = 0.0;
    double abserr = 0.0;
    int status = gsl_integration_qag(&F, a, b, epsabs, epsrel, limit, GSL_INTEG_GAUSS21, ws, &result, &abserr);
    gsl_integration_workspace_free(ws);
    if (status != GSL_SUCCESS) {
        std::ostringstream os;
        os << "adaptive quadrature on [" << a << ", " << b << "] stopped at error " << abserr << " ("
           << gsl_strerror(status) << ")";
        throw Error(ErrorCode::QuadratureFailure, os.str());
    }
    return result;
}

CoefficientCurve CoefficientCurve::exponential(const ExponentialParams& p, double horizon) {
    if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidParameter, "horizon must be positive");
    if (!(p.sigma0 > 0.0)) throw Error(ErrorCode::InvalidParameter, "sigma0 must be positive");
    CoefficientCurve c;
    c.kind_ = CurveKind::ExponentialFamily;
    c.horizon_ = horizon;
    c.exp_ = p;
    return c;
}

CoefficientCurve CoefficientCurve::piecewise_constant(std::vector<double> knots, std::vector<Coeffs> values,
                                                      double horizon) {
    if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidParameter, "horizon must be positive");
    if (knots.empty() || knots.size() != values.size())
        throw Error(ErrorCode::InvalidParameter, "piecewise curve needs one value per knot");
    if (knots.front() != 0.0) throw Error(ErrorCode::InvalidParameter, "first knot must be 0");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] > knots[i - 1])) throw Error(ErrorCode::InvalidParameter, "knots must increase");
    for (const auto& v : values)
        if (!(v.sigma > 0.0)) throw Error(ErrorCode::InvalidParameter, "sigma must be positive");
    CoefficientCurve c;
    c.kind_ = CurveKind::PiecewiseConstant;
    c.horizon_ = horizon;
    c.knots_ = std::move(knots);
    c.values_ = std::move(values);
    return c;
}

CoefficientCurve CoefficientCurve::sampled(std::vector<double> times, std::vector<Coeffs> values, double horizon) {
    if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidParameter, "horizon must be positive");
    if (times.size() < 2 || times.size() != values.size())
        throw Error(ErrorCode::InvalidParameter, "sampled curve needs at least two samples");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw Error(ErrorCode::InvalidParameter, "sample times must increase");
    if (times.front() > 0.0 || times.back() < horizon)
        throw Error(ErrorCode::InvalidParameter, "samples must cover [0, horizon]");
    std::vector<double> rv, qv, sv;
    for (const auto& v : values) {
        if (!(v.sigma > 0.0)) throw Error(ErrorCode::InvalidParameter, "sigma must be positive");
        rv.push_back(v.r);
        qv.push_back(v.q);
        sv.push_back(v.sigma);
    }
    CoefficientCurve c;
    c.kind_ = CurveKind::Sampled;
    c.horizon_ = horizon;
    c.knots_ = times;
    c.values_ = std::move(values);
    c.spline_ = std::make_shared<const Spline>(times, rv, qv, sv);
    return c;
}

CoefficientCurve CoefficientCurve::with_horizon(double horizon) const {
    if (!(horizon > 0.0) || horizon > horizon_ * (1.0 + 1e-12))
        throw Error(ErrorCode::OutOfDomain, "new horizon must lie in (0, current horizon]");
    CoefficientCurve c = *this;
    c.horizon_ = std::min(horizon, horizon_);
    return c;
}

void CoefficientCurve::check_domain(double t) const {
    if (!(t >= 0.0 && t <= horizon_)) {
        std::ostringstream os;
        os << "t = " << t << " outside [0, " << horizon_ << "]";
        throw Error(ErrorCode::OutOfDomain, os.str());
    }
}

void CoefficientCurve::check_interval(double t0, double t1) const {
    check_domain(t0);
    check_domain(t1);
    if (t0 > t1) throw Error(ErrorCode::OutOfDomain, "integration interval reversed");
}

std::size_t CoefficientCurve::piece(double t, bool left) const {
    auto it = left ? std::lower_bound(knots_.begin(), knots_.end(), t)
                   : std::upper_bound(knots_.begin(), knots_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - knots_.begin());
    return i == 0 ? 0 : i - 1;
}

Coeffs CoefficientCurve::eval(double t) const {
    check_domain(t);
    switch (kind_) {
    case CurveKind::ExponentialFamily:
        return {exp_.r0 * std::exp(-exp_.r_k * t), exp_.q0, exp_.sigma0 * std::exp(-exp_.sigma_k * t)};
    case CurveKind::PiecewiseConstant:
        return values_[piece(t, false)];
    case CurveKind::Sampled:
        return {spline_->r.value(t), spline_->q.value(t), spline_->sigma.value(t)};
    }
    return {};
}

Coeffs CoefficientCurve::eval_left(double t) const {
    if (kind_ != CurveKind::PiecewiseConstant) return eval(t);
    check_domain(t);
    return values_[piece(t, true)];
}

Coeffs CoefficientCurve::derivative(double t) const {
    check_domain(t);
    switch (kind_) {
    case CurveKind::ExponentialFamily:
        return {-exp_.r_k * exp_.r0 * std::exp(-exp_.r_k * t), 0.0,
                -exp_.sigma_k * exp_.sigma0 * std::exp(-exp_.sigma_k * t)};
    case CurveKind::PiecewiseConstant:
        return {0.0, 0.0, 0.0};
    case CurveKind::Sampled:
        return {spline_->r.deriv(t), spline_->q.deriv(t), spline_->sigma.deriv(t)};
    }
    return {};
}

double CoefficientCurve::integrate(Field f, double t0, double t1) const {
    check_interval(t0, t1);
    switch (kind_) {
    case CurveKind::ExponentialFamily:
        switch (f) {
        case Field::r: return exp_integral(exp_.r0, exp_.r_k, t0, t1);
        case Field::q: return exp_.q0 * (t1 - t0);
        case Field::sigma_sq: return exp_integral(exp_.sigma0 * exp_.sigma0, 2.0 * exp_.sigma_k, t0, t1);
        }
        break;
    case CurveKind::PiecewiseConstant: {
        double sum = 0.0;
        for (std::size_t i = piece(t0, false); i < knots_.size(); ++i) {
            double a = std::max(t0, knots_[i]);
            double b = i + 1 < knots_.size() ? std::min(t1, knots_[i + 1]) : t1;
            if (a >= t1) break;
            if (b <= a) continue;
            const Coeffs& v = values_[i];
            double val = f == Field::r ? v.r : f == Field::q ? v.q : v.sigma * v.sigma;
            sum += val * (b - a);
        }
        return sum;
    }
    case CurveKind::Sampled:
        switch (f) {
        case Field::r: return spline_->r.integ(t0, t1);
        case Field::q: return spline_->q.integ(t0, t1);
        case Field::sigma_sq: {
            // Split at sample times so every panel sees a single cubic.
            double sum = 0.0;
            double a = t0;
            auto it = std::upper_bound(knots_.begin(), knots_.end(), t0);
            while (a < t1) {
                double b = (it != knots_.end()) ? std::min(*it, t1) : t1;
                sum += integrate_adaptive(
                    [this](double s) {
                        double v = spline_->sigma.value(s);
                        return v * v;
                    },
                    a, b);
                a = b;
                if (it != knots_.end()) ++it;
            }
            return sum;
        }
        }
        break;
    }
    return 0.0;
}

double CoefficientCurve::integrate(const std::function<double(double)>& f, double t0, double t1) const {
    check_interval(t0, t1);
    if (kind_ == CurveKind::ExponentialFamily) return integrate_adaptive(f, t0, t1);
    double sum = 0.0;
    double a = t0;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t0);
    while (a < t1) {
        double b = (it != knots_.end()) ? std::min(*it, t1) : t1;
        if (b > a) sum += integrate_adaptive(f, a, b);
        a = b;
        if (it != knots_.end()) ++it;
    }
    return sum;
}

} // namespace heatprice
