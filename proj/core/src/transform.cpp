#include "heatprice/transform.hpp"

#include "heatprice/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_odeiv2.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace heatprice {

const char* to_string(TransformMode mode) {
    switch (mode) {
    case TransformMode::RiccatiNumeric: return "RiccatiNumeric";
    case TransformMode::SmallDriftApprox: return "SmallDriftApprox";
    case TransformMode::ClosedFormExponential: return "ClosedFormExponential";
    }
    return "Unknown";
}

namespace {

constexpr double kBlowUp = 1e6;

std::vector<double> uniform_grid(double T, std::size_t n_steps) {
    std::vector<double> t(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) t[i] = T * static_cast<double>(i) / static_cast<double>(n_steps);
    t.back() = T;
    return t;
}

double riccati_rhs(const CoefficientCurve& curve, double t, double w, bool left) {
    Coeffs c = left ? curve.eval_left(t) : curve.eval(t);
    Coeffs d = curve.derivative(t);
    double ls = d.sigma / c.sigma;
    double m = c.r - c.q;
    return 2.0 * m * ls - (m * m + d.r - d.q) + w * w + 2.0 * w * ls;
}

struct OdeParams {
    const CoefficientCurve* curve;
    double t_end;
};

int ode_rhs(double t, const double y[], double dydt[], void* p) {
    auto* op = static_cast<OdeParams*>(p);
    double tc = std::min(t, op->curve->horizon());
    bool left = t >= op->t_end;
    dydt[0] = riccati_rhs(*op->curve, tc, y[0], left);
    return std::isfinite(dydt[0]) ? GSL_SUCCESS : GSL_EBADFUNC;
}

// Trapezoid with end-point derivative correction; fourth order like Simpson.
std::vector<double> cumulative(const std::vector<double>& f, const std::vector<double>& df, double h) {
    std::vector<double> c(f.size(), 0.0);
    for (std::size_t i = 1; i < f.size(); ++i)
        c[i] = c[i - 1] + 0.5 * h * (f[i - 1] + f[i]) + h * h / 12.0 * (df[i - 1] - df[i]);
    return c;
}

void check_steps(std::size_t n_steps) {
    if (n_steps < 16) throw Error(ErrorCode::InvalidParameter, "n_steps must be at least 16");
}

} // namespace

double riccati_b(const CoefficientCurve& curve, double t, bool left) {
    Coeffs c = left ? curve.eval_left(t) : curve.eval(t);
    Coeffs d = curve.derivative(t);
    double m = c.r - c.q;
    return 2.0 * m * d.sigma / c.sigma - (m * m + d.r - d.q);
}

WGrid solve_riccati(const CoefficientCurve& curve, std::size_t n_steps, std::optional<double> w0) {
    check_steps(n_steps);
    WGrid out;
    out.mode = TransformMode::RiccatiNumeric;
    out.t = uniform_grid(curve.horizon(), n_steps);
    Coeffs c0 = curve.eval(0.0);
    double y = w0 ? *w0 : c0.q - c0.r;

    OdeParams params{&curve, 0.0};
    gsl_odeiv2_system sys{ode_rhs, nullptr, 1, &params};
    gsl_odeiv2_step* step = gsl_odeiv2_step_alloc(gsl_odeiv2_step_rkck, 1);
    gsl_odeiv2_control* control = gsl_odeiv2_control_y_new(1e-13, 1e-11);
    gsl_odeiv2_evolve* evolve = gsl_odeiv2_evolve_alloc(1);
    gsl_error_handler_t* old = gsl_set_error_handler_off();

    auto cleanup = [&] {
        gsl_set_error_handler(old);
        gsl_odeiv2_evolve_free(evolve);
        gsl_odeiv2_control_free(control);
        gsl_odeiv2_step_free(step);
    };

    out.w.push_back(y);
    double h = out.t[1] - out.t[0];
    for (std::size_t i = 0; i + 1 < out.t.size(); ++i) {
        double t = out.t[i];
        params.t_end = out.t[i + 1];
        gsl_odeiv2_evolve_reset(evolve);
        gsl_odeiv2_step_reset(step);
        double hstep = h;
        while (t < params.t_end) {
            int status = gsl_odeiv2_evolve_apply(evolve, control, step, &sys, &t, params.t_end, &hstep, &y);
            if (status != GSL_SUCCESS || !std::isfinite(y) || std::fabs(y) > kBlowUp) {
                cleanup();
                std::ostringstream os;
                os << "Riccati solution exceeds " << kBlowUp << " near t = " << t;
                throw Error(ErrorCode::BlowUp, os.str());
            }
        }
        out.w.push_back(y);
    }
    cleanup();

    out.dw.resize(out.t.size());
    for (std::size_t i = 0; i < out.t.size(); ++i)
        out.dw[i] = riccati_rhs(curve, out.t[i], out.w[i], i + 1 == out.t.size());
    return out;
}

WGrid restrict_w(const WGrid& master, const CoefficientCurve& curve, std::size_t n_steps) {
    check_steps(n_steps);
    if (master.mode != TransformMode::RiccatiNumeric)
        throw Error(ErrorCode::InvalidParameter, "only Riccati grids are restricted");
    const double T = curve.horizon();
    const double h = master.t[1] - master.t[0];
    if (T > master.t.back() * (1.0 + 1e-12)) throw Error(ErrorCode::OutOfDomain, "horizon beyond the solved grid");
    WGrid out;
    out.mode = master.mode;
    out.t = uniform_grid(T, n_steps);
    out.w.resize(out.t.size());
    out.dw.resize(out.t.size());
    const std::size_t last = master.t.size() - 1;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
        double t = std::min(out.t[i], master.t.back());
        std::size_t j = std::min(static_cast<std::size_t>(t / h), last - 1);
        double s = (t - master.t[j]) / h;
        if (s <= 0.0) {
            out.w[i] = master.w[j];
        } else if (s >= 1.0) {
            out.w[i] = master.w[j + 1];
        } else {
            double s2 = s * s, s3 = s2 * s;
            out.w[i] = (2 * s3 - 3 * s2 + 1) * master.w[j] + (s3 - 2 * s2 + s) * h * master.dw[j] +
                       (-2 * s3 + 3 * s2) * master.w[j + 1] + (s3 - s2) * h * master.dw[j + 1];
        }
        out.dw[i] = riccati_rhs(curve, out.t[i], out.w[i], i + 1 == out.t.size());
    }
    return out;
}

WGrid small_drift_w(const CoefficientCurve& curve, double D, std::size_t n_steps) {
    check_steps(n_steps);
    const double T = curve.horizon();
    double var_T = curve.integrate(Field::sigma_sq, 0.0, T);
    if (!(D > var_T)) {
        std::ostringstream os;
        os << "D = " << D << " must exceed int sigma^2 = " << var_T;
        throw Error(ErrorCode::InvalidParameter, os.str());
    }
    WGrid out;
    out.mode = TransformMode::SmallDriftApprox;
    out.D = D;
    out.t = uniform_grid(T, n_steps);
    double worst_t = -1.0;
    for (double t : out.t) {
        Coeffs c = curve.eval(t);
        Coeffs d = curve.derivative(t);
        double den = D - curve.integrate(Field::sigma_sq, 0.0, t);
        double s2 = c.sigma * c.sigma;
        out.w.push_back(s2 / den);
        out.dw.push_back((2.0 * c.sigma * d.sigma * den + s2 * s2) / (den * den));
        if (s2 < 10.0 * std::fabs(D * (c.r - c.q)) && worst_t < 0.0) worst_t = t;
    }
    if (worst_t >= 0.0) {
        std::ostringstream os;
        os << "small-drift validity sigma^2 >= 10 |D (r - q)| fails from t = " << worst_t;
        out.warnings.push_back(os.str());
    }
    return out;
}

WGrid closed_form_w(const CoefficientCurve& curve, std::size_t n_steps) {
    check_steps(n_steps);
    if (curve.kind() != CurveKind::ExponentialFamily)
        throw Error(ErrorCode::InvalidParameter, "closed-form w needs the exponential family");
    const ExponentialParams& p = curve.exponential_params();
    WGrid out;
    out.mode = TransformMode::ClosedFormExponential;
    out.t = uniform_grid(curve.horizon(), n_steps);
    for (double t : out.t) {
        double e = std::exp(-p.r_k * t);
        out.w.push_back(p.q0 - p.r0 * e);
        out.dw.push_back(p.r0 * p.r_k * e);
    }
    return out;
}

TransformBundle build_bundle(const CoefficientCurve& curve, const WGrid& wg) {
    if (wg.t.size() < 17 || wg.w.size() != wg.t.size() || wg.dw.size() != wg.t.size())
        throw Error(ErrorCode::InvalidParameter, "w grid is incomplete");
    if (std::fabs(wg.t.back() - curve.horizon()) > 1e-12 * curve.horizon())
        throw Error(ErrorCode::InvalidParameter, "w grid must end at the curve horizon");

    TransformBundle b;
    b.curve_ = curve;
    b.mode_ = wg.mode;
    b.t_ = wg.t;
    b.w_ = wg.w;
    b.dw_ = wg.dw;
    const std::size_t n = b.t_.size();
    b.h_ = b.t_.back() / static_cast<double>(n - 1);

    b.cw_ = cumulative(b.w_, b.dw_, b.h_);
    b.g_.resize(n);
    b.k_.resize(n);
    b.dk_.resize(n);
    b.a_.resize(n);
    std::vector<double> f(n), df(n);
    b.a_zero_ = true;
    for (std::size_t i = 0; i < n; ++i) {
        double t = b.t_[i];
        bool left = i + 1 == n;
        Coeffs c = left ? curve.eval_left(t) : curve.eval(t);
        Coeffs d = curve.derivative(t);
        double g = std::exp(b.cw_[i]);
        b.g_[i] = g;
        double ir = curve.integrate(Field::r, 0.0, t);
        double iq = curve.integrate(Field::q, 0.0, t);
        b.k_[i] = 0.5 * b.cw_[i] + 0.5 * (3.0 * ir - iq);
        b.dk_[i] = 0.5 * b.w_[i] + 0.5 * (3.0 * c.r - c.q);
        // g' = w g exactly, so a = (w + r - q) / (2 g^2 sigma^2)
        double num = b.w_[i] + c.r - c.q;
        b.a_[i] = num / (2.0 * g * g * c.sigma * c.sigma);
        if (std::fabs(num) > 1e-14 * (std::fabs(b.w_[i]) + std::fabs(c.r) + std::fabs(c.q) + 1e-300))
            b.a_zero_ = false;
        f[i] = 0.5 * c.sigma * c.sigma * g * g;
        df[i] = c.sigma * g * g * (d.sigma + c.sigma * b.w_[i]);
    }
    if (b.a_zero_) std::fill(b.a_.begin(), b.a_.end(), 0.0);
    std::vector<double> cum = cumulative(f, df, b.h_);
    b.tau_.resize(n);
    b.dtau_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        b.tau_[i] = cum.back() - cum[i];
        b.dtau_[i] = -f[i];
    }
    b.tau_.back() = 0.0;
    return b;
}

std::size_t TransformBundle::locate(double t) const {
    if (!(t >= 0.0 && t <= T() * (1.0 + 1e-14))) {
        std::ostringstream os;
        os << "t = " << t << " outside [0, " << T() << "]";
        throw Error(ErrorCode::OutOfDomain, os.str());
    }
    auto i = static_cast<std::size_t>(t / h_);
    return std::min(i, t_.size() - 2);
}

double TransformBundle::hermite(const std::vector<double>& y, const std::vector<double>& dy, double t) const {
    std::size_t i = locate(t);
    double s = (t - t_[i]) / h_;
    s = std::clamp(s, 0.0, 1.0);
    double s2 = s * s;
    double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y[i] + (s3 - 2 * s2 + s) * h_ * dy[i] + (-2 * s3 + 3 * s2) * y[i + 1] +
           (s3 - s2) * h_ * dy[i + 1];
}

double TransformBundle::w_at(double t) const { return hermite(w_, dw_, t); }

double TransformBundle::int_w(double t) const { return hermite(cw_, w_, t); }

double TransformBundle::g_at(double t) const { return std::exp(int_w(t)); }

double TransformBundle::k_at(double t) const { return hermite(k_, dk_, t); }

double TransformBundle::tau_at(double t) const { return hermite(tau_, dtau_, t); }

double TransformBundle::a_at(double t) const {
    if (a_zero_) {
        locate(t);
        return 0.0;
    }
    double tc = std::min(t, T());
    Coeffs c = curve_.eval(tc);
    double g = g_at(tc);
    return (w_at(tc) + c.r - c.q) / (2.0 * g * g * c.sigma * c.sigma);
}

double TransformBundle::eval_f(double x, double t) const { return k_at(t) - a_at(t) * x * x; }

double TransformBundle::invert_tau(double tau) const {
    const double t0 = tau0();
    if (!(tau >= 0.0 && tau <= t0 * (1.0 + 1e-14))) {
        std::ostringstream os;
        os << "tau = " << tau << " outside [0, " << t0 << "]";
        throw Error(ErrorCode::OutOfDomain, os.str());
    }
    if (tau >= t0) return 0.0;
    if (tau <= 0.0) return T();
    // tau_ is decreasing; find i with tau_[i] >= tau > tau_[i+1]
    auto it = std::lower_bound(tau_.begin(), tau_.end(), tau, [](double a, double b) { return a > b; });
    std::size_t j = static_cast<std::size_t>(it - tau_.begin());
    std::size_t i = j == 0 ? 0 : j - 1;
    i = std::min(i, t_.size() - 2);
    double lo = t_[i];
    double hi = t_[i + 1];
    double t = lo + (hi - lo) * (tau_[i] - tau) / (tau_[i] - tau_[i + 1]);
    for (int it_n = 0; it_n < 60; ++it_n) {
        double r = tau_at(t) - tau;
        if (std::fabs(r) <= 1e-15 * t0) break;
        if (r > 0.0) lo = t;
        else hi = t;
        double s = (t - t_[i]) / h_;
        double d = dtau_[i] + s * (dtau_[i + 1] - dtau_[i]);
        double tn = t - r / (d != 0.0 ? d : -1.0);
        t = (tn > lo && tn < hi) ? tn : 0.5 * (lo + hi);
        if (hi - lo < 1e-16 * T()) break;
    }
    return t;
}

void TransformBundle::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::InvalidParameter, "cannot open " + path);
    os.imbue(std::locale::classic());
    os << "t,w,g,k,a,tau\n" << std::setprecision(17);
    for (std::size_t i = 0; i < t_.size(); ++i)
        os << t_[i] << ',' << w_[i] << ',' << g_[i] << ',' << k_[i] << ',' << a_[i] << ',' << tau_[i] << '\n';
}

double MovingBoundary::at(double tau) const {
    if (tau_grid.empty()) throw Error(ErrorCode::InvalidParameter, "empty boundary");
    if (tau <= tau_grid.front()) return y.front();
    if (tau >= tau_grid.back()) return y.back();
    auto it = std::upper_bound(tau_grid.begin(), tau_grid.end(), tau);
    std::size_t i = static_cast<std::size_t>(it - tau_grid.begin()) - 1;
    double s = (tau - tau_grid[i]) / (tau_grid[i + 1] - tau_grid[i]);
    return y[i] + s * (y[i + 1] - y[i]);
}

MovingBoundary moving_boundary(const TransformBundle& bundle, double H, std::size_t n_tau) {
    if (!(H > 0.0)) throw Error(ErrorCode::InvalidParameter, "barrier must be positive");
    if (n_tau < 2) throw Error(ErrorCode::InvalidParameter, "boundary needs at least two nodes");
    MovingBoundary mb;
    const double t0 = bundle.tau0();
    for (std::size_t i = 0; i < n_tau; ++i) {
        double tau = t0 * static_cast<double>(i) / static_cast<double>(n_tau - 1);
        mb.tau_grid.push_back(tau);
        mb.y.push_back(H * bundle.g_at(bundle.invert_tau(tau)));
    }
    return mb;
}

MovingBoundary moving_boundary(const TransformBundle& bundle, double H, const std::vector<double>& tau_nodes) {
    if (!(H > 0.0)) throw Error(ErrorCode::InvalidParameter, "barrier must be positive");
    MovingBoundary mb;
    mb.tau_grid = tau_nodes;
    for (double tau : tau_nodes) mb.y.push_back(H * bundle.g_at(bundle.invert_tau(tau)));
    return mb;
}

double TerminalCondition::operator()(double z) const {
    if (z <= K1) return 0.0;
    return (z * std::exp(-W) - K) * std::exp(-kT + aT * z * z);
}

TerminalCondition make_terminal_condition(const TransformBundle& bundle, double K) {
    TerminalCondition tc;
    tc.K = K;
    tc.W = bundle.W();
    tc.K1 = K * std::exp(tc.W);
    tc.kT = bundle.k().back();
    tc.aT = bundle.a().back();
    return tc;
}

} // namespace heatprice
