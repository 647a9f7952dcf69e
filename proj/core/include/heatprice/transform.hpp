#pragma once

#include "heatprice/termstructure.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace heatprice {

enum class TransformMode { RiccatiNumeric, SmallDriftApprox, ClosedFormExponential };

const char* to_string(TransformMode mode);

// w(t) on a uniform grid over [0, T] together with its time derivative.
struct WGrid {
    std::vector<double> t;
    std::vector<double> w;
    std::vector<double> dw;
    TransformMode mode = TransformMode::RiccatiNumeric;
    double D = 0.0;
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kDefaultGridSteps = 2000;

// b(t) = 2 (r - q) sigma'/sigma - [(r - q)^2 + r' - q']
double riccati_b(const CoefficientCurve& curve, double t, bool left = false);

// w' = b + w^2 + 2 w sigma'/sigma, w(0) = q(0) - r(0) unless overridden.
WGrid solve_riccati(const CoefficientCurve& curve, std::size_t n_steps = kDefaultGridSteps,
                    std::optional<double> w0 = std::nullopt);
// Riccati solution on a longer horizon resampled onto n_steps over [0, curve.horizon()] (cubic Hermite).
WGrid restrict_w(const WGrid& master, const CoefficientCurve& curve, std::size_t n_steps);
// w(t) = sigma^2(t) / (D - int_0^t sigma^2)
WGrid small_drift_w(const CoefficientCurve& curve, double D, std::size_t n_steps = kDefaultGridSteps);
// w(t) = q0 - r0 e^{-r_k t}; exponential family only.
WGrid closed_form_w(const CoefficientCurve& curve, std::size_t n_steps = kDefaultGridSteps);

class TransformBundle {
public:
    const std::vector<double>& t_grid() const { return t_; }
    const std::vector<double>& w() const { return w_; }
    const std::vector<double>& g() const { return g_; }
    const std::vector<double>& k() const { return k_; }
    const std::vector<double>& a() const { return a_; }
    const std::vector<double>& tau() const { return tau_; }
    TransformMode mode() const { return mode_; }
    const CoefficientCurve& curve() const { return curve_; }

    double T() const { return t_.back(); }
    double tau0() const { return tau_.front(); }
    // int_0^T w
    double W() const { return cw_.back(); }

    // Cubic Hermite interpolation between grid nodes using exact node derivatives.
    double w_at(double t) const;
    double g_at(double t) const;
    double k_at(double t) const;
    double a_at(double t) const;
    double tau_at(double t) const;
    double int_w(double t) const;

    // f(x, t) = k(t) - a(t) x^2
    double eval_f(double x, double t) const;
    double invert_tau(double tau) const;
    // true when a(t) vanishes on the whole grid
    bool a_vanishes() const { return a_zero_; }

    void write_csv(const std::string& path) const;

private:
    friend TransformBundle build_bundle(const CoefficientCurve& curve, const WGrid& w);

    std::size_t locate(double t) const;
    double hermite(const std::vector<double>& y, const std::vector<double>& dy, double t) const;

    CoefficientCurve curve_ = CoefficientCurve::exponential({0, 0, 1, 0, 0}, 1.0);
    TransformMode mode_ = TransformMode::RiccatiNumeric;
    std::vector<double> t_, w_, dw_, cw_, g_, k_, dk_, a_, tau_, dtau_;
    double h_ = 0.0;
    bool a_zero_ = false;
};

TransformBundle build_bundle(const CoefficientCurve& curve, const WGrid& w);

struct MovingBoundary {
    std::vector<double> tau_grid;
    std::vector<double> y;

    // linear interpolation in tau
    double at(double tau) const;
};

MovingBoundary moving_boundary(const TransformBundle& bundle, double H, std::size_t n_tau);
// y(tau) = H g(t(tau)) at the given heat times
MovingBoundary moving_boundary(const TransformBundle& bundle, double H, const std::vector<double>& tau_nodes);

// Call payoff in heat coordinates: u(z, 0) = (z e^{-W} - K)^+ e^{-f(z, T)}, W = int_0^T w.
struct TerminalCondition {
    double K = 0.0;
    double K1 = 0.0;  // K e^{W}, the kink
    double W = 0.0;
    double kT = 0.0;
    double aT = 0.0;

    double operator()(double z) const;
};

TerminalCondition make_terminal_condition(const TransformBundle& bundle, double K);

} // namespace heatprice
