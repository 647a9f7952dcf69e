#include "heatprice/errors.hpp"
#include "heatprice/fredholm.hpp"
#include "heatprice/numerics.hpp"
#include "heatprice/theta.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace heatprice {

namespace {

constexpr double kPi = std::numbers::pi;

double phi(double z, double t) { return std::exp(-z * z / (4.0 * t)) / std::sqrt(4.0 * kPi * t); }

// Half-line Dirichlet kernel and its xi-derivative.
double g_inf(double x, double xi, double t) { return phi(xi - x, t) - phi(xi + x, t); }
double g_inf_dxi(double x, double xi, double t) {
    return -(xi - x) / (2.0 * t) * phi(xi - x, t) + (xi + x) / (2.0 * t) * phi(xi + x, t);
}

struct Kernel {
    double L;  // <= 0 selects the half-line kernel
    double G(double x, double xi, double t) const { return L > 0.0 ? heat_kernel(x, xi, L, t) : g_inf(x, xi, t); }
    double dG(double x, double xi, double t) const {
        return L > 0.0 ? heat_kernel_dxi(x, xi, L, t) : g_inf_dxi(x, xi, t);
    }
};

// Quadrature point on a boundary segment [v_{j-1}, v_j] in v = sqrt(s).
struct SegPoint {
    double s;     // heat time
    double ds;    // weight in s
    double frac;  // (v - v_{j-1}) / (v_j - v_{j-1})
    double dfrac; // d frac / ds
    double g, k, a;
};

struct Segment {
    std::vector<SegPoint> regular;
    std::vector<SegPoint> singular;  // clustered towards v_j
};

SegPoint make_point(const TransformBundle& b, double va, double vb, double v, double dv) {
    SegPoint p;
    p.s = v * v;
    p.ds = 2.0 * v * dv;
    p.frac = (v - va) / (vb - va);
    p.dfrac = 1.0 / ((vb - va) * 2.0 * v);
    double t = b.invert_tau(std::min(p.s, b.tau0()));
    p.g = b.g_at(t);
    p.k = b.k_at(t);
    p.a = b.a_at(t);
    return p;
}

class Marcher {
public:
    Marcher(const TransformBundle& bundle, double K, const AmericanNumerics& num)
        : b_(bundle), K_(K), num_(num), tc_(make_terminal_condition(bundle, K)) {
        const std::size_t n = num.n_nodes;
        const double tau0 = bundle.tau0();
        v_.resize(n + 1);
        tau_.resize(n + 1);
        t_.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            v_[i] = std::sqrt(tau0) * static_cast<double>(i) / static_cast<double>(n);
            tau_[i] = v_[i] * v_[i];
            t_[i] = i == 0 ? bundle.T() : (i == n ? 0.0 : bundle.invert_tau(tau_[i]));
        }
        tau_[n] = tau0;
        const num::Rule& rule = num::gauss_legendre(num.gl_points);
        seg_.resize(n + 1);
        for (std::size_t j = 1; j <= n; ++j) {
            double va = v_[j - 1];
            double vb = v_[j];
            for (std::size_t q = 0; q < rule.x.size(); ++q) {
                double x = rule.x[q];
                double w = rule.w[q];
                seg_[j].regular.push_back(make_point(b_, va, vb, va + (vb - va) * x, (vb - va) * w));
                // v = vb - (vb - va) x^2 removes the inverse square root at s = tau_j
                seg_[j].singular.push_back(make_point(b_, va, vb, vb - (vb - va) * x * x, 2.0 * (vb - va) * x * w));
            }
        }
        const num::Rule& zr = num::gauss_legendre(64);
        zx_ = zr.x;
        zw_ = zr.w;
    }

    std::size_t n() const { return num_.n_nodes; }
    const std::vector<double>& tau() const { return tau_; }
    const std::vector<double>& t() const { return t_; }

    double psi1(double y, double g, double k, double a) const {
        return std::exp(-(k - a * y * y)) * (y / g - K_);
    }
    double flux(double y, double g, double k, double a) const {
        return std::exp(-(k - a * y * y)) * (1.0 / g + 2.0 * a * y * (y / g - K_));
    }

    double payoff_term(const Kernel& ker, double x, double tau, double y0) const {
        if (y0 <= tc_.K1) return 0.0;
        double h = y0 - tc_.K1;
        double sum = 0.0;
        for (std::size_t i = 0; i < zx_.size(); ++i) {
            double z = tc_.K1 + h * zx_[i];
            sum += h * zw_[i] * tc_(z) * ker.G(x, z, tau);
        }
        return sum;
    }

    double segment_term(const Kernel& ker, std::size_t j, bool singular, double x, double tau,
                        const std::vector<double>& y) const {
        const auto& pts = singular ? seg_[j].singular : seg_[j].regular;
        double ya = y[j - 1];
        double dy = y[j] - ya;
        double sum = 0.0;
        for (const SegPoint& p : pts) {
            double yy = ya + dy * p.frac;
            double dyds = dy * p.dfrac;
            double dt = tau - p.s;
            if (dt <= 0.0) continue;
            double p1 = psi1(yy, p.g, p.k, p.a);
            double fl = flux(yy, p.g, p.k, p.a);
            sum += p.ds * ((fl + p1 * dyds) * ker.G(x, yy, dt) - p1 * ker.dG(x, yy, dt));
        }
        return sum;
    }

    // Residual of value matching at node i with trial boundary value y[i].
    double residual(std::size_t i, std::vector<double>& y) const {
        Kernel ker{0.0};
        double x = y[i];
        double tau = tau_[i];
        double sum = payoff_term(ker, x, tau, y[0]);
        for (std::size_t j = 1; j <= i; ++j) sum += segment_term(ker, j, j == i, x, tau, y);
        double g = b_.g_at(t_[i]);
        double p1 = psi1(x, g, b_.k_at(t_[i]), b_.a_at(t_[i]));
        return sum - 0.5 * p1;
    }

    double value(const Kernel& ker, double x, double tau_idx_value, const std::vector<double>& y) const {
        double sum = payoff_term(ker, x, tau_idx_value, y[0]);
        for (std::size_t j = 1; j <= n(); ++j) sum += segment_term(ker, j, j == n(), x, tau_idx_value, y);
        return sum;
    }

    double K1() const { return tc_.K1; }

private:
    const TransformBundle& b_;
    double K_;
    AmericanNumerics num_;
    TerminalCondition tc_;
    std::vector<double> v_, tau_, t_;
    std::vector<Segment> seg_;
    std::vector<double> zx_, zw_;
};

bool never_exercised(const CoefficientCurve& c) {
    const int n = 200;
    for (int i = 0; i <= n; ++i) {
        Coeffs v = c.eval(c.horizon() * i / n);
        if (v.q > 0.0 || v.r < 0.0) return false;
    }
    return true;
}

struct RootResult {
    double x;
    double f;
    std::size_t evals;
    bool converged;
    std::vector<double> history;
};

// Illinois regula falsi on a sign-changing bracket f(a) > 0 > f(b).
RootResult illinois(const std::function<double(double)>& f, double a, double fa, double b, double fb, double ftol,
                    double xtol, std::size_t max_iter, double damping) {
    RootResult r{std::fabs(fa) < std::fabs(fb) ? a : b, std::min(std::fabs(fa), std::fabs(fb)), 0, false, {}};
    r.history.push_back(r.f);
    int side = 0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        double c = (a * fb - b * fa) / (fb - fa);
        if (!(c > a && c < b)) c = 0.5 * (a + b);
        double fc = f(c);
        ++r.evals;
        if (std::fabs(fc) < r.f) {
            r.f = std::fabs(fc);
            r.x = c;
            r.history.push_back(r.f);
        }
        if (fc == 0.0 || r.f <= ftol || (b - a) <= xtol * std::max(std::fabs(a), std::fabs(b))) {
            r.converged = true;
            break;
        }
        if (fc * fb > 0.0) {
            b = c;
            fb = fc;
            if (side == -1) fa *= damping;
            side = -1;
        } else {
            a = c;
            fa = fc;
            if (side == +1) fb *= damping;
            side = +1;
        }
    }
    return r;
}

} // namespace

AmericanBoundary solve_american_boundary(const TransformBundle& bundle, double K, const AmericanNumerics& num) {
    if (!(K > 0.0)) throw Error(ErrorCode::InvalidParameter, "strike must be positive");
    if (num.n_nodes < 2 || num.gl_points < 2) throw Error(ErrorCode::InvalidParameter, "too few boundary nodes");
    if (!(num.damping > 0.0 && num.damping < 1.0)) throw Error(ErrorCode::InvalidParameter, "damping must be in (0, 1)");

    Marcher m(bundle, K, num);
    const std::size_t n = m.n();
    AmericanBoundary out;
    out.K = K;
    out.t = m.t();
    out.solution.tau_grid = m.tau();
    out.capped.assign(n + 1, false);
    out.node_history.resize(n + 1);
    std::vector<double>& y = out.solution.psi;
    y.assign(n + 1, 0.0);

    const CoefficientCurve& curve = bundle.curve();
    auto cap_at = [&](std::size_t i) { return num.cap_multiple * K * bundle.g_at(out.t[i]); };
    out.y_cap = cap_at(n);

    if (never_exercised(curve)) {
        for (std::size_t i = 0; i <= n; ++i) {
            y[i] = cap_at(i);
            out.capped[i] = true;
        }
        out.diverged = true;
        out.solution.iterations = 0;
        out.solution.residual_norm = 0.0;
    } else {
        Coeffs cT = curve.eval(bundle.T());
        double ratio = cT.q > 0.0 ? std::max(1.0, cT.r / cT.q) : num.cap_multiple;
        y[0] = std::min(m.K1() * ratio, cap_at(0));
        out.capped[0] = cT.q <= 0.0;

        const double ftol = num.tol * K;
        std::size_t evals = 0;
        double worst = 0.0;
        bool all_converged = true;
        for (std::size_t i = 1; i <= n; ++i) {
            auto R = [&](double yy) {
                y[i] = yy;
                ++evals;
                return m.residual(i, y);
            };
            const double lo0 = K * bundle.g_at(out.t[i]);
            const double cap = cap_at(i);
            double lo = lo0;
            double flo = R(lo);
            if (flo <= 0.0) {
                // boundary at or below the strike: project onto it
                y[i] = lo0;
                out.node_history[i] = {std::fabs(flo)};
                continue;
            }
            double hi = 0.0;
            double fhi = 0.0;
            bool found = false;
            // warm start from the previous node, then widen geometrically
            double guess = y[i - 1] * bundle.g_at(out.t[i]) / bundle.g_at(out.t[i - 1]);
            if (guess > lo && guess < cap) {
                double fg = R(guess);
                if (fg < 0.0) {
                    hi = guess;
                    fhi = fg;
                    found = true;
                } else {
                    lo = guess;
                    flo = fg;
                }
            }
            double step = 0.01;
            while (!found) {
                double trial = std::min(lo * (1.0 + step), cap);
                double ft = R(trial);
                if (ft < 0.0) {
                    hi = trial;
                    fhi = ft;
                    found = true;
                    break;
                }
                lo = trial;
                flo = ft;
                if (trial >= cap) break;
                step *= 1.5;
            }
            if (!found) {
                y[i] = cap;
                out.capped[i] = true;
                out.node_history[i] = {std::fabs(flo)};
                continue;
            }
            RootResult rr = illinois(R, lo, flo, hi, fhi, ftol, 1e-14, num.max_iter, num.damping);
            y[i] = rr.x;
            out.node_history[i] = rr.history;
            worst = std::max(worst, rr.f);
            all_converged = all_converged && rr.converged;
        }
        bool all_capped = true;
        for (std::size_t i = 1; i <= n; ++i) all_capped = all_capped && out.capped[i];
        out.diverged = all_capped;
        out.solution.iterations = evals;
        out.solution.residual_norm = worst / K;
        // on non-convergence the best iterate is kept; callers inspect converged and residual_norm
        out.solution.converged = all_converged;
    }

    out.S_B.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out.S_B[i] = y[i] / bundle.g_at(out.t[i]);
    for (std::size_t i = 1; i <= n; ++i) out.solution.residual_history.push_back(
        out.node_history[i].empty() ? 0.0 : out.node_history[i].back());
    return out;
}

double american_u(const TransformBundle& bundle, const AmericanBoundary& boundary, double x, double tau, double L,
                  std::size_t gl_points) {
    AmericanNumerics num;
    num.n_nodes = boundary.solution.psi.size() - 1;
    num.gl_points = gl_points;
    Marcher m(bundle, boundary.K, num);
    return m.value(Kernel{L}, x, tau, boundary.solution.psi);
}

} // namespace heatprice
