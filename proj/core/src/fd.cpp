#include "heatprice/fd.hpp"

#include "heatprice/errors.hpp"
#include "heatprice/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace heatprice {

namespace {

using Clock = std::chrono::steady_clock;

enum class Edge { Fixed, Linear };

// Second-order central differences on a non-uniform grid. Interior rows are A*a + mu*b with
// A = sigma^2/2 and mu = r - q; the -r term is added when the rows are formed.
class Operator {
public:
    Operator(std::vector<double> S, Edge lower, Edge upper) : S_(std::move(S)), lower_(lower), upper_(upper) {
        const std::size_t n = S_.size();
        a_lo_.assign(n, 0.0), a_di_.assign(n, 0.0), a_up_.assign(n, 0.0);
        b_lo_.assign(n, 0.0), b_di_.assign(n, 0.0), b_up_.assign(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double hm = S_[i] - S_[i - 1], hp = S_[i + 1] - S_[i];
            a_lo_[i] = 2.0 / (hm * (hm + hp));
            a_up_[i] = 2.0 / (hp * (hm + hp));
            a_di_[i] = -2.0 / (hm * hp);
            b_lo_[i] = -S_[i] * hp / (hm * (hm + hp));
            b_up_[i] = S_[i] * hm / (hp * (hm + hp));
            b_di_[i] = -S_[i] * (hm - hp) / (hm * hp);
        }
        if (lower_ == Edge::Linear) {
            double h = S_[1] - S_[0];
            b_up_[0] = S_[0] / h;
            b_di_[0] = -S_[0] / h;
        }
        if (upper_ == Edge::Linear) {
            double h = S_[n - 1] - S_[n - 2];
            b_lo_[n - 1] = -S_[n - 1] / h;
            b_di_[n - 1] = S_[n - 1] / h;
        }
    }

    std::size_t size() const { return S_.size(); }

    // Writes L(t) into lo/di/up.
    void rows(const Coeffs& c, std::vector<double>& lo, std::vector<double>& di, std::vector<double>& up) const {
        const double A = 0.5 * c.sigma * c.sigma, mu = c.r - c.q;
        for (std::size_t i = 0; i < S_.size(); ++i) {
            lo[i] = A * a_lo_[i] + mu * b_lo_[i];
            di[i] = A * a_di_[i] + mu * b_di_[i] - c.r;
            up[i] = A * a_up_[i] + mu * b_up_[i];
        }
    }

    bool fixed_lower() const { return lower_ == Edge::Fixed; }
    bool fixed_upper() const { return upper_ == Edge::Fixed; }

private:
    std::vector<double> S_;
    Edge lower_, upper_;
    std::vector<double> a_lo_, a_di_, a_up_, b_lo_, b_di_, b_up_;
};

// One theta step from V(t_old) to V(t_new); fixed edges take the given values.
class Stepper {
public:
    explicit Stepper(const Operator& op) : op_(op) {
        const std::size_t n = op.size();
        for (auto* v : {&lo_, &di_, &up_, &mlo_, &mdi_, &mup_, &rhs_, &scratch_}) v->assign(n, 0.0);
    }

    void step(std::vector<double>& V, const Coeffs& c_old, const Coeffs& c_new, double dt, double theta,
              double lower_value, double upper_value, const std::vector<char>* pinned = nullptr,
              const std::vector<double>* pin_values = nullptr) {
        const std::size_t n = V.size();
        if (theta < 1.0) {
            op_.rows(c_old, lo_, di_, up_);
            const double e = (1.0 - theta) * dt;
            for (std::size_t i = 0; i < n; ++i) {
                double lv = di_[i] * V[i];
                if (i > 0) lv += lo_[i] * V[i - 1];
                if (i + 1 < n) lv += up_[i] * V[i + 1];
                rhs_[i] = V[i] + e * lv;
            }
        } else {
            rhs_ = V;
        }
        op_.rows(c_new, lo_, di_, up_);
        const double e = theta * dt;
        for (std::size_t i = 0; i < n; ++i) {
            mlo_[i] = -e * lo_[i];
            mdi_[i] = 1.0 - e * di_[i];
            mup_[i] = -e * up_[i];
        }
        auto fix = [&](std::size_t i, double value) {
            mlo_[i] = 0.0;
            mup_[i] = 0.0;
            mdi_[i] = 1.0;
            rhs_[i] = value;
        };
        if (op_.fixed_lower()) fix(0, lower_value);
        if (op_.fixed_upper()) fix(n - 1, upper_value);
        if (pinned)
            for (std::size_t i = 0; i < n; ++i)
                if ((*pinned)[i]) fix(i, (*pin_values)[i]);
        V = rhs_;
        num::solve_tridiagonal(mlo_, mdi_, mup_, V, scratch_);
    }

private:
    const Operator& op_;
    std::vector<double> lo_, di_, up_, mlo_, mdi_, mup_, rhs_, scratch_;
};

struct Schedule {
    const FDGrid& grid;
    double t_old(std::size_t n) const { return grid.T - static_cast<double>(n) * grid.dt(); }
    double t_new(std::size_t n) const {
        return n + 1 == grid.M ? 0.0 : grid.T - static_cast<double>(n + 1) * grid.dt();
    }
    double theta(std::size_t n) const { return n < grid.rannacher_steps ? 1.0 : 0.5; }
};

std::vector<double> sample(const FDGrid& g, const Payoff& payoff) {
    std::vector<double> v(g.S.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = payoff(g.S[i]);
    return v;
}

void check_stable(const std::vector<double>& V, double limit) {
    for (double v : V)
        if (!(std::abs(v) <= limit))
            throw Error(ErrorCode::InstabilityDetected, "finite-difference values exceed ten times the payoff maximum");
}

double payoff_limit(const std::vector<double>& pay) {
    double m = 0.0;
    for (double p : pay) m = std::max(m, std::abs(p));
    return 10.0 * m;
}

} // namespace

std::size_t FDGrid::node_of(double x) const {
    auto it = std::lower_bound(S.begin(), S.end(), x);
    if (it == S.end() || *it != x) throw Error(ErrorCode::InvalidParameter, "value is not a grid node");
    return static_cast<std::size_t>(it - S.begin());
}

void FDGrid::validate() const {
    if (S.size() < 51) throw Error(ErrorCode::InvalidParameter, "FD grid needs at least 51 nodes");
    if (M < 10) throw Error(ErrorCode::InvalidParameter, "FD grid needs at least 10 time steps");
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidParameter, "maturity must be positive");
    for (std::size_t i = 1; i < S.size(); ++i)
        if (!(S[i] > S[i - 1])) throw Error(ErrorCode::InvalidParameter, "FD nodes must be strictly increasing");
}

FDGrid make_fd_grid(double lo, double hi, std::size_t N, const std::vector<double>& centres, double alpha,
                    const std::vector<double>& snap, double T, double dt, std::size_t rannacher_steps) {
    if (!(hi > lo) || N < 3 || !(alpha > 0.0) || !(dt > 0.0))
        throw Error(ErrorCode::InvalidParameter, "bad FD grid parameters");
    // cumulative node density: a small uniform floor plus asinh clusters
    const double floor = 0.1 * static_cast<double>(std::max<std::size_t>(centres.size(), 1));
    auto cum = [&](double s) {
        double v = floor * s;
        for (double c : centres) v += alpha * std::asinh((s - c) / alpha);
        return v;
    };
    const double c0 = cum(lo), c1 = cum(hi);
    FDGrid g;
    g.T = T;
    g.M = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    g.rannacher_steps = rannacher_steps;
    g.S.resize(N);
    g.S.front() = lo;
    g.S.back() = hi;
    for (std::size_t i = 1; i + 1 < N; ++i) {
        double target = c0 + (c1 - c0) * static_cast<double>(i) / static_cast<double>(N - 1);
        double a = lo, b = hi;
        for (int it = 0; it < 200 && b - a > 1e-13 * (hi - lo); ++it) {
            double m = 0.5 * (a + b);
            (cum(m) < target ? a : b) = m;
        }
        g.S[i] = 0.5 * (a + b);
    }
    std::vector<char> taken(N, 0);
    taken.front() = taken.back() = 1;
    std::vector<double> targets = snap;
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    for (double x : targets) {
        if (x == lo || x == hi) continue;
        if (!(x > lo && x < hi)) throw Error(ErrorCode::InvalidParameter, "snap point outside the FD grid");
        std::size_t best = N;
        for (std::size_t i = 1; i + 1 < N; ++i)
            if (!taken[i] && (best == N || std::abs(g.S[i] - x) < std::abs(g.S[best] - x))) best = i;
        if (best == N) throw Error(ErrorCode::InvalidParameter, "too many snap points for the FD grid");
        g.S[best] = x;
        taken[best] = 1;
    }
    std::sort(g.S.begin(), g.S.end());
    g.validate();
    return g;
}

FDGrid barrier_grid(double K, double H, double T, std::size_t N, double dt, std::size_t rannacher_steps) {
    std::vector<double> snap;
    if (K > 0.0 && K < H) snap.push_back(K);
    return make_fd_grid(0.0, H, N, {K, H}, 0.2 * H, snap, T, dt, rannacher_steps);
}

FDGrid american_grid(double K, double H, double T, std::size_t N, double dt, std::size_t rannacher_steps) {
    double top = std::max(4.0 * K, 2.0 * H);
    std::vector<double> snap{K};
    if (H > 0.0 && H < top) snap.push_back(H);
    return make_fd_grid(0.0, top, N, {K}, 0.2 * std::max(H, K), snap, T, dt, rannacher_steps);
}

FDGrid vanilla_grid(double K, double H, double T, std::size_t N, double dt, std::size_t rannacher_steps) {
    double top = std::max(4.0 * K, 2.0 * H);
    std::vector<double> snap{0.0, K};
    if (H > 0.0 && H < top) snap.push_back(H);
    std::vector<double> centres{K};
    if (H > 0.0) centres.push_back(H);
    return make_fd_grid(-top, top, N, centres, 0.2 * std::max(H, K), snap, T, dt, rannacher_steps);
}

double FDSolution::value_at(double x) const {
    const std::size_t n = S.size();
    if (!(x >= S.front() && x <= S.back())) throw Error(ErrorCode::OutOfDomain, "point outside the FD grid");
    std::size_t j = static_cast<std::size_t>(std::upper_bound(S.begin(), S.end(), x) - S.begin());
    // four-point Lagrange stencil around x
    std::size_t s = j >= 2 ? j - 2 : 0;
    s = std::min(s, n - 4);
    double v = 0.0;
    for (std::size_t a = s; a < s + 4; ++a) {
        double l = 1.0;
        for (std::size_t b = s; b < s + 4; ++b)
            if (b != a) l *= (x - S[b]) / (S[a] - S[b]);
        v += l * V[a];
    }
    return v;
}

FDSolution solve_backward(const CoefficientCurve& curve, const FDGrid& grid, const Payoff& payoff, bool barrier_flag) {
    grid.validate();
    Operator op(grid.S, grid.S.front() >= 0.0 ? Edge::Fixed : Edge::Linear, barrier_flag ? Edge::Fixed : Edge::Linear);
    Stepper stepper(op);
    std::vector<double> V = sample(grid, payoff);
    const double limit = payoff_limit(V);
    if (op.fixed_lower()) V.front() = 0.0;
    if (op.fixed_upper()) V.back() = 0.0;
    Schedule sch{grid};
    for (std::size_t n = 0; n < grid.M; ++n) {
        double dt = sch.t_old(n) - sch.t_new(n);
        stepper.step(V, curve.eval(sch.t_old(n)), curve.eval(sch.t_new(n)), dt, sch.theta(n), 0.0, 0.0);
        check_stable(V, limit);
    }
    return FDSolution{grid.S, std::move(V), {}, {}};
}

FDSolution solve_american_projected(const CoefficientCurve& curve, const FDGrid& grid, const Payoff& payoff) {
    grid.validate();
    if (grid.S.front() != 0.0) throw Error(ErrorCode::InvalidParameter, "American grid must start at 0");
    Operator op(grid.S, Edge::Fixed, Edge::Linear);
    Stepper stepper(op);
    const std::vector<double> pay = sample(grid, payoff);
    const double limit = payoff_limit(pay);
    std::vector<double> V = pay;
    V.front() = 0.0;
    std::vector<double> prev;
    std::vector<char> pinned(V.size(), 0);
    FDSolution out;
    out.S = grid.S;
    Schedule sch{grid};
    for (std::size_t n = 0; n < grid.M; ++n) {
        double dt = sch.t_old(n) - sch.t_new(n);
        Coeffs c_old = curve.eval(sch.t_old(n)), c_new = curve.eval(sch.t_new(n));
        prev = V;
        stepper.step(V, c_old, c_new, dt, sch.theta(n), 0.0, 0.0);
        bool any = false;
        for (std::size_t i = 1; i < V.size(); ++i) {
            pinned[i] = V[i] <= pay[i] && pay[i] > 0.0;
            any = any || pinned[i];
        }
        if (any) {
            V = prev;
            stepper.step(V, c_old, c_new, dt, sch.theta(n), 0.0, 0.0, &pinned, &pay);
        }
        for (std::size_t i = 1; i < V.size(); ++i) V[i] = std::max(V[i], pay[i]);
        check_stable(V, limit);
        double sb = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t i = 1; i < V.size(); ++i)
            if (pay[i] > 0.0 && V[i] - pay[i] <= 1e-12 * std::max(1.0, pay[i])) {
                sb = grid.S[i];
                break;
            }
        out.boundary_t.push_back(sch.t_new(n));
        out.boundary_S.push_back(sb);
    }
    out.V = std::move(V);
    return out;
}

FDSolution solve_barrier_complement(const CoefficientCurve& curve, const FDGrid& grid, double K, double H) {
    grid.validate();
    const std::size_t i0 = grid.node_of(0.0), iH = grid.node_of(H);
    if (iH - i0 < 3) throw Error(ErrorCode::InvalidParameter, "too few nodes between 0 and H");
    Operator full(grid.S, grid.S.front() >= 0.0 ? Edge::Fixed : Edge::Linear, Edge::Linear);
    std::vector<double> sub_S(grid.S.begin() + static_cast<std::ptrdiff_t>(i0),
                              grid.S.begin() + static_cast<std::ptrdiff_t>(iH) + 1);
    Operator part(sub_S, Edge::Fixed, Edge::Fixed);
    Stepper step_full(full), step_part(part);
    auto call = [K](double s) { return std::max(s - K, 0.0); };
    std::vector<double> V = sample(grid, call);
    // the two payoffs cancel below H; only the edge value survives
    std::vector<double> U(sub_S.size(), 0.0);
    U.back() = call(H);
    const double limit = payoff_limit(V);
    Schedule sch{grid};
    for (std::size_t n = 0; n < grid.M; ++n) {
        double dt = sch.t_old(n) - sch.t_new(n);
        Coeffs c_old = curve.eval(sch.t_old(n)), c_new = curve.eval(sch.t_new(n));
        step_full.step(V, c_old, c_new, dt, sch.theta(n), 0.0, 0.0);
        step_part.step(U, c_old, c_new, dt, sch.theta(n), V[i0], V[iH]);
        check_stable(V, limit);
        check_stable(U, limit);
    }
    return FDSolution{std::move(sub_S), std::move(U), {}, {}};
}

PriceSurface price_surface_fd(const CoefficientCurve& curve, const SurfaceRequest& req, const FDNumerics& num,
                              std::size_t threads) {
    auto wall0 = Clock::now();
    PriceSurface out;
    out.method = "fd";
    out.strikes = req.strikes;
    out.maturities = req.maturities;
    const std::size_t nk = req.strikes.size(), ncell = nk * req.maturities.size();
    out.cells.resize(ncell);
    auto call_of = [](double K) { return [K](double s) { return std::max(s - K, 0.0); }; };

    auto run_cell = [&](std::size_t idx) {
        auto t0 = Clock::now();
        const double K = req.strikes[idx % nk], T = req.maturities[idx / nk];
        CoefficientCurve c = curve.with_horizon(T);
        SurfaceCell& cell = out.cells[idx];
        cell.K = K;
        cell.T = T;
        switch (req.product) {
        case Product::UpOutCall:
            if (K < req.H)
                cell.price = solve_backward(c, barrier_grid(K, req.H, T, num.N, num.dt, num.rannacher_steps),
                                            call_of(K), true)
                                 .value_at(req.S0);
            break;
        case Product::DownOutCall:
            cell.price = solve_barrier_complement(c, vanilla_grid(K, req.H, T, num.N, num.dt, num.rannacher_steps),
                                                  K, req.H)
                             .value_at(req.S0);
            break;
        case Product::EuropeanCall:
            cell.price = solve_backward(c, vanilla_grid(K, req.H, T, num.N, num.dt, num.rannacher_steps),
                                        call_of(K), false)
                             .value_at(req.S0);
            break;
        case Product::AmericanCall:
            cell.price = solve_american_projected(c, american_grid(K, req.H, T, num.N, num.dt, num.rannacher_steps),
                                                  call_of(K))
                             .value_at(req.S0);
            break;
        }
        cell.runtime_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };
    auto run = [&](std::size_t idx) {
        try {
            run_cell(idx);
        } catch (const Error& e) {
            throw e.at_cell(req.strikes[idx % nk], req.maturities[idx / nk]);
        }
    };

    std::size_t nt = std::max<std::size_t>(1, std::min(threads, ncell));
    if (nt == 1) {
        for (std::size_t i = 0; i < ncell; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(nt);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nt; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i; (i = next.fetch_add(1)) < ncell;) run(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    for (const SurfaceCell& cell : out.cells) out.times.fd_ms += cell.runtime_ms;
    out.times.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - wall0).count();
    return out;
}

} // namespace heatprice
