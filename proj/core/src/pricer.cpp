#include "heatprice/pricer.hpp"

#include "heatprice/errors.hpp"
#include "heatprice/numerics.hpp"
#include "heatprice/theta.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace heatprice {

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double max_level(const TransformBundle& b, double H) {
    return H * *std::max_element(b.g().begin(), b.g().end());
}

// int_{K1}^inf (z - K1) [phi(z - x) - phi(z + x)] dz for the heat kernel of variance 2 tau
double absorbed_linear(double x, double K1, double tau) {
    double s = std::sqrt(2.0 * tau);
    auto psi = [](double d) { return d * num::norm_cdf(d) + num::norm_pdf(d); };
    return s * (psi((x - K1) / s) - psi((-x - K1) / s));
}

} // namespace

const char* to_string(Product p) {
    switch (p) {
    case Product::UpOutCall: return "UpOutCall";
    case Product::DownOutCall: return "DownOutCall";
    case Product::AmericanCall: return "AmericanCall";
    case Product::EuropeanCall: return "EuropeanCall";
    }
    return "Unknown";
}

Product product_from_string(const std::string& s) {
    if (s == "UpOutCall") return Product::UpOutCall;
    if (s == "DownOutCall") return Product::DownOutCall;
    if (s == "AmericanCall") return Product::AmericanCall;
    if (s == "EuropeanCall") return Product::EuropeanCall;
    throw Error(ErrorCode::ConfigError, "unknown product '" + s + "'");
}

TransformBundle make_bundle(const CoefficientCurve& curve, double T, const TransformChoice& choice) {
    CoefficientCurve c = curve.with_horizon(T);
    switch (choice.mode) {
    case TransformMode::RiccatiNumeric: return build_bundle(c, solve_riccati(c, choice.grid_steps, choice.w0));
    case TransformMode::SmallDriftApprox: return build_bundle(c, small_drift_w(c, choice.D, choice.grid_steps));
    case TransformMode::ClosedFormExponential: return build_bundle(c, closed_form_w(c, choice.grid_steps));
    }
    throw Error(ErrorCode::InvalidParameter, "unknown transform mode");
}

TransformBundle make_bundle(const CoefficientCurve& curve, double T, const WGrid& master) {
    CoefficientCurve c = curve.with_horizon(T);
    const double Tm = master.t.back();
    const std::size_t steps = master.t.size() - 1;
    if (T == Tm) return build_bundle(c, master);
    auto n = static_cast<std::size_t>(std::ceil(static_cast<double>(steps) * T / Tm - 1e-9));
    return build_bundle(c, restrict_w(master, c, std::max<std::size_t>(n, 16)));
}

TerminalCondition terminal_condition(const TransformBundle& bundle, double K) {
    return make_terminal_condition(bundle, K);
}

BarrierResult price_barrier_uo_call(const TransformBundle& bundle, const MovingBoundary& boundary_at_nodes,
                                    const TauNodes& nodes, const FredholmSolution* psi, double S0, double K,
                                    double H, std::size_t n_z) {
    if (!(S0 < H)) throw Error(ErrorCode::BarrierBreached, "spot at or above the barrier");
    if (!(S0 > 0.0) || !(K > 0.0)) throw Error(ErrorCode::InvalidParameter, "spot and strike must be positive");
    BarrierResult res;
    TerminalCondition tc = make_terminal_condition(bundle, K);
    const double y0 = H * std::exp(tc.W);
    const double tau0 = bundle.tau0();
    const double L = max_level(bundle, H);
    const double x0 = S0 * bundle.g_at(0.0);
    const double y_obs = H * bundle.g_at(0.0);
    const double w1 = std::exp(-kPi * kPi * tau0 / (L * L));

    // spacing of an n_z-node grid on [0, y0], shifted so that K1 is a node; below K1 the payoff vanishes.
    // The spacing never exceeds a quarter of the kernel width sqrt(2 tau0).
    std::size_t nodes_z = 0;
    std::vector<double> wz;
    double h = 0.0;
    if (tc.K1 < y0) {
        double base = std::min(y0 / static_cast<double>(n_z - 1), 0.25 * std::sqrt(2.0 * tau0));
        double span = (y0 - tc.K1) / base;
        auto m = static_cast<std::size_t>(2.0 * std::ceil(0.5 * span - 1e-9));
        nodes_z = std::max<std::size_t>(m, 2) + 1;
        wz = num::simpson_weights(nodes_z, tc.K1, y0);
        h = (y0 - tc.K1) / static_cast<double>(nodes_z - 1);
        for (std::size_t i = 0; i < nodes_z; ++i)
            res.max_payoff = std::max(res.max_payoff, tc(tc.K1 + h * static_cast<double>(i)));
    }

    auto u_at = [&](double x, double& payoff_part, double& flux_part) {
        payoff_part = 0.0;
        flux_part = 0.0;
        if (tc.K1 < y0) {
            for (std::size_t i = 1; i < nodes_z; ++i) {
                double z = tc.K1 + h * static_cast<double>(i);
                payoff_part += wz[i] * tc(z) * theta_diff(x, z, L, w1);
            }
        }
        if (psi) {
            for (std::size_t j = 0; j < nodes.tau.size(); ++j) {
                double w2 = std::exp(-kPi * kPi * (tau0 - nodes.tau[j]) / (L * L));
                flux_part += nodes.weight[j] * psi->psi[j] * theta_diff(x, boundary_at_nodes.y[j], L, w2);
            }
        }
        payoff_part /= 2.0 * L;
        flux_part /= 2.0 * L;
    };

    double a, b;
    u_at(x0, res.u_payoff, res.u_flux);
    u_at(0.0, a, b);
    res.u_at_zero = a + b;
    u_at(y_obs, a, b);
    res.u_at_boundary = a + b;
    double u = res.u_payoff + res.u_flux;
    res.psi_share = u != 0.0 ? res.u_flux / u : 0.0;
    res.price = std::max(0.0, std::exp(bundle.eval_f(x0, 0.0)) * u);
    if (psi) res.psi = *psi;
    return res;
}

UpOutEngine::UpOutEngine(TransformBundle bundle, double H, const BarrierNumerics& num)
    : bundle_(std::move(bundle)), H_(H), num_(num) {
    auto t0 = Clock::now();
    if (!(H > 0.0)) throw Error(ErrorCode::InvalidParameter, "barrier must be positive");
    if (num.n_z < 3 || num.n_z % 2 == 0) throw Error(ErrorCode::InvalidParameter, "n_z must be odd and >= 3");
    const double tau0 = bundle_.tau0();
    nodes_ = sqrt_gauss_nodes(tau0, num.n_tau);
    boundary_ = moving_boundary(bundle_, H, nodes_.tau);
    L_ = max_level(bundle_, H);
    if (!num.no_psi) {
        p_ = geometric_p_grid(tau0, num.n_p, num.p_lo, num.p_hi);
        A_ = assemble_kernel(boundary_, p_, nodes_.weight, L_);
        if (num.closure) {
            Matrix C = closure_kernel(boundary_, p_, nodes_.weight, L_, tau0, L_);
            for (std::size_t i = 0; i < A_.data.size(); ++i) A_.data[i] -= C.data[i];
        }
        Regularization reg;
        reg.lambda = num.lambda;
        reg.penalty = num.penalty;
        if (num.penalty == Penalty::Diagonal) reg.diagonal = nodes_.v;
        solver_.emplace(A_, reg);
    }
    setup_ms_ = ms_since(t0);
}

std::vector<double> UpOutEngine::rhs(double K) const {
    std::vector<double> F = rhs_F(bundle_, K, H_, p_, L_);
    if (num_.closure) {
        TerminalCondition tc = make_terminal_condition(bundle_, K);
        std::vector<double> c = closure_rhs(tc, H_ * std::exp(tc.W), p_, L_, bundle_.tau0(), L_);
        for (std::size_t i = 0; i < F.size(); ++i) F[i] += c[i];
    }
    return F;
}

BarrierResult UpOutEngine::price(double S0, double K) const {
    TerminalCondition tc = make_terminal_condition(bundle_, K);
    if (tc.K1 >= H_ * std::exp(tc.W)) {
        if (!(S0 < H_)) throw Error(ErrorCode::BarrierBreached, "spot at or above the barrier");
        return BarrierResult{};
    }
    if (num_.no_psi) return price_barrier_uo_call(bundle_, boundary_, nodes_, nullptr, S0, K, H_, num_.n_z);
    auto t0 = Clock::now();
    FredholmSolution sol = solver_->solve(rhs(K));
    sol.tau_grid = nodes_.tau;
    double solve_ms = ms_since(t0);
    BarrierResult r = price_barrier_uo_call(bundle_, boundary_, nodes_, &sol, S0, K, H_, num_.n_z);
    r.solve_ms = solve_ms;
    return r;
}

double price_vanilla(const CoefficientCurve& curve, double S0, double K, double T) {
    double ir = curve.integrate(Field::r, 0.0, T);
    double iq = curve.integrate(Field::q, 0.0, T);
    double m = S0 * std::exp(ir - iq);
    double v = curve.integrate(
        [&](double s) {
            double sig = curve.eval(s).sigma;
            double drift = (ir - curve.integrate(Field::r, 0.0, s)) - (iq - curve.integrate(Field::q, 0.0, s));
            return sig * sig * std::exp(2.0 * drift);
        },
        0.0, T);
    double df = std::exp(-ir);
    if (!(v > 0.0)) return df * std::max(m - K, 0.0);
    double sd = std::sqrt(v);
    double d = (m - K) / sd;
    return df * ((m - K) * num::norm_cdf(d) + sd * num::norm_pdf(d));
}

double price_european_absorbed(const TransformBundle& bundle, double S0, double K) {
    TerminalCondition tc = make_terminal_condition(bundle, K);
    const double tau0 = bundle.tau0();
    const double x0 = S0 * bundle.g_at(0.0);
    double u;
    if (tc.aT == 0.0) {
        u = std::exp(-tc.W - tc.kT) * absorbed_linear(x0, tc.K1, tau0);
    } else {
        double s = std::sqrt(2.0 * tau0);
        auto kernel = [&](double z) {
            auto ph = [&](double d) { return std::exp(-d * d / (4.0 * tau0)) / std::sqrt(4.0 * kPi * tau0); };
            return tc(z) * (ph(z - x0) - ph(z + x0));
        };
        u = integrate_adaptive(kernel, tc.K1, std::max(x0, tc.K1) + 40.0 * s);
    }
    return std::exp(bundle.eval_f(x0, 0.0)) * u;
}

double price_barrier_do_call(const CoefficientCurve& curve, const UpOutEngine& engine, double S0, double K) {
    return price_vanilla(curve, S0, K, engine.bundle().T()) - engine.price(S0, K).price;
}

AmericanResult price_american_call(const TransformBundle& bundle, double S0, double K, const AmericanNumerics& num) {
    if (!(S0 > 0.0) || !(K > 0.0)) throw Error(ErrorCode::InvalidParameter, "spot and strike must be positive");
    AmericanResult res;
    res.european = price_european_absorbed(bundle, S0, K);
    res.boundary = solve_american_boundary(bundle, K, num);
    const double intrinsic = std::max(S0 - K, 0.0);
    if (res.boundary.diverged) {
        res.fallback = true;
        res.price = res.european;
        return res;
    }
    const double x0 = S0 * bundle.g_at(0.0);
    const auto& y = res.boundary.solution.psi;
    if (x0 >= y.back()) {
        res.exercised = true;
        res.price = intrinsic;
        return res;
    }
    double L = *std::max_element(y.begin(), y.end());
    double u = american_u(bundle, res.boundary, x0, bundle.tau0(), L, num.gl_points);
    res.price = std::max(std::exp(bundle.eval_f(x0, 0.0)) * u, intrinsic);
    return res;
}

PriceSurface price_surface_semi(const CoefficientCurve& curve, const SurfaceRequest& req, const SemiNumerics& num,
                                std::size_t threads) {
    auto wall0 = Clock::now();
    PriceSurface out;
    out.method = "semi";
    out.strikes = req.strikes;
    out.maturities = req.maturities;
    const std::size_t nk = req.strikes.size();
    out.cells.resize(nk * req.maturities.size());
    std::vector<StageTimes> stage(req.maturities.size());
    if (req.maturities.empty() || req.strikes.empty()) throw Error(ErrorCode::InvalidParameter, "empty lattice");

    // w(t) does not depend on the maturity, so one Riccati solve on the longest horizon serves every row
    auto tm0 = Clock::now();
    std::optional<WGrid> master;
    if (num.transform.mode == TransformMode::RiccatiNumeric) {
        double Tmax = *std::max_element(req.maturities.begin(), req.maturities.end());
        try {
            master = solve_riccati(curve.with_horizon(Tmax), num.transform.grid_steps, num.transform.w0);
        } catch (const Error& e) {
            throw e.at_maturity(Tmax);
        }
    }
    double master_ms = ms_since(tm0);

    auto run_row = [&](std::size_t ti, double T) {
        auto t0 = Clock::now();
        TransformBundle bundle = master ? make_bundle(curve, T, *master) : make_bundle(curve, T, num.transform);
        stage[ti].transform_ms = ms_since(t0);
        if (req.product == Product::UpOutCall || req.product == Product::DownOutCall) {
            auto t1 = Clock::now();
            UpOutEngine engine(std::move(bundle), req.H, num.barrier);
            // without the flux term the setup is only the boundary and quadrature nodes
            (num.barrier.no_psi ? stage[ti].pricing_ms : stage[ti].fredholm_ms) += ms_since(t1);
            for (std::size_t ki = 0; ki < nk; ++ki) {
                auto tc = Clock::now();
                const double K = req.strikes[ki];
                BarrierResult r;
                try {
                    r = engine.price(req.S0, K);
                } catch (const Error& e) {
                    throw e.at_cell(K, T);
                }
                SurfaceCell& c = out.cells[ti * nk + ki];
                c.K = K;
                c.T = T;
                c.price = r.price;
                if (req.product == Product::DownOutCall) c.price = price_vanilla(curve, req.S0, K, T) - r.price;
                c.psi_share = r.psi_share;
                c.residual = r.psi.residual_norm;
                c.lambda = r.psi.regularization_lambda;
                c.u_at_zero = r.u_at_zero;
                c.u_at_boundary = r.u_at_boundary;
                c.max_payoff = r.max_payoff;
                c.runtime_ms = ms_since(tc);
                stage[ti].fredholm_ms += r.solve_ms;
                stage[ti].pricing_ms += c.runtime_ms - r.solve_ms;
            }
            return;
        }
        for (std::size_t ki = 0; ki < nk; ++ki) {
            auto tc = Clock::now();
            const double K = req.strikes[ki];
            SurfaceCell& c = out.cells[ti * nk + ki];
            c.K = K;
            c.T = T;
            if (req.product == Product::EuropeanCall) {
                c.price = price_vanilla(curve, req.S0, K, T);
                c.runtime_ms = ms_since(tc);
                stage[ti].pricing_ms += c.runtime_ms;
            } else {
                AmericanResult r;
                try {
                    r = price_american_call(bundle, req.S0, K, num.american);
                } catch (const Error& e) {
                    throw e.at_cell(K, T);
                }
                c.price = r.price;
                c.residual = r.boundary.solution.residual_norm;
                c.runtime_ms = ms_since(tc);
                stage[ti].fredholm_ms += c.runtime_ms;
            }
        }
    };
    auto run = [&](std::size_t ti) {
        const double T = req.maturities[ti];
        try {
            run_row(ti, T);
        } catch (const Error& e) {
            if (std::isnan(e.maturity())) throw e.at_cell(std::numeric_limits<double>::quiet_NaN(), T);
            throw;
        }
    };

    std::size_t nt = std::max<std::size_t>(1, std::min(threads, req.maturities.size()));
    if (nt == 1) {
        for (std::size_t ti = 0; ti < req.maturities.size(); ++ti) run(ti);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(nt);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nt; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t ti; (ti = next.fetch_add(1)) < req.maturities.size();) run(ti);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    out.times.transform_ms = master_ms;
    for (const StageTimes& s : stage) {
        out.times.transform_ms += s.transform_ms;
        out.times.fredholm_ms += s.fredholm_ms;
        out.times.pricing_ms += s.pricing_ms;
    }
    out.times.total_ms = ms_since(wall0);
    return out;
}

void write_surface_csv(const PriceSurface& s, const std::string& path, bool with_timing) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::InvalidParameter, "cannot open " + path);
    os.imbue(std::locale::classic());
    os << "K,T,price,method,psi_share,runtime_ms\n" << std::setprecision(17);
    for (const SurfaceCell& c : s.cells)
        os << c.K << ',' << c.T << ',' << c.price << ',' << s.method << ',' << c.psi_share << ',' << (with_timing ? c.runtime_ms : 0.0)
           << '\n';
}

PriceSurface read_surface_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::InvalidParameter, "cannot open " + path);
    is.imbue(std::locale::classic());
    std::string line;
    std::getline(is, line);
    if (line != "K,T,price,method,psi_share,runtime_ms")
        throw Error(ErrorCode::LatticeMismatch, path + ": unexpected header '" + line + "'");
    PriceSurface s;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ls.imbue(std::locale::classic());
        SurfaceCell c;
        std::string field;
        auto next_double = [&]() {
            std::getline(ls, field, ',');
            double v = 0.0;
            auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc() || end != field.data() + field.size())
                throw Error(ErrorCode::LatticeMismatch, path + ": bad number '" + field + "'");
            return v;
        };
        c.K = next_double();
        c.T = next_double();
        c.price = next_double();
        std::getline(ls, s.method, ',');
        c.psi_share = next_double();
        c.runtime_ms = next_double();
        s.cells.push_back(c);
        if (std::find(s.strikes.begin(), s.strikes.end(), c.K) == s.strikes.end()) s.strikes.push_back(c.K);
        if (std::find(s.maturities.begin(), s.maturities.end(), c.T) == s.maturities.end())
            s.maturities.push_back(c.T);
    }
    return s;
}

} // namespace heatprice
