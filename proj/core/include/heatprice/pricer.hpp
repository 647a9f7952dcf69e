#pragma once

#include "heatprice/fredholm.hpp"
#include "heatprice/termstructure.hpp"
#include "heatprice/transform.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace heatprice {

enum class Product { UpOutCall, DownOutCall, AmericanCall, EuropeanCall };

const char* to_string(Product p);
Product product_from_string(const std::string& s);

struct TransformChoice {
    TransformMode mode = TransformMode::RiccatiNumeric;
    std::optional<double> w0;  // Riccati initial value override
    double D = 0.0;            // small-drift constant
    std::size_t grid_steps = kDefaultGridSteps;
};

TransformBundle make_bundle(const CoefficientCurve& curve, double T, const TransformChoice& choice = {});
// Same, reusing a Riccati solution computed on a horizon of at least T; the grid keeps the master spacing.
TransformBundle make_bundle(const CoefficientCurve& curve, double T, const WGrid& master);

struct BarrierNumerics {
    std::size_t n_p = 48;
    std::size_t n_tau = 32;
    std::size_t n_z = 401;  // Simpson spacing y0 / (n_z - 1); only [K1, y0] is evaluated
    double p_lo = 1.0;
    double p_hi = 400.0;
    bool closure = true;
    bool no_psi = false;
    std::optional<double> lambda;
    Penalty penalty = Penalty::Diagonal;  // diagonal weights sqrt(tau_j)
};

TerminalCondition terminal_condition(const TransformBundle& bundle, double K);

struct BarrierResult {
    double price = 0.0;
    double u_payoff = 0.0;   // payoff integral part of u(x0, tau0)
    double u_flux = 0.0;     // boundary-flux part
    double psi_share = 0.0;  // u_flux / (u_payoff + u_flux)
    double u_at_zero = 0.0;
    double u_at_boundary = 0.0;
    double max_payoff = 0.0;  // max of u(z, 0), heat units
    double solve_ms = 0.0;   // right-hand side and regularized solve
    FredholmSolution psi;
};

// Up-and-Out call for one maturity. Transform, nodes, kernel and its factorization are shared by all
// strikes; only F(p) depends on the strike.
class UpOutEngine {
public:
    UpOutEngine(TransformBundle bundle, double H, const BarrierNumerics& num = {});

    BarrierResult price(double S0, double K) const;

    const TransformBundle& bundle() const { return bundle_; }
    const TauNodes& nodes() const { return nodes_; }
    const MovingBoundary& boundary() const { return boundary_; }
    const std::vector<double>& p_grid() const { return p_; }
    // system rows are scaled by e^{-L sqrt p}
    const Matrix& kernel() const { return A_; }
    double L() const { return L_; }
    // right-hand side including the tail term, same row scaling
    std::vector<double> rhs(double K) const;
    double setup_ms() const { return setup_ms_; }

private:
    TransformBundle bundle_;
    double H_;
    BarrierNumerics num_;
    TauNodes nodes_;
    MovingBoundary boundary_;
    std::vector<double> p_;
    Matrix A_;
    std::optional<TikhonovSolver> solver_;
    double L_ = 0.0;
    double setup_ms_ = 0.0;
};

// u(x0, tau0) assembled from the payoff and (optionally) the boundary flux.
BarrierResult price_barrier_uo_call(const TransformBundle& bundle, const MovingBoundary& boundary_at_nodes,
                                    const TauNodes& nodes, const FredholmSolution* psi, double S0, double K,
                                    double H, std::size_t n_z = 401);

// Exact Gaussian terminal law of the drifted OU stock, no absorption.
double price_vanilla(const CoefficientCurve& curve, double S0, double K, double T);
// European call killed at S = 0, the lower boundary used by the barrier and American problems.
double price_european_absorbed(const TransformBundle& bundle, double S0, double K);

// C_van - C_uao
double price_barrier_do_call(const CoefficientCurve& curve, const UpOutEngine& engine, double S0, double K);

struct AmericanResult {
    double price = 0.0;
    double european = 0.0;  // absorbed European of the same problem
    bool exercised = false; // spot already in the exercise region
    bool fallback = false;  // boundary diverged, European returned
    AmericanBoundary boundary;
};

AmericanResult price_american_call(const TransformBundle& bundle, double S0, double K,
                                   const AmericanNumerics& num = {});

struct SurfaceCell {
    double K = 0.0;
    double T = 0.0;
    double price = 0.0;
    double psi_share = 0.0;
    double runtime_ms = 0.0;
    double residual = 0.0;
    double lambda = 0.0;
    double u_at_zero = 0.0;
    double u_at_boundary = 0.0;
    double max_payoff = 0.0;
};

struct StageTimes {
    double transform_ms = 0.0;
    double fredholm_ms = 0.0;
    double pricing_ms = 0.0;
    double fd_ms = 0.0;
    double total_ms = 0.0;
};

struct PriceSurface {
    std::string method;
    std::vector<double> strikes;
    std::vector<double> maturities;
    std::vector<SurfaceCell> cells;  // maturity-major
    StageTimes times;

    const SurfaceCell& at(std::size_t k, std::size_t t) const { return cells[t * strikes.size() + k]; }
};

struct SurfaceRequest {
    Product product = Product::UpOutCall;
    double S0 = 0.0;
    double H = 0.0;
    std::vector<double> strikes;
    std::vector<double> maturities;
};

struct SemiNumerics {
    TransformChoice transform;
    BarrierNumerics barrier;
    AmericanNumerics american;
};

PriceSurface price_surface_semi(const CoefficientCurve& curve, const SurfaceRequest& req, const SemiNumerics& num,
                                std::size_t threads = 1);

// runtime_ms is written as 0 when with_timing is false, which makes the file reproducible byte for byte
void write_surface_csv(const PriceSurface& s, const std::string& path, bool with_timing = true);
PriceSurface read_surface_csv(const std::string& path);

} // namespace heatprice
