#pragma once

#include "heatprice/pricer.hpp"
#include "heatprice/termstructure.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace heatprice {

struct FDGrid {
    std::vector<double> S;  // strictly increasing space nodes
    double T = 0.0;
    std::size_t M = 0;      // number of time steps
    std::size_t rannacher_steps = 4;

    double dt() const { return T / static_cast<double>(M); }
    // index of a node equal to x; throws if absent
    std::size_t node_of(double x) const;
    void validate() const;
};

// Nodes on [lo, hi] with asinh stretching around each centre (width alpha); every snap point becomes a node.
// The number of time steps is ceil(T / dt).
FDGrid make_fd_grid(double lo, double hi, std::size_t N, const std::vector<double>& centres, double alpha,
                    const std::vector<double>& snap, double T, double dt, std::size_t rannacher_steps = 4);

// Up-and-Out grid on [0, H].
FDGrid barrier_grid(double K, double H, double T, std::size_t N, double dt, std::size_t rannacher_steps = 4);
// Grid on [0, max(4K, 2H)] for American and absorbed European problems.
FDGrid american_grid(double K, double H, double T, std::size_t N, double dt, std::size_t rannacher_steps = 4);
// Grid on [-max(4K, 2H), max(4K, 2H)] for the unabsorbed vanilla; 0, K and H are nodes.
FDGrid vanilla_grid(double K, double H, double T, std::size_t N, double dt, std::size_t rannacher_steps = 4);

struct FDSolution {
    std::vector<double> S;
    std::vector<double> V;          // values at t = 0
    std::vector<double> boundary_t; // exercise boundary, American only
    std::vector<double> boundary_S; // NaN where no node is exercised
    double value_at(double x) const;
};

using Payoff = std::function<double(double)>;

// Lower edge: zero if the grid starts at 0, linear otherwise. Upper edge: zero if barrier_flag, linear otherwise.
FDSolution solve_backward(const CoefficientCurve& curve, const FDGrid& grid, const Payoff& payoff, bool barrier_flag);

// Projection onto the payoff plus one policy-iteration sweep per step. Zero at S = 0, linear at the top.
FDSolution solve_american_projected(const CoefficientCurve& curve, const FDGrid& grid, const Payoff& payoff);

// Direct solve of the vanilla minus Up-and-Out difference on [0, H], with the vanilla solved alongside on the
// full grid to supply the edge values. The grid must contain 0 and H as nodes.
FDSolution solve_barrier_complement(const CoefficientCurve& curve, const FDGrid& grid, double K, double H);

struct FDNumerics {
    std::size_t N = 201;
    double dt = 0.001;
    std::size_t rannacher_steps = 4;
};

PriceSurface price_surface_fd(const CoefficientCurve& curve, const SurfaceRequest& req, const FDNumerics& num,
                              std::size_t threads = 1);

} // namespace heatprice
