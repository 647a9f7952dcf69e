#pragma once

#include "heatprice/transform.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace heatprice {

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::vector<double> apply(const std::vector<double>& x) const;
};

// Gauss-Legendre in v = sqrt(tau): tau_j = v_j^2 with weights 2 v_j W_j.
struct TauNodes {
    std::vector<double> tau;
    std::vector<double> v;
    std::vector<double> weight;
};

TauNodes sqrt_gauss_nodes(double tau_max, std::size_t n);

std::vector<double> geometric_p_grid(double tau_max, std::size_t n_p, double lo = 1.0, double hi = 400.0);

// The optional shift multiplies row i of every piece of the system by e^{-shift sqrt p_i}. With
// shift = L all entries stay bounded for wide domains.

// F(p) = -int_{K1}^{y0} sinh(z sqrt p) u(z, 0) dz with y0 = H g(T).
double rhs_F(const TransformBundle& bundle, double K, double H, double p, double shift = 0.0);
std::vector<double> rhs_F(const TransformBundle& bundle, double K, double H, const std::vector<double>& p_grid,
                          double shift = 0.0);

// A[i][j] = w_j e^{-p_i tau_j} sinh(y(tau_j) sqrt p_i)
Matrix assemble_kernel(const MovingBoundary& boundary, const std::vector<double>& p_grid,
                       const std::vector<double>& weights, double shift = 0.0);

// Q(p, xi, t) = int_0^L G_L(x, xi, t) sinh(x sqrt p) dx for the Dirichlet heat kernel on [0, L].
double sinh_moment(double p, double xi, double L, double t);

// The tail e^{-p tau_max} ubar(p, tau_max) dropped by cutting the Laplace integral at tau_max is
// affine in Psi. These give its flux part (subtracted from A) and its payoff part (added to F).
Matrix closure_kernel(const MovingBoundary& boundary, const std::vector<double>& p_grid,
                      const std::vector<double>& weights, double L, double tau_max, double shift = 0.0);
std::vector<double> closure_rhs(const TerminalCondition& u0, double y0, const std::vector<double>& p_grid, double L,
                                double tau_max, double shift = 0.0);

enum class Penalty { Identity, FirstDifference, Diagonal };

struct Regularization {
    std::optional<double> lambda;  // empty selects the L-curve corner
    Penalty penalty = Penalty::Diagonal;
    std::vector<double> diagonal;  // weights for Penalty::Diagonal
    double lambda_lo = 1e-14;
    double lambda_hi = 1e-2;
    std::size_t n_lambda = 61;
    bool row_scaling = true;
};

struct LCurve {
    std::vector<double> lambda;
    std::vector<double> residual;
    std::vector<double> norm;
    std::size_t chosen = 0;
};

struct FredholmSolution {
    std::vector<double> tau_grid;
    std::vector<double> psi;  // flux (barrier) or boundary y (American)
    double regularization_lambda = 0.0;
    double residual_norm = 0.0;
    std::size_t iterations = 1;
    bool converged = true;
    LCurve lcurve;
    std::vector<double> residual_history;
};

// tau,value,lambda,residual,iterations
void write_solution_csv(const FredholmSolution& s, const std::string& path);

// Tikhonov solver min |A x - F|^2 + lambda s_max^2 |P x|^2, with s_max the largest singular value
// of the (row-scaled) penalized operator. The factorization is reused across right-hand sides.
class TikhonovSolver {
public:
    TikhonovSolver(const Matrix& A, const Regularization& reg);
    ~TikhonovSolver();
    TikhonovSolver(TikhonovSolver&&) noexcept;
    TikhonovSolver& operator=(TikhonovSolver&&) noexcept;

    FredholmSolution solve(const std::vector<double>& F) const;
    std::vector<double> singular_values() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

FredholmSolution solve_psi(const Matrix& A, const std::vector<double>& F, const Regularization& reg);

struct AmericanNumerics {
    std::size_t n_nodes = 24;   // boundary nodes, uniform in sqrt(tau)
    std::size_t gl_points = 8;  // per segment
    double tol = 1e-10;         // residual tolerance relative to the strike scale
    std::size_t max_iter = 100; // per node
    double damping = 0.5;       // Illinois factor applied to a stale bracket end
    double cap_multiple = 50.0; // search cap for y in units of the mapped strike
};

struct AmericanBoundary {
    FredholmSolution solution;  // tau_grid, y
    std::vector<double> t;      // calendar time of each node
    std::vector<double> S_B;    // exercise boundary in spot units
    bool diverged = false;      // no finite boundary inside the cap
    std::vector<bool> capped;   // per node: search hit the cap
    std::vector<std::vector<double>> node_history;  // |R| after each accepted step, per node
    double y_cap = 0.0;
    double K = 0.0;
};

// Value matching on the free boundary, marched node by node in tau.
AmericanBoundary solve_american_boundary(const TransformBundle& bundle, double K, const AmericanNumerics& num = {});

// u(x, tau) from the solved boundary using the heat kernel G on [0, L]; with L <= 0 the half-line kernel.
double american_u(const TransformBundle& bundle, const AmericanBoundary& boundary, double x, double tau, double L,
                  std::size_t gl_points = 8);

} // namespace heatprice
