#pragma once

#include <cstddef>
#include <vector>

namespace heatprice::num {

struct Rule {
    std::vector<double> x;  // nodes on [0, 1]
    std::vector<double> w;  // weights summing to 1
};

// n-point Gauss-Legendre rule mapped to [0, 1]; tables are cached.
const Rule& gauss_legendre(std::size_t n);

double norm_pdf(double x);
double norm_cdf(double x);

// e^{x^2} erfc(x), accurate for large positive x.
double erfcx(double x);
// Dawson integral e^{-x^2} int_0^x e^{t^2} dt.
double dawson(double x);

// Solves a tridiagonal system in place; lo[0] and up[n-1] are ignored.
void solve_tridiagonal(const std::vector<double>& lo, const std::vector<double>& di, const std::vector<double>& up,
                       std::vector<double>& rhs, std::vector<double>& scratch);

// Composite Simpson weights for n (odd) equally spaced nodes over [a, b].
std::vector<double> simpson_weights(std::size_t n, double a, double b);

} // namespace heatprice::num
