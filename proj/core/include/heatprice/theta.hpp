#pragma once

#include <cstddef>

namespace heatprice {

inline constexpr double kThetaTol = 1e-14;
// Above this nome the modular form is used.
inline constexpr double kModularSwitch = 0.9;

// theta_3(z, w) = 1 + 2 sum_{n>=1} w^{n^2} cos(2 n z), 0 <= w < 1.
double theta3(double z, double omega, double tol = kThetaTol);
// d theta_3 / dz
double theta3_dz(double z, double omega, double tol = kThetaTol);
// 1 + 2 sum_{n=1}^{N-1} w^{n^2} cos(2 n z), no modular switch.
double theta3_partial(double z, double omega, std::size_t N);

// theta_3(pi (x - z) / (2 y), w) - theta_3(pi (x + z) / (2 y), w)
double theta_diff(double x, double z, double y, double omega);
// derivative of theta_diff with respect to z
double theta_diff_dz(double x, double z, double y, double omega);

// Dirichlet heat kernel on [0, L]: theta_diff(x, xi, L, e^{-pi^2 t / L^2}) / (2 L).
double heat_kernel(double x, double xi, double L, double t);
double heat_kernel_dxi(double x, double xi, double L, double t);

} // namespace heatprice
