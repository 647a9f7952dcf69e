#include "heatprice/theta.hpp"

#include "heatprice/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace heatprice {

namespace {

constexpr double kPi = std::numbers::pi;

void check_nome(double omega) {
    if (!(omega >= 0.0 && omega < 1.0)) {
        std::ostringstream os;
        os << "nome " << omega << " outside [0, 1)";
        throw Error(ErrorCode::InvalidNome, os.str());
    }
}

// Reduce to [0, pi/2] using evenness and period pi; sign tracks the derivative.
double reduce(double z, double& sign) {
    sign = z < 0.0 ? -1.0 : 1.0;
    double r = std::fmod(std::fabs(z), kPi);
    if (r > 0.5 * kPi) {
        r = kPi - r;
        sign = -sign;
    }
    return r;
}

// Nome powers w^{n^2} by w^{(n+1)^2} = w^{n^2} w^{2n+1}; cos/sin by the Chebyshev recurrence.
double direct(double z, double omega, double tol) {
    const double c2 = std::cos(2.0 * z);
    const double w2 = omega * omega;
    double q = omega;
    double step = omega;
    double c_prev = 1.0;
    double c = c2;
    double sum = 0.0;
    while (2.0 * q >= tol) {
        sum += q * c;
        step *= w2;
        q *= step;
        double c_next = 2.0 * c2 * c - c_prev;
        c_prev = c;
        c = c_next;
    }
    return 1.0 + 2.0 * sum;
}

double direct_dz(double z, double omega, double tol) {
    const double c2 = std::cos(2.0 * z);
    const double w2 = omega * omega;
    double q = omega;
    double step = omega;
    double s_prev = 0.0;
    double s = std::sin(2.0 * z);
    double sum = 0.0;
    for (int n = 1; 2.0 * n * q >= tol; ++n) {
        sum += n * q * s;
        step *= w2;
        q *= step;
        double s_next = 2.0 * c2 * s - s_prev;
        s_prev = s;
        s = s_next;
    }
    return -4.0 * sum;
}

// theta_3(z, e^{-l}) = sqrt(pi / l) sum_m exp(-(z - m pi)^2 / l)
double modular(double z, double l) {
    double sum = std::exp(-z * z / l);
    for (int m = 1;; ++m) {
        double a = std::exp(-(z - m * kPi) * (z - m * kPi) / l);
        double b = std::exp(-(z + m * kPi) * (z + m * kPi) / l);
        sum += a + b;
        if (a + b <= 1e-17 * sum) break;
    }
    return std::sqrt(kPi / l) * sum;
}

double modular_dz(double z, double l) {
    double sum = -2.0 * z / l * std::exp(-z * z / l);
    double scale = std::exp(-z * z / l);
    for (int m = 1;; ++m) {
        double dm = z - m * kPi;
        double dp = z + m * kPi;
        double a = std::exp(-dm * dm / l);
        double b = std::exp(-dp * dp / l);
        sum += -2.0 * dm / l * a - 2.0 * dp / l * b;
        scale += a + b;
        if (a + b <= 1e-17 * scale) break;
    }
    return std::sqrt(kPi / l) * sum;
}

} // namespace

double theta3(double z, double omega, double tol) {
    check_nome(omega);
    if (omega == 0.0) return 1.0;
    double sign;
    double r = reduce(z, sign);
    if (omega > kModularSwitch) return modular(r, -std::log(omega));
    return direct(r, omega, tol);
}

double theta3_dz(double z, double omega, double tol) {
    check_nome(omega);
    if (omega == 0.0) return 0.0;
    double sign;
    double r = reduce(z, sign);
    if (omega > kModularSwitch) return sign * modular_dz(r, -std::log(omega));
    return sign * direct_dz(r, omega, tol);
}

double theta3_partial(double z, double omega, std::size_t N) {
    check_nome(omega);
    double sum = 0.0;
    for (std::size_t n = 1; n < N; ++n)
        sum += std::pow(omega, static_cast<double>(n * n)) * std::cos(2.0 * static_cast<double>(n) * z);
    return 1.0 + 2.0 * sum;
}

double theta_diff(double x, double z, double y, double omega) {
    double c = kPi / (2.0 * y);
    return theta3(c * (x - z), omega) - theta3(c * (x + z), omega);
}

double theta_diff_dz(double x, double z, double y, double omega) {
    double c = kPi / (2.0 * y);
    return -c * theta3_dz(c * (x - z), omega) - c * theta3_dz(c * (x + z), omega);
}

double heat_kernel(double x, double xi, double L, double t) {
    double omega = std::exp(-kPi * kPi * t / (L * L));
    return theta_diff(x, xi, L, omega) / (2.0 * L);
}

double heat_kernel_dxi(double x, double xi, double L, double t) {
    double omega = std::exp(-kPi * kPi * t / (L * L));
    return theta_diff_dz(x, xi, L, omega) / (2.0 * L);
}

} // namespace heatprice
