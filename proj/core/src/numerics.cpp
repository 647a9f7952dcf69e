#include "heatprice/numerics.hpp"

#include "heatprice/errors.hpp"

#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_dawson.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace heatprice::num {

const Rule& gauss_legendre(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<Rule>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    if (n == 0) throw Error(ErrorCode::InvalidParameter, "Gauss-Legendre rule needs n >= 1");
    auto rule = std::make_unique<Rule>();
    gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(n);
    rule->x.resize(n);
    rule->w.resize(n);
    for (std::size_t i = 0; i < n; ++i) gsl_integration_glfixed_point(0.0, 1.0, i, &rule->x[i], &rule->w[i], table);
    gsl_integration_glfixed_table_free(table);
    const Rule& ref = *rule;
    cache.emplace(n, std::move(rule));
    return ref;
}

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double erfcx(double x) {
    if (x < 25.0) return std::exp(x * x) * std::erfc(x);
    // asymptotic series, terms below 1e-16 by x = 25
    double inv = 1.0 / (2.0 * x * x);
    double sum = 1.0;
    double term = 1.0;
    for (int k = 1; k < 8; ++k) {
        term *= -(2 * k - 1) * inv;
        sum += term;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

double dawson(double x) { return gsl_sf_dawson(x); }

void solve_tridiagonal(const std::vector<double>& lo, const std::vector<double>& di, const std::vector<double>& up,
                       std::vector<double>& rhs, std::vector<double>& c) {
    const std::size_t n = di.size();
    c.resize(n);
    double beta = di[0];
    rhs[0] /= beta;
    for (std::size_t i = 1; i < n; ++i) {
        c[i] = up[i - 1] / beta;
        beta = di[i] - lo[i] * c[i];
        rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / beta;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i + 1] * rhs[i + 1];
}

std::vector<double> simpson_weights(std::size_t n, double a, double b) {
    if (n < 3 || n % 2 == 0) throw Error(ErrorCode::InvalidParameter, "Simpson rule needs an odd node count >= 3");
    double h = (b - a) / static_cast<double>(n - 1);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    for (auto& v : w) v *= h / 3.0;
    return w;
}

} // namespace heatprice::num
