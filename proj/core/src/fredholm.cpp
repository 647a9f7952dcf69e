#include "heatprice/fredholm.hpp"

#include "heatprice/errors.hpp"
#include "heatprice/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace heatprice {

namespace {

constexpr double kPi = std::numbers::pi;

// int_A^B e^{a z^2 + s z + c0} dz for a != 0, evaluated through scaled special functions so that only
// end-point exponents e^{h(A)}, e^{h(B)} ever appear.
double gauss_exp_integral(double a, double s, double A, double B, double c0) {
    auto h = [&](double z) { return a * z * z + s * z + c0; };
    if (a < 0.0) {
        double beta = std::sqrt(-a);
        double c = s / (2.0 * beta * beta);
        double pref = std::sqrt(kPi) / (2.0 * beta);
        auto above = [&](double lo, double hi) {  // c <= lo <= hi
            return pref * (std::exp(h(lo)) * num::erfcx(beta * (lo - c)) -
                           std::exp(h(hi)) * num::erfcx(beta * (hi - c)));
        };
        auto below = [&](double lo, double hi) {  // lo <= hi <= c
            return pref * (std::exp(h(hi)) * num::erfcx(beta * (c - hi)) -
                           std::exp(h(lo)) * num::erfcx(beta * (c - lo)));
        };
        if (A >= c) return above(A, B);
        if (B <= c) return below(A, B);
        return below(A, c) + above(c, B);
    }
    double alpha = std::sqrt(a);
    double d = s / (2.0 * a);
    return (std::exp(h(B)) * num::dawson(alpha * (B + d)) - std::exp(h(A)) * num::dawson(alpha * (A + d))) / alpha;
}

// int_A^B (z - K1) e^{a z^2 + s z + c0} dz
double gauss_linear_integral(double a, double s, double K1, double A, double B, double c0) {
    double J = gauss_exp_integral(a, s, A, B, c0);
    double edge = (std::exp(a * B * B + s * B + c0) - std::exp(a * A * A + s * A + c0)) / (2.0 * a);
    return edge - (s / (2.0 * a) + K1) * J;
}

double rhs_F_quadrature(const TerminalCondition& tc, double y0, double s, double shift) {
    const num::Rule& rule = num::gauss_legendre(32);
    const int panels = 8;
    double h = (y0 - tc.K1) / panels;
    double sum = 0.0;
    for (int k = 0; k < panels; ++k) {
        double a = tc.K1 + k * h;
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            double z = a + h * rule.x[i];
            sum += h * rule.w[i] * 0.5 * (std::exp(s * (z - shift)) - std::exp(-s * (z + shift))) * tc(z);
        }
    }
    return -sum;
}

// sum_n (2/L) e^{-lambda_n t} k_n (-1)^{n+1} sin(k_n xi) / (p + lambda_n), k_n = n pi / L,
// scaled by coef_n(t) b_n when b is given (xi ignored then).
double mode_sum(double p, double xi, double L, double t, const std::vector<double>* b) {
    const double k1 = kPi / L;
    const double c = k1 * k1 * t;
    std::size_t n_max;
    if (b) {
        n_max = b->size();
    } else {
        double need = c > 0.0 ? std::sqrt(45.0 / c) : 2e5;
        n_max = static_cast<std::size_t>(std::min(2e5, std::ceil(need))) + 2;
    }
    const double e2c = std::exp(-2.0 * c);
    double decay = std::exp(-c);       // e^{-c n^2}
    double ratio = std::exp(-3.0 * c); // e^{-c (2n + 1)}
    const double cs = std::cos(k1 * xi);
    const double sn = std::sin(k1 * xi);
    double s_re = cs;  // cos(n k1 xi)
    double s_im = sn;  // sin(n k1 xi)
    double sum = 0.0;
    double sign = 1.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        double kn = n * k1;
        double mode = b ? (*b)[n - 1] : s_im;
        sum += sign * decay * kn * mode / (p + kn * kn);
        if (decay < 1e-300) break;
        decay *= ratio;
        ratio *= e2c;
        sign = -sign;
        if (!b) {
            if (n % 32 == 0) {
                s_re = std::cos((n + 1) * k1 * xi);
                s_im = std::sin((n + 1) * k1 * xi);
            } else {
                double re = s_re * cs - s_im * sn;
                double im = s_re * sn + s_im * cs;
                s_re = re;
                s_im = im;
            }
        }
    }
    return 2.0 / L * sum;
}

// e^{-p tau - shift sqrt p} sinh(y sqrt p) without overflow in the intermediate terms
double damped_sinh(double p, double tau, double y, double shift) {
    double sp = std::sqrt(p);
    double z = y * sp;
    return 0.5 * std::exp(z - p * tau - shift * sp) * (-std::expm1(-2.0 * z));
}

} // namespace

std::vector<double> Matrix::apply(const std::vector<double>& x) const {
    std::vector<double> out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i] += (*this)(i, j) * x[j];
    return out;
}

TauNodes sqrt_gauss_nodes(double tau_max, std::size_t n) {
    if (!(tau_max > 0.0)) throw Error(ErrorCode::InvalidParameter, "tau_max must be positive");
    const num::Rule& rule = num::gauss_legendre(n);
    TauNodes nodes;
    double vmax = std::sqrt(tau_max);
    for (std::size_t j = 0; j < n; ++j) {
        double v = vmax * rule.x[j];
        nodes.v.push_back(v);
        nodes.tau.push_back(v * v);
        nodes.weight.push_back(2.0 * v * vmax * rule.w[j]);
    }
    return nodes;
}

std::vector<double> geometric_p_grid(double tau_max, std::size_t n_p, double lo, double hi) {
    if (n_p < 2 || !(lo > 0.0) || !(hi > lo))
        throw Error(ErrorCode::InvalidParameter, "p grid needs n_p >= 2 and 0 < lo < hi");
    std::vector<double> p(n_p);
    for (std::size_t i = 0; i < n_p; ++i) {
        double f = static_cast<double>(i) / static_cast<double>(n_p - 1);
        p[i] = lo / tau_max * std::pow(hi / lo, f);
    }
    return p;
}

double rhs_F(const TransformBundle& bundle, double K, double H, double p, double shift) {
    if (!(p > 0.0)) throw Error(ErrorCode::InvalidParameter, "p must be positive");
    TerminalCondition tc = make_terminal_condition(bundle, K);
    double y0 = H * std::exp(tc.W);
    if (tc.K1 > y0 * (1.0 + 1e-15)) {
        std::ostringstream os;
        os << "mapped strike " << tc.K1 << " is above the boundary " << y0;
        throw Error(ErrorCode::EmptyPayoffRegion, os.str());
    }
    if (tc.K1 >= y0) return 0.0;
    double s = std::sqrt(p);
    double c = std::exp(-tc.W - tc.kT);
    if (tc.aT == 0.0) {
        // factor e^{s y0} / 2 out of every hyperbolic term
        double e2 = std::exp(-2.0 * s * y0);
        double bracket = -s * (y0 - tc.K1) * (1.0 + e2) + (1.0 - e2) -
                         (std::exp(s * (tc.K1 - y0)) - std::exp(-s * (tc.K1 + y0)));
        return c / p * 0.5 * std::exp(s * (y0 - shift)) * bracket;
    }
    if (std::fabs(tc.aT) * y0 * y0 < 0.05) return rhs_F_quadrature(tc, y0, s, shift);
    double ip = gauss_linear_integral(tc.aT, s, tc.K1, tc.K1, y0, -s * shift);
    double im = gauss_linear_integral(tc.aT, -s, tc.K1, tc.K1, y0, -s * shift);
    return -c * 0.5 * (ip - im);
}

std::vector<double> rhs_F(const TransformBundle& bundle, double K, double H, const std::vector<double>& p_grid,
                          double shift) {
    std::vector<double> F;
    F.reserve(p_grid.size());
    for (double p : p_grid) F.push_back(rhs_F(bundle, K, H, p, shift));
    return F;
}

Matrix assemble_kernel(const MovingBoundary& boundary, const std::vector<double>& p_grid,
                       const std::vector<double>& weights, double shift) {
    if (weights.size() != boundary.tau_grid.size())
        throw Error(ErrorCode::InvalidParameter, "one weight per boundary node required");
    Matrix A(p_grid.size(), weights.size());
    for (std::size_t i = 0; i < p_grid.size(); ++i)
        for (std::size_t j = 0; j < weights.size(); ++j)
            A(i, j) = weights[j] * damped_sinh(p_grid[i], boundary.tau_grid[j], boundary.y[j], shift);
    return A;
}

double sinh_moment(double p, double xi, double L, double t) {
    if (t <= 0.0) return xi < L ? std::sinh(xi * std::sqrt(p)) : 0.0;
    return std::sinh(std::sqrt(p) * L) * mode_sum(p, xi, L, t, nullptr);
}

Matrix closure_kernel(const MovingBoundary& boundary, const std::vector<double>& p_grid,
                      const std::vector<double>& weights, double L, double tau_max, double shift) {
    Matrix C(p_grid.size(), weights.size());
    for (std::size_t i = 0; i < p_grid.size(); ++i) {
        double E = damped_sinh(p_grid[i], tau_max, L, shift);
        for (std::size_t j = 0; j < weights.size(); ++j) {
            double t = tau_max - boundary.tau_grid[j];
            double q = t > 0.0 ? mode_sum(p_grid[i], boundary.y[j], L, t, nullptr)
                               : (boundary.y[j] < L ? std::sinh(boundary.y[j] * std::sqrt(p_grid[i])) /
                                                          std::sinh(L * std::sqrt(p_grid[i]))
                                                    : 0.0);
            C(i, j) = E * weights[j] * q;
        }
    }
    return C;
}

std::vector<double> closure_rhs(const TerminalCondition& u0, double y0, const std::vector<double>& p_grid, double L,
                                double tau_max, double shift) {
    std::vector<double> out(p_grid.size(), 0.0);
    if (u0.K1 >= y0) return out;
    const double k1 = kPi / L;
    std::size_t n_modes = static_cast<std::size_t>(std::ceil(std::sqrt(45.0 / (k1 * k1 * tau_max)))) + 2;
    n_modes = std::min<std::size_t>(n_modes, 20000);
    // b_n = int u0(z) sin(n pi z / L) dz by Gauss-Legendre on panels shorter than a half wave
    double span = y0 - u0.K1;
    std::size_t panels = 1 + static_cast<std::size_t>(span * n_modes / L);
    const num::Rule& rule = num::gauss_legendre(24);
    std::vector<double> b(n_modes, 0.0);
    double h = span / static_cast<double>(panels);
    for (std::size_t k = 0; k < panels; ++k) {
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            double z = u0.K1 + h * (static_cast<double>(k) + rule.x[i]);
            double f = h * rule.w[i] * u0(z);
            const double cs = std::cos(k1 * z);
            const double sn = std::sin(k1 * z);
            double re = cs;
            double im = sn;
            for (std::size_t n = 0; n < n_modes; ++n) {
                b[n] += f * im;
                double r2 = re * cs - im * sn;
                im = re * sn + im * cs;
                re = r2;
            }
        }
    }
    for (std::size_t i = 0; i < p_grid.size(); ++i)
        out[i] = damped_sinh(p_grid[i], tau_max, L, shift) * mode_sum(p_grid[i], 0.0, L, tau_max, &b);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Tikhonov

struct TikhonovSolver::Impl {
    Regularization reg;
    std::size_t n = 0;
    Eigen::MatrixXd B;        // scaled, penalty-transformed operator
    Eigen::VectorXd row_scale;
    Eigen::VectorXd diag;     // penalty diagonal (identity or weights)
    Eigen::MatrixXd U, V;
    Eigen::VectorXd s;
    Eigen::MatrixXd P;        // first-difference operator
    double s_max = 0.0;
};

TikhonovSolver::TikhonovSolver(const Matrix& A, const Regularization& reg) : impl_(std::make_unique<Impl>()) {
    Impl& m = *impl_;
    m.reg = reg;
    m.n = A.cols;
    if (A.rows == 0 || A.cols == 0) throw Error(ErrorCode::SingularSystem, "empty system");
    Eigen::MatrixXd M(A.rows, A.cols);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) M(i, j) = A(i, j);
    m.row_scale = Eigen::VectorXd::Ones(A.rows);
    if (reg.row_scaling) {
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            double sc = M.row(i).cwiseAbs().maxCoeff();
            if (sc > 0.0 && std::isfinite(sc)) m.row_scale(i) = 1.0 / sc;
        }
        M = m.row_scale.asDiagonal() * M;
    }
    if (!M.allFinite()) throw Error(ErrorCode::SingularSystem, "kernel has non-finite entries");
    m.diag = Eigen::VectorXd::Ones(A.cols);
    if (reg.penalty == Penalty::Diagonal) {
        if (reg.diagonal.size() != A.cols)
            throw Error(ErrorCode::InvalidParameter, "diagonal penalty needs one weight per unknown");
        for (std::size_t j = 0; j < A.cols; ++j) {
            if (!(reg.diagonal[j] > 0.0)) throw Error(ErrorCode::InvalidParameter, "penalty weights must be positive");
            m.diag(j) = reg.diagonal[j];
        }
    }
    if (reg.penalty == Penalty::FirstDifference) {
        m.B = M;
        m.P = Eigen::MatrixXd::Zero(A.cols > 1 ? A.cols - 1 : 1, A.cols);
        for (std::size_t j = 0; j + 1 < A.cols; ++j) {
            m.P(j, j) = -1.0;
            m.P(j, j + 1) = 1.0;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
        m.s = svd.singularValues();
    } else {
        m.B = M * m.diag.cwiseInverse().asDiagonal();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.B, Eigen::ComputeThinU | Eigen::ComputeThinV);
        m.U = svd.matrixU();
        m.V = svd.matrixV();
        m.s = svd.singularValues();
    }
    m.s_max = m.s.size() ? m.s(0) : 0.0;
    if (!(m.s_max > 0.0) || !std::isfinite(m.s_max))
        throw Error(ErrorCode::SingularSystem, "operator is numerically rank zero");
}

TikhonovSolver::~TikhonovSolver() = default;
TikhonovSolver::TikhonovSolver(TikhonovSolver&&) noexcept = default;
TikhonovSolver& TikhonovSolver::operator=(TikhonovSolver&&) noexcept = default;

std::vector<double> TikhonovSolver::singular_values() const {
    return {impl_->s.data(), impl_->s.data() + impl_->s.size()};
}

FredholmSolution TikhonovSolver::solve(const std::vector<double>& F) const {
    const Impl& m = *impl_;
    if (F.size() != static_cast<std::size_t>(m.B.rows()))
        throw Error(ErrorCode::InvalidParameter, "right-hand side length mismatch");
    Eigen::VectorXd f(F.size());
    for (std::size_t i = 0; i < F.size(); ++i) f(i) = F[i] * m.row_scale(i);
    const double fnorm = f.norm();

    std::vector<double> grid;
    if (m.reg.lambda) {
        grid.push_back(*m.reg.lambda);
    } else {
        for (std::size_t i = 0; i < m.reg.n_lambda; ++i) {
            double e = std::log10(m.reg.lambda_lo) + (std::log10(m.reg.lambda_hi) - std::log10(m.reg.lambda_lo)) *
                                                         static_cast<double>(i) /
                                                         static_cast<double>(m.reg.n_lambda - 1);
            grid.push_back(std::pow(10.0, e));
        }
    }

    FredholmSolution sol;
    LCurve& lc = sol.lcurve;
    std::vector<Eigen::VectorXd> xs;
    const double s2 = m.s_max * m.s_max;

    if (m.reg.penalty == Penalty::FirstDifference) {
        for (double lam : grid) {
            Eigen::MatrixXd S(m.B.rows() + m.P.rows(), m.B.cols());
            S << m.B, std::sqrt(lam * s2) * m.P;
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S.rows());
            rhs.head(m.B.rows()) = f;
            Eigen::VectorXd x = S.colPivHouseholderQr().solve(rhs);
            lc.lambda.push_back(lam);
            lc.residual.push_back((m.B * x - f).norm());
            lc.norm.push_back((m.P * x).norm());
            xs.push_back(x);
        }
    } else {
        Eigen::VectorXd beta = m.U.transpose() * f;
        double outside = std::max(0.0, fnorm * fnorm - beta.squaredNorm());
        for (double lam : grid) {
            Eigen::VectorXd c(m.s.size());
            double r2 = outside;
            for (Eigen::Index i = 0; i < m.s.size(); ++i) {
                double si = m.s(i);
                c(i) = si * beta(i) / (si * si + lam * s2);
                double d = si * c(i) - beta(i);
                r2 += d * d;
            }
            Eigen::VectorXd phi = m.V * c;
            lc.lambda.push_back(lam);
            lc.residual.push_back(std::sqrt(r2));
            lc.norm.push_back(c.norm());
            xs.push_back(phi.cwiseQuotient(m.diag));
        }
    }

    std::size_t best = 0;
    const std::size_t N = grid.size();
    if (N >= 7) {
        std::vector<double> lr(N), ln(N);
        for (std::size_t i = 0; i < N; ++i) {
            lr[i] = std::log(lc.residual[i] + 1e-300);
            ln[i] = std::log(lc.norm[i] + 1e-300);
        }
        auto grad = [N](const std::vector<double>& y) {
            std::vector<double> d(N);
            d[0] = y[1] - y[0];
            d[N - 1] = y[N - 1] - y[N - 2];
            for (std::size_t i = 1; i + 1 < N; ++i) d[i] = 0.5 * (y[i + 1] - y[i - 1]);
            return d;
        };
        auto d1r = grad(lr), d1n = grad(ln);
        auto d2r = grad(d1r), d2n = grad(d1n);
        double best_k = -1e300;
        for (std::size_t i = 2; i + 2 < N; ++i) {
            double den = std::pow(d1r[i] * d1r[i] + d1n[i] * d1n[i], 1.5) + 1e-300;
            double kappa = (d1r[i] * d2n[i] - d2r[i] * d1n[i]) / den;
            if (kappa > best_k) {
                best_k = kappa;
                best = i;
            }
        }
    }
    lc.chosen = best;
    sol.psi.assign(xs[best].data(), xs[best].data() + xs[best].size());
    sol.regularization_lambda = grid[best];
    sol.residual_norm = fnorm > 0.0 ? lc.residual[best] / fnorm : lc.residual[best];
    sol.iterations = 1;
    sol.converged = std::isfinite(sol.residual_norm);
    return sol;
}

FredholmSolution solve_psi(const Matrix& A, const std::vector<double>& F, const Regularization& reg) {
    TikhonovSolver solver(A, reg);
    return solver.solve(F);
}

void write_solution_csv(const FredholmSolution& s, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::InvalidParameter, "cannot open " + path);
    os.imbue(std::locale::classic());
    os << "tau,value,lambda,residual,iterations\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.psi.size(); ++i)
        os << (i < s.tau_grid.size() ? s.tau_grid[i] : 0.0) << ',' << s.psi[i] << ',' << s.regularization_lambda << ','
           << s.residual_norm << ',' << s.iterations << '\n';
}

} // namespace heatprice
