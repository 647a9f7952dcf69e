#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace heatprice {

enum class ErrorCode {
    OutOfDomain,
    QuadratureFailure,
    BlowUp,
    InvalidParameter,
    EmptyPayoffRegion,
    SingularSystem,
    NoConvergence,
    InvalidNome,
    BarrierBreached,
    InstabilityDetected,
    ConfigError,
    LatticeMismatch,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

    // lattice cell the error came from; NaN when unknown
    double strike() const noexcept { return K_; }
    double maturity() const noexcept { return T_; }
    Error at_cell(double K, double T) const {
        Error e(code_, detail_ + " (K=" + std::to_string(K) + ", T=" + std::to_string(T) + ")");
        e.detail_ = detail_;
        e.K_ = K;
        e.T_ = T;
        return e;
    }
    Error at_maturity(double T) const {
        Error e(code_, detail_ + " (T=" + std::to_string(T) + ")");
        e.detail_ = detail_;
        e.T_ = T;
        return e;
    }

private:
    ErrorCode code_;
    std::string detail_;
    double K_ = std::numeric_limits<double>::quiet_NaN();
    double T_ = std::numeric_limits<double>::quiet_NaN();
};

} // namespace heatprice
