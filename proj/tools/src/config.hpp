#pragma once

#include "heatprice/fd.hpp"
#include "heatprice/pricer.hpp"
#include "heatprice/termstructure.hpp"

#include "json.hpp"

#include <string>

namespace heatprice::cli {

inline constexpr int kConfigVersion = 1;

struct OutputOptions {
    std::string directory = "out";
    bool timing_in_csv = true;  // false writes runtime_ms as 0 for byte-stable files
    bool diagnostics = false;   // bundle and Fredholm dumps
};

struct RunConfig {
    CoefficientCurve curve = CoefficientCurve::exponential({0, 0, 1, 0, 0}, 1.0);
    SurfaceRequest request;
    SemiNumerics semi;
    FDNumerics fd;
    OutputOptions output;
};

// Throws Error(ConfigError) on schema problems.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

} // namespace heatprice::cli
