#pragma once

#include "config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace heatprice::cli {

enum class Method { Semi, FD, Both };

Method method_from_string(const std::string& s);

struct RunOptions {
    Method method = Method::Both;
    bool no_psi = false;  // forces the flux term off; the config flag applies otherwise
    std::size_t threads = 1;
    std::optional<std::string> out;
};

struct ErrorCell {
    double K = 0.0;
    double T = 0.0;
    double a = 0.0;
    double b = 0.0;
    double abs_error = 0.0;
    double rel_error = 0.0;  // |b - a| / |a|, absolute when a = 0
};

struct ErrorTable {
    std::vector<ErrorCell> cells;
    double max_rel = 0.0;
    double mean_rel = 0.0;
};

struct RunReport {
    std::optional<PriceSurface> semi;
    std::optional<PriceSurface> fd;
    std::optional<ErrorTable> errors;  // semi against fd
    std::string out_dir;
};

// Prices the lattice and writes surface_<method>.csv, errors.csv and timing.json into the output directory.
RunReport run(const RunConfig& cfg, const RunOptions& opt);

// Cells must match in order and coordinates; a is the reference.
ErrorTable compare(const PriceSurface& a, const PriceSurface& b);
ErrorTable compare_files(const std::string& a, const std::string& b);
void write_error_csv(const ErrorTable& t, const std::string& path);

// {"error": code, "message": ..., "K": ..., "T": ...}
std::string error_report(const std::exception& e);
int exit_code(const std::exception& e);

} // namespace heatprice::cli
