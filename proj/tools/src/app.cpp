#include "app.hpp"

#include "heatprice/errors.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>

namespace heatprice::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Method method_from_string(const std::string& s) {
    if (s == "semi") return Method::Semi;
    if (s == "fd") return Method::FD;
    if (s == "both") return Method::Both;
    throw Error(ErrorCode::ConfigError, "method must be semi, fd or both");
}

namespace {

json semi_timing(const PriceSurface& s, bool no_psi) {
    const StageTimes& t = s.times;
    return {{"transform_ms", t.transform_ms},
            {"fredholm_ms", t.fredholm_ms},
            {"pricing_ms", t.pricing_ms},
            {"stage_sum_ms", t.transform_ms + t.fredholm_ms + t.pricing_ms},
            {"total_ms", t.total_ms},
            {"fredholm_skipped", no_psi}};
}

void write_diagnostics(const RunConfig& cfg, const std::string& dir) {
    const SurfaceRequest& req = cfg.request;
    for (std::size_t ti = 0; ti < req.maturities.size(); ++ti) {
        const double T = req.maturities[ti];
        TransformBundle bundle = make_bundle(cfg.curve, T, cfg.semi.transform);
        bundle.write_csv(dir + "/bundle_T" + std::to_string(ti) + ".csv");
        if (req.product == Product::AmericanCall) {
            for (std::size_t ki = 0; ki < req.strikes.size(); ++ki) {
                AmericanBoundary b = solve_american_boundary(bundle, req.strikes[ki], cfg.semi.american);
                write_solution_csv(b.solution,
                                   dir + "/boundary_T" + std::to_string(ti) + "_K" + std::to_string(ki) + ".csv");
            }
        }
        if ((req.product == Product::UpOutCall || req.product == Product::DownOutCall) && !cfg.semi.barrier.no_psi) {
            UpOutEngine engine(std::move(bundle), req.H, cfg.semi.barrier);
            for (std::size_t ki = 0; ki < req.strikes.size(); ++ki) {
                BarrierResult r = engine.price(req.S0, req.strikes[ki]);
                write_solution_csv(r.psi, dir + "/fredholm_T" + std::to_string(ti) + "_K" + std::to_string(ki) + ".csv");
            }
        }
    }
}

} // namespace

RunReport run(const RunConfig& cfg_in, const RunOptions& opt) {
    RunConfig cfg = cfg_in;
    if (opt.no_psi) cfg.semi.barrier.no_psi = true;
    RunReport rep;
    rep.out_dir = opt.out ? *opt.out : cfg.output.directory;
    std::error_code ec;
    fs::create_directories(rep.out_dir, ec);
    if (ec) throw Error(ErrorCode::ConfigError, "cannot create output directory '" + rep.out_dir + "'");

    json timing;
    timing["threads"] = opt.threads;
    timing["no_psi"] = cfg.semi.barrier.no_psi;
    if (opt.method != Method::FD) {
        rep.semi = price_surface_semi(cfg.curve, cfg.request, cfg.semi, opt.threads);
        write_surface_csv(*rep.semi, rep.out_dir + "/surface_semi.csv", cfg.output.timing_in_csv);
        timing["semi"] = semi_timing(*rep.semi, cfg.semi.barrier.no_psi);
    }
    if (opt.method != Method::Semi) {
        rep.fd = price_surface_fd(cfg.curve, cfg.request, cfg.fd, opt.threads);
        write_surface_csv(*rep.fd, rep.out_dir + "/surface_fd.csv", cfg.output.timing_in_csv);
        timing["fd"] = {{"fd_ms", rep.fd->times.fd_ms},
                        {"stage_sum_ms", rep.fd->times.fd_ms},
                        {"total_ms", rep.fd->times.total_ms},
                        {"N", cfg.fd.N},
                        {"dt", cfg.fd.dt}};
    }
    if (rep.semi && rep.fd) {
        rep.errors = compare(*rep.fd, *rep.semi);
        write_error_csv(*rep.errors, rep.out_dir + "/errors.csv");
        timing["speedup"] = rep.semi->times.total_ms > 0.0 ? rep.fd->times.total_ms / rep.semi->times.total_ms : 0.0;
    }
    if (cfg.output.diagnostics) write_diagnostics(cfg, rep.out_dir);
    std::ofstream(rep.out_dir + "/timing.json") << timing.dump(2) << '\n';
    return rep;
}

ErrorTable compare(const PriceSurface& a, const PriceSurface& b) {
    if (a.cells.size() != b.cells.size())
        throw Error(ErrorCode::LatticeMismatch, "surfaces have different numbers of cells");
    ErrorTable t;
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        const SurfaceCell &x = a.cells[i], &y = b.cells[i];
        if (x.K != y.K || x.T != y.T) throw Error(ErrorCode::LatticeMismatch, "lattice coordinates differ").at_cell(x.K, x.T);
        ErrorCell c{x.K, x.T, x.price, y.price, std::fabs(y.price - x.price), 0.0};
        c.rel_error = x.price != 0.0 ? c.abs_error / std::fabs(x.price) : c.abs_error;
        t.max_rel = std::max(t.max_rel, c.rel_error);
        t.mean_rel += c.rel_error;
        t.cells.push_back(c);
    }
    if (!t.cells.empty()) t.mean_rel /= static_cast<double>(t.cells.size());
    return t;
}

ErrorTable compare_files(const std::string& a, const std::string& b) {
    return compare(read_surface_csv(a), read_surface_csv(b));
}

void write_error_csv(const ErrorTable& t, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::ConfigError, "cannot open " + path);
    os.imbue(std::locale::classic());
    os << "K,T,reference,price,abs_error,rel_error\n" << std::setprecision(17);
    for (const ErrorCell& c : t.cells)
        os << c.K << ',' << c.T << ',' << c.a << ',' << c.b << ',' << c.abs_error << ',' << c.rel_error << '\n';
}

std::string error_report(const std::exception& e) {
    json j;
    if (auto* he = dynamic_cast<const Error*>(&e)) {
        j["error"] = to_string(he->code());
        j["message"] = he->detail();
        if (!std::isnan(he->strike())) j["K"] = he->strike();
        if (!std::isnan(he->maturity())) j["T"] = he->maturity();
    } else {
        j["error"] = "Internal";
        j["message"] = e.what();
    }
    return j.dump();
}

int exit_code(const std::exception& e) {
    if (auto* he = dynamic_cast<const Error*>(&e))
        if (he->code() == ErrorCode::ConfigError || he->code() == ErrorCode::LatticeMismatch) return 2;
    return 3;
}

} // namespace heatprice::cli
