#include "app.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace heatprice::cli;

int main(int argc, char** argv) {
    CLI::App app{"Barrier and American call pricing under time-dependent normal dynamics"};
    app.require_subcommand(1);

    std::string config_path, method = "both", out;
    bool no_psi = false;
    std::size_t threads = 1;
    CLI::App* run_cmd = app.add_subcommand("run", "price a strike x maturity lattice");
    run_cmd->add_option("--config", config_path, "JSON run configuration")->required();
    run_cmd->add_option("--method", method, "semi, fd or both")->check(CLI::IsMember({"semi", "fd", "both"}));
    run_cmd->add_flag("--no-psi", no_psi, "drop the boundary-flux term");
    run_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    run_cmd->add_option("--out", out, "output directory (overrides the config)");

    std::string file_a, file_b, err_out;
    CLI::App* cmp_cmd = app.add_subcommand("compare", "per-cell relative error between two surfaces");
    cmp_cmd->add_option("reference", file_a, "reference surface CSV")->required();
    cmp_cmd->add_option("other", file_b, "surface CSV to compare")->required();
    cmp_cmd->add_option("--out", err_out, "write the error table to this CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::string out_dir;
    try {
        if (*run_cmd) {
            RunConfig cfg = load_config(config_path);
            RunOptions opt;
            opt.method = method_from_string(method);
            opt.no_psi = no_psi;
            opt.threads = threads;
            if (!out.empty()) opt.out = out;
            out_dir = opt.out ? *opt.out : cfg.output.directory;
            RunReport rep = run(cfg, opt);
            if (rep.semi)
                std::printf("semi: %zu cells, %.2f ms\n", rep.semi->cells.size(), rep.semi->times.total_ms);
            if (rep.fd) std::printf("fd:   %zu cells, %.2f ms\n", rep.fd->cells.size(), rep.fd->times.total_ms);
            if (rep.errors)
                std::printf("relative error vs fd: max %.3e mean %.3e\n", rep.errors->max_rel, rep.errors->mean_rel);
            std::printf("wrote %s\n", rep.out_dir.c_str());
        } else {
            ErrorTable t = compare_files(file_a, file_b);
            if (!err_out.empty()) write_error_csv(t, err_out);
            for (const ErrorCell& c : t.cells) std::printf("K=%g T=%g rel=%.6e\n", c.K, c.T, c.rel_error);
            std::printf("max %.6e mean %.6e\n", t.max_rel, t.mean_rel);
        }
    } catch (const std::exception& e) {
        std::string report = error_report(e);
        std::cerr << report << '\n';
        if (!out_dir.empty()) std::ofstream(out_dir + "/error.json") << report << '\n';
        return exit_code(e);
    }
    return 0;
}
