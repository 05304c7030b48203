// tdmrg: scan driver and invariant checker.
//   tdmrg scan --config <file> [--out <dir>] [--workers <n>] [--seed <u64>]
//   tdmrg verify [--suite <name>]
// Exit codes: 0 success, 1 config error, 2 grid-point or runtime failure,
// 3 verify failure.

#include "tdmrg/scan.hpp"
#include "tdmrg/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

int run_scan_command(const std::string& config_path, const std::string& out_dir, int workers,
                     bool seed_set, std::uint64_t seed) {
    tdmrg::ScanConfig cfg = tdmrg::load_scan_config(config_path);
    if (!out_dir.empty()) cfg.output = out_dir;
    if (workers >= 0) cfg.workers = workers;
    if (seed_set) cfg.sweep.seed = seed;

    const tdmrg::ScanResult res = tdmrg::run_scan(cfg);
    tdmrg::write_scan_outputs(cfg, res);

    int failed = 0;
    for (const auto& r : res.records)
        if (!r.error.empty()) ++failed;
    std::printf("scan: %zu records (%d failed), %zu jumps -> %s\n", res.records.size(), failed,
                res.jumps.size(), cfg.output.c_str());
    for (const auto& g : res.jumps) {
        if (g.fixed_axis.empty())
            std::printf("  jump along %s at %.6g (size %.3g)\n", g.report.axis.c_str(),
                        g.report.location, g.report.jump_size);
        else
            std::printf("  jump along %s at %.6g (size %.3g) with %s = %.6g\n",
                        g.report.axis.c_str(), g.report.location, g.report.jump_size,
                        g.fixed_axis.c_str(), g.fixed_value);
    }
    if (failed) {
        for (const auto& r : res.records)
            if (!r.error.empty()) std::fprintf(stderr, "point failed: %s\n", r.error.c_str());
        return 2;
    }
    return 0;
}

int run_verify_command(const std::string& suite) {
    tdmrg::VerifyOptions opt;
    opt.suite = suite;
    const auto checks = tdmrg::verify(opt);
    int failed = 0;
    for (const auto& c : checks) {
        std::printf("%s  %s.%s  measured=%.3g  tol=%.3g%s%s\n", c.pass ? "PASS" : "FAIL",
                    c.suite.c_str(), c.name.c_str(), c.measured, c.tolerance,
                    c.note.empty() ? "" : "  ", c.note.c_str());
        if (!c.pass) ++failed;
    }
    std::printf("verify: %zu checks, %d failed\n", checks.size(), failed);
    return failed ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spin-chain sweep scans and cross-check suites"};
    app.require_subcommand(1);

    std::string config_path, out_dir, suite;
    int workers = -1;
    std::uint64_t seed = 0;

    auto* scan_cmd = app.add_subcommand("scan", "run a parameter scan from a config file");
    scan_cmd->add_option("--config", config_path, "scan configuration file")->required();
    scan_cmd->add_option("--out", out_dir, "output directory (overrides the config's output key)");
    scan_cmd->add_option("--workers", workers, "worker thread count, 0 = one per core");
    auto* seed_opt = scan_cmd->add_option("--seed", seed, "base RNG seed (overrides the config)");

    auto* verify_cmd = app.add_subcommand("verify", "run the invariant cross-check suites");
    verify_cmd->add_option("--suite", suite, "run a single suite (default: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // bad flags are config errors
    }

    try {
        if (scan_cmd->parsed())
            return run_scan_command(config_path, out_dir, workers, seed_opt->count() > 0, seed);
        return run_verify_command(suite);
    } catch (const tdmrg::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
