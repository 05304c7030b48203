#pragma once

// Batch front end for parameter scans: a flat key = value config selects a
// model, one or two scan axes, temperature, and sweep settings; run_scan fans
// the grid points over a thread pool and collects one record per point plus
// jump reports along every grid line. Output files are plain CSV and, for two
// axes, a gnuplot-ready matrix.

#include "tdmrg/detector.hpp"
#include "tdmrg/exact_diag.hpp"
#include "tdmrg/free_fermion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace tdmrg {

struct ScanAxis {
    std::string parameter;
    double min = 0.0;
    double max = 0.0;
    int points = 0;

    double value(int i) const {
        return i == points - 1 ? max : min + (max - min) * i / (points - 1);
    }
};

enum class OracleChecks { none, ed, freefermion };

struct ScanConfig {
    ModelSpec model;                 // template; axis parameters overwritten per point
    std::vector<ScanAxis> axes;      // one or two
    std::optional<double> beta;      // empty = strictly zero temperature
    SweepConfig sweep;
    OracleChecks oracle_checks = OracleChecks::none;
    std::string output = "scan_out";
    int workers = 0;                 // 0 = one per hardware thread
};

struct GridJump {
    JumpReport report;
    std::string fixed_axis;          // empty for one-axis scans
    double fixed_value = 0.0;
};

struct ScanResult {
    std::vector<ScanRecord> records; // row-major, axis1 outermost
    std::vector<GridJump> jumps;
};

namespace detail {

inline std::string strip(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double config_real(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos == text.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("config: key '" + key + "' expects a real number, got '" + text + "'");
}

inline long long config_int(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(text, &pos);
        if (pos == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + text + "'");
}

inline std::uint64_t config_u64(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(text, &pos);
        if (pos == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + text + "'");
}

inline std::string fmt_real(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.12g", v);
    return b;
}

inline std::string csv_safe(std::string s) {
    for (auto& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace detail

inline ScanConfig parse_scan_config(std::istream& in) {
    std::map<std::string, std::string> raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = detail::strip(line.substr(0, eq));
        const std::string val = detail::strip(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        if (!raw.emplace(key, val).second)
            throw ConfigError("config: duplicate key '" + key + "'");
    }

    auto take = [&raw](const std::string& key) -> std::optional<std::string> {
        const auto it = raw.find(key);
        if (it == raw.end()) return std::nullopt;
        std::string v = it->second;
        raw.erase(it);
        return v;
    };

    ScanConfig cfg;
    const auto kind = take("model");
    if (!kind) throw ConfigError("config: missing required key 'model'");
    if (*kind == "staggered")
        cfg.model = StaggeredSpec{};
    else if (*kind == "spin1")
        cfg.model = Spin1XxzSpec{};
    else
        throw ConfigError("config: model must be 'staggered' or 'spin1', got '" + *kind + "'");

    const auto nval = take("n");
    if (!nval) throw ConfigError("config: missing required key 'n'");
    const long long n = detail::config_int("n", *nval);
    if (n < 4 || n > 100000) throw ConfigError("config: n = " + *nval + " is out of range [4, 100000]");
    std::visit([&](auto& s) { s.n = int(n); }, cfg.model);

    const auto names = model_parameter_names(cfg.model);
    for (const std::string ax : {"axis1", "axis2"}) {
        const auto t = take(ax);
        if (!t) {
            if (ax == "axis1") throw ConfigError("config: missing required key 'axis1'");
            break;
        }
        std::istringstream is(*t);
        std::string pname, smin, smax, spts, extra;
        if (!(is >> pname >> smin >> smax >> spts) || (is >> extra))
            throw ConfigError("config: " + ax + " expects '<parameter> <min> <max> <points>'");
        if (std::find(names.begin(), names.end(), pname) == names.end())
            throw ConfigError("config: axis parameter '" + pname + "' does not exist on model '" +
                              model_name(cfg.model) + "'");
        ScanAxis axis;
        axis.parameter = pname;
        axis.min = detail::config_real(ax, smin);
        axis.max = detail::config_real(ax, smax);
        axis.points = int(detail::config_int(ax, spts));
        if (axis.points < 2) throw ConfigError("config: " + ax + " needs at least 2 points");
        if (axis.min == axis.max) throw ConfigError("config: " + ax + " range is empty");
        cfg.axes.push_back(std::move(axis));
    }
    if (cfg.axes.size() == 2 && cfg.axes[0].parameter == cfg.axes[1].parameter)
        throw ConfigError("config: axis1 and axis2 scan the same parameter '" +
                          cfg.axes[0].parameter + "'");

    if (const auto t = take("beta")) {
        if (*t == "zero") {
            cfg.beta.reset();
        } else {
            const double b = detail::config_real("beta", *t);
            if (b < 0.0) throw ConfigError("config: beta must be 'zero' or a nonnegative real");
            cfg.beta = b;
        }
    }
    if (const auto t = take("m")) cfg.sweep.m = int(detail::config_int("m", *t));
    if (const auto t = take("k_targets")) cfg.sweep.k_targets = int(detail::config_int("k_targets", *t));
    if (const auto t = take("n_sweeps")) cfg.sweep.n_sweeps = int(detail::config_int("n_sweeps", *t));
    if (const auto t = take("lanczos_tol")) cfg.sweep.lanczos_tol = detail::config_real("lanczos_tol", *t);
    if (const auto t = take("converge_tol")) cfg.sweep.converge_tol = detail::config_real("converge_tol", *t);
    if (const auto t = take("seed")) cfg.sweep.seed = detail::config_u64("seed", *t);
    if (cfg.beta) {
        cfg.sweep.target_weights = SweepConfig::Weights::boltzmann;
        cfg.sweep.beta = *cfg.beta;
    } else {
        cfg.sweep.target_weights = SweepConfig::Weights::equal;
        cfg.sweep.beta = 0.0;
    }

    std::string oracle = "none";
    if (const auto t = take("oracle_checks")) oracle = *t;
    if (const auto t = take("output")) cfg.output = *t;
    if (const auto t = take("workers")) {
        const long long w = detail::config_int("workers", *t);
        if (w < 0) throw ConfigError("config: workers must be nonnegative");
        cfg.workers = int(w);
    }

    // whatever is left must be a model parameter default
    for (const auto& [key, val] : raw) {
        if (std::find(names.begin(), names.end(), key) == names.end())
            throw ConfigError("config: unknown key '" + key + "' for model '" +
                              model_name(cfg.model) + "'");
        set_parameter(cfg.model, key, detail::config_real(key, val));
    }

    if (oracle == "none") {
        cfg.oracle_checks = OracleChecks::none;
    } else if (oracle == "ed") {
        cfg.oracle_checks = OracleChecks::ed;
        const double dim = std::pow(double(model_local_dim(cfg.model)), double(n));
        if (dim > double(Index(1) << 20))
            throw ConfigError("config: oracle_checks = ed is limited to local_dim^n <= 2^20");
    } else if (oracle == "freefermion") {
        cfg.oracle_checks = OracleChecks::freefermion;
        bool delta_scanned = false;
        for (const auto& a : cfg.axes)
            if (a.parameter == "delta") delta_scanned = true;
        if (!std::holds_alternative<StaggeredSpec>(cfg.model) || delta_scanned ||
            get_parameter(cfg.model, "delta") != 0.0)
            throw ConfigError(
                "config: oracle_checks = freefermion needs the staggered model at fixed delta = 0");
    } else {
        throw ConfigError("config: oracle_checks must be none, ed, or freefermion, got '" + oracle +
                          "'");
    }
    return cfg;
}

inline ScanConfig load_scan_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    return parse_scan_config(in);
}

namespace detail {

// One grid point: run the engine, then the optional oracle cross-check.
// Oracle misses land in the error column rather than throwing.
inline ScanRecord measured_record(const ModelSpec& spec, const SweepConfig& scfg,
                                  std::optional<double> beta, OracleChecks oracle) {
    ScanRecord rec;
    const SweepMeasurement mes = measure_sweep(spec, scfg, beta);
    rec.avg_trace_distance = mes.average.mean;
    rec.ground_energy = mes.ground_energy;
    rec.k_energies = mes.k_energies;
    rec.geometric_phase = mes.geometric_phase;
    rec.max_discarded_weight = mes.max_discarded_weight;
    rec.support_dim_max = mes.support_dim_max;
    if (oracle == OracleChecks::ed) {
        const int kk = int(rec.k_energies.size());
        const Spectrum sp = ed_lowest_k(spec, kk, {});
        double dev = 0.0;
        for (int i = 0; i < kk; ++i) dev = std::max(dev, std::abs(rec.k_energies[i] - sp.eigenvalues(i)));
        if (dev > 1e-8) rec.error = "oracle ed: max energy deviation " + fmt_real(dev);
    } else if (oracle == OracleChecks::freefermion) {
        const double e0 = ff_ground_energy(jw_build(std::get<StaggeredSpec>(spec)));
        const double dev = std::abs(rec.ground_energy - e0);
        // truncated runs are variational, so the bar scales with the discarded weight
        const double tol = std::max(1e-8, 20.0 * model_sites(spec) * rec.max_discarded_weight);
        if (dev > tol)
            rec.error = "oracle freefermion: ground energy off by " + fmt_real(dev) +
                        " (allowed " + fmt_real(tol) + ")";
    }
    return rec;
}

}  // namespace detail

// Test seam: a replacement point evaluator. The default runs measured_record.
using PointFunction =
    std::function<ScanRecord(const ModelSpec&, const SweepConfig&, std::optional<double>)>;

inline ScanResult run_scan(const ScanConfig& cfg, const PointFunction& point = {}) {
    if (cfg.axes.empty() || cfg.axes.size() > 2)
        throw ConfigError("run_scan: need one or two axes");
    for (const auto& a : cfg.axes)
        if (a.points < 2) throw ConfigError("run_scan: axis '" + a.parameter + "' needs >= 2 points");
    const int p1 = cfg.axes[0].points;
    const int p2 = cfg.axes.size() == 2 ? cfg.axes[1].points : 1;
    const int total = p1 * p2;

    const PointFunction fn =
        point ? point
              : PointFunction([oc = cfg.oracle_checks](const ModelSpec& s, const SweepConfig& c,
                                                       std::optional<double> b) {
                    return detail::measured_record(s, c, b, oc);
                });

    ScanResult out;
    out.records.resize(total);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int p = next.fetch_add(1); p < total; p = next.fetch_add(1)) {
            const int i1 = p / p2;
            const int i2 = p % p2;
            ModelSpec spec = cfg.model;
            set_parameter(spec, cfg.axes[0].parameter, cfg.axes[0].value(i1));
            if (cfg.axes.size() == 2)
                set_parameter(spec, cfg.axes[1].parameter, cfg.axes[1].value(i2));
            SweepConfig scfg = cfg.sweep;
            scfg.seed = detail::step_seed(cfg.sweep.seed, p);
            ScanRecord rec;
            try {
                rec = fn(spec, scfg, cfg.beta);
            } catch (const std::exception& e) {
                rec = ScanRecord{};
                const double nan = std::numeric_limits<double>::quiet_NaN();
                rec.avg_trace_distance = nan;
                rec.ground_energy = nan;
                rec.geometric_phase = nan;
                rec.max_discarded_weight = nan;
                rec.error = e.what();
            }
            rec.parameters.clear();
            rec.parameters["n"] = double(model_sites(spec));
            for (const auto& name : model_parameter_names(spec))
                rec.parameters[name] = get_parameter(spec, name);
            out.records[p] = std::move(rec);
        }
    };
    int w = cfg.workers > 0 ? cfg.workers : int(std::max(1u, std::thread::hardware_concurrency()));
    w = std::min(w, total);
    if (w <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(w);
        for (int i = 0; i < w; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // jump detection along every full grid line that ran clean
    auto line_ok = [](const std::vector<ScanRecord>& ln) {
        if (ln.size() < 4) return false;
        for (const auto& r : ln)
            if (!r.error.empty() || !std::isfinite(r.avg_trace_distance)) return false;
        return true;
    };
    if (cfg.axes.size() == 1) {
        if (line_ok(out.records))
            for (const auto& j : detect_jumps(out.records, cfg.axes[0].parameter))
                out.jumps.push_back({j, "", 0.0});
    } else {
        for (int i2 = 0; i2 < p2; ++i2) {
            std::vector<ScanRecord> ln;
            ln.reserve(p1);
            for (int i1 = 0; i1 < p1; ++i1) ln.push_back(out.records[i1 * p2 + i2]);
            if (line_ok(ln))
                for (const auto& j : detect_jumps(ln, cfg.axes[0].parameter))
                    out.jumps.push_back({j, cfg.axes[1].parameter, cfg.axes[1].value(i2)});
        }
        for (int i1 = 0; i1 < p1; ++i1) {
            const std::vector<ScanRecord> ln(out.records.begin() + i1 * p2,
                                             out.records.begin() + (i1 + 1) * p2);
            if (line_ok(ln))
                for (const auto& j : detect_jumps(ln, cfg.axes[1].parameter))
                    out.jumps.push_back({j, cfg.axes[0].parameter, cfg.axes[0].value(i1)});
        }
    }
    return out;
}

// scan.csv, jumps.csv, and (two axes) heatmap.dat under cfg.output. All reals
// go through one %.12g formatter so repeat runs are byte-identical.
inline void write_scan_outputs(const ScanConfig& cfg, const ScanResult& res) {
    namespace fs = std::filesystem;
    const fs::path dir = cfg.output;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw ConfigError("scan output: cannot create directory '" + dir.string() +
                          "': " + ec.message());

    std::vector<std::string> cols{"n"};
    for (const auto& p : model_parameter_names(cfg.model)) cols.push_back(p);

    {
        std::ofstream csv(dir / "scan.csv");
        if (!csv) throw ConfigError("scan output: cannot write " + (dir / "scan.csv").string());
        for (const auto& c : cols) csv << c << ',';
        csv << "avg_trace_distance,ground_energy,geometric_phase,max_discarded_weight,"
               "support_dim_max,error\n";
        for (const auto& r : res.records) {
            for (const auto& c : cols) csv << detail::fmt_real(r.parameters.at(c)) << ',';
            csv << detail::fmt_real(r.avg_trace_distance) << ','
                << detail::fmt_real(r.ground_energy) << ','
                << detail::fmt_real(r.geometric_phase) << ','
                << detail::fmt_real(r.max_discarded_weight) << ','
                << (long long)(r.support_dim_max) << ',' << detail::csv_safe(r.error) << '\n';
        }
    }
    {
        std::ofstream jf(dir / "jumps.csv");
        if (!jf) throw ConfigError("scan output: cannot write " + (dir / "jumps.csv").string());
        jf << "axis,location,jump_size,threshold,fixed_axis,fixed_value\n";
        for (const auto& g : res.jumps) {
            jf << g.report.axis << ',' << detail::fmt_real(g.report.location) << ','
               << detail::fmt_real(g.report.jump_size) << ','
               << detail::fmt_real(g.report.threshold_used) << ',' << g.fixed_axis << ','
               << (g.fixed_axis.empty() ? std::string{} : detail::fmt_real(g.fixed_value)) << '\n';
        }
    }
    if (cfg.axes.size() == 2) {
        const auto& a1 = cfg.axes[0];
        const auto& a2 = cfg.axes[1];
        std::ofstream hm(dir / "heatmap.dat");
        if (!hm) throw ConfigError("scan output: cannot write " + (dir / "heatmap.dat").string());
        hm << "# avg_trace_distance matrix: rows follow " << a1.parameter << ", columns follow "
           << a2.parameter << "\n";
        hm << "# " << a1.parameter << ":";
        for (int i = 0; i < a1.points; ++i) hm << ' ' << detail::fmt_real(a1.value(i));
        hm << "\n# " << a2.parameter << ":";
        for (int i = 0; i < a2.points; ++i) hm << ' ' << detail::fmt_real(a2.value(i));
        hm << '\n';
        for (int i1 = 0; i1 < a1.points; ++i1) {
            for (int i2 = 0; i2 < a2.points; ++i2) {
                if (i2) hm << ' ';
                hm << detail::fmt_real(res.records[i1 * a2.points + i2].avg_trace_distance);
            }
            hm << '\n';
        }
    }
}

}  // namespace tdmrg
