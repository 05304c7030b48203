#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tdmrg/free_fermion.hpp"
#include "tdmrg/scan.hpp"
#include "tdmrg/verify.hpp"

using namespace tdmrg;

namespace {

ScanConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_scan_config(is);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("config parse fills every field") {
    const ScanConfig cfg = parse(R"(
# staggered line scan
model = staggered
n = 40
j = 1.0
j_alt = 0.5
b_alt = 1.0          # alternating field
delta = 0
axis1 = b 0 3 61
beta = 40
m = 24
k_targets = 14
n_sweeps = 5
lanczos_tol = 1e-10
converge_tol = 1e-9
seed = 77
oracle_checks = freefermion
output = out_dir
workers = 2
)");
    const auto& s = std::get<StaggeredSpec>(cfg.model);
    CHECK(s.n == 40);
    CHECK(s.j == 1.0);
    CHECK(s.j_alt == 0.5);
    CHECK(s.b == 0.0);
    CHECK(s.b_alt == 1.0);
    CHECK(s.delta == 0.0);
    REQUIRE(cfg.axes.size() == 1);
    CHECK(cfg.axes[0].parameter == "b");
    CHECK(cfg.axes[0].min == 0.0);
    CHECK(cfg.axes[0].max == 3.0);
    CHECK(cfg.axes[0].points == 61);
    CHECK(cfg.axes[0].value(60) == 3.0);
    REQUIRE(cfg.beta.has_value());
    CHECK(*cfg.beta == 40.0);
    CHECK(cfg.sweep.m == 24);
    CHECK(cfg.sweep.k_targets == 14);
    CHECK(cfg.sweep.n_sweeps == 5);
    CHECK(cfg.sweep.lanczos_tol == 1e-10);
    CHECK(cfg.sweep.converge_tol == 1e-9);
    CHECK(cfg.sweep.seed == 77);
    CHECK(cfg.sweep.target_weights == SweepConfig::Weights::boltzmann);
    CHECK(cfg.sweep.beta == 40.0);
    CHECK(cfg.oracle_checks == OracleChecks::freefermion);
    CHECK(cfg.output == "out_dir");
    CHECK(cfg.workers == 2);
}

TEST_CASE("config parse handles spin1, zero beta, and two axes") {
    const ScanConfig cfg = parse(R"(
model = spin1
n = 12
axis1 = jz -1 1.5 11
axis2 = d 0 2 9
beta = zero
)");
    const auto& s = std::get<Spin1XxzSpec>(cfg.model);
    CHECK(s.n == 12);
    REQUIRE(cfg.axes.size() == 2);
    CHECK(cfg.axes[0].parameter == "jz");
    CHECK(cfg.axes[1].parameter == "d");
    CHECK(!cfg.beta.has_value());
    CHECK(cfg.sweep.target_weights == SweepConfig::Weights::equal);
    CHECK(cfg.oracle_checks == OracleChecks::none);
}

TEST_CASE("config rejections name the offending field") {
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"n = 8\naxis1 = b 0 1 4\n", "model"},
        {"model = heisenberg\nn = 8\naxis1 = b 0 1 4\n", "heisenberg"},
        {"model = staggered\naxis1 = b 0 1 4\n", "'n'"},
        {"model = staggered\nn = 8\n", "axis1"},
        {"model = staggered\nn = 8\naxis1 = mass 0 1 4\n", "mass"},
        {"model = spin1\nn = 8\naxis1 = b 0 1 4\n", "'b'"},
        {"model = staggered\nn = 8\naxis1 = b 0 1 1\n", "at least 2 points"},
        {"model = staggered\nn = 8\naxis1 = b 0 1 4\naxis2 = b 1 2 4\n", "same parameter"},
        {"model = staggered\nn = 8\nn = 10\naxis1 = b 0 1 4\n", "duplicate"},
        {"model = staggered\nn = 8\naxis1 = b 0 1 4\nbogus_key = 3\n", "bogus_key"},
        {"model = staggered\nn = 8\naxis1 = b 0 1 4\nm = fast\n", "'m'"},
        {"model = staggered\nn = 8\naxis1 = b 0 1 4\nbeta = -2\n", "beta"},
        {"model = staggered\nn = 8\naxis1 = b 0 1 4\noracle_checks = exact\n", "exact"},
        {"model = staggered\nn = 8\ndelta = 1\naxis1 = b 0 1 4\noracle_checks = freefermion\n",
         "delta"},
        {"model = spin1\nn = 8\naxis1 = d 0 1 4\noracle_checks = freefermion\n", "staggered"},
        {"model = staggered\nn = 8\naxis1 = b 0 1 4\nworkers = -1\n", "workers"},
        {"model = staggered\nn = 8\naxis1 = b 0 0 4\n", "range"},
        {"model = staggered\nn = 2\naxis1 = b 0 1 4\n", "out of range"},
        {"model = staggered\nn = 8\naxis1 = b 0 1 4\njust a line\n", "key = value"},
    };
    for (const auto& [text, needle] : cases) {
        INFO(text);
        try {
            parse(text);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    }
}

TEST_CASE("grid-point failures land in the error column without aborting") {
    ScanConfig cfg;
    cfg.model = StaggeredSpec{6, 0.0, 0.0, 0.5, 0.0, 0.0};
    cfg.axes = {{"b", 0.0, 1.0, 5}};
    cfg.workers = 2;
    const PointFunction fn = [](const ModelSpec& spec, const SweepConfig&,
                                std::optional<double>) -> ScanRecord {
        if (std::abs(get_parameter(spec, "b") - 0.5) < 1e-12)
            throw NumericError("synthetic failure, with a comma");
        ScanRecord rec;
        rec.avg_trace_distance = 0.25;
        rec.ground_energy = -1.0;
        return rec;
    };
    const ScanResult res = run_scan(cfg, fn);
    REQUIRE(res.records.size() == 5);
    for (int i = 0; i < 5; ++i) {
        const auto& r = res.records[i];
        CHECK(r.parameters.at("n") == 6.0);
        CHECK(r.parameters.at("b") == Catch::Approx(0.25 * i).margin(1e-12));
        if (i == 2) {
            CHECK(r.error.find("synthetic failure") != std::string::npos);
            CHECK(std::isnan(r.avg_trace_distance));
        } else {
            CHECK(r.error.empty());
            CHECK(r.avg_trace_distance == 0.25);
        }
    }
    CHECK(res.jumps.empty());  // a failed point disables jump detection on its line

    cfg.output = (std::filesystem::temp_directory_path() / "tdmrg_scan_err").string();
    std::filesystem::remove_all(cfg.output);
    write_scan_outputs(cfg, res);
    const std::string csv = slurp(std::filesystem::path(cfg.output) / "scan.csv");
    std::istringstream lines(csv);
    std::string line;
    int rows = 0;
    long long header_commas = -1;
    while (std::getline(lines, line)) {
        const long long commas = std::count(line.begin(), line.end(), ',');
        if (header_commas < 0)
            header_commas = commas;
        else
            CHECK(commas == header_commas);  // sanitized error keeps the column count
        ++rows;
    }
    CHECK(rows == 6);
    CHECK(csv.find("synthetic failure; with a comma") != std::string::npos);
}

TEST_CASE("two-point decoupled scan gives two flat records and no jumps") {
    ScanConfig cfg;
    cfg.model = StaggeredSpec{6, 0.0, 0.0, 0.0, 0.0, 0.0};
    cfg.axes = {{"b", 0.2, 0.9, 2}};
    cfg.sweep.m = 4;
    cfg.sweep.k_targets = 2;
    cfg.sweep.n_sweeps = 2;
    cfg.sweep.converge_tol = 0.0;
    cfg.workers = 1;
    const ScanResult res = run_scan(cfg);
    REQUIRE(res.records.size() == 2);
    for (const auto& r : res.records) {
        CHECK(r.error.empty());
        CHECK(r.avg_trace_distance <= 1e-9);
        CHECK(r.parameters.size() == 6);  // n plus the five staggered parameters
    }
    CHECK(res.records[0].parameters.at("b") == 0.2);
    CHECK(res.records[1].parameters.at("b") == 0.9);
    CHECK(res.jumps.empty());
}

TEST_CASE("records and CSV bytes are independent of worker count") {
    ScanConfig cfg;
    cfg.model = StaggeredSpec{6, 1.0, 0.3, 0.0, 0.4, 0.2};
    cfg.axes = {{"b", 0.0, 0.6, 4}};
    cfg.sweep.m = 8;
    cfg.sweep.k_targets = 2;
    cfg.sweep.n_sweeps = 2;
    cfg.sweep.converge_tol = 0.0;
    cfg.sweep.seed = 123;

    cfg.workers = 1;
    cfg.output = (std::filesystem::temp_directory_path() / "tdmrg_scan_w1").string();
    std::filesystem::remove_all(cfg.output);
    const ScanResult a = run_scan(cfg);
    write_scan_outputs(cfg, a);

    cfg.workers = 3;
    cfg.output = (std::filesystem::temp_directory_path() / "tdmrg_scan_w3").string();
    std::filesystem::remove_all(cfg.output);
    const ScanResult b = run_scan(cfg);
    write_scan_outputs(cfg, b);

    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].avg_trace_distance == b.records[i].avg_trace_distance);
        CHECK(a.records[i].ground_energy == b.records[i].ground_energy);
        CHECK(a.records[i].geometric_phase == b.records[i].geometric_phase);
    }
    const auto dir1 = std::filesystem::path(cfg.output).parent_path() / "tdmrg_scan_w1";
    const auto dir3 = std::filesystem::path(cfg.output).parent_path() / "tdmrg_scan_w3";
    CHECK(slurp(dir1 / "scan.csv") == slurp(dir3 / "scan.csv"));
    CHECK(slurp(dir1 / "jumps.csv") == slurp(dir3 / "jumps.csv"));
}

TEST_CASE("ed oracle check passes on an exactly solvable spin-1 scan") {
    ScanConfig cfg;
    cfg.model = Spin1XxzSpec{8, 1.0, 0.0};
    cfg.axes = {{"d", 0.0, 2.0, 3}};
    cfg.sweep.m = 81;
    cfg.sweep.k_targets = 1;
    cfg.sweep.n_sweeps = 3;
    cfg.sweep.converge_tol = 0.0;
    cfg.oracle_checks = OracleChecks::ed;
    cfg.workers = 2;
    const ScanResult res = run_scan(cfg);
    REQUIRE(res.records.size() == 3);
    for (const auto& r : res.records) {
        INFO(r.error);
        CHECK(r.error.empty());
        CHECK(r.max_discarded_weight <= 1e-12);
    }
}

TEST_CASE("freefermion oracle check accepts a truncated run") {
    ScanConfig cfg;
    cfg.model = StaggeredSpec{12, 1.0, 0.5, 0.0, 1.0, 0.0};
    cfg.axes = {{"b", 0.1, 0.4, 4}};
    cfg.sweep.m = 16;
    cfg.sweep.k_targets = 1;
    cfg.sweep.n_sweeps = 3;
    cfg.oracle_checks = OracleChecks::freefermion;
    cfg.workers = 2;
    const ScanResult res = run_scan(cfg);
    for (const auto& r : res.records) {
        INFO(r.error);
        CHECK(r.error.empty());
    }
}

TEST_CASE("zero-temperature scan localizes a ground-state crossing") {
    const StaggeredSpec base{10, 1.0, 0.5, 0.0, 1.0, 0.0};
    const auto xs = ff_critical_scan(base, "b", 0.8, 1.2, 1e-3);
    REQUIRE(!xs.empty());

    ScanConfig cfg;
    cfg.model = base;
    cfg.axes = {{"b", 0.8, 1.2, 9}};
    cfg.sweep.m = 32;
    cfg.sweep.k_targets = 1;
    cfg.sweep.n_sweeps = 3;
    cfg.workers = 2;
    const ScanResult res = run_scan(cfg);
    for (const auto& r : res.records) {
        INFO(r.error);
        CHECK(r.error.empty());
    }
    const double step = 0.4 / 8;
    REQUIRE(!res.jumps.empty());
    double best = 1e9;
    for (const auto& g : res.jumps) {
        CHECK(g.report.axis == "b");
        best = std::min(best, std::abs(g.report.location - xs.front()));
        // every reported jump sits near some true crossing
        double near = 1e9;
        for (double x : xs) near = std::min(near, std::abs(g.report.location - x));
        CHECK(near <= step);
    }
    CHECK(best <= step);
}

TEST_CASE("two-axis scan writes heatmap and per-line jumps") {
    ScanConfig cfg;
    cfg.model = StaggeredSpec{6, 0.0, 0.0, 0.0, 0.0, 0.0};
    cfg.axes = {{"b", 0.0, 1.0, 2}, {"b_alt", 0.0, 1.5, 4}};
    cfg.workers = 2;
    cfg.output = (std::filesystem::temp_directory_path() / "tdmrg_scan_2d").string();
    std::filesystem::remove_all(cfg.output);
    const PointFunction fn = [](const ModelSpec& spec, const SweepConfig&,
                                std::optional<double>) {
        ScanRecord rec;
        rec.avg_trace_distance = get_parameter(spec, "b_alt") >= 0.75 ? 1.0 : 0.0;
        return rec;
    };
    const ScanResult res = run_scan(cfg, fn);
    REQUIRE(res.records.size() == 8);

    // axis-1 lines have 2 points (too short); both axis-2 lines see the step at b_alt = 0.75
    REQUIRE(res.jumps.size() == 2);
    for (const auto& g : res.jumps) {
        CHECK(g.report.axis == "b_alt");
        CHECK(g.report.location == Catch::Approx(0.75).margin(1e-12));
        CHECK(g.fixed_axis == "b");
    }
    CHECK(res.jumps[0].fixed_value == 0.0);
    CHECK(res.jumps[1].fixed_value == 1.0);

    write_scan_outputs(cfg, res);
    const std::string hm = slurp(std::filesystem::path(cfg.output) / "heatmap.dat");
    CHECK(hm.rfind("#", 0) == 0);
    std::istringstream lines(hm);
    std::string line;
    std::vector<std::vector<double>> matrix;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        std::vector<double> vals;
        double v;
        while (row >> v) vals.push_back(v);
        matrix.push_back(vals);
    }
    REQUIRE(matrix.size() == 2);
    for (const auto& row : matrix) {
        REQUIRE(row.size() == 4);
        CHECK(row[0] == 0.0);
        CHECK(row[1] == 0.0);
        CHECK(row[2] == 1.0);  // b_alt = 1.0 column
        CHECK(row[3] == 1.0);
    }
}

TEST_CASE("verify suites pass and the corrupted-kron hook is caught") {
    const auto checks = verify();
    CHECK(checks.size() >= 15);
    for (const auto& c : checks) {
        INFO(c.suite << "." << c.name << " measured " << c.measured << " tol " << c.tolerance);
        CHECK(c.pass);
    }

    VerifyOptions bad;
    bad.suite = "numerics";
    bad.kron_impl = [](const Matrix& a, const Matrix& b) {
        Matrix k = kron(a, b);
        k(0, 0) += 0.05;  // deliberately wrong
        return k;
    };
    const auto broken = verify(bad);
    bool roundtrip_failed = false;
    for (const auto& c : broken)
        if (c.name == "kron_partial_trace_roundtrip" && !c.pass) roundtrip_failed = true;
    CHECK(roundtrip_failed);

    CHECK_THROWS_AS(verify(VerifyOptions{"nosuchsuite", {}, 1}), ConfigError);
}
