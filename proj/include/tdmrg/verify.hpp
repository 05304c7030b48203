#pragma once

// Command-line invariant suites. Each check reports a measured deviation and
// the tolerance it was held to, so failures are diagnosable from the one-line
// report alone. The kron hook exists for the harness self-test: injecting a
// corrupted kron must make the round-trip checks fail.

#include "tdmrg/detector.hpp"
#include "tdmrg/dmrg.hpp"
#include "tdmrg/exact_diag.hpp"
#include "tdmrg/free_fermion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace tdmrg {

struct CheckResult {
    std::string suite;
    std::string name;
    bool pass = false;
    double measured = 0.0;   // deviation; pass means measured <= tolerance
    double tolerance = 0.0;
    std::string note;
};

struct VerifyOptions {
    std::string suite;       // empty = all suites
    std::function<Matrix(const Matrix&, const Matrix&)> kron_impl;  // self-test hook
    std::uint64_t seed = 0x5eedf00dULL;
};

inline const std::vector<std::string>& verify_suite_names() {
    static const std::vector<std::string> names{"numerics", "models", "freefermion", "dmrg",
                                                "detector"};
    return names;
}

namespace detail {

inline void add_check(std::vector<CheckResult>& out, const std::string& suite,
                      const std::string& name, double measured, double tol,
                      const std::string& note = "") {
    out.push_back({suite, name, measured <= tol, measured, tol, note});
}

inline Matrix random_gaussian(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> g;
    Matrix a(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) a(i, j) = g(rng);
    return a;
}

inline Matrix random_density(std::mt19937_64& rng, Index dim) {
    const Matrix a = random_gaussian(rng, dim, dim);
    Matrix rho = a * a.transpose();
    rho /= rho.trace();
    return rho;
}

inline Vector random_unit(std::mt19937_64& rng, Index dim) {
    Vector v = random_gaussian(rng, dim, 1);
    v.normalize();
    return v;
}

inline void verify_numerics(std::vector<CheckResult>& out,
                            const std::function<Matrix(const Matrix&, const Matrix&)>& kr,
                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::string sw = "numerics";

    double self = 0.0, sym = 0.0, tri = 0.0;
    for (int rep = 0; rep < 4; ++rep) {
        const Matrix a = random_density(rng, 6);
        const Matrix b = random_density(rng, 6);
        const Matrix c = random_density(rng, 6);
        self = std::max(self, trace_distance(a, a));
        sym = std::max(sym, std::abs(trace_distance(a, b) - trace_distance(b, a)));
        tri = std::max(tri, trace_distance(a, c) - trace_distance(a, b) - trace_distance(b, c));
    }
    add_check(out, sw, "trace_distance_self_zero", self, 1e-12);
    add_check(out, sw, "trace_distance_symmetry", sym, 1e-12);
    add_check(out, sw, "trace_distance_triangle", std::max(0.0, tri), 1e-10,
              "max of D(a,c) - D(a,b) - D(b,c)");

    double sub = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
        const Matrix a = random_density(rng, 4), a2 = random_density(rng, 4);
        const Matrix b = random_density(rng, 3), b2 = random_density(rng, 3);
        const double lhs = trace_distance(kr(a, b), kr(a2, b2));
        sub = std::max(sub, lhs - trace_distance(a, a2) - trace_distance(b, b2));
    }
    add_check(out, sw, "trace_distance_subadditive_on_products", std::max(0.0, sub), 1e-10,
              "D(a x b, a' x b') <= D(a,a') + D(b,b')");

    double rt = 0.0;
    {
        const Matrix a = random_density(rng, 4);
        const Matrix b = random_density(rng, 5);
        const Matrix ab = kr(a, b);
        rt = std::max(rt, (partial_trace(ab, 4, 5, Keep::Left) - a).cwiseAbs().maxCoeff());
        rt = std::max(rt, (partial_trace(ab, 4, 5, Keep::Right) - b).cwiseAbs().maxCoeff());
    }
    add_check(out, sw, "kron_partial_trace_roundtrip", rt, 1e-12);

    {
        Matrix a = random_gaussian(rng, 80, 80);
        a = 0.5 * (a + a.transpose()).eval();
        const Vector dense = sym_eigvals(a).head(5);
        LanczosOptions lo;
        lo.seed = seed + 17;
        const Spectrum sp = lanczos_lowest_k(dense_operator(a), 5, lo);
        add_check(out, sw, "lanczos_matches_dense",
                  (sp.eigenvalues - dense).cwiseAbs().maxCoeff(), 1e-9);
    }

    {
        const Vector e = random_gaussian(rng, 8, 1);
        double dev = 0.0;
        for (double beta : {0.0, 1.0, 50.0, 1e9}) {
            const Vector w = thermal_weights(e, beta);
            dev = std::max(dev, std::abs(w.sum() - 1.0));
            dev = std::max(dev, -w.minCoeff());
        }
        add_check(out, sw, "thermal_weights_normalized", dev, 1e-12);
    }
}

inline void verify_models(std::vector<CheckResult>& out) {
    const std::string sw = "models";

    double herm = 0.0;
    for (const ModelSpec spec : {ModelSpec{StaggeredSpec{5, 1.1, 0.4, 0.5, 0.2, 0.7}},
                                 ModelSpec{Spin1XxzSpec{4, 0.8, 0.3}}}) {
        const Matrix h = assemble_dense(build_terms(spec));
        herm = std::max(herm, (h - h.transpose()).cwiseAbs().maxCoeff());
    }
    add_check(out, sw, "hamiltonian_symmetric", herm, 1e-13);

    double alg_dev = 0.0;
    for (Spin s : {Spin::Half, Spin::One}) {
        const SpinAlgebra a = spin_algebra(s);
        alg_dev = std::max(alg_dev, (a.sx - a.sx.transpose()).cwiseAbs().maxCoeff());
        alg_dev = std::max(alg_dev, (a.isy + a.isy.transpose()).cwiseAbs().maxCoeff());
        alg_dev = std::max(alg_dev, (a.sz2 - a.sz * a.sz).cwiseAbs().maxCoeff());
        alg_dev = std::max(alg_dev,
                           (a.id - Matrix::Identity(a.local_dim, a.local_dim)).cwiseAbs().maxCoeff());
    }
    add_check(out, sw, "spin_algebra_structure", alg_dev, 1e-14);

    double rtrip = 0.0;
    for (ModelSpec spec : {ModelSpec{StaggeredSpec{6}}, ModelSpec{Spin1XxzSpec{6}}}) {
        double v = 0.25;
        for (const auto& name : model_parameter_names(spec)) {
            set_parameter(spec, name, v);
            rtrip = std::max(rtrip, std::abs(get_parameter(spec, name) - v));
            v += 0.5;
        }
    }
    add_check(out, sw, "parameter_set_get_roundtrip", rtrip, 0.0);

    {
        // field-only chain: spectrum is all sign choices of the site fields
        const StaggeredSpec s{4, 0.0, 0.0, 0.4, 0.1, 0.0};
        std::vector<double> expect;
        for (int mask = 0; mask < 16; ++mask) {
            double e = 0.0;
            for (int l = 1; l <= 4; ++l) {
                const double bl = s.b + (l % 2 == 0 ? s.b_alt : -s.b_alt);
                e -= bl * ((mask >> (l - 1)) & 1 ? 1.0 : -1.0);
            }
            expect.push_back(e);
        }
        std::sort(expect.begin(), expect.end());
        const Vector got = ed_solve(ModelSpec{s}).spectrum.eigenvalues;
        double dev = 0.0;
        for (int i = 0; i < 16; ++i) dev = std::max(dev, std::abs(got(i) - expect[i]));
        add_check(out, sw, "field_only_spectrum_analytic", dev, 1e-12);
    }
}

inline void verify_freefermion(std::vector<CheckResult>& out) {
    const std::string sw = "freefermion";

    {
        const StaggeredSpec s{12, 0.9, 0.35, 0.35, 0.8, 0.0};
        const Vector ff = ff_many_body_spectrum(jw_build(s));
        const Vector ed = ed_solve(ModelSpec{s}).spectrum.eigenvalues;
        add_check(out, sw, "many_body_multiset_n12", (ff - ed).cwiseAbs().maxCoeff(), 1e-9,
                  "4096 levels against exact diagonalization");
    }
    {
        const StaggeredSpec s{14, 1.0, 0.45, 0.2, 0.65, 0.0};
        const double ff = ff_ground_energy(jw_build(s));
        const double ed = ed_lowest_k(ModelSpec{s}, 1, {}).eigenvalues(0);
        add_check(out, sw, "ground_energy_n14", std::abs(ff - ed), 1e-9);
    }
    {
        const StaggeredSpec tmpl{100, 1.0, 0.5, 0.0, 1.0, 0.0};
        StaggeredSpec larger = tmpl;
        larger.n = 120;
        const auto xs_a = ff_critical_scan(tmpl, "b", 0.9, 1.5, 1e-3);
        const auto xs_b = ff_critical_scan(larger, "b", 0.9, 1.5, 1e-3);
        double drift = 1.0;
        if (!xs_a.empty() && !xs_b.empty())
            drift = std::max(std::abs(xs_a.front() - xs_b.front()),
                             std::abs(xs_a.back() - xs_b.back()));
        add_check(out, sw, "crossing_drift_n100_to_n120", drift, 2.0 / 100.0,
                  "first and last crossing under n growth");
    }
}

inline void verify_dmrg(std::vector<CheckResult>& out) {
    const std::string sw = "dmrg";

    {
        const ModelSpec spec{StaggeredSpec{8, 1.0, 0.3, 0.4, 0.15, 0.6}};
        SweepConfig cfg;
        cfg.m = 32;
        cfg.k_targets = 4;
        cfg.n_sweeps = 3;
        cfg.converge_tol = 0.0;
        std::vector<double> last;
        const auto trace = finite_sweep(spec, cfg, [&](const StepInfo& info) {
            if (info.sweep == cfg.n_sweeps && info.step == 0)
                last.assign(info.eigs.energies.data(),
                            info.eigs.energies.data() + info.eigs.energies.size());
        });
        const Vector ed = ed_solve(spec).spectrum.eigenvalues;
        double dev = std::abs(trace.energy - ed(0));
        for (std::size_t i = 0; i < last.size() && i < 4; ++i)
            dev = std::max(dev, std::abs(last[i] - ed(Index(i))));
        add_check(out, sw, "untruncated_matches_ed_n8", dev, 1e-8);
    }
    {
        const ModelSpec spec{StaggeredSpec{12, 1.0, 0.4, 0.3, 0.1, 0.0}};
        SweepConfig cfg;
        cfg.m = 12;
        cfg.k_targets = 1;
        cfg.n_sweeps = 4;
        cfg.converge_tol = 0.0;
        cfg.seed = 11;
        const auto trace = finite_sweep(spec, cfg);
        double rise = 0.0;
        for (std::size_t i = 1; i < trace.sweep_energies.size(); ++i)
            rise = std::max(rise, trace.sweep_energies[i] - trace.sweep_energies[i - 1]);
        add_check(out, sw, "sweep_energy_monotone", std::max(0.0, rise), 1e-9,
                  "variational energy never rises between sweeps");
        const double ff = ff_ground_energy(jw_build(std::get<StaggeredSpec>(spec)));
        add_check(out, sw, "truncated_ground_near_free_fermion", std::abs(trace.energy - ff), 1e-6,
                  "m = 12 at n = 12");
    }
}

inline void verify_detector(std::vector<CheckResult>& out, std::uint64_t seed) {
    const std::string sw = "detector";

    {
        SuperblockEigs eigs;
        eigs.dims = {1, 2, 2, 1};
        eigs.energies = Vector::Constant(1, -1.0);
        eigs.states = Matrix::Zero(4, 1);
        const double r = 1.0 / std::sqrt(2.0);
        eigs.states(1, 0) = r;
        eigs.states(2, 0) = -r;
        const auto sc = step_correlation(eigs, 0.0, CorrelationWeights::ground_only);
        add_check(out, sw, "singlet_distance_three_quarters", std::abs(sc.trace_distance - 0.75),
                  1e-12);
    }
    {
        std::mt19937_64 rng(seed + 5);
        SuperblockEigs eigs;
        eigs.dims = {3, 2, 2, 4};
        eigs.energies = Vector::Constant(1, -2.0);
        const Vector u = random_unit(rng, 6);
        const Vector v = random_unit(rng, 8);
        Matrix st(48, 1);
        for (Index i = 0; i < 6; ++i)
            for (Index j = 0; j < 8; ++j) st(i * 8 + j, 0) = u(i) * v(j);
        eigs.states = st;
        const auto sc = step_correlation(eigs, 0.0, CorrelationWeights::ground_only);
        add_check(out, sw, "product_state_distance_zero", sc.trace_distance, 1e-12);
    }
    {
        std::mt19937_64 rng(seed + 9);
        SuperblockEigs eigs;
        eigs.dims = {4, 2, 2, 4};
        Matrix basis = random_gaussian(rng, 64, 3);
        const auto qr = basis.householderQr();
        eigs.states = Matrix(qr.householderQ()) * Matrix::Identity(64, 3);
        eigs.energies = Vector(3);
        eigs.energies << -2.0, -1.6, -1.2;
        CorrelationOptions dense_opt;
        const auto ref = step_correlation(eigs, 3.0, CorrelationWeights::boltzmann, dense_opt);
        CorrelationOptions sparse_opt;
        sparse_opt.dense_cutoff = 1;
        const auto got = step_correlation(eigs, 3.0, CorrelationWeights::boltzmann, sparse_opt);
        add_check(out, sw, "matrix_free_matches_dense",
                  std::abs(ref.trace_distance - got.trace_distance), 1e-9);
    }
    {
        const ModelSpec spec{StaggeredSpec{8, 0.0, 0.0, 0.7, 0.0, 0.0}};
        SweepConfig cfg;
        cfg.m = 4;
        cfg.k_targets = 2;
        cfg.n_sweeps = 2;
        cfg.converge_tol = 0.0;
        const SweepAverage avg = sweep_average(spec, cfg, std::nullopt);
        add_check(out, sw, "decoupled_chain_zero_average", avg.mean, 1e-9);
    }
}

}  // namespace detail

inline std::vector<CheckResult> verify(const VerifyOptions& opt = {}) {
    const auto& names = verify_suite_names();
    if (!opt.suite.empty() && std::find(names.begin(), names.end(), opt.suite) == names.end()) {
        std::string all;
        for (const auto& n : names) all += (all.empty() ? "" : ", ") + n;
        throw ConfigError("verify: unknown suite '" + opt.suite + "' (available: " + all + ")");
    }
    auto kr = opt.kron_impl
                  ? opt.kron_impl
                  : std::function<Matrix(const Matrix&, const Matrix&)>(
                        [](const Matrix& a, const Matrix& b) { return kron(a, b); });
    auto want = [&](const char* s) { return opt.suite.empty() || opt.suite == s; };

    std::vector<CheckResult> out;
    if (want("numerics")) detail::verify_numerics(out, kr, opt.seed);
    if (want("models")) detail::verify_models(out);
    if (want("freefermion")) detail::verify_freefermion(out);
    if (want("dmrg")) detail::verify_dmrg(out);
    if (want("detector")) detail::verify_detector(out, opt.seed);
    return out;
}

}  // namespace tdmrg
