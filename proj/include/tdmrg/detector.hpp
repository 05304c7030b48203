#pragma once

// Correlation detector: trace distance between the superblock state (pure
// ground state at T = 0, truncated Gibbs state otherwise) and the product of
// its block marginals, averaged over the final DMRG sweep, plus the geometric
// phase and a jump locator for parameter scans.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "types.hpp"
#include "linalg.hpp"
#include "models.hpp"
#include "lanczos.hpp"
#include "exact_diag.hpp"
#include "dmrg.hpp"

namespace tdmrg {

struct StepCorrelation {
    int step = 0;
    std::pair<int, int> block_sizes{0, 0};  // sites in S and in E
    double trace_distance = 0.0;
    Index support_dim = 0;                  // eigenpairs actually resolved
};

struct SweepAverage {
    double mean = 0.0;
    std::vector<StepCorrelation> per_step;
    int n_steps = 0;
};

struct ScanRecord {
    std::map<std::string, double> parameters;
    double avg_trace_distance = 0.0;
    double ground_energy = 0.0;
    std::vector<double> k_energies;
    double geometric_phase = 0.0;
    double max_discarded_weight = 0.0;
    Index support_dim_max = 0;
    std::string error;  // empty on success
};

struct JumpReport {
    std::string axis;
    double location = 0.0;       // midpoint of the flagged interval
    double jump_size = 0.0;
    double threshold_used = 0.0;
};

enum class CorrelationWeights { boltzmann, ground_only };

struct CorrelationOptions {
    Index dense_cutoff = 512;  // below this superblock dimension solve densely
    double lanczos_tol = 1e-10;
    std::uint64_t seed = 0x7a5c3e1d9b4f6072ull;
};

namespace detail {

// Weights for the detector's density matrix. ground_only mirrors the
// zero-temperature rule of thermal_weights: an equal mixture over the
// numerically degenerate ground multiplet.
inline Vector correlation_weights(const Vector& energies, double beta, CorrelationWeights mode) {
    if (mode == CorrelationWeights::boltzmann) return thermal_weights(energies, beta);
    const double e0 = energies(0);
    const double tol = 1e-9 * std::max(1.0, std::abs(e0));
    Vector w = Vector::Zero(energies.size());
    int g = 0;
    for (Index i = 0; i < energies.size(); ++i)
        if (energies(i) - e0 <= tol) {
            w(i) = 1.0;
            ++g;
        }
    return w / double(g);
}

}  // namespace detail

// D(rho, rho_S (x) rho_E) for one superblock step. rho - rho_tilde is
// traceless, so the distance is the sum of its positive eigenvalues; there are
// at most rank(rho) = K of them, and they are found as the most negative
// eigenvalues of rho_tilde - rho with a matrix-free solver. Small superblocks
// are handled densely.
inline StepCorrelation step_correlation(const SuperblockEigs& eigs, double beta,
                                        CorrelationWeights mode,
                                        const CorrelationOptions& opt = {}) {
    const Index k = eigs.states.cols();
    if (k < 1) throw ArgumentError("step_correlation: no target states");
    const Index ds = eigs.dims[0] * eigs.dims[1];
    const Index de = eigs.dims[2] * eigs.dims[3];
    const Index dim = ds * de;
    if (eigs.states.rows() != dim)
        throw DimensionError("step_correlation: state length does not match dims");
    if (eigs.energies.size() != k)
        throw DimensionError("step_correlation: energies and states disagree on k");

    StepCorrelation sc;
    if (dim == 1) {
        sc.support_dim = 1;
        return sc;
    }

    const Vector w = detail::correlation_weights(eigs.energies, beta, mode);
    const Matrix rho_s = block_density(eigs, w, BlockSide::left);
    const Matrix rho_e = block_density(eigs, w, BlockSide::right);

    auto dense_distance = [&] {
        Matrix rho = Matrix::Zero(dim, dim);
        for (Index t = 0; t < k; ++t)
            rho.noalias() += w(t) * eigs.states.col(t) * eigs.states.col(t).transpose();
        sc.trace_distance = trace_distance(rho, kron(rho_s, rho_e));
        sc.support_dim = dim;
    };

    if (dim <= opt.dense_cutoff) {
        dense_distance();
        return sc;
    }

    // rho_tilde v - rho v, with rho_tilde = rho_S (x) rho_E applied by reshape
    LinearOperator op{dim, [&](const Vector& v, Vector& out) {
                          Eigen::Map<const Matrix> vin(v.data(), de, ds);
                          Eigen::Map<Matrix> vout(out.data(), de, ds);
                          vout.noalias() = rho_e * vin * rho_s;
                          out.noalias() -=
                              eigs.states * (w.asDiagonal() * (eigs.states.transpose() * v));
                      }};
    LanczosOptions lo;
    lo.tol = opt.lanczos_tol;
    lo.expand_degenerate = false;
    lo.seed = opt.seed;

    Index q = std::min(dim, k + 2);
    try {
        for (;;) {
            const Spectrum s = lanczos_lowest_k(op, int(q), lo);
            double d = 0.0;
            for (Index i = 0; i < s.eigenvalues.size(); ++i)
                d += std::max(0.0, -s.eigenvalues(i));
            // all positive parts of rho - rho_tilde are captured once the
            // deepest retrieved level is itself nonnegative
            if (s.eigenvalues(s.eigenvalues.size() - 1) >= -1e-12 || q == dim) {
                sc.trace_distance = std::clamp(d, 0.0, 1.0);
                sc.support_dim = s.eigenvalues.size();
                return sc;
            }
            q = std::min(dim, 2 * q);
        }
    } catch (const NumericError&) {
        dense_distance();  // rare; correctness over speed
        return sc;
    }
}

// phi_g = (pi/2) sum_l <sigma_l^z>, the closed form of the twist-phase
// integral for these U(1)-symmetric chains.
inline double geometric_phase(const ModelSpec& spec, const Vector& site_z) {
    if (site_z.size() != model_sites(spec))
        throw DimensionError("geometric_phase: expected one magnetization per site");
    return 0.5 * std::numbers::pi * site_z.sum();
}

// Everything a scan needs from one DMRG run: the final-sweep trace-distance
// average plus energies, magnetizations and bookkeeping. beta empty means zero
// temperature (pure ground state in the detector).
struct SweepMeasurement {
    SweepAverage average;
    double ground_energy = 0.0;
    std::vector<double> k_energies;
    Vector site_z;  // ground-state <sigma^z> per site, 0-based
    double geometric_phase = 0.0;
    double max_discarded_weight = 0.0;
    Index support_dim_max = 0;
    int sweeps_run = 0;
};

inline SweepMeasurement measure_sweep(const ModelSpec& spec, const SweepConfig& cfg,
                                      std::optional<double> beta,
                                      const CorrelationOptions& opt = {}) {
    const int n = model_sites(spec);
    const SpinAlgebra alg = model_algebra(spec);

    struct Buffered {
        SuperblockEigs eigs;
        int step;
        int left_sites;
        int right_sites;
    };
    std::vector<Buffered> buf;
    int buf_sweep = -1;
    SweepMeasurement out;
    out.site_z = Vector::Zero(n);

    // Site magnetizations come from the backward pass, which every executed
    // sweep has in full: the right free site covers sites 3..n-1, the chain
    // ends are read off the one-site blocks at the turning points.
    const auto trace = finite_sweep(spec, cfg, [&](const StepInfo& info) {
        out.max_discarded_weight = std::max(out.max_discarded_weight, info.trunc.discarded_weight);
        if (info.sweep == 0) return;  // warmup steps never enter the average
        if (info.sweep != buf_sweep) {
            buf.clear();
            buf_sweep = info.sweep;
        }
        buf.push_back(Buffered{info.eigs, info.step, info.left.sites, info.right.sites});
        if (!info.forward) {
            const Vector ground = info.eigs.states.col(0);
            const int s2 = n - info.right.sites;  // 1-based
            out.site_z(s2 - 1) = mode_expectation(ground, info.eigs.dims, 2, alg.sz);
            if (info.right.sites == 1)
                out.site_z(n - 1) = mode_expectation(ground, info.eigs.dims, 3,
                                                     info.right.edge_ops[2]);
            if (info.left.sites == 1) {
                out.site_z(1) = mode_expectation(ground, info.eigs.dims, 1, alg.sz);
                out.site_z(0) = mode_expectation(ground, info.eigs.dims, 0,
                                                 info.left.edge_ops[2]);
            }
        }
    });

    out.sweeps_run = trace.sweeps_run;
    const double beta_eff = beta ? *beta : 0.0;
    const CorrelationWeights mode =
        beta ? CorrelationWeights::boltzmann : CorrelationWeights::ground_only;

    double sum = 0.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
        StepCorrelation sc = step_correlation(buf[i].eigs, beta_eff, mode, opt);
        sc.step = buf[i].step;
        sc.block_sizes = {buf[i].left_sites + 1, buf[i].right_sites + 1};
        sum += sc.trace_distance;
        out.support_dim_max = std::max(out.support_dim_max, sc.support_dim);
        out.average.per_step.push_back(sc);
        if (buf[i].eigs.energies(0) < buf[best].eigs.energies(0)) best = i;
    }
    if (buf.empty())
        throw NumericError("measure_sweep: engine produced no sweep steps");
    out.average.n_steps = int(buf.size());
    out.average.mean = sum / double(buf.size());

    const Vector& be = buf[best].eigs.energies;
    out.ground_energy = be(0);
    out.k_energies.assign(be.begin(), be.end());
    out.geometric_phase = geometric_phase(spec, out.site_z);
    return out;
}

inline SweepAverage sweep_average(const ModelSpec& spec, const SweepConfig& cfg,
                                  std::optional<double> beta,
                                  const CorrelationOptions& opt = {}) {
    return measure_sweep(spec, cfg, beta, opt).average;
}

// Flag consecutive differences of the averaged trace distance that stand out
// against the median difference along a uniform 1-d grid.
inline std::vector<JumpReport> detect_jumps(const std::vector<ScanRecord>& records,
                                            const std::string& axis,
                                            double threshold_factor = 10.0) {
    if (records.size() < 4)
        throw ArgumentError("detect_jumps: need at least 4 records along the axis");
    if (!(threshold_factor > 0))
        throw ArgumentError("detect_jumps: threshold factor must be positive");

    std::vector<double> x(records.size()), d(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto it = records[i].parameters.find(axis);
        if (it == records[i].parameters.end())
            throw ArgumentError("detect_jumps: records carry no parameter '" + axis + "'");
        x[i] = it->second;
        d[i] = records[i].avg_trace_distance;
        if (!std::isfinite(d[i]))
            throw ArgumentError("detect_jumps: non-finite average at " + axis + " = " +
                                std::to_string(x[i]));
    }
    const double h = x[1] - x[0];
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
        if (std::abs(x[i + 1] - x[i] - h) > 1e-9 * std::max(1.0, std::abs(h)))
            throw ArgumentError("detect_jumps: grid along '" + axis + "' is not uniform");

    std::vector<double> diff(records.size() - 1);
    for (std::size_t i = 0; i + 1 < records.size(); ++i) diff[i] = std::abs(d[i + 1] - d[i]);
    std::vector<double> sorted = diff;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    const double threshold = threshold_factor * median;

    std::vector<JumpReport> jumps;
    for (std::size_t i = 0; i < diff.size(); ++i)
        if (diff[i] > threshold)
            jumps.push_back(JumpReport{axis, 0.5 * (x[i] + x[i + 1]), diff[i], threshold});
    return jumps;
}

}  // namespace tdmrg
