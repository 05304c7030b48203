#pragma once

// Finite-system DMRG for the open chains in models.hpp. The superblock is the
// standard four-factor layout (left block, free site, free site, right block);
// a state vector is indexed ((iL*d + s1)*d + s2)*DR + iR with iL slowest.
// Multi-target truncation averages the reduced density matrices of the lowest
// k_targets superblock states.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "types.hpp"
#include "linalg.hpp"
#include "models.hpp"
#include "lanczos.hpp"
#include "exact_diag.hpp"

namespace tdmrg {

enum class BlockSide { left, right };

struct Block {
    int sites = 0;
    Index basis_dim = 0;
    Matrix h;
    // boundary-site sx, isy, sz in the block basis, in that order
    std::vector<Matrix> edge_ops;
    BlockSide side = BlockSide::left;
};

struct SuperblockEigs {
    Vector energies;                // ascending
    Matrix states;                  // orthonormal columns
    std::array<Index, 4> dims{};    // left block, left site, right site, right block
};

struct SweepConfig {
    int m = 64;
    int k_targets = 14;
    int n_sweeps = 5;               // upper bound, see converge_tol
    double lanczos_tol = 1e-9;
    enum class Weights { equal, boltzmann } target_weights = Weights::equal;
    double beta = 0.0;              // only read for boltzmann weights
    // stop early once the per-sweep ground energy moves less than this
    // (relative to max(1, |E|)); 0 forces all n_sweeps
    double converge_tol = 1e-9;
    std::uint64_t seed = 0;
};

struct TruncationReport {
    double discarded_weight = 0.0;
    int step = 0;                   // position within the sweep
};

struct StepInfo {
    const SuperblockEigs& eigs;
    const Block& left;              // blocks as used in this step's superblock
    const Block& right;
    const TruncationReport& trunc;
    int sweep = 0;                  // 0 during warmup
    int step = 0;                   // 0-based within the sweep
    bool forward = true;
};

using StepObserver = std::function<void(const StepInfo&)>;

struct SweepTrace {
    std::vector<double> step_energies;   // ground energy per step, last executed sweep
    std::vector<double> sweep_energies;  // best ground energy per sweep
    double energy = 0.0;
    int sweeps_run = 0;
};

namespace detail {

// out += alpha * (I_{d1} (x) a (x) I_{d3}) v  for v indexed (i1*d2 + i2)*d3 + i3
inline void apply_mode(const double* v, double* out, Index d1, Index d2, Index d3,
                       const Matrix& a, double alpha) {
    if (d3 == 1) {
        Eigen::Map<const Matrix> in(v, d2, d1);
        Eigen::Map<Matrix> o(out, d2, d1);
        o.noalias() += alpha * (a * in);
        return;
    }
    const Index stride = d2 * d3;
    for (Index i1 = 0; i1 < d1; ++i1) {
        Eigen::Map<const Matrix> in(v + i1 * stride, d3, d2);
        Eigen::Map<Matrix> o(out + i1 * stride, d3, d2);
        o.noalias() += alpha * (in * a.transpose());
    }
}

inline bool same_matrix(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.rows() == 0 || (a - b).cwiseAbs().maxCoeff() == 0.0);
}

// Map a bare bond operator (a copy of an algebra generator) to the block's
// rotated version of the same operator.
inline const Matrix& edge_op_for(const Block& blk, const SpinAlgebra& alg, const Matrix& bare) {
    if (blk.edge_ops.size() != 3)
        throw DimensionError("superblock: block is missing its edge operators");
    const Matrix* gens[3] = {&alg.sx, &alg.isy, &alg.sz};
    for (int i = 0; i < 3; ++i)
        if (same_matrix(bare, *gens[i])) return blk.edge_ops[i];
    throw NumericError("superblock: bond operator does not match any edge generator");
}

inline std::uint64_t step_seed(std::uint64_t base, std::uint64_t counter) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Core H*v. The free sites sit at lattice positions left.sites+1 and
// n - right.sites. During warmup they are not adjacent; the connecting bond is
// then the one at the left free site, which the sweeps later correct.
inline void superblock_apply_into(const Block& left, const Block& right, const TermList& t,
                                  const SpinAlgebra& alg, const double* v, double* out,
                                  Vector& tmp) {
    const Index d = t.local_dim;
    const Index dl = left.basis_dim, dr = right.basis_dim;
    const Index dim = dl * d * d * dr;
    const int n = t.sites;
    const int s1 = left.sites + 1;       // 1-based lattice positions
    const int s2 = n - right.sites;

    std::fill(out, out + dim, 0.0);
    apply_mode(v, out, 1, dl, d * d * dr, left.h, 1.0);
    apply_mode(v, out, dl * d * d, dr, 1, right.h, 1.0);
    apply_mode(v, out, dl, d, d * dr, t.site_terms[s1 - 1], 1.0);
    apply_mode(v, out, dl * d, d, dr, t.site_terms[s2 - 1], 1.0);

    for (const auto& b : t.bond_terms[left.sites - 1]) {   // block edge <-> s1
        tmp.setZero();
        apply_mode(v, tmp.data(), 1, dl, d * d * dr, edge_op_for(left, alg, b.left), 1.0);
        apply_mode(tmp.data(), out, dl, d, d * dr, b.right, b.coeff);
    }
    for (const auto& b : t.bond_terms[s1 - 1])             // s1 <-> s2
        apply_mode(v, out, dl, d * d, dr, kron(b.left, b.right), b.coeff);
    for (const auto& b : t.bond_terms[s2 - 1]) {           // s2 <-> block edge
        tmp.setZero();
        apply_mode(v, tmp.data(), dl * d, d, dr, b.left, 1.0);
        apply_mode(tmp.data(), out, dl * d * d, dr, 1, edge_op_for(right, alg, b.right), b.coeff);
    }
}

}  // namespace detail

inline Vector superblock_apply(const Block& left, const Block& right, const TermList& t,
                               const SpinAlgebra& alg, const Vector& v) {
    if (left.side != BlockSide::left || right.side != BlockSide::right)
        throw ArgumentError("superblock_apply: blocks passed on the wrong sides");
    if (left.sites + right.sites + 2 > t.sites)
        throw ArgumentError("superblock_apply: blocks overlap for chain length " +
                            std::to_string(t.sites));
    const Index d = t.local_dim;
    const Index dim = left.basis_dim * d * d * right.basis_dim;
    if (v.size() != dim)
        throw DimensionError("superblock_apply: vector length " + std::to_string(v.size()) +
                             " does not match superblock dimension " + std::to_string(dim));
    Vector out(dim), tmp(dim);
    detail::superblock_apply_into(left, right, t, alg, v.data(), out.data(), tmp);
    return out;
}

inline Vector superblock_apply(const Block& left, const Block& right, const ModelSpec& spec,
                               const Vector& v) {
    return superblock_apply(left, right, build_terms(spec), model_algebra(spec), v);
}

inline Block initial_block(const TermList& t, const SpinAlgebra& alg, BlockSide side) {
    Block b;
    b.sites = 1;
    b.basis_dim = t.local_dim;
    b.h = side == BlockSide::left ? t.site_terms.front() : t.site_terms.back();
    b.edge_ops = {alg.sx, alg.isy, alg.sz};
    b.side = side;
    return b;
}

inline Block grow_block(const Block& blk, const TermList& t, const SpinAlgebra& alg) {
    if (blk.sites < 1 || blk.sites >= t.sites)
        throw ArgumentError("grow_block: cannot grow a " + std::to_string(blk.sites) +
                            "-site block on a " + std::to_string(t.sites) + "-site chain");
    const Index d = t.local_dim;
    const Matrix id_blk = Matrix::Identity(blk.basis_dim, blk.basis_dim);
    Block g;
    g.side = blk.side;
    g.sites = blk.sites + 1;
    g.basis_dim = blk.basis_dim * d;
    if (blk.side == BlockSide::left) {
        const int new_site = blk.sites + 1;                // 1-based
        g.h = kron(blk.h, alg.id) + kron(id_blk, t.site_terms[new_site - 1]);
        for (const auto& b : t.bond_terms[new_site - 2])
            g.h += b.coeff * kron(detail::edge_op_for(blk, alg, b.left), b.right);
        g.edge_ops = {kron(id_blk, alg.sx), kron(id_blk, alg.isy), kron(id_blk, alg.sz)};
    } else {
        const int new_site = t.sites - blk.sites;          // 1-based
        g.h = kron(alg.id, blk.h) + kron(t.site_terms[new_site - 1], id_blk);
        for (const auto& b : t.bond_terms[new_site - 1])
            g.h += b.coeff * kron(b.left, detail::edge_op_for(blk, alg, b.right));
        g.edge_ops = {kron(alg.sx, id_blk), kron(alg.isy, id_blk), kron(alg.sz, id_blk)};
    }
    return g;
}

inline Block grow_block(const Block& blk, const ModelSpec& spec) {
    return grow_block(blk, build_terms(spec), model_algebra(spec));
}

inline Block rotate_block(const Block& blk, const Matrix& o) {
    if (o.rows() != blk.basis_dim)
        throw DimensionError("rotate_block: rotation has " + std::to_string(o.rows()) +
                             " rows for a dimension-" + std::to_string(blk.basis_dim) + " block");
    Block r;
    r.sites = blk.sites;
    r.side = blk.side;
    r.basis_dim = o.cols();
    const Matrix h = o.transpose() * blk.h * o;
    r.h = 0.5 * (h + h.transpose());
    r.edge_ops.reserve(blk.edge_ops.size());
    for (const auto& e : blk.edge_ops) r.edge_ops.push_back(o.transpose() * e * o);
    return r;
}

// Rotation onto the top-m eigenvectors of the block reduced density matrix.
// When nothing is cut the rotation is the identity and the discarded weight is
// exactly zero.
inline std::pair<Matrix, TruncationReport> truncate(const Matrix& rho, Index m) {
    if (rho.rows() != rho.cols())
        throw DimensionError("truncate: density matrix is not square");
    if (m < 1) throw ArgumentError("truncate: must keep at least one state");
    const Index dim = rho.rows();
    if (dim <= m) return {Matrix::Identity(dim, dim), TruncationReport{}};
    const Spectrum s = sym_eig(rho);
    Matrix rot(dim, m);
    double kept = 0.0;
    for (Index i = 0; i < m; ++i) {
        rot.col(i) = s.eigenvectors.col(dim - 1 - i);
        kept += s.eigenvalues(dim - 1 - i);
    }
    TruncationReport rep;
    rep.discarded_weight = std::max(0.0, 1.0 - kept);
    return {std::move(rot), rep};
}

// Weighted multi-target reduced density matrix of the enlarged block:
// (left block + left site) for side left, (right site + right block) otherwise.
inline Matrix block_density(const SuperblockEigs& eigs, const Vector& weights, BlockSide side) {
    const Index k = eigs.states.cols();
    if (weights.size() != k)
        throw DimensionError("block_density: " + std::to_string(weights.size()) +
                             " weights for " + std::to_string(k) + " states");
    const Index sys = eigs.dims[0] * eigs.dims[1];
    const Index env = eigs.dims[2] * eigs.dims[3];
    if (eigs.states.rows() != sys * env)
        throw DimensionError("block_density: state length does not match dims");
    const Index out = side == BlockSide::left ? sys : env;
    Matrix rho = Matrix::Zero(out, out);
    for (Index t = 0; t < k; ++t) {
        Eigen::Map<const Matrix> m(eigs.states.data() + t * sys * env, env, sys);
        if (side == BlockSide::left)
            rho.noalias() += weights(t) * (m.transpose() * m);
        else
            rho.noalias() += weights(t) * (m * m.transpose());
    }
    return rho;
}

inline Vector target_weights(const SweepConfig& cfg, const Vector& energies) {
    if (cfg.target_weights == SweepConfig::Weights::boltzmann)
        return thermal_weights(energies, cfg.beta);
    return Vector::Constant(energies.size(), 1.0 / double(energies.size()));
}

// <state| I (x) a (x) I |state> with a acting on the given superblock factor
// (0 = left block, 1/2 = free sites, 3 = right block).
inline double mode_expectation(const Vector& state, const std::array<Index, 4>& dims, int mode,
                               const Matrix& a) {
    if (mode < 0 || mode > 3) throw ArgumentError("mode_expectation: mode must be 0..3");
    if (a.rows() != a.cols() || a.rows() != dims[mode])
        throw DimensionError("mode_expectation: operator does not match factor dimension");
    Index d1 = 1, d3 = 1;
    for (int i = 0; i < mode; ++i) d1 *= dims[i];
    for (int i = mode + 1; i < 4; ++i) d3 *= dims[i];
    if (state.size() != d1 * dims[mode] * d3)
        throw DimensionError("mode_expectation: state length does not match dims");
    Vector tmp = Vector::Zero(state.size());
    detail::apply_mode(state.data(), tmp.data(), d1, dims[mode], d3, a, 1.0);
    return state.dot(tmp);
}

inline SweepTrace finite_sweep(const ModelSpec& spec, const SweepConfig& cfg,
                               const StepObserver& observer = {}) {
    const int n = model_sites(spec);
    const SpinAlgebra alg = model_algebra(spec);
    const Index d = alg.local_dim;
    if (n < 4) throw ArgumentError("finite_sweep: need at least 4 sites");
    if (cfg.m < alg.local_dim)
        throw ArgumentError("finite_sweep: m must be at least the local dimension");
    if (cfg.k_targets < 1) throw ArgumentError("finite_sweep: k_targets must be positive");
    if (cfg.n_sweeps < 1) throw ArgumentError("finite_sweep: n_sweeps must be positive");
    if (cfg.target_weights == SweepConfig::Weights::boltzmann &&
        !(cfg.beta >= 0 && std::isfinite(cfg.beta)))
        throw ArgumentError("finite_sweep: boltzmann weights need a finite beta >= 0");
    const TermList t = build_terms(spec);

    std::vector<Block> lb(n), rb(n);     // slot i holds the i-site block
    lb[1] = initial_block(t, alg, BlockSide::left);
    rb[1] = initial_block(t, alg, BlockSide::right);

    std::uint64_t solves = 0;
    Vector tmp;

    auto solve = [&](int l, int r, int sweep, int step) {
        const Block& bl = lb[l];
        const Block& br = rb[r];
        const Index dim = bl.basis_dim * d * d * br.basis_dim;
        tmp.resize(dim);
        LinearOperator op{dim, [&](const Vector& v, Vector& out) {
                              detail::superblock_apply_into(bl, br, t, alg, v.data(), out.data(),
                                                            tmp);
                          }};
        LanczosOptions lo;
        lo.tol = cfg.lanczos_tol;
        lo.seed = detail::step_seed(cfg.seed, solves++);
        Spectrum s;
        try {
            s = lanczos_lowest_k(op, int(std::min<Index>(cfg.k_targets, dim)), lo);
        } catch (const Error& e) {
            throw NumericError("finite_sweep: superblock solve failed at sweep " +
                               std::to_string(sweep) + ", step " + std::to_string(step) +
                               " (left block " + std::to_string(l) + ", right block " +
                               std::to_string(r) + " sites): " + e.what());
        }
        SuperblockEigs eig;
        eig.energies = std::move(s.eigenvalues);
        eig.states = std::move(s.eigenvectors);
        eig.dims = {bl.basis_dim, d, d, br.basis_dim};
        return eig;
    };

    // Truncate the enlarged block on one side and store it; returns the report.
    auto shrink = [&](const SuperblockEigs& eig, BlockSide side, int l, int r) {
        Block grown = grow_block(side == BlockSide::left ? lb[l] : rb[r], t, alg);
        TruncationReport rep;
        if (grown.basis_dim > cfg.m) {
            const Vector w = target_weights(cfg, eig.energies);
            auto [rot, r2] = truncate(block_density(eig, w, side), cfg.m);
            rep = r2;
            grown = rotate_block(grown, rot);
        }
        if (side == BlockSide::left)
            lb[l + 1] = std::move(grown);
        else
            rb[r + 1] = std::move(grown);
        return rep;
    };

    SweepTrace trace;
    int l = 1, r = 1;
    int step = 0;
    while (l + r + 2 < n) {              // infinite-system warmup
        SuperblockEigs eig = solve(l, r, 0, step);
        TruncationReport rep = shrink(eig, BlockSide::left, l, r);
        rep.step = step;
        const bool also_right = l + r + 3 < n;
        if (also_right) {
            const TruncationReport rr = shrink(eig, BlockSide::right, l, r);
            rep.discarded_weight = std::max(rep.discarded_weight, rr.discarded_weight);
        }
        if (observer) observer(StepInfo{eig, lb[l], rb[r], rep, 0, step, true});
        ++l;
        if (also_right) ++r;
        ++step;
    }

    int fwd_start = l;
    for (int sweep = 1; sweep <= cfg.n_sweeps; ++sweep) {
        std::vector<double> energies;
        step = 0;
        for (int lc = fwd_start; lc <= n - 3; ++lc, ++step) {
            const int rc = n - lc - 2;
            SuperblockEigs eig = solve(lc, rc, sweep, step);
            energies.push_back(eig.energies(0));
            TruncationReport rep;
            // lb[n-2] would pair with an empty right block; never build it
            if (lc < n - 3) rep = shrink(eig, BlockSide::left, lc, rc);
            rep.step = step;
            if (observer) observer(StepInfo{eig, lb[lc], rb[rc], rep, sweep, step, true});
        }
        for (int lc = n - 3; lc >= 1; --lc, ++step) {
            const int rc = n - lc - 2;
            SuperblockEigs eig = solve(lc, rc, sweep, step);
            energies.push_back(eig.energies(0));
            TruncationReport rep;
            if (rc < n - 3) rep = shrink(eig, BlockSide::right, lc, rc);
            rep.step = step;
            if (observer) observer(StepInfo{eig, lb[lc], rb[rc], rep, sweep, step, false});
        }
        fwd_start = 1;
        trace.sweep_energies.push_back(*std::min_element(energies.begin(), energies.end()));
        trace.step_energies = std::move(energies);
        trace.sweeps_run = sweep;
        if (sweep >= 2 && cfg.converge_tol > 0) {
            const double cur = trace.sweep_energies[sweep - 1];
            const double prev = trace.sweep_energies[sweep - 2];
            if (std::abs(cur - prev) <= cfg.converge_tol * std::max(1.0, std::abs(cur))) break;
        }
    }
    trace.energy = trace.sweep_energies.back();
    return trace;
}

}  // namespace tdmrg
