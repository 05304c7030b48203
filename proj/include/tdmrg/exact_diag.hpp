#pragma once

#include "tdmrg/lanczos.hpp"
#include "tdmrg/linalg.hpp"
#include "tdmrg/models.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <vector>

namespace tdmrg {

struct EDSolution {
    ModelSpec spec;
    Spectrum spectrum; // full, ascending
    int local_dim = 0;
    int n = 0;
};

struct ThermalEnsemble {
    Vector energies; // lowest k, ascending
    Matrix states;   // orthonormal columns matching energies
    double beta = 0.0;
    Vector weights; // normalized Boltzmann factors, nonincreasing
};

namespace detail {

inline int config_digit(Index config, int local_dim, int n, int site) {
    // site 1 is the most significant digit, matching the kron ordering
    Index div = 1;
    for (int s = n; s > site; --s) div *= local_dim;
    return int((config / div) % local_dim);
}

inline Index replace_digit(Index config, int local_dim, int n, int site, int from, int to) {
    Index div = 1;
    for (int s = n; s > site; --s) div *= local_dim;
    return config + Index(to - from) * div;
}

} // namespace detail

// Full spectrum of the assembled chain. Both models conserve total z
// magnetization, so the Hamiltonian is diagonalized sector by sector and the
// results merged ascending; the returned eigenvectors live in the full space.
inline EDSolution ed_solve(const ModelSpec& spec) {
    const TermList t = build_terms(spec);
    const Index dim = hilbert_dim(t);
    const Index cap = dense_assembly_cap(t.local_dim);
    if (dim > cap)
        throw SizeError("ed_solve: dimension " + std::to_string(dim) + " exceeds cap " +
                        std::to_string(cap));

    const std::vector<int> zdiag = z_diagonal(t.local_dim);
    const int n = t.sites;

    std::map<int, std::vector<Index>> sectors;
    for (Index c = 0; c < dim; ++c) {
        int m = 0;
        Index rest = c;
        for (int s = n; s >= 1; --s) {
            m += zdiag[rest % t.local_dim];
            rest /= t.local_dim;
        }
        sectors[m].push_back(c);
    }

    std::vector<std::pair<double, Vector>> merged;
    merged.reserve(dim);
    std::map<Index, Index> pos;
    for (auto& [m, idx] : sectors) {
        const Index bd = (Index)idx.size();
        pos.clear();
        for (Index i = 0; i < bd; ++i) pos[idx[i]] = i;
        Matrix h = Matrix::Zero(bd, bd);
        for (Index col = 0; col < bd; ++col) {
            const Index c = idx[col];
            for (int l = 1; l <= n; ++l) {
                const Matrix& m1 = t.site_terms[l - 1];
                if (m1.size() == 0) continue;
                const int d0 = detail::config_digit(c, t.local_dim, n, l);
                for (int a = 0; a < t.local_dim; ++a) {
                    const double amp = m1(a, d0);
                    if (amp == 0.0) continue;
                    const Index c2 = detail::replace_digit(c, t.local_dim, n, l, d0, a);
                    auto it = pos.find(c2);
                    if (it == pos.end())
                        throw NumericError("ed_solve: term list does not conserve total z");
                    h(it->second, col) += amp;
                }
            }
            for (int l = 1; l < n; ++l) {
                const int dl = detail::config_digit(c, t.local_dim, n, l);
                const int dr = detail::config_digit(c, t.local_dim, n, l + 1);
                // single bond components need not conserve z on their own
                // (sx sx does not), only their sum does, so total first
                for (int a = 0; a < t.local_dim; ++a) {
                    for (int bb = 0; bb < t.local_dim; ++bb) {
                        double amp = 0.0;
                        for (const BondOp& b : t.bond_terms[l - 1])
                            amp += b.coeff * b.left(a, dl) * b.right(bb, dr);
                        if (std::abs(amp) < 1e-14) continue;
                        Index c2 = detail::replace_digit(c, t.local_dim, n, l, dl, a);
                        c2 = detail::replace_digit(c2, t.local_dim, n, l + 1, dr, bb);
                        auto it = pos.find(c2);
                        if (it == pos.end())
                            throw NumericError("ed_solve: term list does not conserve total z");
                        h(it->second, col) += amp;
                    }
                }
            }
        }
        Spectrum block = sym_eig(h);
        for (Index i = 0; i < bd; ++i) {
            Vector full = Vector::Zero(dim);
            for (Index r = 0; r < bd; ++r) full(idx[r]) = block.eigenvectors(r, i);
            merged.emplace_back(block.eigenvalues(i), std::move(full));
        }
    }

    std::sort(merged.begin(), merged.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Spectrum out;
    out.eigenvalues.resize(dim);
    out.eigenvectors.resize(dim, dim);
    for (Index i = 0; i < dim; ++i) {
        out.eigenvalues(i) = merged[i].first;
        out.eigenvectors.col(i) = merged[i].second;
    }
    return EDSolution{spec, std::move(out), t.local_dim, n};
}

// Lowest k eigenpairs without assembling the dense matrix.
inline Spectrum ed_lowest_k(const ModelSpec& spec, int k, const LanczosOptions& opts = {}) {
    const TermList t = build_terms(spec);
    LinearOperator op{hilbert_dim(t),
                      [t](const Vector& v, Vector& out) { apply_terms(t, v, out); }};
    return lanczos_lowest_k(op, k, opts);
}

// Boltzmann weights over the given (ascending) energies. beta >= 1e6 is the
// zero-temperature limit: uniform over the ground multiplet, zero elsewhere.
inline Vector thermal_weights(const Vector& energies, double beta) {
    if (energies.size() == 0) throw ArgumentError("thermal_weights: no energies");
    if (!(beta >= 0.0)) throw ArgumentError("thermal_weights: beta must be >= 0");
    const Index k = energies.size();
    const double e0 = energies.minCoeff();
    Vector w(k);
    if (beta >= 1e6) {
        const double tol = 1e-9 * std::max(1.0, std::abs(e0));
        for (Index i = 0; i < k; ++i) w(i) = (energies(i) - e0 <= tol) ? 1.0 : 0.0;
    } else {
        for (Index i = 0; i < k; ++i) w(i) = std::exp(-beta * (energies(i) - e0));
    }
    return w / w.sum();
}

inline ThermalEnsemble thermal_ensemble(const EDSolution& sol, double beta, int k) {
    const Index dim = sol.spectrum.eigenvalues.size();
    if (k < 1 || k > dim)
        throw ArgumentError("thermal_ensemble: k = " + std::to_string(k) +
                            " out of range for dimension " + std::to_string(dim));
    ThermalEnsemble ens;
    ens.energies = sol.spectrum.eigenvalues.head(k);
    ens.states = sol.spectrum.eigenvectors.leftCols(k);
    ens.beta = beta;
    ens.weights = thermal_weights(ens.energies, beta);
    return ens;
}

inline Matrix gibbs_state(const EDSolution& sol, double beta, int k) {
    ThermalEnsemble ens = thermal_ensemble(sol, beta, k);
    return ens.states * ens.weights.asDiagonal() * ens.states.transpose();
}

// D(rho, rho_L x rho_R) across the cut between sites cut and cut+1.
inline double ed_bipartite_trace_distance(const Matrix& rho, int local_dim, int n, int cut) {
    if (cut < 1 || cut >= n)
        throw ArgumentError("ed_bipartite_trace_distance: cut " + std::to_string(cut) +
                            " not interior to chain of " + std::to_string(n) + " sites");
    Index dl = 1, dr = 1;
    for (int s = 0; s < cut; ++s) dl *= local_dim;
    for (int s = cut; s < n; ++s) dr *= local_dim;
    if (rho.rows() != dl * dr || rho.cols() != dl * dr)
        throw DimensionError("ed_bipartite_trace_distance: state dimension " +
                             std::to_string(rho.rows()) + " does not match chain");
    Matrix rho_l = partial_trace(rho, dl, dr, Keep::Left);
    Matrix rho_r = partial_trace(rho, dl, dr, Keep::Right);
    return trace_distance(rho, kron(rho_l, rho_r));
}

// <z_l> per site. A single column is read as a pure state, a square matrix
// as a density matrix; only diagonal occupation probabilities are needed.
inline Vector site_magnetizations(const Matrix& state, int local_dim, int n) {
    Index dim = 1;
    for (int s = 0; s < n; ++s) dim *= local_dim;
    const bool pure = state.cols() == 1;
    if (state.rows() != dim || (!pure && state.cols() != dim))
        throw DimensionError("site_magnetizations: state dimension mismatch");
    const std::vector<int> zdiag = z_diagonal(local_dim);
    Vector out = Vector::Zero(n);
    for (Index c = 0; c < dim; ++c) {
        const double p = pure ? state(c, 0) * state(c, 0) : state(c, c);
        if (p == 0.0) continue;
        Index rest = c;
        for (int s = n; s >= 1; --s) {
            out(s - 1) += p * zdiag[rest % local_dim];
            rest /= local_dim;
        }
    }
    return out;
}

// Open-path geometric phase of the twisted family g(phi)|psi_0>, with
// g(phi) = prod_l exp(i z_l phi / 2) sampled at phi_j = j pi / steps and the
// connection accumulated through overlaps of neighboring samples. Signs follow
// the convention in which a fully polarized n-site chain gives +n pi/2.
inline double berry_phase_discrete(const ModelSpec& spec, int steps) {
    const TermList t = build_terms(spec);
    const Index dim = hilbert_dim(t);
    const Index cap = dense_assembly_cap(t.local_dim);
    if (dim > cap)
        throw SizeError("berry_phase_discrete: dimension " + std::to_string(dim) +
                        " exceeds cap " + std::to_string(cap));
    if (steps < 1) throw ArgumentError("berry_phase_discrete: steps must be positive");
    const int n = t.sites;
    if (2 * steps <= n)
        throw ArgumentError("berry_phase_discrete: " + std::to_string(steps) +
                            " steps is too coarse for " + std::to_string(n) +
                            " sites, phase increments can wrap");

    Spectrum low = ed_lowest_k(spec, 2);
    const double gap = low.eigenvalues(1) - low.eigenvalues(0);
    if (gap < 1e-10)
        throw DegeneracyError("berry_phase_discrete: ground state degenerate along the path",
                              0.0);
    const Vector psi = low.eigenvectors.col(0);

    const std::vector<int> zdiag = z_diagonal(t.local_dim);
    const double dphi = M_PI / steps;
    std::complex<double> overlap = 0.0;
    for (Index c = 0; c < dim; ++c) {
        const double p = psi(c) * psi(c);
        if (p == 0.0) continue;
        int m = 0;
        Index rest = c;
        for (int s = n; s >= 1; --s) {
            m += zdiag[rest % t.local_dim];
            rest /= t.local_dim;
        }
        overlap += p * std::exp(std::complex<double>(0.0, dphi * m / 2.0));
    }
    // the twist unitary is phi-independent between neighboring samples, so
    // every step contributes the same overlap
    return steps * std::arg(overlap);
}

} // namespace tdmrg
