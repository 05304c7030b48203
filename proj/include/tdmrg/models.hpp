#pragma once

#include "tdmrg/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace tdmrg {

enum class Spin { Half, One };

// Real representation of the on-site spin operators. sy is imaginary for both
// spin-1/2 and spin-1, but i*sy is real antisymmetric, and
// sy (x) sy = -(isy) (x) (isy), so all Hamiltonians here stay real.
struct SpinAlgebra {
    int local_dim;
    Matrix sx, isy, sz, sz2, id;
};

inline SpinAlgebra spin_algebra(Spin s) {
    if (s == Spin::Half) {
        SpinAlgebra a;
        a.local_dim = 2;
        a.sx = Matrix{{0, 1}, {1, 0}};
        a.isy = Matrix{{0, 1}, {-1, 0}};
        a.sz = Matrix{{1, 0}, {0, -1}};
        a.sz2 = Matrix::Identity(2, 2);
        a.id = Matrix::Identity(2, 2);
        return a;
    }
    SpinAlgebra a;
    a.local_dim = 3;
    const double r = 1.0 / std::sqrt(2.0);
    a.sx = Matrix{{0, r, 0}, {r, 0, r}, {0, r, 0}};
    a.isy = Matrix{{0, r, 0}, {-r, 0, r}, {0, -r, 0}};
    a.sz = Matrix{{1, 0, 0}, {0, 0, 0}, {0, 0, -1}};
    a.sz2 = Matrix{{1, 0, 0}, {0, 0, 0}, {0, 0, 1}};
    a.id = Matrix::Identity(3, 3);
    return a;
}

// Spin-1 chain, open boundary:
//   H = sum_l [ Sx_l Sx_{l+1} + Sy_l Sy_{l+1} + jz Sz_l Sz_{l+1} ] + d sum_l (Sz_l)^2
struct Spin1XxzSpec {
    int n = 4;
    double jz = 1.0;
    double d = 0.0;
};

// Spin-1/2 chain with two-site periodicity, open boundary:
//   H = -sum_l [ (J_l/2)(sx_l sx_{l+1} + sy_l sy_{l+1} + delta sz_l sz_{l+1}) + B_l sz_l ]
// with J_l = j + (-1)^l j_alt and B_l = b + (-1)^l b_alt, sites numbered from 1,
// so site 1 carries couplings j - j_alt and field b - b_alt.
struct StaggeredSpec {
    int n = 4;
    double j = 1.0;
    double j_alt = 0.0;
    double b = 0.0;
    double b_alt = 0.0;
    double delta = 0.0;
};

using ModelSpec = std::variant<Spin1XxzSpec, StaggeredSpec>;

inline int model_sites(const ModelSpec& spec) {
    return std::visit([](const auto& s) { return s.n; }, spec);
}

inline int model_local_dim(const ModelSpec& spec) {
    return std::holds_alternative<Spin1XxzSpec>(spec) ? 3 : 2;
}

inline SpinAlgebra model_algebra(const ModelSpec& spec) {
    return spin_algebra(std::holds_alternative<Spin1XxzSpec>(spec) ? Spin::One : Spin::Half);
}

inline std::string model_name(const ModelSpec& spec) {
    return std::holds_alternative<Spin1XxzSpec>(spec) ? "spin1_xxz" : "staggered";
}

inline std::vector<std::string> model_parameter_names(const ModelSpec& spec) {
    if (std::holds_alternative<Spin1XxzSpec>(spec)) return {"jz", "d"};
    return {"j", "j_alt", "b", "b_alt", "delta"};
}

inline void set_parameter(ModelSpec& spec, const std::string& name, double value) {
    if (auto* s1 = std::get_if<Spin1XxzSpec>(&spec)) {
        if (name == "jz") { s1->jz = value; return; }
        if (name == "d") { s1->d = value; return; }
    } else if (auto* st = std::get_if<StaggeredSpec>(&spec)) {
        if (name == "j") { st->j = value; return; }
        if (name == "j_alt") { st->j_alt = value; return; }
        if (name == "b") { st->b = value; return; }
        if (name == "b_alt") { st->b_alt = value; return; }
        if (name == "delta") { st->delta = value; return; }
    }
    throw ArgumentError("set_parameter: model " + model_name(spec) +
                        " has no real parameter named '" + name + "'");
}

inline double get_parameter(const ModelSpec& spec, const std::string& name) {
    if (const auto* s1 = std::get_if<Spin1XxzSpec>(&spec)) {
        if (name == "jz") return s1->jz;
        if (name == "d") return s1->d;
    } else if (const auto* st = std::get_if<StaggeredSpec>(&spec)) {
        if (name == "j") return st->j;
        if (name == "j_alt") return st->j_alt;
        if (name == "b") return st->b;
        if (name == "b_alt") return st->b_alt;
        if (name == "delta") return st->delta;
    }
    throw ArgumentError("get_parameter: model " + model_name(spec) +
                        " has no real parameter named '" + name + "'");
}

// One two-site coupling: coeff * (left on site l) (x) (right on site l+1).
struct BondOp {
    Matrix left, right;
    double coeff;
};

struct TermList {
    int local_dim = 0;
    int sites = 0;
    std::vector<Matrix> site_terms;              // one per site
    std::vector<std::vector<BondOp>> bond_terms; // one list per bond (l, l+1)
};

inline TermList build_terms(const ModelSpec& spec) {
    const int n = model_sites(spec);
    if (n < 2) throw ArgumentError("build_terms: chain length must be at least 2");
    const SpinAlgebra alg = model_algebra(spec);
    TermList t;
    t.local_dim = alg.local_dim;
    t.sites = n;
    t.site_terms.resize(n);
    t.bond_terms.resize(n - 1);

    if (const auto* s1 = std::get_if<Spin1XxzSpec>(&spec)) {
        if (!std::isfinite(s1->jz) || !std::isfinite(s1->d))
            throw ArgumentError("build_terms: non-finite coupling in spin-1 chain spec");
        for (int l = 0; l < n; ++l) t.site_terms[l] = s1->d * alg.sz2;
        for (int l = 0; l + 1 < n; ++l)
            t.bond_terms[l] = {{alg.sx, alg.sx, 1.0},
                               {alg.isy, alg.isy, -1.0},
                               {alg.sz, alg.sz, s1->jz}};
        return t;
    }

    const auto& st = std::get<StaggeredSpec>(spec);
    if (!std::isfinite(st.j) || !std::isfinite(st.j_alt) || !std::isfinite(st.b) ||
        !std::isfinite(st.b_alt) || !std::isfinite(st.delta))
        throw ArgumentError("build_terms: non-finite coupling in staggered chain spec");
    for (int l = 1; l <= n; ++l) {
        const double bl = st.b + (l % 2 ? -st.b_alt : st.b_alt);
        t.site_terms[l - 1] = -bl * alg.sz;
    }
    for (int l = 1; l + 1 <= n; ++l) {
        const double jl = st.j + (l % 2 ? -st.j_alt : st.j_alt);
        t.bond_terms[l - 1] = {{alg.sx, alg.sx, -jl / 2},
                               {alg.isy, alg.isy, jl / 2},
                               {alg.sz, alg.sz, -jl * st.delta / 2}};
    }
    return t;
}

inline Index hilbert_dim(const TermList& t) {
    Index dim = 1;
    for (int i = 0; i < t.sites; ++i) dim *= t.local_dim;
    return dim;
}

inline Index dense_assembly_cap(int local_dim) {
    return local_dim == 2 ? (Index(1) << 14) : 59049; // 2^14 and 3^10
}

// Full Hamiltonian as a dense matrix. Refuses above the cap; pass cap = 0 to
// use the per-family default.
inline Matrix assemble_dense(const TermList& t, Index cap = 0) {
    const Index dim = hilbert_dim(t);
    if (cap == 0) cap = dense_assembly_cap(t.local_dim);
    if (dim > cap)
        throw SizeError("assemble_dense: dimension " + std::to_string(dim) +
                        " exceeds cap " + std::to_string(cap));
    const int d = t.local_dim;
    Matrix h = Matrix::Zero(dim, dim);
    Index dim_left = 1, dim_right = dim / d;
    for (int l = 0; l < t.sites; ++l) {
        const Matrix& a = t.site_terms[l];
        for (Index il = 0; il < dim_left; ++il)
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    if (a(r, c) == 0.0) continue;
                    for (Index ir = 0; ir < dim_right; ++ir)
                        h((il * d + r) * dim_right + ir, (il * d + c) * dim_right + ir) +=
                            a(r, c);
                }
        dim_left *= d;
        dim_right /= d;
    }
    dim_left = 1;
    dim_right = dim / (d * d);
    for (int l = 0; l + 1 < t.sites; ++l) {
        for (const BondOp& op : t.bond_terms[l]) {
            for (Index il = 0; il < dim_left; ++il)
                for (int r1 = 0; r1 < d; ++r1)
                    for (int c1 = 0; c1 < d; ++c1) {
                        if (op.left(r1, c1) == 0.0) continue;
                        for (int r2 = 0; r2 < d; ++r2)
                            for (int c2 = 0; c2 < d; ++c2) {
                                if (op.right(r2, c2) == 0.0) continue;
                                const double v = op.coeff * op.left(r1, c1) * op.right(r2, c2);
                                for (Index ir = 0; ir < dim_right; ++ir)
                                    h(((il * d + r1) * d + r2) * dim_right + ir,
                                      ((il * d + c1) * d + c2) * dim_right + ir) += v;
                            }
                    }
        }
        dim_left *= d;
        dim_right /= d;
    }
    return h;
}

// Matrix-free H*v for the full chain; no dimension cap beyond memory.
inline void apply_terms(const TermList& t, const Vector& v, Vector& out) {
    const Index dim = hilbert_dim(t);
    if (v.size() != dim)
        throw DimensionError("apply_terms: vector length " + std::to_string(v.size()) +
                             " does not match Hilbert dimension " + std::to_string(dim));
    const int d = t.local_dim;
    out.setZero(dim);
    Index dim_left = 1, dim_right = dim / d;
    for (int l = 0; l < t.sites; ++l) {
        const Matrix& a = t.site_terms[l];
        for (Index il = 0; il < dim_left; ++il)
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    if (a(r, c) == 0.0) continue;
                    const double* src = v.data() + (il * d + c) * dim_right;
                    double* dst = out.data() + (il * d + r) * dim_right;
                    const double w = a(r, c);
                    for (Index ir = 0; ir < dim_right; ++ir) dst[ir] += w * src[ir];
                }
        dim_left *= d;
        dim_right /= d;
    }
    dim_left = 1;
    dim_right = dim / (d * d);
    for (int l = 0; l + 1 < t.sites; ++l) {
        for (const BondOp& op : t.bond_terms[l]) {
            for (Index il = 0; il < dim_left; ++il)
                for (int r1 = 0; r1 < d; ++r1)
                    for (int c1 = 0; c1 < d; ++c1) {
                        if (op.left(r1, c1) == 0.0) continue;
                        for (int r2 = 0; r2 < d; ++r2)
                            for (int c2 = 0; c2 < d; ++c2) {
                                if (op.right(r2, c2) == 0.0) continue;
                                const double w =
                                    op.coeff * op.left(r1, c1) * op.right(r2, c2);
                                const double* src =
                                    v.data() + ((il * d + c1) * d + c2) * dim_right;
                                double* dst =
                                    out.data() + ((il * d + r1) * d + r2) * dim_right;
                                for (Index ir = 0; ir < dim_right; ++ir)
                                    dst[ir] += w * src[ir];
                            }
                    }
        }
        dim_left *= d;
        dim_right /= d;
    }
}

// Diagonal of the local z operator, exact small integers; used for sector
// bookkeeping and magnetization sums.
inline std::vector<int> z_diagonal(int local_dim) {
    if (local_dim == 2) return {1, -1};
    if (local_dim == 3) return {1, 0, -1};
    throw ArgumentError("z_diagonal: unsupported local dimension " +
                        std::to_string(local_dim));
}

} // namespace tdmrg
