#pragma once

#include "tdmrg/linalg.hpp"
#include "tdmrg/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace tdmrg {

// Single-particle picture of the delta = 0 staggered chain under the
// Jordan-Wigner mapping: hopping -J_l between neighbors, on-site -2 B_l,
// plus a scalar offset sum(B_l) from sigma^z = 2n - 1.
struct HoppingMatrix {
    int n = 0;
    Matrix t;              // n x n symmetric tridiagonal
    double e_offset = 0.0;
};

inline HoppingMatrix jw_build(const StaggeredSpec& spec) {
    if (spec.delta != 0.0)
        throw UnsupportedModelError("jw_build: only the delta = 0 chain maps to free fermions");
    if (spec.n < 2) throw ArgumentError("jw_build: need at least two sites");
    HoppingMatrix h;
    h.n = spec.n;
    h.t = Matrix::Zero(spec.n, spec.n);
    for (int l = 1; l <= spec.n; ++l) {
        const double sign = (l % 2 == 0) ? 1.0 : -1.0;
        const double b_l = spec.b + sign * spec.b_alt;
        h.t(l - 1, l - 1) = -2.0 * b_l;
        h.e_offset += b_l;
        if (l < spec.n) {
            const double j_l = spec.j + sign * spec.j_alt;
            h.t(l - 1, l) = -j_l;
            h.t(l, l - 1) = -j_l;
        }
    }
    return h;
}

inline Vector single_particle_energies(const HoppingMatrix& h) { return sym_eigvals(h.t); }

inline double ff_ground_energy(const HoppingMatrix& h) {
    Vector eps = single_particle_energies(h);
    double e = h.e_offset;
    for (Index i = 0; i < eps.size(); ++i)
        if (eps(i) < 0.0) e += eps(i);
    return e;
}

// All 2^n mode-occupation energies, ascending. Matches the spin spectrum of
// the delta = 0 chain as a multiset.
inline Vector ff_many_body_spectrum(const HoppingMatrix& h) {
    if (h.n > 20)
        throw SizeError("ff_many_body_spectrum: 2^" + std::to_string(h.n) +
                        " levels is too many to enumerate");
    Vector eps = single_particle_energies(h);
    const Index total = Index(1) << h.n;
    Vector out(total);
    for (Index mask = 0; mask < total; ++mask) {
        double e = h.e_offset;
        for (int i = 0; i < h.n; ++i)
            if (mask & (Index(1) << i)) e += eps(i);
        out(mask) = e;
    }
    std::sort(out.data(), out.data() + total);
    return out;
}

// Number of negative single-particle modes = occupation of the ground state;
// a change along a parameter path means a ground-state level crossing.
// Sturm count on the tridiagonal, no need for eigenvalues.
inline int negative_mode_count(const HoppingMatrix& h) {
    const int n = h.n;
    double d = h.t(0, 0);
    int count = d < 0.0 ? 1 : 0;
    for (int i = 1; i < n; ++i) {
        const double b = h.t(i - 1, i);
        if (d == 0.0) d = 1e-300; // keep the recurrence finite at exact zeros
        d = h.t(i, i) - b * b / d;
        if (d < 0.0) ++count;
    }
    return count;
}

// Parameter values in [lo, hi] where a single-particle mode crosses zero
// (ground-state level crossings of the spin chain). Scanned on a grid of the
// given resolution, each sign change refined by bisection to resolution/100.
// Multiple crossings inside one cell are separated recursively; an exactly
// degenerate crossing is reported once per crossing mode.
inline std::vector<double> ff_critical_scan(const StaggeredSpec& tmpl, const std::string& axis,
                                            double lo, double hi, double resolution) {
    if (!(lo < hi)) throw ArgumentError("ff_critical_scan: empty scan range");
    if (!(resolution > 0.0)) throw ArgumentError("ff_critical_scan: resolution must be positive");
    ModelSpec spec = tmpl;
    auto count_at = [&](double x) {
        set_parameter(spec, axis, x);
        return negative_mode_count(jw_build(std::get<StaggeredSpec>(spec)));
    };
    const double width_goal = resolution / 100.0;
    std::vector<double> out;
    double a = lo;
    int na = count_at(a);
    while (a < hi) {
        const double b = std::min(a + resolution, hi);
        const int nb = count_at(b);
        if (na != nb) {
            // local recursive bisection
            std::vector<std::tuple<double, double, int, int>> stack{{a, b, na, nb}};
            while (!stack.empty()) {
                auto [x0, x1, c0, c1] = stack.back();
                stack.pop_back();
                if (c0 == c1) continue;
                if (x1 - x0 <= width_goal) {
                    for (int i = 0; i < std::abs(c1 - c0); ++i) out.push_back(0.5 * (x0 + x1));
                    continue;
                }
                const double m = 0.5 * (x0 + x1);
                const int cm = count_at(m);
                stack.push_back({m, x1, cm, c1});
                stack.push_back({x0, m, c0, cm});
            }
        }
        a = b;
        na = nb;
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace tdmrg
