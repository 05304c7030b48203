#pragma once

#include "tdmrg/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>

namespace tdmrg {

// Full eigendecomposition of a real symmetric matrix. The input is checked
// for squareness and symmetry; the strict lower triangle is trusted.
inline Spectrum sym_eig(const Matrix& a) {
    if (a.rows() != a.cols())
        throw DimensionError("sym_eig: matrix is " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + ", expected square");
    const double scale = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
    const double asym = a.size() ? (a - a.transpose()).cwiseAbs().maxCoeff() : 0.0;
    if (asym > 1e-12 * std::max(1.0, scale))
        throw ArgumentError("sym_eig: matrix not symmetric, max |A - A^T| = " +
                            std::to_string(asym));
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success)
        throw NumericError("sym_eig: eigensolver failed to converge at size " +
                           std::to_string(a.rows()));
    return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

inline Vector sym_eigvals(const Matrix& a) {
    if (a.rows() != a.cols())
        throw DimensionError("sym_eigvals: matrix not square");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericError("sym_eigvals: eigensolver failed to converge at size " +
                           std::to_string(a.rows()));
    return solver.eigenvalues();
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    const std::int64_t rows = std::int64_t(a.rows()) * b.rows();
    const std::int64_t cols = std::int64_t(a.cols()) * b.cols();
    // 2^31 entries per side is far beyond anything this library can diagonalize
    if (rows > (std::int64_t(1) << 31) || cols > (std::int64_t(1) << 31))
        throw DimensionError("kron: product dimension overflow");
    Matrix out(rows, cols);
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Partial trace of an operator on a two-factor space, index convention
// row = i_left * dim_right + i_right.
enum class Keep { Left, Right };

inline Matrix partial_trace(const Matrix& rho, Index dim_left, Index dim_right, Keep keep) {
    if (dim_left < 1 || dim_right < 1)
        throw DimensionError("partial_trace: factor dimensions must be positive");
    if (rho.rows() != rho.cols() || rho.rows() != dim_left * dim_right)
        throw DimensionError("partial_trace: operator is " + std::to_string(rho.rows()) + "x" +
                             std::to_string(rho.cols()) + ", expected square of dimension " +
                             std::to_string(dim_left * dim_right));
    if (keep == Keep::Left) {
        Matrix out = Matrix::Zero(dim_left, dim_left);
        for (Index i = 0; i < dim_left; ++i)
            for (Index j = 0; j < dim_left; ++j) {
                double s = 0;
                for (Index r = 0; r < dim_right; ++r)
                    s += rho(i * dim_right + r, j * dim_right + r);
                out(i, j) = s;
            }
        return out;
    }
    Matrix out = Matrix::Zero(dim_right, dim_right);
    for (Index i = 0; i < dim_right; ++i)
        for (Index j = 0; j < dim_right; ++j) {
            double s = 0;
            for (Index l = 0; l < dim_left; ++l)
                s += rho(l * dim_right + i, l * dim_right + j);
            out(i, j) = s;
        }
    return out;
}

// Trace distance (1/2)*sum |eigenvalues| of rho1 - rho2.
inline double trace_distance(const Matrix& rho1, const Matrix& rho2) {
    if (rho1.rows() != rho2.rows() || rho1.cols() != rho2.cols())
        throw DimensionError("trace_distance: operand shapes differ");
    const Vector d = sym_eigvals(rho1 - rho2);
    return 0.5 * d.cwiseAbs().sum();
}

// Given ascending eigenvalues, grow k until it does not split a degenerate
// multiplet (relative gap below rel_tol). Returns the expanded count.
inline int expand_to_multiplet(const Vector& evals, int k, double rel_tol = 1e-9) {
    if (k < 0 || k > evals.size())
        throw ArgumentError("expand_to_multiplet: k out of range");
    while (k > 0 && k < evals.size() &&
           std::abs(evals(k) - evals(k - 1)) <= rel_tol * std::max(1.0, std::abs(evals(k - 1))))
        ++k;
    return k;
}

} // namespace tdmrg
