#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace tdmrg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

// Eigenpairs of a real symmetric matrix, eigenvalues ascending,
// eigenvectors stored as columns in matching order.
struct Spectrum {
    Vector eigenvalues;
    Matrix eigenvectors;
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct ArgumentError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct SizeError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct UnsupportedModelError : Error { using Error::Error; };

// Raised when an operation that needs a unique ground state meets a
// degenerate one; carries the parameter value where it happened.
struct DegeneracyError : Error {
    double where;
    DegeneracyError(const std::string& msg, double w) : Error(msg), where(w) {}
};

} // namespace tdmrg
