#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>

#include "spde/core.hpp"

namespace spde::dense {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Eigenvector condition number below which eigendecomposition routes are used.
inline constexpr double kEigenRouteCondition = 1e6;

struct EigenDecomposition {
    ComplexVector values;
    ComplexMatrix vectors;
    ComplexMatrix inverse;
    /// 2-norm condition number of `vectors`.
    double condition = 0.0;
};

EigenDecomposition eigen_decompose(const Matrix& a);

/// V f(diag(values)) V^{-1}, real part.
Matrix apply_function(const EigenDecomposition& eig, const ComplexVector& f_values);

/// exp(a) by scaling and squaring with Pade approximants.
Matrix expm_pade(const Matrix& a);
/// exp(a) through the eigendecomposition.
Matrix expm_eigen(const Matrix& a);
/// exp(-s a) v; eigendecomposition when well conditioned, else scaling and squaring.
Vector exp_apply(const Matrix& a, double s, const Vector& v);

/// Principal power a^p; eigendecomposition when well conditioned, else the Schur route.
/// Throws DomainError when a has an eigenvalue on the closed negative real axis.
Matrix matrix_power(const Matrix& a, double p);
/// Principal power by complex Schur form with Pade on the triangular factor.
Matrix matrix_power_schur(const Matrix& a, double p);

/// Largest singular value.
double norm2(const Matrix& a);

} // namespace spde::dense
