#include "spde/matrix_functions.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>

namespace spde::dense {

EigenDecomposition eigen_decompose(const Matrix& a)
{
    if (a.rows() != a.cols() || a.rows() == 0)
        throw ConfigError("eigendecomposition needs a non-empty square matrix");
    Eigen::EigenSolver<Matrix> es(a);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigendecomposition did not converge");
    EigenDecomposition out;
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    Eigen::JacobiSVD<ComplexMatrix> svd(out.vectors);
    const auto& s = svd.singularValues();
    out.condition = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1]
                                          : std::numeric_limits<double>::infinity();
    if (std::isfinite(out.condition))
        out.inverse = out.vectors.partialPivLu().inverse();
    return out;
}

Matrix apply_function(const EigenDecomposition& eig, const ComplexVector& f_values)
{
    if (!std::isfinite(eig.condition))
        throw NumericalError("matrix is not diagonalizable");
    return (eig.vectors * f_values.asDiagonal() * eig.inverse).real();
}

Matrix expm_pade(const Matrix& a)
{
    Matrix out = a.exp();
    if (!out.allFinite())
        throw NumericalError("matrix exponential overflowed");
    return out;
}

Matrix expm_eigen(const Matrix& a)
{
    const auto eig = eigen_decompose(a);
    return apply_function(eig, eig.values.array().exp().matrix());
}

Vector exp_apply(const Matrix& a, double s, const Vector& v)
{
    if (!(s >= 0.0))
        throw ConfigError("exp_apply needs s >= 0");
    if (s == 0.0)
        return v;
    const Matrix scaled = -s * a;
    const auto eig = eigen_decompose(scaled);
    if (eig.condition < kEigenRouteCondition)
        return apply_function(eig, eig.values.array().exp().matrix()) * v;
    return expm_pade(scaled) * v;
}

namespace {

void check_power_domain(const ComplexVector& values, double p)
{
    const double scale = values.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        const auto z = values[k];
        if (std::abs(z) <= 1e-14 * scale && p < 0.0)
            throw DomainError("negative power of a singular matrix");
        if (z.real() < 0.0 && std::abs(z.imag()) <= 1e-14 * scale)
            throw DomainError("principal power undefined: eigenvalue on the negative real axis");
    }
}

} // namespace

Matrix matrix_power_schur(const Matrix& a, double p)
{
    const Matrix out = a.pow(p);
    if (!out.allFinite())
        throw NumericalError("Schur matrix power is not finite");
    return out;
}

Matrix matrix_power(const Matrix& a, double p)
{
    if (p == 0.0)
        return Matrix::Identity(a.rows(), a.cols());
    const auto eig = eigen_decompose(a);
    check_power_domain(eig.values, p);
    if (eig.condition < kEigenRouteCondition)
        return apply_function(eig, eig.values.array().pow(p).matrix());
    return matrix_power_schur(a, p);
}

double norm2(const Matrix& a)
{
    if (a.size() == 0)
        return 0.0;
    if (a.rows() == 1 || a.cols() == 1)
        return a.norm();
    const Matrix g = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues()[es.eigenvalues().size() - 1]));
}

} // namespace spde::dense
