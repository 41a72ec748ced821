#pragma once

#include <Eigen/Core>

#include <functional>
#include <string_view>

#include "spde/errors.hpp"

namespace spde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Scalar function of time.
using TimeFunction = std::function<double(double)>;
/// Scalar function on the rectangle.
using PointFunction = std::function<double(double, double)>;

enum class Backend { Spectral, Fem };

constexpr std::string_view to_string(Backend b)
{
    return b == Backend::Spectral ? "spectral" : "fem";
}

/// Axis-aligned rectangle [0, l1] x [0, l2].
struct Rectangle {
    double l1 = 1.0;
    double l2 = 1.0;
};

/// Mode counts (Spectral) or cell counts (Fem) per direction.
struct Resolution {
    int n1 = 1;
    int n2 = 1;
};

/// A time coefficient with an optional closed-form integral over [a, c].
/// Without the closed form, integrate() falls back to adaptive quadrature.
struct TimeCoefficient {
    TimeFunction value;
    std::function<double(double, double)> integral;

    double operator()(double t) const { return value(t); }
    double integrate(double a, double c) const;

    static TimeCoefficient constant(double v);
};

/// Coefficient vector of a discrete function, tagged with its backend.
///
/// Spectral: cosine-mode coefficients, mode (i, j) stored at i + N1 * j.
/// Fem: nodal values on the (n1+1) x (n2+1) grid, node (ix, iy) at ix + (n1+1) * iy,
/// including Dirichlet nodes.
struct GridFunction {
    Backend backend = Backend::Spectral;
    Vector values;

    GridFunction() = default;
    GridFunction(Backend b, Vector v) : backend(b), values(std::move(v)) {}

    Eigen::Index size() const { return values.size(); }

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(double s);
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

/// Throws ConfigError unless both functions share backend and length.
void require_compatible(const GridFunction& a, const GridFunction& b);

} // namespace spde
