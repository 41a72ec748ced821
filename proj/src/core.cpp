#include "spde/core.hpp"

#include "spde/quadrature.hpp"

namespace spde {

double TimeCoefficient::integrate(double a, double c) const
{
    if (integral)
        return integral(a, c);
    return quad::adaptive_simpson(value, a, c, 1e-13);
}

TimeCoefficient TimeCoefficient::constant(double v)
{
    return {[v](double) { return v; }, [v](double a, double c) { return v * (c - a); }};
}

void require_compatible(const GridFunction& a, const GridFunction& b)
{
    if (a.backend != b.backend)
        throw ConfigError("grid functions live on different backends");
    if (a.size() != b.size())
        throw ConfigError("grid functions have different lengths (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
}

GridFunction& GridFunction::operator+=(const GridFunction& other)
{
    require_compatible(*this, other);
    values += other.values;
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other)
{
    require_compatible(*this, other);
    values -= other.values;
    return *this;
}

GridFunction& GridFunction::operator*=(double s)
{
    values *= s;
    return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

} // namespace spde
