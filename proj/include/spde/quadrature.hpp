#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spde/errors.hpp"

namespace spde::quad {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
Rule gauss_legendre(int n);

/// The same rule mapped to [a, b].
Rule gauss_legendre(int n, double a, double b);

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double fa, double m, double fm, double b, double fb,
                    double whole, double tol, int level, int max_level, int& failures)
{
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (level >= 3 && std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    if (level >= max_level) {
        ++failures;
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, level + 1, max_level, failures) +
           simpson_step(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, level + 1, max_level, failures);
}

} // namespace detail

/// Adaptive Simpson quadrature with Richardson correction and absolute tolerance.
/// Throws NumericalError if the recursion depth is exhausted before convergence.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double abs_tol = 1e-12, int max_depth = 48)
{
    if (a == b)
        return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    int failures = 0;
    const double result =
        detail::simpson_step(f, a, fa, m, fm, b, fb, whole, abs_tol, 0, max_depth, failures);
    if (failures > 0 || !std::isfinite(result))
        throw NumericalError("adaptive Simpson did not converge on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "]");
    return result;
}

} // namespace spde::quad
