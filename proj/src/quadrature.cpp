#include "spde/quadrature.hpp"

#include <numbers>

namespace spde::quad {

Rule gauss_legendre(int n)
{
    if (n < 1)
        throw ConfigError("Gauss-Legendre rule needs at least one point");
    Rule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int k = 0; k < (n + 1) / 2; ++k) {
        double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[k] = -x;
        rule.nodes[n - 1 - k] = x;
        rule.weights[k] = w;
        rule.weights[n - 1 - k] = w;
    }
    return rule;
}

Rule gauss_legendre(int n, double a, double b)
{
    Rule rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (int k = 0; k < n; ++k) {
        rule.nodes[k] = mid + half * rule.nodes[k];
        rule.weights[k] *= half;
    }
    return rule;
}

} // namespace spde::quad
