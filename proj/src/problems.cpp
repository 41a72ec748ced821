#include "spde/problems.hpp"

#include <cmath>
#include <string>

namespace spde::problems {

std::string_view to_string(Problem p)
{
    return p == Problem::AdditiveLinear ? "additive_linear" : "multiplicative_advection";
}

Problem parse_problem(std::string_view name)
{
    if (name == "additive_linear")
        return Problem::AdditiveLinear;
    if (name == "multiplicative_advection")
        return Problem::MultiplicativeAdvection;
    throw ConfigError("unknown problem '" + std::string(name) + "'");
}

TimeCoefficient additive_diffusion()
{
    return {[](double t) { return 0.1 * (1.0 + std::exp(-t)); },
            [](double a, double c) { return 0.1 * (c - a + std::exp(-a) - std::exp(-c)); }};
}

TimeCoefficient advection_theta()
{
    return {[](double t) { return 1.0 + std::exp(-t); },
            [](double a, double c) { return c - a + std::exp(-a) - std::exp(-c); }};
}

operators::VelocityField default_velocity()
{
    return [](double, double) { return Eigen::Vector2d(1.0, 0.0); };
}

Setup make_additive(double beta, double delta, int modes, double t_final)
{
    if (modes < 2)
        throw ConfigError("additive problem needs at least 2 modes per direction");
    const Rectangle unit{1.0, 1.0};
    Setup s;
    s.family = operators::build_spectral_family(
        unit, {modes, modes}, {additive_diffusion(), TimeCoefficient::constant(1.0), t_final});
    s.noise = noise::make_noise_spec(beta, delta, {modes - 1, modes - 1}, unit);
    s.scheme.t_final = t_final;
    s.scheme.drift = scheme::Drift::zero();
    s.scheme.diffusion = scheme::Diffusion::additive();
    return s;
}

Setup make_multiplicative(double beta, double delta, int cells, double t_final,
                          operators::VelocityField velocity)
{
    const Rectangle unit{1.0, 1.0};
    operators::BoundarySpec bc = operators::all_neumann();
    bc[static_cast<int>(operators::Edge::Left)] = operators::EdgeCondition::dirichlet(1.0);
    Setup s;
    s.family = operators::build_fem_family(
        unit, {cells, cells}, {advection_theta(), TimeCoefficient::constant(0.0), t_final},
        std::move(velocity), bc, 0.0);
    s.noise = noise::make_noise_spec(beta, delta, {cells, cells}, unit);
    s.scheme.t_final = t_final;
    s.scheme.drift = scheme::Drift::saturating();
    s.scheme.diffusion = scheme::Diffusion::multiplicative();
    s.scheme.initial = [](double, double) { return 1.0; };
    return s;
}

} // namespace spde::problems
