#pragma once

#include <memory>
#include <string_view>

#include "spde/noise.hpp"
#include "spde/operators.hpp"
#include "spde/scheme.hpp"

namespace spde::problems {

enum class Problem { AdditiveLinear, MultiplicativeAdvection };

std::string_view to_string(Problem p);
Problem parse_problem(std::string_view name);

/// D(t) = (1 + exp(-t)) / 10, with its closed-form integral.
TimeCoefficient additive_diffusion();
/// 1 + exp(-t), with its closed-form integral.
TimeCoefficient advection_theta();
/// Default Darcy velocity q = (1, 0).
operators::VelocityField default_velocity();

struct Setup {
    std::unique_ptr<operators::OperatorFamily> family;
    scheme::SchemeConfig scheme;  // `steps` is left for the caller
    noise::NoiseSpec noise;
};

/// dX = [D(t) Lap X - X] dt + dW on the unit square, homogeneous Neumann, X_0 = 0.
/// Spectral modes 0..modes-1 per direction, noise modes 1..modes-1.
Setup make_additive(double beta, double delta, int modes, double t_final);

/// dX = [(1 + e^-t)(Lap X - q . grad X) - e^-t X / (1 + |X|)] dt + X dW on the unit square,
/// X = 1 on x = 0, homogeneous Neumann elsewhere, X_0 = 1. P1 on cells x cells,
/// noise modes 1..cells.
Setup make_multiplicative(double beta, double delta, int cells, double t_final,
                          operators::VelocityField velocity = default_velocity());

} // namespace spde::problems
