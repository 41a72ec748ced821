#pragma once

#include <cstdint>
#include <vector>

#include "spde/core.hpp"
#include "spde/noise.hpp"
#include "spde/operators.hpp"
#include "spde/scheme.hpp"

namespace spde::reference {

/// One Ornstein-Uhlenbeck mode dX = -b(t) X dt + sqrt(q) dB, b(t) = D(t) lambda + k(t).
struct OuMode {
    double lambda = 0.0;
    double q = 1.0;
    TimeCoefficient diffusion = TimeCoefficient::constant(1.0);
    TimeCoefficient reaction = TimeCoefficient::constant(0.0);

    double b(double t) const { return diffusion(t) * lambda + reaction(t); }
    double integral_b(double a, double c) const
    {
        return lambda * diffusion.integrate(a, c) + reaction.integrate(a, c);
    }
};

/// Mode with the built-in coefficients D(t) = (1 + e^-t) / 10, k = 1.
OuMode builtin_mode(double lambda, double q);

struct OuStepMoments {
    double decay = 1.0;          // exp(-int_a^c b)
    double step_variance = 0.0;  // q int_a^c exp(-2 int_s^c b) ds
    /// Cov(stochastic convolution over the step, dB) = sqrt(q) int_a^c exp(-int_s^c b) ds.
    double brownian_covariance = 0.0;
    /// Variance of the convolution conditional on dB.
    double residual_variance = 0.0;
};

/// Quadrature tolerance of the whole-interval variance.
inline constexpr double kOuTolerance = 1e-12;

/// Step moments by composite 16-point Gauss-Legendre; panels are sized so that
/// 2 b h per panel stays below 8, which keeps the rule at round-off accuracy.
OuStepMoments ou_step_moments(const OuMode& mode, double t0, double t1);

/// Unit-q moments for many eigenvalues sharing D and k; the node integrals of D and k
/// are computed once.
std::vector<OuStepMoments> ou_step_moments(const std::vector<double>& lambdas,
                                           const TimeCoefficient& diffusion,
                                           const TimeCoefficient& reaction, double t0, double t1);

/// Var X(t) from X(0) = 0 over the whole interval in one quadrature.
double ou_variance(const OuMode& mode, double t);

/// Exact OU update of one mode driven by a Brownian increment and an independent residual normal.
inline double ou_update(double x, const OuStepMoments& mom, double dt, double increment,
                        double residual)
{
    return mom.decay * x + mom.brownian_covariance / dt * increment +
           std::sqrt(mom.residual_variance) * residual;
}

/// Exact per-mode recurrence on a spectral family for the additive problem, with
/// dB from the same stream sample_path uses and the residual normal paired with it.
/// states[m] holds the mode coefficients at t = m dt.
std::vector<GridFunction> ou_exact_path(const noise::NoiseSpec& spec,
                                        const operators::OperatorFamily& fam, int steps, double dt,
                                        std::uint64_t master_seed,
                                        const GridFunction* initial = nullptr);

struct OuCheck {
    double empirical_variance = 0.0;
    /// Standard error of the empirical variance.
    double standard_error = 0.0;
    /// Var X(T) chained through the per-step moments.
    double chained_variance = 0.0;
    /// Var X(T) from ou_variance.
    double direct_variance = 0.0;
};

/// Monte Carlo check of one mode: `samples` exact paths from X(0) = 0 over `steps` steps of
/// [0, t_final], sample s driven by mode_normals(derive_seed(seed, s), i, j, m).
OuCheck ou_check(const OuMode& mode, int i, int j, double t_final, int steps, int samples,
                 std::uint64_t seed);

enum class ReferenceKind { OuExact, FineScheme };

/// Shared setup for a coupled run.
struct CoupledSetup {
    const operators::OperatorFamily* family = nullptr;
    const noise::NoiseSpec* noise = nullptr;
    scheme::SchemeConfig scheme;  // steps ignored
    ReferenceKind reference = ReferenceKind::OuExact;
    int fine_steps = 1;
    /// Step counts of the scheme levels; each divides fine_steps.
    std::vector<int> level_steps;
    /// Scale applied to every Brownian increment (0 switches the noise off).
    double noise_amplitude = 1.0;
    /// Worker threads for per-sample work.
    int jobs = 1;
};

struct CoupledResult {
    /// reference[s]: reference final state of sample s.
    std::vector<GridFunction> reference;
    /// levels[l][s]: scheme final state at level l for sample s.
    std::vector<std::vector<GridFunction>> levels;
};

/// Advances all samples together over the fine grid. Every sample draws its fine path from
/// its own seed, coarse increments are summed from the fine ones in ascending order, and
/// each level takes a scheme step at its boundaries. FineScheme runs the scheme at the fine
/// step as the reference; OuExact applies ou_update with the fine increments.
CoupledResult run_coupled(const CoupledSetup& setup, const std::vector<std::uint64_t>& seeds);

/// Single-sample form of run_coupled.
CoupledResult coupled_exact_vs_scheme(const CoupledSetup& setup, std::uint64_t seed);

/// The scheme run at the finest step of `path`.
GridFunction fine_reference(const operators::OperatorFamily& fam,
                            const scheme::SchemeConfig& config, const noise::NoiseSpec& spec,
                            const noise::NoisePath& path);

} // namespace spde::reference
