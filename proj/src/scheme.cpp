#include "spde/scheme.hpp"

#include <cmath>
#include <string>

#include "spde/format.hpp"

namespace spde::scheme {

using operators::OperatorFamily;

Drift Drift::linear_reaction(TimeFunction k)
{
    return {Kind::LinearReaction, [k = std::move(k)](double t, double u) { return k(t) * u; }};
}

Drift Drift::saturating()
{
    return {Kind::Saturating,
            [](double t, double u) { return -std::exp(-t) * u / (1.0 + std::abs(u)); }};
}

void SchemeConfig::validate() const
{
    if (!(t_final > 0.0))
        throw ConfigError("final time must be positive, got " + format_double(t_final));
    if (steps < 1)
        throw ConfigError("step count must be >= 1, got " + std::to_string(steps));
    if (drift.kind != Drift::Kind::Zero && !drift.f)
        throw ConfigError("drift function is empty");
}

namespace {

void check_finite(const Vector& v, const char* what)
{
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (!std::isfinite(v[k]))
            throw NumericalError(std::string(what) + " is not finite at node " + std::to_string(k));
}

// Pointwise product b(u) * w on the nodes (Fem) or the transform grid (Spectral).
GridFunction multiplicative_term(const OperatorFamily& fam, const std::function<double(double)>& b,
                                 const GridFunction& state, const GridFunction& noise_field)
{
    if (fam.backend() == Backend::Fem) {
        Vector out(state.size());
        for (Eigen::Index k = 0; k < state.size(); ++k)
            out[k] = (b ? b(state.values[k]) : state.values[k]) * noise_field.values[k];
        for (int d : fam.fem().dirichlet_dofs)
            out[d] = 0.0;
        return {Backend::Fem, std::move(out)};
    }
    Matrix u = operators::spectral_to_grid(fam, state);
    const Matrix w = operators::spectral_to_grid(fam, noise_field);
    if (b)
        u = u.unaryExpr(b);
    return operators::grid_to_spectral(fam, u.cwiseProduct(w));
}

} // namespace

GridFunction apply_nemytskii(const OperatorFamily& fam, const ScalarMap& f, double t,
                             const GridFunction& v)
{
    fam.require_member(v);
    if (fam.backend() == Backend::Fem) {
        const auto& fem = fam.fem();
        GridFunction out = v;
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            if (fem.is_dirichlet(static_cast<int>(k)))
                continue;
            out.values[k] = f(t, v.values[k]);
            if (!std::isfinite(out.values[k]))
                throw NumericalError("Nemytskii map is not finite at node " + std::to_string(k));
        }
        return out;
    }
    Matrix grid = operators::spectral_to_grid(fam, v);
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
        for (Eigen::Index r = 0; r < grid.rows(); ++r) {
            grid(r, c) = f(t, grid(r, c));
            if (!std::isfinite(grid(r, c)))
                throw NumericalError("Nemytskii map is not finite at grid node " +
                                     std::to_string(r + grid.rows() * c));
        }
    }
    return operators::grid_to_spectral(fam, grid);
}

GridFunction step_rhs(const OperatorFamily& fam, const GridFunction& state, int m, double dt,
                      const SchemeConfig& config, const GridFunction* noise_field)
{
    fam.require_member(state);
    const double t = m * dt;
    GridFunction rhs = state;
    if (!config.drift.is_zero()) {
        GridFunction f = apply_nemytskii(fam, config.drift.f, t, state);
        if (fam.backend() == Backend::Fem)
            for (int d : fam.fem().dirichlet_dofs)
                f.values[d] = 0.0;
        rhs.values += dt * f.values;
    }
    if (noise_field) {
        fam.require_member(*noise_field);
        if (config.diffusion.kind == Diffusion::Kind::Additive)
            rhs += *noise_field;
        else
            rhs += multiplicative_term(fam, config.diffusion.b, state, *noise_field);
    }
    check_finite(rhs.values, "step right-hand side");
    return rhs;
}

GridFunction step(const OperatorFamily& fam, const GridFunction& state, int m, double dt,
                  const SchemeConfig& config, const GridFunction& noise_field)
{
    return operators::solve_resolvent(fam, m * dt, dt,
                                      step_rhs(fam, state, m, dt, config, &noise_field));
}

GridFunction initial_state(const OperatorFamily& fam, const SchemeConfig& config)
{
    if (config.initial)
        return operators::project(fam, config.initial);
    Vector zero = Vector::Zero(fam.size());
    if (fam.backend() == Backend::Fem) {
        const auto& fem = fam.fem();
        for (std::size_t k = 0; k < fem.dirichlet_dofs.size(); ++k)
            zero[fem.dirichlet_dofs[k]] = fem.dirichlet_values[static_cast<Eigen::Index>(k)];
    }
    return {fam.backend(), std::move(zero)};
}

namespace {

Trajectory run(const OperatorFamily& fam, const SchemeConfig& config,
               const noise::NoiseSpec* spec, const noise::NoisePath* path, Record record)
{
    config.validate();
    const double dt = config.dt();
    if (path) {
        if (path->steps != config.steps)
            throw ConfigError("noise path has " + std::to_string(path->steps) +
                              " steps, scheme expects " + std::to_string(config.steps));
        if (std::abs(path->dt - dt) > 1e-12 * dt)
            throw ConfigError("noise path step " + format_double(path->dt) +
                              " does not match scheme step " + format_double(dt));
    }
    std::optional<noise::FieldSynthesizer> synth;
    if (spec)
        synth.emplace(*spec, fam);

    Trajectory traj;
    GridFunction x = initial_state(fam, config);
    if (record == Record::AllSteps) {
        traj.times.push_back(0.0);
        traj.states.push_back(x);
    }
    for (int m = 0; m < config.steps; ++m) {
        if (synth) {
            const GridFunction w = synth->field(path->increments[m]);
            x = step(fam, x, m, dt, config, w);
        } else {
            x = operators::solve_resolvent(fam, m * dt, dt, step_rhs(fam, x, m, dt, config, nullptr));
        }
        if (record == Record::AllSteps) {
            traj.times.push_back((m + 1) * dt);
            traj.states.push_back(x);
        }
    }
    if (record == Record::FinalOnly) {
        traj.times.push_back(config.steps * dt);
        traj.states.push_back(std::move(x));
    }
    return traj;
}

} // namespace

Trajectory integrate(const OperatorFamily& fam, const SchemeConfig& config,
                     const noise::NoiseSpec& spec, const noise::NoisePath& path, Record record)
{
    return run(fam, config, &spec, &path, record);
}

Trajectory integrate(const OperatorFamily& fam, const SchemeConfig& config, Record record)
{
    return run(fam, config, nullptr, nullptr, record);
}

} // namespace spde::scheme
