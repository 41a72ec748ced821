#pragma once

#include <functional>
#include <vector>

#include "spde/core.hpp"
#include "spde/noise.hpp"
#include "spde/operators.hpp"

namespace spde::scheme {

/// Pointwise scalar map f(t, u).
using ScalarMap = std::function<double(double, double)>;

/// Drift F(t, u) applied nodewise.
struct Drift {
    enum class Kind { Zero, LinearReaction, Saturating, User };
    Kind kind = Kind::Zero;
    ScalarMap f;

    double operator()(double t, double u) const { return kind == Kind::Zero ? 0.0 : f(t, u); }
    bool is_zero() const { return kind == Kind::Zero; }

    static Drift zero() { return {}; }
    /// F(t, u) = k(t) u.
    static Drift linear_reaction(TimeFunction k);
    /// F(t, u) = -exp(-t) u / (1 + |u|).
    static Drift saturating();
    static Drift user(ScalarMap f) { return {Kind::User, std::move(f)}; }
};

/// Diffusion B: additive (identity) or multiplicative Nemytskii b(u), default b(u) = u.
struct Diffusion {
    enum class Kind { Additive, Multiplicative };
    Kind kind = Kind::Additive;
    std::function<double(double)> b;

    static Diffusion additive() { return {}; }
    static Diffusion multiplicative(std::function<double(double)> b = {})
    {
        return {Kind::Multiplicative, std::move(b)};
    }
};

struct SchemeConfig {
    double t_final = 1.0;
    int steps = 1;
    Drift drift;
    Diffusion diffusion;
    /// Initial data X_0, projected onto the family. Empty means X_0 = 0.
    PointFunction initial;

    double dt() const { return t_final / steps; }
    void validate() const;
};

/// (F(t, v))(x) = f(t, v(x)). Fem: nodewise, Dirichlet nodes left as they are.
/// Spectral: evaluated on the transform grid and mapped back.
GridFunction apply_nemytskii(const operators::OperatorFamily& fam, const ScalarMap& f, double t,
                             const GridFunction& v);

/// One linear implicit Euler step from t_m = m dt:
/// X_{m+1} = S [X_m + dt F(t_m, X_m) + B(X_m) dW_m], S = (I + dt A(t_m))^{-1}.
GridFunction step(const operators::OperatorFamily& fam, const GridFunction& state, int m, double dt,
                  const SchemeConfig& config, const GridFunction& noise_field);

/// Right-hand side of step() before the resolvent solve.
GridFunction step_rhs(const operators::OperatorFamily& fam, const GridFunction& state, int m,
                      double dt, const SchemeConfig& config, const GridFunction* noise_field);

enum class Record { FinalOnly, AllSteps };

struct Trajectory {
    std::vector<double> times;
    std::vector<GridFunction> states;

    const GridFunction& final_state() const { return states.back(); }
};

/// Projected initial data; Dirichlet nodes carry the prescribed values.
GridFunction initial_state(const operators::OperatorFamily& fam, const SchemeConfig& config);

/// Iterated step() driven by `path`.
Trajectory integrate(const operators::OperatorFamily& fam, const SchemeConfig& config,
                     const noise::NoiseSpec& spec, const noise::NoisePath& path, Record record);

/// Noise-free run.
Trajectory integrate(const operators::OperatorFamily& fam, const SchemeConfig& config,
                     Record record);

} // namespace spde::scheme
