#include "spde/reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "spde/parallel.hpp"
#include "spde/problems.hpp"
#include "spde/quadrature.hpp"
#include "spde/random.hpp"

namespace spde::reference {

using operators::OperatorFamily;

OuMode builtin_mode(double lambda, double q)
{
    return {lambda, q, problems::additive_diffusion(), TimeCoefficient::constant(1.0)};
}

std::vector<OuStepMoments> ou_step_moments(const std::vector<double>& lambdas,
                                           const TimeCoefficient& diffusion,
                                           const TimeCoefficient& reaction, double t0, double t1)
{
    if (!(t1 > t0))
        throw ConfigError("ou_step_moments needs t0 < t1");
    const double h = t1 - t0;
    double lambda_max = 0.0;
    for (double l : lambdas)
        lambda_max = std::max(lambda_max, std::abs(l));
    double b_max = 0.0;
    for (double s : {t0, 0.5 * (t0 + t1), t1})
        b_max = std::max(b_max, std::abs(diffusion(s)) * lambda_max + std::abs(reaction(s)));
    constexpr int order = 16;
    const int panels = std::max(1, static_cast<int>(std::ceil(2.0 * b_max * h / 8.0 * 1.25)));

    std::vector<double> weights, d_int, k_int;
    for (int p = 0; p < panels; ++p) {
        const auto rule =
            quad::gauss_legendre(order, t0 + h * p / panels, t0 + h * (p + 1) / panels);
        for (std::size_t r = 0; r < rule.nodes.size(); ++r) {
            weights.push_back(rule.weights[r]);
            d_int.push_back(diffusion.integrate(rule.nodes[r], t1));
            k_int.push_back(reaction.integrate(rule.nodes[r], t1));
        }
    }
    const double d_step = diffusion.integrate(t0, t1);
    const double k_step = reaction.integrate(t0, t1);

    std::vector<OuStepMoments> out(lambdas.size());
    std::vector<double> g(weights.size());
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        double kappa = 0.0, v = 0.0;
        for (std::size_t r = 0; r < weights.size(); ++r) {
            g[r] = std::exp(-(lambdas[l] * d_int[r] + k_int[r]));
            kappa += weights[r] * g[r];
            v += weights[r] * g[r] * g[r];
        }
        // Conditional variance v - kappa^2 / h, summed directly to avoid cancellation.
        const double mean = kappa / h;
        double resid = 0.0;
        for (std::size_t r = 0; r < weights.size(); ++r)
            resid += weights[r] * (g[r] - mean) * (g[r] - mean);
        out[l] = {std::exp(-(lambdas[l] * d_step + k_step)), v, kappa, resid};
    }
    return out;
}

OuStepMoments ou_step_moments(const OuMode& mode, double t0, double t1)
{
    auto mom = ou_step_moments({mode.lambda}, mode.diffusion, mode.reaction, t0, t1)[0];
    mom.step_variance *= mode.q;
    mom.brownian_covariance *= std::sqrt(mode.q);
    mom.residual_variance *= mode.q;
    return mom;
}

double ou_variance(const OuMode& mode, double t)
{
    if (t <= 0.0)
        return 0.0;
    return mode.q * quad::adaptive_simpson(
                        [&](double s) { return std::exp(-2.0 * mode.integral_b(s, t)); }, 0.0, t,
                        kOuTolerance);
}

OuCheck ou_check(const OuMode& mode, int i, int j, double t_final, int steps, int samples,
                 std::uint64_t seed)
{
    if (steps < 1 || samples < 2 || !(t_final > 0.0))
        throw ConfigError("ou_check needs steps >= 1, samples >= 2 and t_final > 0");
    if (i < 1 || j < 1)
        throw ConfigError("ou_check modes start at 1");
    const double dt = t_final / steps;
    std::vector<OuStepMoments> mom(static_cast<std::size_t>(steps));
    OuCheck out;
    for (int m = 0; m < steps; ++m) {
        mom[m] = ou_step_moments(mode, m * dt, (m + 1) * dt);
        out.chained_variance = mom[m].decay * mom[m].decay * out.chained_variance +
                               mom[m].step_variance;
    }
    out.direct_variance = ou_variance(mode, t_final);

    double sum2 = 0.0, sum4 = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto sample_seed = rng::derive_seed(seed, static_cast<std::uint64_t>(s));
        double x = 0.0;
        for (int m = 0; m < steps; ++m) {
            const auto [z0, z1] = rng::mode_normals(sample_seed, static_cast<std::uint32_t>(i),
                                                    static_cast<std::uint32_t>(j),
                                                    static_cast<std::uint32_t>(m));
            x = ou_update(x, mom[m], dt, std::sqrt(dt) * z0, z1);
        }
        sum2 += x * x;
        sum4 += x * x * x * x;
    }
    // Mean is known to be zero, so E[X^2] estimates the variance.
    out.empirical_variance = sum2 / samples;
    const double spread = sum4 / samples - out.empirical_variance * out.empirical_variance;
    out.standard_error = std::sqrt(std::max(0.0, spread) / samples);
    return out;
}

namespace {

// Unit-q OU modes of a spectral family grouped by Laplacian eigenvalue.
struct ModeTable {
    std::vector<double> lambdas;             // distinct eigenvalues
    std::vector<int> group;                  // operator index -> lambda slot
    std::vector<Eigen::Index> noise_target;  // noise index -> operator index
    Vector sqrt_q;                           // per operator index, 0 without noise
    TimeCoefficient reaction;
};

ModeTable make_table(const OperatorFamily& fam, const noise::NoiseSpec& spec)
{
    if (fam.backend() != Backend::Spectral)
        throw ConfigError("the exact OU reference needs a spectral family");
    const auto [n1, n2] = fam.resolution();
    const auto [k1, k2] = spec.modes;
    if (k1 >= n1 || k2 >= n2)
        throw ConfigError("noise modes exceed the spectral family's modes");

    ModeTable t;
    std::map<double, int> slot;
    t.group.resize(static_cast<std::size_t>(fam.size()));
    for (int j = 0; j < n2; ++j) {
        for (int i = 0; i < n1; ++i) {
            const double lambda = fam.laplace_eigenvalue(i, j);
            auto [it, inserted] = slot.emplace(lambda, static_cast<int>(t.lambdas.size()));
            if (inserted)
                t.lambdas.push_back(lambda);
            t.group[static_cast<std::size_t>(fam.mode_index(i, j))] = it->second;
        }
    }
    t.sqrt_q = Vector::Zero(fam.size());
    t.noise_target.resize(static_cast<std::size_t>(spec.num_modes()));
    for (int j = 1; j <= k2; ++j) {
        for (int i = 1; i <= k1; ++i) {
            const auto target = fam.mode_index(i, j);
            t.noise_target[static_cast<std::size_t>(spec.index(i, j))] = target;
            t.sqrt_q[target] = spec.sqrt_q[spec.index(i, j)];
        }
    }
    const auto& k = fam.coefficients().reaction;
    const double c0 = fam.garding_shift();
    t.reaction = {[k, c0](double s) { return k(s) + c0; },
                  [k, c0](double a, double c) { return k.integrate(a, c) + c0 * (c - a); }};
    return t;
}

// Per-operator-index coefficients of one fine step: x <- a x + g1 dB + g2 z.
struct StepCoefficients {
    Vector a, g1, g2;
};

StepCoefficients step_coefficients(const ModeTable& table, const OperatorFamily& fam, double t0,
                                   double dt)
{
    const auto unit =
        ou_step_moments(table.lambdas, fam.coefficients().theta, table.reaction, t0, t0 + dt);
    StepCoefficients c;
    const auto n = fam.size();
    c.a.resize(n);
    c.g1.resize(n);
    c.g2.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& u = unit[static_cast<std::size_t>(table.group[static_cast<std::size_t>(k)])];
        c.a[k] = u.decay;
        c.g1[k] = table.sqrt_q[k] * u.brownian_covariance / dt;
        c.g2[k] = table.sqrt_q[k] * std::sqrt(u.residual_variance);
    }
    return c;
}

void exact_update(const ModeTable& table, const StepCoefficients& c, const Vector& increments,
                  const Vector& residual, Vector& x)
{
    x = c.a.cwiseProduct(x);
    for (std::size_t q = 0; q < table.noise_target.size(); ++q) {
        const auto k = table.noise_target[q];
        const auto e = static_cast<Eigen::Index>(q);
        x[k] += c.g1[k] * increments[e] + c.g2[k] * residual[e];
    }
}

} // namespace

std::vector<GridFunction> ou_exact_path(const noise::NoiseSpec& spec, const OperatorFamily& fam,
                                        int steps, double dt, std::uint64_t master_seed,
                                        const GridFunction* initial)
{
    if (steps < 1 || !(dt > 0.0))
        throw ConfigError("ou_exact_path needs steps >= 1 and dt > 0");
    const ModeTable table = make_table(fam, spec);
    GridFunction x = initial ? *initial : GridFunction(Backend::Spectral, Vector::Zero(fam.size()));
    fam.require_member(x);
    std::vector<GridFunction> states{x};
    states.reserve(static_cast<std::size_t>(steps) + 1);
    Vector inc, res;
    for (int m = 0; m < steps; ++m) {
        const auto c = step_coefficients(table, fam, m * dt, dt);
        noise::draw_increments(master_seed, spec.modes, m, dt, inc, &res);
        exact_update(table, c, inc, res, x.values);
        states.push_back(x);
    }
    return states;
}

CoupledResult run_coupled(const CoupledSetup& setup, const std::vector<std::uint64_t>& seeds)
{
    if (!setup.family || !setup.noise)
        throw ConfigError("coupled run needs a family and a noise spec");
    if (setup.fine_steps < 1)
        throw ConfigError("fine step count must be >= 1");
    for (int steps : setup.level_steps)
        if (steps < 1 || setup.fine_steps % steps != 0)
            throw ConfigError("level with " + std::to_string(steps) +
                              " steps does not divide the fine grid of " +
                              std::to_string(setup.fine_steps) + " steps");
    if (seeds.empty())
        throw ConfigError("coupled run needs at least one sample");

    const OperatorFamily& fam = *setup.family;
    const noise::NoiseSpec& spec = *setup.noise;
    scheme::SchemeConfig config = setup.scheme;
    config.steps = setup.fine_steps;
    config.validate();
    const double fine_dt = config.dt();
    const int samples = static_cast<int>(seeds.size());
    const bool exact = setup.reference == ReferenceKind::OuExact;

    std::optional<ModeTable> table;
    if (exact)
        table = make_table(fam, spec);
    const noise::FieldSynthesizer synth(spec, fam);

    // Level list; FineScheme adds the fine level in front as the reference.
    std::vector<int> strides;
    if (!exact)
        strides.push_back(1);
    for (int steps : setup.level_steps)
        strides.push_back(setup.fine_steps / steps);
    const std::size_t nlev = strides.size();

    const GridFunction x0 = scheme::initial_state(fam, config);
    std::vector<GridFunction> ref_state(samples, x0);
    std::vector<std::vector<GridFunction>> state(nlev, std::vector<GridFunction>(samples, x0));
    const auto nq = spec.num_modes();
    std::vector<std::vector<Vector>> acc(nlev, std::vector<Vector>(samples, Vector::Zero(nq)));
    std::vector<Vector> inc(samples), res(samples);

    for (int m = 0; m < setup.fine_steps; ++m) {
        std::optional<StepCoefficients> coeff;
        if (exact)
            coeff = step_coefficients(*table, fam, m * fine_dt, fine_dt);

        parallel_for(samples, setup.jobs, [&](int s) {
            noise::draw_increments(seeds[s], spec.modes, m, fine_dt, inc[s], exact ? &res[s] : nullptr);
            if (setup.noise_amplitude != 1.0) {
                inc[s] *= setup.noise_amplitude;
                res[s] *= setup.noise_amplitude;
            }
            if (exact)
                exact_update(*table, *coeff, inc[s], res[s], ref_state[s].values);
            for (std::size_t l = 0; l < nlev; ++l)
                acc[l][s] += inc[s];
        });

        for (std::size_t l = 0; l < nlev; ++l) {
            const int stride = strides[l];
            if ((m + 1) % stride != 0)
                continue;
            const int k = (m + 1) / stride - 1;
            const double dt = fine_dt * stride;
            std::vector<GridFunction> rhs(samples);
            parallel_for(samples, setup.jobs, [&](int s) {
                try {
                    const GridFunction w = synth.field(acc[l][s]);
                    rhs[s] = scheme::step_rhs(fam, state[l][s], k, dt, config, &w);
                } catch (const NumericalError& e) {
                    throw NumericalError(std::string(e.what()) + " (sample seed " +
                                         std::to_string(seeds[s]) + ")");
                }
                acc[l][s].setZero();
            });
            operators::solve_resolvent_many(fam, k * dt, dt, rhs);
            state[l] = std::move(rhs);
        }
    }

    CoupledResult out;
    if (exact) {
        out.reference = std::move(ref_state);
        out.levels = std::move(state);
    } else {
        out.reference = std::move(state.front());
        out.levels.assign(std::make_move_iterator(state.begin() + 1),
                          std::make_move_iterator(state.end()));
    }
    return out;
}

CoupledResult coupled_exact_vs_scheme(const CoupledSetup& setup, std::uint64_t seed)
{
    return run_coupled(setup, {seed});
}

GridFunction fine_reference(const OperatorFamily& fam, const scheme::SchemeConfig& config,
                            const noise::NoiseSpec& spec, const noise::NoisePath& path)
{
    if (path.stride != 1)
        throw ConfigError("fine_reference needs the finest path, not a coarsened one");
    scheme::SchemeConfig c = config;
    c.steps = path.steps;
    return scheme::integrate(fam, c, spec, path, scheme::Record::FinalOnly).final_state();
}

} // namespace spde::reference
