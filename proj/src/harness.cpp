#include "spde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spde/format.hpp"
#include "spde/random.hpp"
#include "spde/reference.hpp"

namespace spde::harness {

using problems::Problem;

Backend ExperimentConfig::backend() const
{
    return problem == Problem::AdditiveLinear ? Backend::Spectral : Backend::Fem;
}

void ExperimentConfig::validate() const
{
    if (!(beta > 0.0))
        throw ConfigError("beta must be positive, got " + format_double(beta));
    if (!(delta > 0.0))
        throw ConfigError("delta must be positive, got " + format_double(delta));
    if (!(t_final > 0.0))
        throw ConfigError("t_final must be positive, got " + format_double(t_final));
    if (samples < 1)
        throw ConfigError("samples must be >= 1, got " + std::to_string(samples));
    if (fine_power < 0 || fine_power > 20)
        throw ConfigError("fine power must lie in [0, 20], got " + std::to_string(fine_power));
    if (problem == Problem::AdditiveLinear && resolution < 2)
        throw ConfigError("additive problem needs at least 2 modes per direction");
    if (problem == Problem::MultiplicativeAdvection && resolution < 2)
        throw ConfigError("multiplicative problem needs at least 2 cells per direction");
    if (!std::isfinite(noise_amplitude))
        throw ConfigError("noise amplitude must be finite");
    for (std::size_t k = 0; k < ladder_powers.size(); ++k) {
        const int p = ladder_powers[k];
        if (p < 0 || p > fine_power)
            throw ConfigError("ladder power " + std::to_string(p) +
                              " does not divide into the fine step 2^-" +
                              std::to_string(fine_power));
        if (k > 0 && p <= ladder_powers[k - 1])
            throw ConfigError("ladder powers must be strictly increasing (descending dt)");
    }
}

RateFit fit_rate(std::vector<RatePoint> points)
{
    RateFit fit;
    // Sorting makes the fit independent of the input order.
    std::sort(points.begin(), points.end(), [](const RatePoint& a, const RatePoint& b) {
        return a.dt != b.dt ? a.dt < b.dt : a.error < b.error;
    });
    std::vector<double> x, y;
    for (const auto& p : points) {
        if (!(p.error > 0.0) || !(p.dt > 0.0) || !std::isfinite(p.error)) {
            fit.warnings.push_back("excluded ladder point dt=" + format_double(p.dt) +
                                   " with error " + format_double(p.error));
            continue;
        }
        x.push_back(std::log(p.dt));
        y.push_back(std::log(p.error));
    }
    fit.points = static_cast<int>(x.size());
    if (x.size() < 2)
        throw ConfigError("rate fit needs at least 2 ladder points with positive error, got " +
                          std::to_string(x.size()));
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (!(sxx > 0.0))
        throw ConfigError("rate fit needs at least 2 distinct dt values");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = y[k] - (fit.intercept + fit.slope * x[k]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

RateFit fit_rate(const ErrorReport& report)
{
    std::vector<RatePoint> points;
    for (const auto& l : report.levels)
        points.push_back({l.dt, l.rms_error});
    return fit_rate(points);
}

namespace {

struct ErrorStats {
    double rms;
    double standard_error;
};

ErrorStats error_stats(const operators::OperatorFamily& fam, const std::vector<GridFunction>& ref,
                       const std::vector<GridFunction>& approx)
{
    const std::size_t n = ref.size();
    std::vector<double> sq(n);
    double sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double e = operators::l2_norm(fam, ref[s] - approx[s]);
        sq[s] = e * e;
        sum += sq[s];
    }
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (double v : sq)
        var += (v - mean) * (v - mean);
    const double rms = std::sqrt(mean);
    double se = 0.0;
    if (n > 1 && rms > 0.0)
        se = std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) / (2.0 * rms);
    return {rms, se};
}

} // namespace

ErrorReport run_strong_error(const ExperimentConfig& config)
{
    config.validate();
    ErrorReport report;
    report.config = config;

    problems::Setup setup = config.problem == Problem::AdditiveLinear
                                ? problems::make_additive(config.beta, config.delta,
                                                          config.resolution, config.t_final)
                                : problems::make_multiplicative(config.beta, config.delta,
                                                                config.resolution, config.t_final);

    reference::CoupledSetup coupled;
    coupled.family = setup.family.get();
    coupled.noise = &setup.noise;
    coupled.scheme = setup.scheme;
    coupled.reference = config.problem == Problem::AdditiveLinear
                            ? reference::ReferenceKind::OuExact
                            : reference::ReferenceKind::FineScheme;
    coupled.fine_steps = config.fine_steps();
    coupled.noise_amplitude = config.noise_amplitude;
    coupled.jobs = config.jobs;
    for (int p : config.ladder_powers)
        coupled.level_steps.push_back(1 << p);
    const bool gate = config.problem == Problem::MultiplicativeAdvection &&
                      config.self_consistency_gate && config.fine_power >= 1 &&
                      !config.ladder_powers.empty();
    if (gate)
        coupled.level_steps.push_back(config.fine_steps() / 2);

    report.sample_seeds.resize(config.samples);
    for (int s = 0; s < config.samples; ++s)
        report.sample_seeds[s] = rng::derive_seed(config.seed, static_cast<std::uint64_t>(s));

    const auto result = reference::run_coupled(coupled, report.sample_seeds);
    const auto& fam = *setup.family;
    for (std::size_t l = 0; l < config.ladder_powers.size(); ++l) {
        const auto stats = error_stats(fam, result.reference, result.levels[l]);
        const int steps = coupled.level_steps[l];
        report.levels.push_back({config.t_final / steps, steps, stats.rms, stats.standard_error});
    }
    if (gate) {
        const auto half = error_stats(fam, result.levels.back(), result.levels.front());
        report.coarse_error_half_reference = half.rms;
        const double e = report.levels.front().rms_error;
        report.reference_change = e > 0.0 ? std::abs(e - half.rms) / e
                                          : std::numeric_limits<double>::quiet_NaN();
    }

    for (std::size_t l = 1; l < report.levels.size(); ++l) {
        if (!(report.levels[l].rms_error < report.levels[l - 1].rms_error))
            report.diagnostics.push_back("non-monotone refinement between dt=" +
                                         format_double(report.levels[l - 1].dt) + " and dt=" +
                                         format_double(report.levels[l].dt));
    }
    try {
        report.fit = fit_rate(report);
    } catch (const ConfigError& e) {
        report.fit.slope = std::numeric_limits<double>::quiet_NaN();
        report.fit.intercept = std::numeric_limits<double>::quiet_NaN();
        report.fit.residual = std::numeric_limits<double>::quiet_NaN();
        report.diagnostics.push_back(e.what());
    }
    return report;
}

} // namespace spde::harness
