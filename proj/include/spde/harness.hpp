#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spde/core.hpp"
#include "spde/problems.hpp"

namespace spde::harness {

struct ExperimentConfig {
    problems::Problem problem = problems::Problem::AdditiveLinear;
    double beta = 1.0;
    double delta = 0.001;
    /// Spectral modes (additive) or Fem cells (multiplicative) per direction.
    int resolution = 64;
    double t_final = 1.0;
    /// Ladder dt = t_final * 2^-p for each p, coarse to fine.
    std::vector<int> ladder_powers{4, 5, 6, 7, 8, 9};
    /// Reference step t_final * 2^-fine_power.
    int fine_power = 12;
    int samples = 100;
    std::uint64_t seed = 0;
    /// Multiplies every Brownian increment; 0 gives a deterministic run.
    double noise_amplitude = 1.0;
    /// Multiplicative problem: also measure against the reference at twice the fine step.
    bool self_consistency_gate = true;
    int jobs = 1;

    Backend backend() const;
    int fine_steps() const { return 1 << fine_power; }
    void validate() const;
};

struct LevelError {
    double dt = 0.0;
    int steps = 0;
    double rms_error = 0.0;
    /// Standard error of the mean squared error, mapped to the RMS scale.
    double standard_error = 0.0;
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// Root-mean-square residual of the log-log fit.
    double residual = 0.0;
    int points = 0;
    std::vector<std::string> warnings;
};

struct ErrorReport {
    ExperimentConfig config;
    std::vector<LevelError> levels;
    RateFit fit;
    std::vector<std::uint64_t> sample_seeds;
    /// Coarsest-level error measured against the half-resolution reference, if computed.
    std::optional<double> coarse_error_half_reference;
    /// |e(ref 2^-fine) - e(ref 2^-(fine-1))| / e(ref 2^-fine) at the coarsest level.
    std::optional<double> reference_change;
    std::vector<std::string> diagnostics;
};

/// One ladder point for fit_rate.
struct RatePoint {
    double dt;
    double error;
};

RateFit fit_rate(std::vector<RatePoint> points);
RateFit fit_rate(const ErrorReport& report);

ErrorReport run_strong_error(const ExperimentConfig& config);

enum class Format { Csv, Json };

/// `{problem}_{beta}_{samples}.{ext}`.
std::string output_name(const ExperimentConfig& config, Format format);

std::string to_csv(const ErrorReport& report);
std::string to_json(const ErrorReport& report);
ErrorReport report_from_json(const std::string& text);

/// Writes the report; IO failures are raised with the OS message.
void emit(const ErrorReport& report, Format format, const std::string& path);

inline constexpr int kSchemaVersion = 1;

} // namespace spde::harness
