#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "spde/format.hpp"
#include "spde/harness.hpp"

namespace spde::harness {

using nlohmann::json;

namespace {

json number(double x)
{
    if (std::isfinite(x))
        return x;
    return nullptr;
}

double number_from(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace

std::string output_name(const ExperimentConfig& config, Format format)
{
    return std::string(problems::to_string(config.problem)) + "_" + format_double(config.beta) +
           "_" + std::to_string(config.samples) + (format == Format::Csv ? ".csv" : ".json");
}

std::string to_csv(const ErrorReport& report)
{
    std::ostringstream out;
    out << "dt,rms_error,samples,beta,problem\n";
    for (const auto& l : report.levels)
        out << format_double(l.dt) << ',' << format_double(l.rms_error) << ','
            << report.config.samples << ',' << format_double(report.config.beta) << ','
            << problems::to_string(report.config.problem) << '\n';
    return out.str();
}

std::string to_json(const ErrorReport& report)
{
    const auto& c = report.config;
    json j;
    j["schema_version"] = kSchemaVersion;
    j["config"] = {{"problem", std::string(problems::to_string(c.problem))},
                   {"backend", std::string(to_string(c.backend()))},
                   {"beta", c.beta},
                   {"delta", c.delta},
                   {"resolution", c.resolution},
                   {"t_final", c.t_final},
                   {"ladder_powers", c.ladder_powers},
                   {"fine_power", c.fine_power},
                   {"samples", c.samples},
                   {"seed", c.seed},
                   {"noise_amplitude", c.noise_amplitude},
                   {"self_consistency_gate", c.self_consistency_gate}};
    json levels = json::array();
    for (const auto& l : report.levels)
        levels.push_back({{"dt", l.dt},
                          {"steps", l.steps},
                          {"rms_error", number(l.rms_error)},
                          {"standard_error", number(l.standard_error)}});
    j["levels"] = std::move(levels);
    j["fit"] = {{"slope", number(report.fit.slope)},
                {"intercept", number(report.fit.intercept)},
                {"residual", number(report.fit.residual)},
                {"points", report.fit.points},
                {"warnings", report.fit.warnings}};
    j["sample_seeds"] = report.sample_seeds;
    j["coarse_error_half_reference"] = report.coarse_error_half_reference
                                           ? number(*report.coarse_error_half_reference)
                                           : json(nullptr);
    j["reference_change"] =
        report.reference_change ? number(*report.reference_change) : json(nullptr);
    j["diagnostics"] = report.diagnostics;
    return j.dump(2) + "\n";
}

ErrorReport report_from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("report JSON does not parse: ") + e.what());
    }
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion)
            throw ConfigError("unsupported report schema_version");
        ErrorReport r;
        const auto& c = j.at("config");
        r.config.problem = problems::parse_problem(c.at("problem").get<std::string>());
        r.config.beta = c.at("beta").get<double>();
        r.config.delta = c.at("delta").get<double>();
        r.config.resolution = c.at("resolution").get<int>();
        r.config.t_final = c.at("t_final").get<double>();
        r.config.ladder_powers = c.at("ladder_powers").get<std::vector<int>>();
        r.config.fine_power = c.at("fine_power").get<int>();
        r.config.samples = c.at("samples").get<int>();
        r.config.seed = c.at("seed").get<std::uint64_t>();
        r.config.noise_amplitude = c.at("noise_amplitude").get<double>();
        r.config.self_consistency_gate = c.at("self_consistency_gate").get<bool>();
        for (const auto& l : j.at("levels"))
            r.levels.push_back({l.at("dt").get<double>(), l.at("steps").get<int>(),
                                number_from(l.at("rms_error")),
                                number_from(l.at("standard_error"))});
        const auto& f = j.at("fit");
        r.fit.slope = number_from(f.at("slope"));
        r.fit.intercept = number_from(f.at("intercept"));
        r.fit.residual = number_from(f.at("residual"));
        r.fit.points = f.at("points").get<int>();
        r.fit.warnings = f.at("warnings").get<std::vector<std::string>>();
        r.sample_seeds = j.at("sample_seeds").get<std::vector<std::uint64_t>>();
        if (!j.at("coarse_error_half_reference").is_null())
            r.coarse_error_half_reference = j.at("coarse_error_half_reference").get<double>();
        if (!j.at("reference_change").is_null())
            r.reference_change = j.at("reference_change").get<double>();
        r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report JSON is missing or mistyped: ") + e.what());
    }
}

void emit(const ErrorReport& report, Format format, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing: " + std::strerror(errno));
    out << (format == Format::Csv ? to_csv(report) : to_json(report));
    out.flush();
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed: " + std::strerror(errno));
}

} // namespace spde::harness
