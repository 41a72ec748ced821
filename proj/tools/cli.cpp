#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "spde/errors.hpp"
#include "spde/format.hpp"
#include "spde/harness.hpp"
#include "spde/lemma_lab.hpp"
#include "spde/parallel.hpp"
#include "spde/reference.hpp"

namespace spde::cli {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

std::uint64_t parse_seed(const std::string& text, const std::string& origin)
{
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &used, 10);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-')
        throw ConfigError(origin + " must be a non-negative integer, got '" + text + "'");
    return v;
}

/// --seed, else SPDE_SEED, else 0.
std::uint64_t resolve_seed(const std::optional<std::string>& flag)
{
    if (flag)
        return parse_seed(*flag, "--seed");
    if (const char* env = std::getenv("SPDE_SEED"); env && *env)
        return parse_seed(env, "SPDE_SEED");
    return 0;
}

void require_directory(const std::string& dir)
{
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("output directory '" + dir + "' does not exist");
}

void require_parent(const std::string& file)
{
    const auto parent = std::filesystem::path(file).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
        throw ConfigError("output directory '" + parent.string() + "' does not exist");
}

// Prepends config-file settings as flags, skipping keys the command line already sets.
std::vector<std::string> merge_config(CLI::App& sub, const std::vector<std::string>& args)
{
    std::vector<std::string> user;
    std::optional<std::string> path;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config") {
            if (k + 1 >= args.size())
                throw ConfigError("--config needs a path");
            path = args[++k];
        } else if (args[k].rfind("--config=", 0) == 0) {
            path = args[k].substr(9);
        } else {
            user.push_back(args[k]);
        }
    }
    if (!path)
        return user;

    std::set<std::string> given;
    for (const auto& a : user) {
        if (a.rfind("--", 0) == 0)
            given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos
                                                                       : a.find('=') - 2));
    }
    std::vector<std::string> merged;
    for (const auto& [key, value] : parse_config_text(read_file(*path))) {
        if (key == "config" || key == "help" || !sub.get_option_no_throw("--" + key))
            throw ConfigError("unknown config key '" + key + "' for " + sub.get_name());
        if (given.count(key))
            continue;
        merged.push_back("--" + key);
        merged.push_back(value);
    }
    merged.insert(merged.end(), user.begin(), user.end());
    return merged;
}

struct ConvergenceOptions {
    harness::ExperimentConfig config;
    std::optional<std::string> seed;
    std::string out_dir = ".";
};

void add_convergence_options(CLI::App& sub, ConvergenceOptions& o, const char* resolution_flag,
                             const char* resolution_help)
{
    sub.add_option("--beta", o.config.beta, "Noise regularity beta")->required();
    sub.add_option("--delta", o.config.delta, "Spectrum offset delta")->capture_default_str();
    sub.add_option("--samples", o.config.samples, "Monte Carlo samples")->capture_default_str();
    sub.add_option("--seed", o.seed, "Master seed (falls back to SPDE_SEED, then 0)");
    sub.add_option(resolution_flag, o.config.resolution, resolution_help)->capture_default_str();
    sub.add_option("--t-final", o.config.t_final, "Final time")->capture_default_str();
    sub.add_option("--ladder", o.config.ladder_powers, "Ladder powers p, dt = T 2^-p")
        ->delimiter(',')
        ->capture_default_str();
    sub.add_option("--fine-power", o.config.fine_power, "Reference step T 2^-p")
        ->capture_default_str();
    sub.add_option("--noise-amplitude", o.config.noise_amplitude, "Scale of every increment")
        ->capture_default_str();
    sub.add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    sub.add_option("--jobs", o.config.jobs, "Worker threads")->capture_default_str();
}

int run_convergence(ConvergenceOptions& o, std::ostream& out)
{
    o.config.seed = resolve_seed(o.seed);
    o.config.validate();
    require_directory(o.out_dir);

    const auto report = harness::run_strong_error(o.config);
    const auto dir = std::filesystem::path(o.out_dir);
    const auto csv = (dir / harness::output_name(o.config, harness::Format::Csv)).string();
    const auto json = (dir / harness::output_name(o.config, harness::Format::Json)).string();
    harness::emit(report, harness::Format::Csv, csv);
    harness::emit(report, harness::Format::Json, json);

    out << "dt,rms_error,standard_error\n";
    for (const auto& l : report.levels)
        out << format_double(l.dt) << ',' << format_double(l.rms_error) << ','
            << format_double(l.standard_error) << '\n';
    out << "fitted rate " << format_double(report.fit.slope) << " (log-log residual "
        << format_double(report.fit.residual) << ", " << report.fit.points << " points)\n";
    if (report.reference_change)
        out << "reference change at coarsest level " << format_double(*report.reference_change)
            << '\n';
    for (const auto& w : report.fit.warnings)
        out << "warning: " << w << '\n';
    for (const auto& d : report.diagnostics)
        out << "note: " << d << '\n';
    out << "wrote " << csv << "\nwrote " << json << '\n';
    return kExitOk;
}

struct LemmaOptions {
    std::string which = "all";
    int dim = 8;
    double advection = 5.0;
    std::string out;
};

int run_lemma(const LemmaOptions& o, std::ostream& out)
{
    if (o.dim < 1)
        throw ConfigError("--dim must be >= 1");
    if (o.advection < 0.0)
        throw ConfigError("--advection must be >= 0");
    if (!o.out.empty())
        require_parent(o.out);

    const auto results = lemma::run_sweeps(o.which, o.dim, o.advection);
    out << "lemma,parameters,min,max,ratio\n";
    for (const auto& r : results) {
        const auto [lo, hi] = std::minmax_element(r.values.begin(), r.values.end());
        out << r.lemma << ',' << r.parameters << ',' << format_double(*lo) << ','
            << format_double(*hi) << ',' << format_double(r.ratio()) << '\n';
    }
    if (o.which == "9" || o.which == "all")
        out << "convolution a1=a2=1/2 at m=256: " << format_double(lemma::convolution_limit_ratio(256))
            << " (pi = " << format_double(std::numbers::pi) << ")\n";
    if (!o.out.empty()) {
        std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
        file << lemma::sweep_csv(results);
        if (!file)
            throw std::runtime_error("write to '" + o.out + "' failed");
        out << "wrote " << o.out << '\n';
    }
    return kExitOk;
}

struct OuOptions {
    int mode_i = 1;
    int mode_j = 1;
    int samples = 10000;
    int steps = 64;
    double beta = 1.0;
    double delta = 0.001;
    double t_final = 1.0;
    std::optional<std::string> seed;
    std::string out;
};

int run_ou(const OuOptions& o, std::ostream& out)
{
    if (o.mode_i < 1 || o.mode_j < 1)
        throw ConfigError("--mode-i and --mode-j must be >= 1");
    if (o.samples < 2 || o.steps < 1 || !(o.t_final > 0.0))
        throw ConfigError("ou-check needs --samples >= 2, --steps >= 1 and --t-final > 0");
    if (!o.out.empty())
        require_parent(o.out);
    const auto seed = resolve_seed(o.seed);

    const auto spec = noise::make_noise_spec(o.beta, o.delta, {o.mode_i, o.mode_j}, Rectangle{});
    const double lambda = std::numbers::pi * std::numbers::pi *
                          (double(o.mode_i) * o.mode_i + double(o.mode_j) * o.mode_j);
    const auto mode = reference::builtin_mode(lambda, spec.q_at(o.mode_i, o.mode_j));
    const auto c = reference::ou_check(mode, o.mode_i, o.mode_j, o.t_final, o.steps, o.samples, seed);

    std::ostringstream table;
    table << "mode_i,mode_j,lambda,q,samples,empirical_variance,standard_error,chained_variance,"
             "direct_variance\n"
          << o.mode_i << ',' << o.mode_j << ',' << format_double(lambda) << ','
          << format_double(mode.q) << ',' << o.samples << ',' << format_double(c.empirical_variance)
          << ',' << format_double(c.standard_error) << ',' << format_double(c.chained_variance)
          << ',' << format_double(c.direct_variance) << '\n';
    out << table.str();
    out << "chained vs direct relative difference "
        << format_double(std::abs(c.chained_variance - c.direct_variance) / c.direct_variance)
        << "\nempirical vs direct in standard errors "
        << format_double((c.empirical_variance - c.direct_variance) / c.standard_error) << '\n';
    if (!o.out.empty()) {
        std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
        file << table.str();
        if (!file)
            throw std::runtime_error("write to '" + o.out + "' failed");
        out << "wrote " << o.out << '\n';
    }
    return kExitOk;
}

} // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(number) + " has no '='");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(number) + " has an empty key or value");
        std::replace(key.begin(), key.end(), '_', '-');
        if (!kv.emplace(key, value).second)
            throw ConfigError("config key '" + key + "' appears twice");
    }
    return kv;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Implicit Euler / finite element SPDE solver and verification suite"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    ConvergenceOptions additive;
    additive.config.problem = problems::Problem::AdditiveLinear;
    additive.config.jobs = default_jobs();
    auto* add = app.add_subcommand("additive-convergence",
                                   "Strong error of the additive problem against the exact OU reference");
    add_convergence_options(*add, additive, "--modes", "Spectral modes per direction");

    ConvergenceOptions multiplicative;
    multiplicative.config.problem = problems::Problem::MultiplicativeAdvection;
    multiplicative.config.jobs = default_jobs();
    auto* mul = app.add_subcommand("multiplicative-convergence",
                                   "Strong error of the multiplicative advection problem (FEM)");
    add_convergence_options(*mul, multiplicative, "--cells", "FEM cells per direction");
    mul->add_option("--gate", multiplicative.config.self_consistency_gate,
                    "Also measure against the half-resolution reference")
        ->capture_default_str();

    LemmaOptions lemma_opts;
    auto* lab = app.add_subcommand("lemma-lab", "Dense-matrix sweeps of the discrete estimates");
    lab->add_option("--lemma", lemma_opts.which, "6, 7, 8, 9, 10 or all")
        ->check(CLI::IsMember({"6", "7", "8", "9", "10", "all"}))
        ->capture_default_str();
    lab->add_option("--dim", lemma_opts.dim, "Family dimension")->capture_default_str();
    lab->add_option("--advection", lemma_opts.advection, "Advection strength nu")
        ->capture_default_str();
    lab->add_option("--out", lemma_opts.out, "Sweep table CSV");

    OuOptions ou_opts;
    auto* ou = app.add_subcommand("ou-check", "Monte Carlo check of one exact OU mode");
    ou->add_option("--mode-i", ou_opts.mode_i)->capture_default_str();
    ou->add_option("--mode-j", ou_opts.mode_j)->capture_default_str();
    ou->add_option("--samples", ou_opts.samples)->capture_default_str();
    ou->add_option("--steps", ou_opts.steps)->capture_default_str();
    ou->add_option("--beta", ou_opts.beta)->capture_default_str();
    ou->add_option("--delta", ou_opts.delta)->capture_default_str();
    ou->add_option("--t-final", ou_opts.t_final)->capture_default_str();
    ou->add_option("--seed", ou_opts.seed, "Master seed (falls back to SPDE_SEED, then 0)");
    ou->add_option("--out", ou_opts.out, "Result CSV");

    for (auto* sub : {add, mul, lab, ou})
        sub->add_option("--config", "Flat key=value file; flags take precedence");

    try {
        std::vector<std::string> argv = args;
        if (!argv.empty()) {
            if (auto* sub = app.get_subcommand_no_throw(argv.front())) {
                auto rest = merge_config(*sub, {argv.begin() + 1, argv.end()});
                rest.insert(rest.begin(), argv.front());
                argv = std::move(rest);
            }
        }
        std::reverse(argv.begin(), argv.end());
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
        err << (sub ? sub->help() : app.help());
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (add->parsed())
            return run_convergence(additive, out);
        if (mul->parsed())
            return run_convergence(multiplicative, out);
        if (lab->parsed())
            return run_lemma(lemma_opts, out);
        return run_ou(ou_opts, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace spde::cli
