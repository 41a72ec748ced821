#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "spde/format.hpp"
#include "spde/harness.hpp"

using namespace spde;
using namespace spde::harness;

namespace {

ExperimentConfig small_additive()
{
    ExperimentConfig c;
    c.beta = 1.0;
    c.resolution = 4;
    c.ladder_powers = {3, 4, 5};
    c.fine_power = 8;
    c.samples = 20;
    c.seed = 17;
    return c;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("rate fit")
{
    const auto two = fit_rate({{0.1, 0.01}, {0.05, 0.005}});
    CHECK(two.slope == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(two.points == 2);
    CHECK(two.warnings.empty());

    std::vector<RatePoint> pts;
    for (double dt : {0.5, 0.25, 0.125, 0.0625})
        pts.push_back({dt, 3.0 * std::sqrt(dt)});
    const auto half = fit_rate(pts);
    CHECK(half.slope == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(half.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-13));
    CHECK(half.residual <= 1e-14);

    std::mt19937 gen(4);
    std::vector<RatePoint> noisy;
    std::lognormal_distribution<double> jitter(0.0, 0.1);
    for (int p = 2; p < 9; ++p)
        noisy.push_back({std::ldexp(1.0, -p), std::ldexp(1.0, -p) * jitter(gen)});
    const auto ordered = fit_rate(noisy);
    for (int k = 0; k < 5; ++k) {
        std::shuffle(noisy.begin(), noisy.end(), gen);
        const auto shuffled = fit_rate(noisy);
        CHECK(std::abs(shuffled.slope - ordered.slope) <= 1e-13);
        CHECK(std::abs(shuffled.residual - ordered.residual) <= 1e-13);
    }

    const auto dropped = fit_rate({{0.1, 0.01}, {0.05, 0.0}, {0.025, 0.0025}});
    CHECK(dropped.points == 2);
    REQUIRE(dropped.warnings.size() == 1);
    CHECK(dropped.warnings[0].find("dt=0.05") != std::string::npos);
    CHECK(dropped.slope == doctest::Approx(1.0));

    CHECK_THROWS_AS(fit_rate({{0.1, 0.01}}), ConfigError);
    CHECK_THROWS_AS(fit_rate({{0.1, 0.01}, {0.05, 0.0}}), ConfigError);
    CHECK_THROWS_AS(fit_rate({{0.1, 0.01}, {0.1, 0.02}}), ConfigError);
}

TEST_CASE("config validation")
{
    auto c = small_additive();
    CHECK_NOTHROW(c.validate());
    c.ladder_powers = {4, 3};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_additive();
    c.ladder_powers = {9};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_additive();
    c.samples = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_additive();
    c.beta = -1.0;
    CHECK_THROWS_AS(run_strong_error(c), ConfigError);
}

TEST_CASE("csv and json output")
{
    ErrorReport empty;
    empty.config = small_additive();
    CHECK(to_csv(empty) == "dt,rms_error,samples,beta,problem\n");

    auto c = small_additive();
    c.beta = 1.5;
    const auto r = run_strong_error(c);
    const auto csv = to_csv(r);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "dt,rms_error,samples,beta,problem");
    std::getline(lines, line);
    // Shortest round-trip form.
    CHECK(line.rfind("0.125,", 0) == 0);
    const auto err = line.substr(6, line.find(',', 6) - 6);
    CHECK(std::stod(err) == r.levels[0].rms_error);
    CHECK(err == format_double(r.levels[0].rms_error));
    CHECK(line.substr(line.find(',', 6)) == ",20,1.5,additive_linear");
    CHECK(output_name(c, Format::Csv) == "additive_linear_1.5_20.csv");
    CHECK(output_name(c, Format::Json) == "additive_linear_1.5_20.json");

    const auto back = report_from_json(to_json(r));
    CHECK(to_json(back) == to_json(r));
    CHECK(back.levels.size() == r.levels.size());
    CHECK(back.levels[1].rms_error == r.levels[1].rms_error);
    CHECK(back.sample_seeds == r.sample_seeds);
    CHECK(back.fit.slope == r.fit.slope);
    CHECK_THROWS_AS(report_from_json("{"), ConfigError);
    CHECK_THROWS_AS(report_from_json("{\"schema_version\": 1}"), ConfigError);

    const auto dir = std::filesystem::temp_directory_path() / "spde_harness_test";
    std::filesystem::create_directories(dir);
    emit(r, Format::Csv, (dir / "a.csv").string());
    CHECK(slurp(dir / "a.csv") == csv);
    emit(r, Format::Json, (dir / "a.json").string());
    CHECK(slurp(dir / "a.json") == to_json(r));
    try {
        emit(r, Format::Csv, (dir / "missing" / "a.csv").string());
        FAIL("expected an IO error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("No such file or directory") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("reproducibility")
{
    auto c = small_additive();
    const auto a = run_strong_error(c);
    c.jobs = 3;
    const auto b = run_strong_error(c);
    CHECK(to_json(a) == to_json(b));
    for (const auto& l : a.levels) {
        CHECK(l.rms_error > 0.0);
        CHECK(l.standard_error > 0.0);
    }
    c.seed = 18;
    CHECK(to_json(run_strong_error(c)) != to_json(a));
}

TEST_CASE("deterministic run converges at first order")
{
    ExperimentConfig c;
    c.problem = problems::Problem::MultiplicativeAdvection;
    c.resolution = 4;
    c.ladder_powers = {3, 4, 5, 6};
    c.fine_power = 12;
    c.samples = 2;
    c.noise_amplitude = 0.0;
    c.self_consistency_gate = false;
    const auto r = run_strong_error(c);
    CHECK(r.levels[0].rms_error == r.levels[0].rms_error);
    CHECK(r.levels[0].standard_error == 0.0);
    CHECK(r.fit.slope == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("error distribution does not depend on the seed batch")
{
    auto c = small_additive();
    c.samples = 100;
    c.seed = 1;
    const auto a = run_strong_error(c);
    c.seed = 2;
    const auto b = run_strong_error(c);
    for (std::size_t l = 0; l < a.levels.size(); ++l) {
        const auto& x = a.levels[l];
        const auto& y = b.levels[l];
        CHECK(std::abs(x.rms_error - y.rms_error) <=
              3.0 * std::hypot(x.standard_error, y.standard_error));
    }
}

TEST_CASE("self-consistency gate")
{
    ExperimentConfig c;
    c.problem = problems::Problem::MultiplicativeAdvection;
    c.resolution = 4;
    c.ladder_powers = {3, 4};
    c.fine_power = 9;
    c.samples = 4;
    const auto r = run_strong_error(c);
    REQUIRE(r.reference_change.has_value());
    REQUIRE(r.coarse_error_half_reference.has_value());
    CHECK(*r.reference_change >= 0.0);
    CHECK(*r.reference_change < 0.25);
    c.self_consistency_gate = false;
    CHECK(!run_strong_error(c).reference_change.has_value());
}

} // TEST_SUITE
