#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "spde/noise.hpp"
#include "spde/operators.hpp"

using namespace spde;
using namespace spde::noise;
using std::numbers::pi;

namespace {

operators::Coefficients unit_coeffs()
{
    return {TimeCoefficient::constant(1.0), TimeCoefficient::constant(0.0), 1.0};
}

} // namespace

TEST_SUITE("noise") {

TEST_CASE("covariance spectrum")
{
    const auto s2 = make_noise_spec(2.0, 0.001, {4, 4}, {});
    CHECK(s2.q_at(1, 1) == doctest::Approx(std::pow(2.0, -2.001)).epsilon(1e-15));
    CHECK(s2.q_at(1, 1) == doctest::Approx(0.249827).epsilon(1e-6));
    const auto s1 = make_noise_spec(1.0, 0.001, {4, 4}, {});
    CHECK(s1.q_at(1, 2) == doctest::Approx(0.199678).epsilon(1e-6));
    for (const auto& s : {s1, s2}) {
        CHECK(s.q_at(2, 2) < s.q_at(1, 2));
        CHECK(s.q_at(1, 2) < s.q_at(1, 1));
        double trace = 0.0;
        for (int j = 1; j <= 4; ++j)
            for (int i = 1; i <= 4; ++i) {
                trace += std::pow(i * i + j * j, -(s.beta + s.delta));
                if (i > 1)
                    CHECK(s.q_at(i, j) < s.q_at(i - 1, j));
            }
        CHECK(s.trace == doctest::Approx(trace).epsilon(1e-14));
    }
    CHECK_THROWS_AS(make_noise_spec(0.0, 0.001, {2, 2}, {}), ConfigError);
    CHECK_THROWS_AS(make_noise_spec(1.0, 0.0, {2, 2}, {}), ConfigError);
    CHECK_THROWS_AS(make_noise_spec(1.0, 0.001, {0, 2}, {}), ConfigError);
    CHECK_THROWS_AS(s1.q_at(5, 1), ConfigError);
}

TEST_CASE("path determinism and mode-count independence")
{
    const auto small = make_noise_spec(1.0, 0.001, {3, 3}, {});
    const auto large = make_noise_spec(1.0, 0.001, {5, 4}, {});
    const auto a = sample_path(small, 20, 0.05, 99);
    const auto b = sample_path(small, 20, 0.05, 99);
    const auto c = sample_path(large, 20, 0.05, 99);
    const auto d = sample_path(small, 20, 0.05, 100);
    bool differs = false;
    for (int m = 0; m < 20; ++m) {
        CHECK((a.increments[m] - b.increments[m]).norm() == 0.0);
        for (int j = 1; j <= 3; ++j)
            for (int i = 1; i <= 3; ++i) {
                CHECK(a.at(m, i, j) == c.at(m, i, j));
                differs = differs || a.at(m, i, j) != d.at(m, i, j);
            }
    }
    CHECK(differs);
    CHECK_THROWS_AS(sample_path(small, 0, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(sample_path(small, 3, 0.0, 1), ConfigError);
}

TEST_CASE("increment statistics")
{
    const auto spec = make_noise_spec(1.0, 0.001, {1, 2}, {});
    constexpr int steps = 100000;
    const double dt = 0.01;
    const auto path = sample_path(spec, steps, dt, 2024);
    double s11 = 0.0, s12 = 0.0, cross = 0.0;
    for (int m = 0; m < steps; ++m) {
        const double x = path.at(m, 1, 1), y = path.at(m, 1, 2);
        s11 += x * x;
        s12 += y * y;
        cross += x * y;
    }
    const double var = s11 / steps;
    const double sigma = dt * std::sqrt(2.0 / steps);
    CHECK(std::abs(var - dt) <= 3.0 * sigma);
    const double corr = cross / std::sqrt(s11 * s12);
    CHECK(std::abs(corr) <= 3.0 / std::sqrt(double(steps)));
}

TEST_CASE("coarsening")
{
    const auto spec = make_noise_spec(1.5, 0.001, {3, 2}, {});
    const auto p = sample_path(spec, 16, 1.0 / 16, 5);
    const auto one = coarsen_path(p, 1);
    for (int m = 0; m < 16; ++m)
        CHECK((one.increments[m] - p.increments[m]).norm() == 0.0);

    const auto all = coarsen_path(p, 16);
    CHECK(all.steps == 1);
    CHECK(all.dt == 1.0);
    Vector total = Vector::Zero(spec.num_modes());
    for (int m = 0; m < 16; ++m)
        total += p.increments[m];
    CHECK((all.increments[0] - total).norm() == 0.0);

    const auto four = coarsen_path(p, 4);
    const auto two_two = coarsen_path(coarsen_path(p, 2), 2);
    CHECK(two_two.steps == 4);
    for (int m = 0; m < 4; ++m) {
        // Bitwise: sums always run over the fine increments in ascending order.
        CHECK((four.increments[m] - two_two.increments[m]).cwiseAbs().maxCoeff() == 0.0);
        Vector s = Vector::Zero(spec.num_modes());
        for (int f = 4 * m; f < 4 * m + 4; ++f)
            s += p.increments[f];
        CHECK((four.increments[m] - s).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(four.dt == doctest::Approx(0.25));
    CHECK_THROWS_AS(coarsen_path(p, 3), ConfigError);
    CHECK_THROWS_AS(coarsen_path(p, 0), ConfigError);
}

TEST_CASE("increment fields")
{
    auto spec_fam = operators::build_spectral_family({}, {3, 3}, unit_coeffs());
    auto spec = make_noise_spec(2.0, 0.001, {2, 2}, {});
    spec.q.setZero();
    spec.q[spec.index(1, 1)] = 0.25;
    spec.sqrt_q = spec.q.cwiseSqrt();
    FieldSynthesizer syn(spec, *spec_fam);
    Vector inc = Vector::Zero(spec.num_modes());
    inc[spec.index(1, 1)] = 1.0;
    const auto f = syn.field(inc);
    for (int k = 0; k < spec_fam->size(); ++k)
        CHECK(f.values[k] == (k == spec_fam->mode_index(1, 1) ? 0.5 : 0.0));

    // Too many noise modes for the operator.
    auto tight = make_noise_spec(1.0, 0.001, {3, 3}, {});
    CHECK_THROWS_AS(FieldSynthesizer(tight, *spec_fam), ConfigError);

    // Fem: nodewise cosine series against direct summation, zero on Dirichlet nodes.
    auto bc = operators::all_neumann();
    bc[static_cast<int>(operators::Edge::Left)] = operators::EdgeCondition::dirichlet(1.0);
    auto fem = operators::build_fem_family({2.0, 1.0}, {6, 5}, unit_coeffs(), {}, bc);
    auto three = make_noise_spec(1.0, 0.001, {3, 1}, {2.0, 1.0});
    FieldSynthesizer fs(three, *fem);
    Vector w(3);
    w << 0.3, -1.2, 0.7;
    const auto g = fs.field(w);
    const auto& fd = fem->fem();
    for (int a = 0; a < fem->size(); ++a) {
        const double x = fd.nodes[a].x(), y = fd.nodes[a].y();
        double expect = 0.0;
        for (int i = 1; i <= 3; ++i)
            expect += std::sqrt(three.q_at(i, 1)) * w[i - 1] * std::sqrt(2.0 / 2.0) *
                      std::cos(i * pi * x / 2.0) * std::sqrt(2.0) * std::cos(pi * y);
        if (fd.is_dirichlet(a))
            CHECK(g.values[a] == 0.0);
        else
            CHECK(g.values[a] == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("fem nodal variance of the noise field")
{
    auto fem = operators::build_fem_family({}, {4, 4}, unit_coeffs(), {}, operators::all_neumann());
    const auto spec = make_noise_spec(1.0, 0.001, {4, 4}, {});
    constexpr int steps = 20000;
    const double dt = 0.01;
    const auto path = sample_path(spec, steps, dt, 77);
    const int node = fem->fem().node(1, 3);
    const double x = fem->fem().nodes[node].x(), y = fem->fem().nodes[node].y();
    FieldSynthesizer fs(spec, *fem);
    double sum = 0.0, sum2 = 0.0;
    for (int m = 0; m < steps; ++m) {
        const double v = fs.field(path.increments[m]).values[node];
        sum += v;
        sum2 += v * v;
    }
    double expect = 0.0;
    for (int j = 1; j <= 4; ++j)
        for (int i = 1; i <= 4; ++i)
            expect += spec.q_at(i, j) * 4.0 * std::pow(std::cos(i * pi * x) * std::cos(j * pi * y), 2) * dt;
    const double var = sum2 / steps;
    CHECK(std::abs(var - expect) <= 4.0 * expect * std::sqrt(2.0 / steps));
    CHECK(std::abs(sum / steps) <= 4.0 * std::sqrt(expect / steps));
}

TEST_CASE("path csv round trip")
{
    const auto spec = make_noise_spec(1.0, 0.001, {2, 3}, {});
    const auto p = sample_path(spec, 5, 0.1, 8);
    std::stringstream io;
    write_path_csv(p, io);
    CHECK(io.str().rfind("m,i,j,increment\n", 0) == 0);
    const auto back = read_path_csv(io, 0.1);
    CHECK(back.steps == 5);
    for (int m = 0; m < 5; ++m)
        CHECK((back.increments[m] - p.increments[m]).norm() == 0.0);
    std::stringstream bad("m,i,j,increment\n0,1,1,abc\n");
    CHECK_THROWS_AS(read_path_csv(bad, 0.1), ConfigError);
}

} // TEST_SUITE
