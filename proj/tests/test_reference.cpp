#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spde/harness.hpp"
#include "spde/problems.hpp"
#include "spde/quadrature.hpp"
#include "spde/reference.hpp"

using namespace spde;
using namespace spde::reference;
using std::numbers::pi;

namespace {

OuMode constant_mode(double lambda, double q, double d, double k)
{
    return {lambda, q, TimeCoefficient::constant(d), TimeCoefficient::constant(k)};
}

double rms_error(const CoupledResult& r, std::size_t level)
{
    double s = 0.0;
    for (std::size_t k = 0; k < r.reference.size(); ++k)
        s += (r.levels[level][k].values - r.reference[k].values).squaredNorm();
    return std::sqrt(s / static_cast<double>(r.reference.size()));
}

std::vector<std::uint64_t> seeds(int n)
{
    std::vector<std::uint64_t> s(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        s[k] = 1000 + static_cast<std::uint64_t>(k);
    return s;
}

} // namespace

TEST_SUITE("reference") {

TEST_CASE("constant coefficient moments")
{
    const auto mode = constant_mode(2.0, 0.7, 1.5, 0.4);
    const double b = 3.4, h = 0.25;
    const auto m = ou_step_moments(mode, 0.3, 0.3 + h);
    CHECK(m.decay == doctest::Approx(std::exp(-b * h)).epsilon(1e-14));
    const double var = 0.7 * (1.0 - std::exp(-2.0 * b * h)) / (2.0 * b);
    CHECK(m.step_variance == doctest::Approx(var).epsilon(1e-13));
    const double cov = std::sqrt(0.7) * (1.0 - std::exp(-b * h)) / b;
    CHECK(m.brownian_covariance == doctest::Approx(cov).epsilon(1e-13));
    CHECK(m.residual_variance == doctest::Approx(var - cov * cov / h).epsilon(1e-11));
    CHECK(m.residual_variance > 0.0);

    // Large b h exercises the panel split.
    const auto stiff = constant_mode(8000.0, 1.0, 1.0, 0.0);
    const auto s = ou_step_moments(stiff, 0.0, 0.1);
    CHECK(s.step_variance == doctest::Approx((1.0 - std::exp(-1600.0)) / 16000.0).epsilon(1e-12));

    CHECK_THROWS_AS(ou_step_moments(mode, 0.5, 0.5), ConfigError);
}

TEST_CASE("built-in coefficients")
{
    const auto mode = builtin_mode(pi * pi, 1.0);
    const double closed = pi * pi / 10.0 * (2.0 - std::exp(-1.0)) + 1.0;
    CHECK(mode.integral_b(0.0, 1.0) == doctest::Approx(closed).epsilon(1e-14));
    CHECK(closed == doctest::Approx(2.61083).epsilon(1e-5));
    const auto m = ou_step_moments(mode, 0.0, 1.0);
    CHECK(m.decay == doctest::Approx(0.07353).epsilon(1e-4));

    for (const double lambda : {0.0, pi * pi, 8.0 * pi * pi}) {
        const auto md = builtin_mode(lambda, 1.0);
        for (const auto& [a, c] : {std::pair{0.0, 5.0}, std::pair{0.3, 1.7}, std::pair{2.0, 2.01}}) {
            const double adaptive = quad::adaptive_simpson([&](double s) { return md.b(s); }, a, c, 1e-13);
            CHECK(std::abs(md.integral_b(a, c) - adaptive) <= 1e-10);
        }
    }
}

TEST_CASE("small step limit and monotonicity")
{
    const auto mode = builtin_mode(2.0 * pi * pi, 0.3);
    const double h = 1e-7;
    const auto m = ou_step_moments(mode, 0.4, 0.4 + h);
    CHECK(std::abs(m.decay - 1.0) <= 1e-5);
    CHECK(m.step_variance / (0.3 * h) == doctest::Approx(1.0).epsilon(1e-5));

    double prev = 0.0;
    for (const double d : {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}) {
        const double v = ou_step_moments(mode, 0.4, 0.4 + d).step_variance;
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("chained variance equals whole-interval variance")
{
    for (const double lambda : {0.0, pi * pi, 8.0 * pi * pi}) {
        const auto mode = builtin_mode(lambda, 0.5);
        for (const double t : {0.25, 1.0}) {
            for (const int steps : {1, 7, 64}) {
                double v = 0.0;
                const double h = t / steps;
                for (int k = 0; k < steps; ++k) {
                    const auto m = ou_step_moments(mode, k * h, (k + 1) * h);
                    v = m.decay * m.decay * v + m.step_variance;
                }
                CHECK(std::abs(v - ou_variance(mode, t)) <= 1e-8);
            }
        }
    }
    CHECK(ou_variance(builtin_mode(1.0, 1.0), 0.0) == 0.0);
}

TEST_CASE("ou_check agrees with the chained law")
{
    const auto mode = builtin_mode(2.0 * pi * pi, 0.25);
    const auto c = ou_check(mode, 1, 1, 1.0, 16, 4000, 3);
    CHECK(std::abs(c.chained_variance - c.direct_variance) <= 1e-10);
    CHECK(std::abs(c.empirical_variance - c.chained_variance) <= 4.0 * c.standard_error);
    CHECK_THROWS_AS(ou_check(mode, 0, 1, 1.0, 16, 10, 3), ConfigError);
    CHECK_THROWS_AS(ou_check(mode, 1, 1, 1.0, 16, 1, 3), ConfigError);
}

TEST_CASE("exact path: one step law")
{
    const auto setup = problems::make_additive(1.0, 0.001, 2, 1.0);
    const auto& fam = *setup.family;
    const double dt = 0.05;
    const auto k = fam.mode_index(1, 1);
    const auto expect = ou_step_moments(builtin_mode(fam.laplace_eigenvalue(1, 1), setup.noise.q_at(1, 1)), 0.0, dt);
    constexpr int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int s = 0; s < n; ++s) {
        const auto p = ou_exact_path(setup.noise, fam, 1, dt, static_cast<std::uint64_t>(s));
        const double x = p[1].values[k];
        s1 += x;
        s2 += x * x;
        if (s < 5)
            CHECK(p[1].values[fam.mode_index(0, 0)] == 0.0);
    }
    const double var = expect.step_variance;
    CHECK(std::abs(s1 / n) <= 3.0 * std::sqrt(var / n));
    CHECK(std::abs(s2 / n - var) <= 3.0 * var * std::sqrt(2.0 / n));
}

TEST_CASE("exact path: deterministic decay and reproducibility")
{
    auto setup = problems::make_additive(1.5, 0.001, 4, 1.0);
    const auto& fam = *setup.family;
    GridFunction x0(Backend::Spectral, Vector::LinSpaced(fam.size(), 1.0, 2.0));
    const auto a = ou_exact_path(setup.noise, fam, 6, 0.1, 42, &x0);
    const auto b = ou_exact_path(setup.noise, fam, 6, 0.1, 42, &x0);
    for (std::size_t m = 0; m < a.size(); ++m)
        CHECK((a[m].values - b[m].values).norm() == 0.0);

    setup.noise.q.setZero();
    setup.noise.sqrt_q.setZero();
    const auto d = ou_exact_path(setup.noise, fam, 6, 0.1, 42, &x0);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            const auto mode = builtin_mode(fam.laplace_eigenvalue(i, j), 0.0);
            double expect = x0.values[fam.mode_index(i, j)];
            for (int m = 0; m < 6; ++m)
                expect *= ou_step_moments(mode, 0.1 * m, 0.1 * (m + 1)).decay;
            CHECK(d[6].values[fam.mode_index(i, j)] == doctest::Approx(expect).epsilon(1e-13));
        }
    CHECK_THROWS_AS(ou_exact_path(setup.noise, fam, 0, 0.1, 1), ConfigError);
}

TEST_CASE("coupled run: scalar example")
{
    // Mode (0,0) has lambda = 0, so b = k = 1.
    auto fam = operators::build_spectral_family(
        {}, {2, 2}, {TimeCoefficient::constant(1.0), TimeCoefficient::constant(1.0), 1.0});
    auto spec = noise::make_noise_spec(1.0, 0.001, {1, 1}, {});
    spec.q.setZero();
    spec.sqrt_q.setZero();
    CoupledSetup cs;
    cs.family = fam.get();
    cs.noise = &spec;
    cs.scheme.t_final = 0.1;
    cs.scheme.initial = [](double, double) { return 1.0; };
    cs.fine_steps = 1;
    cs.level_steps = {1};
    const auto r = coupled_exact_vs_scheme(cs, 9);
    const auto k0 = fam->mode_index(0, 0);
    CHECK(r.reference[0].values[k0] == doctest::Approx(0.904837).epsilon(1e-6));
    CHECK(r.levels[0][0].values[k0] == doctest::Approx(0.909091).epsilon(1e-6));
    CHECK(rms_error(r, 0) == doctest::Approx(0.004254).epsilon(1e-3));

    cs.level_steps = {3};
    CHECK_THROWS_AS(coupled_exact_vs_scheme(cs, 9), ConfigError);
}

TEST_CASE("coupled run: deterministic rate without noise")
{
    auto setup = problems::make_additive(1.0, 0.001, 4, 1.0);
    CoupledSetup cs;
    cs.family = setup.family.get();
    cs.noise = &setup.noise;
    cs.scheme = setup.scheme;
    cs.scheme.initial = [](double x, double y) { return std::cos(pi * x) + std::cos(pi * x) * std::cos(pi * y); };
    cs.fine_steps = 1 << 12;
    cs.level_steps = {16, 32, 64, 128, 256};
    cs.noise_amplitude = 0.0;
    const auto r = run_coupled(cs, {1});
    std::vector<harness::RatePoint> pts;
    for (std::size_t l = 0; l < cs.level_steps.size(); ++l)
        pts.push_back({1.0 / cs.level_steps[l], rms_error(r, l)});
    const auto fit = harness::fit_rate(pts);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("coupled run: single noisy mode converges at rate one")
{
    auto setup = problems::make_additive(1.0, 0.001, 2, 1.0);
    CoupledSetup cs;
    cs.family = setup.family.get();
    cs.noise = &setup.noise;
    cs.scheme = setup.scheme;
    cs.fine_steps = 1 << 12;
    cs.level_steps = {8, 16, 32, 64, 128};
    const auto r = run_coupled(cs, seeds(400));
    std::vector<harness::RatePoint> pts;
    for (std::size_t l = 0; l < cs.level_steps.size(); ++l)
        pts.push_back({1.0 / cs.level_steps[l], rms_error(r, l)});
    const auto fit = harness::fit_rate(pts);
    CHECK(fit.slope >= 0.85);
    CHECK(fit.slope <= 1.15);
}

TEST_CASE("fine scheme reference")
{
    auto setup = problems::make_multiplicative(1.0, 0.001, 4, 0.25);
    const auto path = noise::sample_path(setup.noise, 32, 0.25 / 32, 5);
    const auto ref = fine_reference(*setup.family, setup.scheme, setup.noise, path);

    // Coarsest level equal to the finest: identical runs.
    CoupledSetup cs;
    cs.family = setup.family.get();
    cs.noise = &setup.noise;
    cs.scheme = setup.scheme;
    cs.reference = ReferenceKind::FineScheme;
    cs.fine_steps = 32;
    cs.level_steps = {32, 8};
    const auto r = run_coupled(cs, {5});
    CHECK(rms_error(r, 0) == 0.0);
    CHECK(rms_error(r, 1) > 0.0);
    CHECK((r.reference[0].values - ref.values).cwiseAbs().maxCoeff() <= 1e-13);

    CHECK_THROWS_AS(fine_reference(*setup.family, setup.scheme, setup.noise, noise::coarsen_path(path, 2)),
                    ConfigError);
}

TEST_CASE("fine scheme reference: zero noise refinement")
{
    // Richardson-corrected runs converge to the deterministic solution; the
    // extrapolated values at two resolutions agree far below the measured errors.
    auto setup = problems::make_multiplicative(1.0, 0.001, 4, 0.25);
    auto run = [&](int steps) {
        auto c = setup.scheme;
        c.steps = steps;
        return scheme::integrate(*setup.family, c, scheme::Record::FinalOnly).final_state().values;
    };
    const Vector a = run(1 << 10), b = run(1 << 11), c = run(1 << 12);
    const Vector ex1 = 2.0 * b - a, ex2 = 2.0 * c - b;
    CHECK((ex2 - ex1).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((c - ex2).cwiseAbs().maxCoeff() <= 1e-3);
}

} // TEST_SUITE
