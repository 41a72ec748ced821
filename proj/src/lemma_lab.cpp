#include "spde/lemma_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "spde/format.hpp"

namespace spde::lemma {

using dense::ComplexVector;

namespace {

// max(sup, scale * ||m||_2), skipping the eigensolve when the cheap bound
// min(||m||_F, sqrt(||m||_1 ||m||_inf)) already cannot raise sup.
double raise_sup(double sup, double scale, const Matrix& m)
{
    const double one = m.cwiseAbs().colwise().sum().maxCoeff();
    const double inf = m.cwiseAbs().rowwise().sum().maxCoeff();
    const double bound = std::min(m.norm(), std::sqrt(one * inf));
    if (scale * bound <= sup)
        return sup;
    return std::max(sup, scale * dense::norm2(m));
}

} // namespace

Matrix DenseFamily::A(double t) const
{
    return theta(t) * generator + reaction(t) * Matrix::Identity(dim(), dim());
}

Matrix DenseFamily::power(double t, double p) const
{
    if (p == 0.0)
        return Matrix::Identity(dim(), dim());
    if (eig.condition < dense::kEigenRouteCondition) {
        const ComplexVector mu = theta(t) * eig.values.array() + reaction(t);
        return dense::apply_function(eig, mu.array().pow(p).matrix());
    }
    return dense::matrix_power(A(t), p);
}

Matrix DenseFamily::exp_minus(double t, double s) const
{
    if (eig.condition < dense::kEigenRouteCondition) {
        const ComplexVector mu = theta(t) * eig.values.array() + reaction(t);
        return dense::apply_function(eig, (-s * mu.array()).exp().matrix());
    }
    return dense::expm_pade(-s * A(t));
}

Matrix DenseFamily::resolvent(double t, double dt) const
{
    const Matrix m = Matrix::Identity(dim(), dim()) + dt * A(t);
    return m.partialPivLu().inverse();
}

TimeCoefficient default_theta()
{
    return {[](double t) { return 1.0 + std::exp(-t); },
            [](double a, double c) { return c - a + std::exp(-a) - std::exp(-c); }};
}

DenseFamily make_family(Matrix generator, TimeCoefficient theta, TimeCoefficient reaction,
                        double horizon, double advection)
{
    if (generator.rows() < 1 || generator.rows() != generator.cols())
        throw ConfigError("dense family needs a non-empty square generator");
    if (!(horizon > 0.0))
        throw ConfigError("dense family horizon must be positive");
    DenseFamily fam;
    fam.generator = std::move(generator);
    fam.advection = advection;
    fam.theta = std::move(theta);
    fam.reaction = std::move(reaction);
    fam.horizon = horizon;
    fam.eig = dense::eigen_decompose(fam.generator);

    constexpr int grid = 64;
    for (int g = 0; g <= grid; ++g) {
        const double t = horizon * g / grid;
        const ComplexVector mu = fam.theta(t) * fam.eig.values.array() + fam.reaction(t);
        const double re_min = mu.real().minCoeff();
        if (!(re_min > 0.0))
            throw ConfigError("dense family has an eigenvalue with real part " +
                              format_double(re_min) + " at t = " + format_double(t));
    }
    const Matrix a0_inv = fam.A(0.0).inverse();
    for (int g = 0; g <= grid; ++g) {
        for (int h = g + 1; h <= grid; ++h) {
            const double t = horizon * g / grid;
            const double s = horizon * h / grid;
            const double ratio = dense::norm2((fam.A(t) - fam.A(s)) * a0_inv) / (s - t);
            fam.lipschitz = std::max(fam.lipschitz, ratio);
        }
    }
    return fam;
}

Matrix advection_diffusion_generator(int n, double nu)
{
    if (n < 1)
        throw ConfigError("dense family dimension must be >= 1");
    const double h = 1.0 / (n + 1);
    Matrix b = Matrix::Zero(n, n);
    for (int r = 0; r < n; ++r) {
        b(r, r) = 2.0 / (h * h);
        if (r > 0)
            b(r, r - 1) = -1.0 / (h * h) - nu / (2.0 * h);
        if (r + 1 < n)
            b(r, r + 1) = -1.0 / (h * h) + nu / (2.0 * h);
    }
    return b;
}

DenseFamily make_dense_family(int n, double nu)
{
    return make_family(advection_diffusion_generator(n, nu), default_theta(),
                       TimeCoefficient::constant(0.0), 1.0, nu);
}

Vector matrix_exp_apply(const DenseFamily& fam, double t, double s, const Vector& v)
{
    if (!(s >= 0.0))
        throw ConfigError("matrix_exp_apply needs s >= 0");
    if (v.size() != fam.dim())
        throw ConfigError("vector length does not match the family dimension");
    if (s == 0.0)
        return v;
    return fam.exp_minus(t, s) * v;
}

double smoothing_sup(const DenseFamily& fam, double alpha, double dt, int steps)
{
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw ConfigError("smoothing_sup needs 0 <= alpha < 1");
    std::vector<Matrix> r(steps + 1), p(steps + 1);
    for (int j = 0; j <= steps; ++j) {
        r[j] = fam.resolvent(j * dt, dt);
        p[j] = fam.power(j * dt, alpha);
    }
    double sup = 0.0;
    for (int i = 1; i <= steps; ++i) {
        Matrix prod = Matrix::Identity(fam.dim(), fam.dim());
        for (int m = i; m <= steps; ++m) {
            prod = r[m] * prod;
            const double t = (m - i + 1) * dt;
            sup = raise_sup(sup, std::pow(t, alpha), p[i] * prod);
        }
    }
    return sup;
}

double exp_resolvent_gap(const DenseFamily& fam, double a1, double a2, double dt, int j, int k)
{
    if (!(a1 >= 0.0 && a1 <= 1.0 && a2 >= 0.0 && a2 <= 1.0))
        throw ConfigError("exp_resolvent_gap needs a1, a2 in [0, 1]");
    const double tj = j * dt;
    const Matrix k_gap = fam.exp_minus(tj, dt) - fam.resolvent(tj, dt);
    const Matrix scaled = fam.power(k * dt, -a1) * k_gap * fam.power(tj, -a2);
    return dense::norm2(scaled) / std::pow(dt, a1 + a2);
}

double resolvent_power_sup(const DenseFamily& fam, double alpha, int n, double s, int steps)
{
    if (!(n > alpha) || !(s > 0.0))
        throw ConfigError("resolvent_power_sup needs n > alpha and s > 0");
    const Matrix p0 = fam.power(0.0, alpha);
    double sup = 0.0;
    for (int j = 0; j <= steps; ++j) {
        const double tj = j * s;
        Matrix r = Matrix::Identity(fam.dim(), fam.dim());
        const Matrix r1 = fam.resolvent(tj, s);
        for (int q = 0; q < n; ++q)
            r = r1 * r;
        const double scale = std::pow(n * s, alpha);
        sup = std::max(sup, scale * dense::norm2(p0 * r));
        sup = std::max(sup, scale * dense::norm2(fam.power(tj, alpha) * r));
    }
    return sup;
}

Matrix evolution_oracle(const DenseFamily& fam, double t0, double t1, int substeps)
{
    if (substeps < 1 || !(t1 > t0))
        throw ConfigError("evolution_oracle needs t0 < t1 and substeps >= 1");
    const double h = (t1 - t0) / substeps;
    if (fam.eig.condition < dense::kEigenRouteCondition) {
        // Every A(t) is a function of B, so the sub-step factors share one eigenbasis and
        // the product is accumulated on the diagonal.
        ComplexVector exponent = ComplexVector::Zero(fam.dim());
        for (int r = 0; r < substeps; ++r) {
            const double t = t0 + (r + 0.5) * h;
            exponent.array() += -h * (fam.theta(t) * fam.eig.values.array() + fam.reaction(t));
        }
        return dense::apply_function(fam.eig, exponent.array().exp().matrix());
    }
    Matrix u = Matrix::Identity(fam.dim(), fam.dim());
    for (int r = 0; r < substeps; ++r)
        u = fam.exp_minus(t0 + (r + 0.5) * h, h) * u;
    return u;
}

ProductGap product_gap(const DenseFamily& fam, GapMode mode, DataKind data, double alpha, double dt,
                       int steps)
{
    if (!(alpha >= 0.0 && alpha < 2.0 + 1e-12))
        throw ConfigError("product_gap needs alpha in [0, 2]");
    if (steps < 1)
        throw ConfigError("product_gap needs steps >= 1");
    const int n = fam.dim();
    std::vector<Matrix> x(steps + 1), r(steps + 1);
    ProductGap out;
    double oracle_sum = 0.0;
    for (int j = 0; j <= steps; ++j) {
        r[j] = fam.resolvent(j * dt, dt);
        if (j == 0)
            continue;
        if (mode == GapMode::ExpVsResolvent) {
            x[j] = fam.exp_minus(j * dt, dt);
        } else {
            x[j] = evolution_oracle(fam, (j - 1) * dt, j * dt, kOracleSubsteps);
            const Matrix finer = evolution_oracle(fam, (j - 1) * dt, j * dt, 2 * kOracleSubsteps);
            // Second-order scheme: error of the coarse oracle ~ 4/3 of the difference.
            oracle_sum += 4.0 / 3.0 * dense::norm2(x[j] - finer);
        }
    }
    const Matrix smoothing = data == DataKind::Smooth ? fam.power(0.0, -alpha / 2.0)
                                                      : Matrix::Identity(n, n);
    out.oracle_error = oracle_sum * dense::norm2(smoothing);
    const double dt_scale = std::pow(dt, alpha / 2.0);

    for (int i = 1; i <= steps; ++i) {
        // Both products carry the data operator on the right from the start.
        Matrix pe = smoothing;
        Matrix pr = smoothing;
        for (int m = i; m <= steps; ++m) {
            pe = x[m] * pe;
            pr = r[m - 1] * pr;
            if (data == DataKind::NonSmooth && m == i)
                continue;
            const Matrix d = pe - pr;
            const double weight =
                data == DataKind::Smooth ? 1.0 : std::pow((m - i) * dt, alpha / 2.0);
            out.max_gap = raise_sup(out.max_gap, 1.0, d);
            out.scaled_sup = raise_sup(out.scaled_sup, weight / dt_scale, d);
        }
    }
    if (mode == GapMode::EvolutionVsResolvent && out.max_gap > 0.0 &&
        !(100.0 * out.oracle_error <= out.max_gap))
        throw NumericalError("evolution oracle error " + format_double(out.oracle_error) +
                             " is not 100x below the measured gap " + format_double(out.max_gap));
    return out;
}

double convolution_bound_check(double a1, double a2, double dt, int m)
{
    if (!(a1 > 0.0) || !(a2 > 0.0))
        throw ConfigError("convolution_bound_check needs a1, a2 > 0");
    if (m < 1 || !(dt > 0.0))
        throw ConfigError("convolution_bound_check needs m >= 1 and dt > 0");
    double sum = 0.0;
    for (int j = 1; j <= m; ++j)
        sum += std::pow((m - j + 1) * dt, -1.0 + a1) * std::pow(j * dt, -1.0 + a2);
    return dt * sum / std::pow(m * dt, -1.0 + a1 + a2);
}

double resolvent_identity_residual(const DenseFamily& fam, double dt, int i, int j)
{
    const Matrix ri = fam.resolvent(i * dt, dt);
    const Matrix rj = fam.resolvent((j + 1) * dt, dt);
    const Matrix lhs = rj - ri;
    const Matrix rhs = dt * rj * (fam.A(i * dt) - fam.A((j + 1) * dt)) * ri;
    return dense::norm2(lhs - rhs);
}

std::vector<double> sweep_dts()
{
    std::vector<double> dts;
    for (int p = 3; p <= 10; ++p)
        dts.push_back(std::ldexp(1.0, -p));
    return dts;
}

double SweepResult::ratio() const
{
    if (values.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *hi / *lo;
}

double convolution_limit_ratio(int m)
{
    return convolution_bound_check(0.5, 0.5, 1.0 / m, m);
}

namespace {

std::string params(std::initializer_list<std::pair<const char*, double>> kv)
{
    std::string out;
    for (const auto& [k, v] : kv) {
        if (!out.empty())
            out += ';';
        out += k;
        out += '=';
        out += format_double(v);
    }
    return out;
}

template <class F>
SweepResult sweep(std::string id, std::string parameters, F&& value)
{
    SweepResult res{std::move(id), std::move(parameters), sweep_dts(), {}};
    for (double dt : res.dts)
        res.values.push_back(value(dt, static_cast<int>(std::lround(1.0 / dt))));
    return res;
}

} // namespace

std::vector<SweepResult> run_sweeps(const std::string& which, int n, double nu)
{
    const bool all = which == "all";
    if (!all && which != "6" && which != "7" && which != "8" && which != "9" && which != "10")
        throw ConfigError("unknown sweep '" + which + "'; expected 6, 7, 8, 9, 10 or all");
    const DenseFamily fam = make_dense_family(n, nu);
    const double dn = n;
    std::vector<SweepResult> out;

    if (all || which == "6") {
        for (const auto& [alpha, npow] : {std::pair{0.25, 1}, std::pair{0.5, 1}, std::pair{0.75, 1}})
            out.push_back(sweep("6", params({{"alpha", alpha}, {"n_pow", npow}, {"dim", dn}, {"nu", nu}}),
                                [&](double dt, int steps) {
                                    return resolvent_power_sup(fam, alpha, npow, dt, steps);
                                }));
    }
    if (all || which == "7") {
        for (double alpha : {0.25, 0.5, 0.75})
            out.push_back(sweep("7", params({{"alpha", alpha}, {"dim", dn}, {"nu", nu}}),
                                [&](double dt, int steps) {
                                    return smoothing_sup(fam, alpha, dt, steps);
                                }));
    }
    if (all || which == "8") {
        for (const auto& [a1, a2] : {std::pair{0.5, 0.5}, std::pair{1.0, 0.0}, std::pair{0.0, 1.0},
                                    std::pair{0.25, 0.75}})
            out.push_back(sweep("8", params({{"a1", a1}, {"a2", a2}, {"dim", dn}, {"nu", nu}}),
                                [&](double dt, int steps) {
                                    double sup = 0.0;
                                    for (int j = 0; j <= steps; ++j)
                                        sup = std::max(sup, exp_resolvent_gap(fam, a1, a2, dt, j, j));
                                    return sup;
                                }));
    }
    if (all || which == "9") {
        for (const auto& [a1, a2] : {std::pair{0.5, 0.5}, std::pair{1.0, 1.0}, std::pair{0.25, 0.75}})
            out.push_back(sweep("9", params({{"a1", a1}, {"a2", a2}}), [&](double dt, int steps) {
                double sup = 0.0;
                for (int m = 1; m <= steps; ++m)
                    sup = std::max(sup, convolution_bound_check(a1, a2, dt, m));
                return sup;
            }));
    }
    if (all || which == "10") {
        for (const auto mode : {GapMode::ExpVsResolvent, GapMode::EvolutionVsResolvent}) {
            for (const auto& [data, alpha] : {std::pair{DataKind::Smooth, 0.5},
                                             std::pair{DataKind::Smooth, 1.0},
                                             std::pair{DataKind::Smooth, 1.5},
                                             std::pair{DataKind::NonSmooth, 0.5},
                                             std::pair{DataKind::NonSmooth, 1.0}}) {
                const double m_id = mode == GapMode::ExpVsResolvent ? 0.0 : 1.0;
                const double d_id = data == DataKind::Smooth ? 0.0 : 1.0;
                out.push_back(sweep("10",
                                    params({{"evolution", m_id}, {"nonsmooth", d_id},
                                            {"alpha", alpha}, {"dim", dn}, {"nu", nu}}),
                                    [&](double dt, int steps) {
                                        return product_gap(fam, mode, data, alpha, dt, steps)
                                            .scaled_sup;
                                    }));
            }
        }
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepResult>& results)
{
    std::ostringstream out;
    out << "lemma,parameters,dt,value\n";
    for (const auto& r : results)
        for (std::size_t k = 0; k < r.dts.size(); ++k)
            out << r.lemma << ',' << r.parameters << ',' << format_double(r.dts[k]) << ','
                << format_double(r.values[k]) << '\n';
    return out.str();
}

} // namespace spde::lemma
