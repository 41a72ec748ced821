#include "spde/noise.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "spde/format.hpp"
#include "spde/random.hpp"

namespace spde::noise {

double NoiseSpec::q_at(int i, int j) const
{
    if (i < 1 || j < 1 || i > modes.n1 || j > modes.n2)
        throw ConfigError("noise mode (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") is outside 1.." + std::to_string(modes.n1) + " x 1.." +
                          std::to_string(modes.n2));
    return q[index(i, j)];
}

NoiseSpec make_noise_spec(double beta, double delta, Resolution modes, const Rectangle& domain)
{
    if (!(beta > 0.0))
        throw ConfigError("noise regularity beta must be positive, got " + format_double(beta));
    if (!(delta > 0.0))
        throw ConfigError("noise offset delta must be positive, got " + format_double(delta));
    if (modes.n1 < 1 || modes.n2 < 1)
        throw ConfigError("noise mode counts must be >= 1");

    NoiseSpec spec;
    spec.beta = beta;
    spec.delta = delta;
    spec.modes = modes;
    spec.domain = domain;
    spec.q.resize(static_cast<Eigen::Index>(modes.n1) * modes.n2);
    for (int j = 1; j <= modes.n2; ++j)
        for (int i = 1; i <= modes.n1; ++i)
            spec.q[spec.index(i, j)] = std::pow(static_cast<double>(i * i + j * j), -(beta + delta));
    spec.sqrt_q = spec.q.cwiseSqrt();
    spec.trace = spec.q.sum();
    return spec;
}

double NoisePath::at(int m, int i, int j) const
{
    if (m < 0 || m >= steps || i < 1 || j < 1 || i > modes.n1 || j > modes.n2)
        throw ConfigError("noise path index out of range");
    return increments[m][(i - 1) + static_cast<Eigen::Index>(modes.n1) * (j - 1)];
}

void draw_increments(std::uint64_t seed, Resolution modes, int m, double dt, Vector& increments,
                     Vector* residual)
{
    const double scale = std::sqrt(dt);
    increments.resize(static_cast<Eigen::Index>(modes.n1) * modes.n2);
    if (residual)
        residual->resize(increments.size());
    Eigen::Index k = 0;
    for (int j = 1; j <= modes.n2; ++j) {
        for (int i = 1; i <= modes.n1; ++i, ++k) {
            const auto [z0, z1] = rng::mode_normals(seed, static_cast<std::uint32_t>(i),
                                                    static_cast<std::uint32_t>(j),
                                                    static_cast<std::uint32_t>(m));
            increments[k] = scale * z0;
            if (residual)
                (*residual)[k] = z1;
        }
    }
}

NoisePath sample_path(const NoiseSpec& spec, int steps, double dt, std::uint64_t master_seed)
{
    if (steps < 1)
        throw ConfigError("noise path needs at least one step");
    if (!(dt > 0.0))
        throw ConfigError("noise path step must be positive");
    NoisePath path;
    path.dt = dt;
    path.steps = steps;
    path.modes = spec.modes;
    path.seed = master_seed;
    path.increments.resize(steps);
    for (int m = 0; m < steps; ++m)
        draw_increments(master_seed, spec.modes, m, dt, path.increments[m]);
    path.fine = std::make_shared<const std::vector<Vector>>(path.increments);
    return path;
}

NoisePath coarsen_path(const NoisePath& path, int factor)
{
    if (factor < 1 || path.steps % factor != 0)
        throw ConfigError("coarsening factor " + std::to_string(factor) + " does not divide " +
                          std::to_string(path.steps) + " steps");
    NoisePath out;
    out.dt = path.dt * factor;
    out.steps = path.steps / factor;
    out.modes = path.modes;
    out.seed = path.seed;
    out.stride = path.stride * factor;
    out.fine = path.fine;
    if (!out.fine)
        out.fine = std::make_shared<const std::vector<Vector>>(path.increments);
    const auto& fine = *out.fine;
    out.increments.resize(out.steps);
    for (int m = 0; m < out.steps; ++m) {
        Vector sum = Vector::Zero(fine.front().size());
        for (int k = m * out.stride; k < (m + 1) * out.stride; ++k)
            sum += fine[k];
        out.increments[m] = std::move(sum);
    }
    return out;
}

FieldSynthesizer::FieldSynthesizer(const NoiseSpec& spec, const operators::OperatorFamily& fam)
    : spec_(spec), fam_(fam)
{
    if (fam.domain().l1 != spec.domain.l1 || fam.domain().l2 != spec.domain.l2)
        throw ConfigError("noise domain does not match the operator family's domain");
    const auto [k1, k2] = spec.modes;
    if (fam.backend() == Backend::Spectral) {
        const auto [n1, n2] = fam.resolution();
        if (k1 >= n1 || k2 >= n2)
            throw ConfigError("noise mode (" + std::to_string(k1) + ", " + std::to_string(k2) +
                              ") has no matching operator mode (operator holds 0.." +
                              std::to_string(n1 - 1) + " x 0.." + std::to_string(n2 - 1) + ")");
        target_.resize(static_cast<std::size_t>(spec.num_modes()));
        for (int j = 1; j <= k2; ++j)
            for (int i = 1; i <= k1; ++i)
                target_[static_cast<std::size_t>(spec.index(i, j))] = fam.mode_index(i, j);
        return;
    }
    const auto& fem = fam.fem();
    e1_.resize(fem.n1 + 1, k1);
    e2_.resize(fem.n2 + 1, k2);
    for (int ix = 0; ix <= fem.n1; ++ix)
        for (int i = 1; i <= k1; ++i)
            e1_(ix, i - 1) = operators::cosine_mode(i, spec.domain.l1, fem.nodes[fem.node(ix, 0)].x());
    for (int iy = 0; iy <= fem.n2; ++iy)
        for (int j = 1; j <= k2; ++j)
            e2_(iy, j - 1) = operators::cosine_mode(j, spec.domain.l2, fem.nodes[fem.node(0, iy)].y());
}

GridFunction FieldSynthesizer::field(const Vector& increments) const
{
    if (increments.size() != spec_.num_modes())
        throw ConfigError("increment vector does not match the noise spec");
    if (fam_.backend() == Backend::Spectral) {
        Vector out = Vector::Zero(fam_.size());
        for (Eigen::Index k = 0; k < increments.size(); ++k)
            out[target_[static_cast<std::size_t>(k)]] = spec_.sqrt_q[k] * increments[k];
        return {Backend::Spectral, std::move(out)};
    }
    const Vector weighted = spec_.sqrt_q.cwiseProduct(increments);
    const Eigen::Map<const Matrix> c(weighted.data(), spec_.modes.n1, spec_.modes.n2);
    Matrix nodal = e1_ * c * e2_.transpose();
    Vector out = Eigen::Map<const Vector>(nodal.data(), nodal.size());
    for (int d : fam_.fem().dirichlet_dofs)
        out[d] = 0.0;
    return {Backend::Fem, std::move(out)};
}

GridFunction increment_field(const NoiseSpec& spec, const NoisePath& path, int m,
                             const operators::OperatorFamily& fam)
{
    if (m < 0 || m >= path.steps)
        throw ConfigError("step index " + std::to_string(m) + " outside the noise path");
    if (path.modes.n1 != spec.modes.n1 || path.modes.n2 != spec.modes.n2)
        throw ConfigError("noise path and spec have different mode counts");
    return FieldSynthesizer(spec, fam).field(path.increments[m]);
}

void write_path_csv(const NoisePath& path, std::ostream& out)
{
    out << "m,i,j,increment\n";
    for (int m = 0; m < path.steps; ++m)
        for (int j = 1; j <= path.modes.n2; ++j)
            for (int i = 1; i <= path.modes.n1; ++i)
                out << m << ',' << i << ',' << j << ',' << format_double(path.at(m, i, j)) << '\n';
}

NoisePath read_path_csv(std::istream& in, double dt)
{
    std::string line;
    if (!std::getline(in, line) || line != "m,i,j,increment")
        throw ConfigError("noise path CSV must start with the header m,i,j,increment");
    struct Row {
        int m, i, j;
        double value;
    };
    std::vector<Row> rows;
    int steps = 0, k1 = 0, k2 = 0;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        Row r{};
        char c1 = 0, c2 = 0, c3 = 0;
        std::istringstream fields(line);
        std::string value;
        if (!(fields >> r.m >> c1 >> r.i >> c2 >> r.j >> c3) || c1 != ',' || c2 != ',' ||
            c3 != ',' || !(fields >> value))
            throw ConfigError("malformed noise path row: " + line);
        const auto res = std::from_chars(value.data(), value.data() + value.size(), r.value);
        if (res.ec != std::errc() || r.m < 0 || r.i < 1 || r.j < 1)
            throw ConfigError("malformed noise path row: " + line);
        steps = std::max(steps, r.m + 1);
        k1 = std::max(k1, r.i);
        k2 = std::max(k2, r.j);
        rows.push_back(r);
    }
    if (rows.size() != static_cast<std::size_t>(steps) * k1 * k2)
        throw ConfigError("noise path CSV is not a complete (m, i, j) table");
    NoisePath path;
    path.dt = dt;
    path.steps = steps;
    path.modes = {k1, k2};
    path.increments.assign(steps, Vector::Zero(static_cast<Eigen::Index>(k1) * k2));
    for (const auto& r : rows)
        path.increments[r.m][(r.i - 1) + static_cast<Eigen::Index>(k1) * (r.j - 1)] = r.value;
    path.fine = std::make_shared<const std::vector<Vector>>(path.increments);
    return path;
}

} // namespace spde::noise
