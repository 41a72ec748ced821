#include "spde/operators.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <complex>
#include <numbers>
#include <algorithm>
#include <span>
#include <string>

#include "spde/quadrature.hpp"

namespace spde::operators {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct OperatorFamily::Factorization {
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    Vector lift_load;  // -dt * A_fd g
    // Sparsity pattern the symbolic analysis of `lu` was done on.
    std::vector<int> outer, inner;

    bool same_pattern(const SparseMatrix& m) const
    {
        const auto o = std::span(m.outerIndexPtr(), static_cast<std::size_t>(m.outerSize() + 1));
        const auto i = std::span(m.innerIndexPtr(), static_cast<std::size_t>(m.nonZeros()));
        return std::ranges::equal(o, outer) && std::ranges::equal(i, inner);
    }
};

struct OperatorFamily::MassSolvers {
    Eigen::SimplicialLDLT<SparseMatrix> full;
    Eigen::SimplicialLDLT<SparseMatrix> free;
};

OperatorFamily::~OperatorFamily() = default;

namespace {

void check_theta(const Coefficients& c)
{
    if (!c.theta.value || !c.reaction.value)
        throw ConfigError("theta and reaction coefficients must be set");
    if (!(c.horizon > 0.0))
        throw ConfigError("coefficient horizon must be positive");
    double theta_min = std::numeric_limits<double>::infinity();
    constexpr int samples = 1024;
    for (int s = 0; s <= samples; ++s)
        theta_min = std::min(theta_min, c.theta(c.horizon * s / samples));
    if (!(theta_min > 0.0))
        throw ConfigError("theta(t) must stay positive on [0, T]; minimum found " +
                          std::to_string(theta_min));
}

Matrix cosine_table(int modes, double length)
{
    const auto nodes = transform_nodes(modes, length);
    Matrix e(static_cast<Eigen::Index>(nodes.size()), modes);
    for (Eigen::Index a = 0; a < e.rows(); ++a)
        for (int i = 0; i < modes; ++i)
            e(a, i) = cosine_mode(i, length, nodes[static_cast<std::size_t>(a)]);
    return e;
}

// A_h(t) restricted to free dofs, in stiffness form (not multiplied by M^{-1}).
SparseMatrix operator_ff(const OperatorFamily& fam, double t)
{
    const auto& fem = fam.fem();
    SparseMatrix a = fam.theta(t) * fem.stiffness_ff + fam.reaction(t) * fem.reaction_ff;
    if (fam.has_advection())
        a += fam.theta(t) * fem.advection_ff;
    if (fam.garding_shift() != 0.0)
        a += fam.garding_shift() * fem.mass_ff;
    return a;
}

// A_fd(t) applied to Dirichlet values.
Vector operator_fd_apply(const OperatorFamily& fam, double t, const Vector& dirichlet)
{
    const auto& fem = fam.fem();
    if (fem.dirichlet_dofs.empty())
        return Vector::Zero(fem.num_free());
    Vector out = fam.theta(t) * (fem.stiffness_fd * dirichlet) +
                 fam.reaction(t) * (fem.reaction_fd * dirichlet);
    if (fam.has_advection())
        out += fam.theta(t) * (fem.advection_fd * dirichlet);
    if (fam.garding_shift() != 0.0)
        out += fam.garding_shift() * (fem.mass_fd * dirichlet);
    return out;
}

Vector dirichlet_part(const FemData& fem, const Vector& full)
{
    Vector out(static_cast<Eigen::Index>(fem.dirichlet_dofs.size()));
    for (std::size_t k = 0; k < fem.dirichlet_dofs.size(); ++k)
        out[static_cast<Eigen::Index>(k)] = full[fem.dirichlet_dofs[k]];
    return out;
}

} // namespace

double cosine_mode(int i, double length, double x)
{
    if (i == 0)
        return std::sqrt(1.0 / length);
    return std::sqrt(2.0 / length) * std::cos(i * std::numbers::pi * x / length);
}

Eigen::Index OperatorFamily::size() const
{
    if (backend_ == Backend::Spectral)
        return static_cast<Eigen::Index>(resolution_.n1) * resolution_.n2;
    return fem_->num_nodes();
}

double OperatorFamily::laplace_eigenvalue(int i, int j) const
{
    if (backend_ != Backend::Spectral)
        throw ConfigError("laplace_eigenvalue is defined on the spectral backend only");
    if (i < 0 || j < 0 || i >= resolution_.n1 || j >= resolution_.n2)
        throw ConfigError("mode (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") is outside the family's resolution");
    return laplace_eigenvalues_[mode_index(i, j)];
}

double OperatorFamily::eigenvalue(int i, int j, double t) const
{
    return theta(t) * laplace_eigenvalue(i, j) + reaction(t) + garding_shift_;
}

const FemData& OperatorFamily::fem() const
{
    if (!fem_)
        throw ConfigError("operation requires the FEM backend");
    return *fem_;
}

void OperatorFamily::require_member(const GridFunction& v) const
{
    if (v.backend != backend_)
        throw ConfigError(std::string("backend mismatch: family is ") +
                          std::string(to_string(backend_)) + ", grid function is " +
                          std::string(to_string(v.backend)));
    if (v.size() != size())
        throw ConfigError("grid function length " + std::to_string(v.size()) +
                          " does not match family size " + std::to_string(size()));
}

std::shared_ptr<const OperatorFamily::Factorization>
OperatorFamily::factorization(double t, double dt) const
{
    std::lock_guard lock(cache_mutex_);
    if (cache_key_ && cache_key_->first == t && cache_key_->second == dt)
        return cache_value_;
    SparseMatrix system = fem_->mass_ff + dt * operator_ff(*this, t);
    system.makeCompressed();
    // Reuse the previous entry's symbolic analysis when nobody else holds it.
    std::shared_ptr<Factorization> f;
    if (cache_value_ && cache_value_.use_count() == 1 && cache_value_->same_pattern(system)) {
        f = std::move(cache_value_);
        cache_key_.reset();
    } else {
        f = std::make_shared<Factorization>();
        f->lu.analyzePattern(system);
        f->outer.assign(system.outerIndexPtr(), system.outerIndexPtr() + system.outerSize() + 1);
        f->inner.assign(system.innerIndexPtr(), system.innerIndexPtr() + system.nonZeros());
    }
    f->lu.factorize(system);
    if (f->lu.info() != Eigen::Success)
        throw NumericalError("sparse LU factorization of M + dt A(t) failed at t = " +
                             std::to_string(t) + ", dt = " + std::to_string(dt));
    f->lift_load = -dt * operator_fd_apply(*this, t, fem_->dirichlet_values);
    cache_key_ = std::pair{t, dt};
    cache_value_ = f;
    return f;
}

std::unique_ptr<OperatorFamily> build_spectral_family(const Rectangle& domain, Resolution modes,
                                                      Coefficients coeffs)
{
    if (modes.n1 < 1 || modes.n2 < 1)
        throw ConfigError("spectral mode counts must be >= 1");
    if (!(domain.l1 > 0.0) || !(domain.l2 > 0.0))
        throw ConfigError("domain extents must be positive");
    check_theta(coeffs);

    std::unique_ptr<OperatorFamily> fam(new OperatorFamily());
    fam->backend_ = Backend::Spectral;
    fam->domain_ = domain;
    fam->resolution_ = modes;
    fam->coeffs_ = std::move(coeffs);
    fam->laplace_eigenvalues_.resize(static_cast<Eigen::Index>(modes.n1) * modes.n2);
    for (int j = 0; j < modes.n2; ++j) {
        for (int i = 0; i < modes.n1; ++i) {
            const double a = i * std::numbers::pi / domain.l1;
            const double b = j * std::numbers::pi / domain.l2;
            fam->laplace_eigenvalues_[fam->mode_index(i, j)] = a * a + b * b;
        }
    }
    fam->transform1_ = cosine_table(modes.n1, domain.l1);
    fam->transform2_ = cosine_table(modes.n2, domain.l2);
    return fam;
}

std::unique_ptr<OperatorFamily> build_fem_family(const Rectangle& domain, Resolution cells,
                                                 Coefficients coeffs, VelocityField advection,
                                                 const BoundarySpec& bc, double garding_shift)
{
    check_theta(coeffs);
    if (!(garding_shift >= 0.0))
        throw ConfigError("Garding shift must be nonnegative");

    std::unique_ptr<OperatorFamily> fam(new OperatorFamily());
    fam->backend_ = Backend::Fem;
    fam->domain_ = domain;
    fam->resolution_ = cells;
    fam->coeffs_ = std::move(coeffs);
    fam->garding_shift_ = garding_shift;
    fam->has_advection_ = static_cast<bool>(advection);
    fam->fem_ = assemble_fem(domain, cells, advection ? &advection : nullptr, bc);

    fam->mass_solvers_ = std::make_unique<OperatorFamily::MassSolvers>();
    fam->mass_solvers_->full.compute(fam->fem_->mass);
    fam->mass_solvers_->free.compute(fam->fem_->mass_ff);
    if (fam->mass_solvers_->full.info() != Eigen::Success ||
        fam->mass_solvers_->free.info() != Eigen::Success)
        throw NumericalError("mass matrix factorization failed");
    return fam;
}

OperatorAction apply_A(const OperatorFamily& fam, double t, const GridFunction& v)
{
    fam.require_member(v);
    if (fam.backend() == Backend::Spectral) {
        const auto [n1, n2] = fam.resolution();
        Vector out(v.size());
        for (int j = 0; j < n2; ++j)
            for (int i = 0; i < n1; ++i)
                out[fam.mode_index(i, j)] = fam.eigenvalue(i, j, t) * v.values[fam.mode_index(i, j)];
        return {GridFunction(Backend::Spectral, std::move(out)), Vector()};
    }
    const auto& fem = fam.fem();
    const Vector free_action = operator_ff(fam, t) * fem.restrict_free(v.values);
    Vector full = Vector::Zero(fem.num_nodes());
    for (int k = 0; k < fem.num_free(); ++k)
        full[fem.free_dofs[k]] = free_action[k];
    return {GridFunction(Backend::Fem, std::move(full)),
            operator_fd_apply(fam, t, dirichlet_part(fem, v.values))};
}

GridFunction solve_resolvent(const OperatorFamily& fam, double t, double dt,
                             const GridFunction& rhs)
{
    std::vector<GridFunction> batch{rhs};
    solve_resolvent_many(fam, t, dt, batch);
    return std::move(batch.front());
}

void solve_resolvent_many(const OperatorFamily& fam, double t, double dt,
                          std::vector<GridFunction>& rhs)
{
    if (!(dt > 0.0))
        throw ConfigError("resolvent step dt must be positive");
    for (const auto& r : rhs)
        fam.require_member(r);
    if (rhs.empty())
        return;

    if (fam.backend() == Backend::Spectral) {
        const auto [n1, n2] = fam.resolution();
        Vector multiplier(fam.size());
        for (int j = 0; j < n2; ++j)
            for (int i = 0; i < n1; ++i)
                multiplier[fam.mode_index(i, j)] = 1.0 / (1.0 + dt * fam.eigenvalue(i, j, t));
        for (auto& r : rhs)
            r.values = r.values.cwiseProduct(multiplier);
        return;
    }

    const auto& fem = fam.fem();
    const auto f = fam.factorization(t, dt);
    Matrix b(fem.num_free(), static_cast<Eigen::Index>(rhs.size()));
    for (std::size_t c = 0; c < rhs.size(); ++c)
        b.col(static_cast<Eigen::Index>(c)) = fem.restrict_free(rhs[c].values);
    b = fem.mass_ff * b;
    b.colwise() += f->lift_load;
    const Matrix x = f->lu.solve(b);
    if (f->lu.info() != Eigen::Success || !x.allFinite())
        throw NumericalError("resolvent solve failed at t = " + std::to_string(t));
    for (std::size_t c = 0; c < rhs.size(); ++c)
        rhs[c].values = fem.extend(x.col(static_cast<Eigen::Index>(c)));
}

GridFunction fractional_apply(const OperatorFamily& fam, double t, double power,
                              const GridFunction& v)
{
    fam.require_member(v);
    if (power == 0.0)
        return v;
    if (fam.backend() == Backend::Spectral) {
        const auto [n1, n2] = fam.resolution();
        Vector out(v.size());
        for (int j = 0; j < n2; ++j) {
            for (int i = 0; i < n1; ++i) {
                const double mu = fam.eigenvalue(i, j, t);
                if (mu == 0.0 && power < 0.0)
                    throw DomainError("negative power of a zero eigenvalue at mode (" +
                                      std::to_string(i) + ", " + std::to_string(j) + ")");
                if (mu < 0.0)
                    throw DomainError("fractional power of a negative eigenvalue at mode (" +
                                      std::to_string(i) + ", " + std::to_string(j) + ")");
                out[fam.mode_index(i, j)] = std::pow(mu, power) * v.values[fam.mode_index(i, j)];
            }
        }
        return {Backend::Spectral, std::move(out)};
    }

    const auto& fem = fam.fem();
    if (fem.num_free() > kMaxDenseFractionalDofs)
        throw ConfigError("fractional_apply on FEM is limited to " +
                          std::to_string(kMaxDenseFractionalDofs) + " free dofs, family has " +
                          std::to_string(fem.num_free()));
    const Matrix mass = Matrix(fem.mass_ff);
    const Matrix a = Matrix(operator_ff(fam, t));
    const Vector vf = fem.restrict_free(v.values);
    Vector result;
    if (!fam.has_advection()) {
        // Symmetric case: A = M V diag(mu) V^T M with V^T M V = I.
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, mass);
        const Vector& mu = es.eigenvalues();
        const double scale = mu.cwiseAbs().maxCoeff();
        Vector coeff = es.eigenvectors().transpose() * (mass * vf);
        for (Eigen::Index k = 0; k < mu.size(); ++k) {
            if (mu[k] <= 1e-13 * scale) {
                if (power < 0.0 || mu[k] < -1e-13 * scale)
                    throw DomainError("fractional power undefined: eigenvalue " +
                                      std::to_string(mu[k]));
                coeff[k] = 0.0;
            } else {
                coeff[k] *= std::pow(mu[k], power);
            }
        }
        result = es.eigenvectors() * coeff;
    } else {
        const Matrix op = mass.ldlt().solve(a);
        Eigen::EigenSolver<Matrix> es(op);
        if (es.info() != Eigen::Success)
            throw NumericalError("eigendecomposition failed in fractional_apply");
        const Eigen::VectorXcd mu = es.eigenvalues();
        const Eigen::MatrixXcd vecs = es.eigenvectors();
        Eigen::VectorXcd coeff = vecs.partialPivLu().solve(vf.cast<std::complex<double>>());
        const double scale = mu.cwiseAbs().maxCoeff();
        for (Eigen::Index k = 0; k < mu.size(); ++k) {
            if (std::abs(mu[k]) <= 1e-13 * scale)
                throw DomainError("fractional power undefined: near-zero eigenvalue");
            coeff[k] *= std::pow(mu[k], power);
        }
        result = (vecs * coeff).real();
    }
    return {Backend::Fem, fem.extend(result)};
}

std::vector<double> transform_nodes(int modes, double length)
{
    std::vector<double> x(static_cast<std::size_t>(modes) + 1);
    for (std::size_t a = 0; a < x.size(); ++a)
        x[a] = (static_cast<double>(a) + 0.5) * length / static_cast<double>(x.size());
    return x;
}

Matrix spectral_to_grid(const OperatorFamily& fam, const GridFunction& v)
{
    fam.require_member(v);
    if (fam.backend() != Backend::Spectral)
        throw ConfigError("spectral_to_grid requires the spectral backend");
    const auto [n1, n2] = fam.resolution();
    const Eigen::Map<const Matrix> c(v.values.data(), n1, n2);
    return fam.transform1_ * c * fam.transform2_.transpose();
}

GridFunction grid_to_spectral(const OperatorFamily& fam, const Matrix& grid)
{
    if (fam.backend() != Backend::Spectral)
        throw ConfigError("grid_to_spectral requires the spectral backend");
    const auto [n1, n2] = fam.resolution();
    if (grid.rows() != n1 + 1 || grid.cols() != n2 + 1)
        throw ConfigError("transform grid has the wrong shape");
    const double w = fam.domain().l1 / (n1 + 1) * fam.domain().l2 / (n2 + 1);
    Matrix c = w * (fam.transform1_.transpose() * grid * fam.transform2_);
    return {Backend::Spectral, Eigen::Map<const Vector>(c.data(), c.size())};
}

namespace {

// Calls f(a, b, c, la, lb, lc, x, y, w) at every point of an order x order collapsed
// Gauss-Legendre rule on each mesh triangle (a, b, c); (la, lb, lc) are barycentric.
template <class F>
void for_each_triangle_point(const FemData& fem, int order, F&& f)
{
    const auto g = quad::gauss_legendre(order, 0.0, 1.0);
    auto triangle = [&](int a, int b, int c) {
        const Eigen::Vector2d& va = fem.nodes[a];
        const Eigen::Vector2d& vb = fem.nodes[b];
        const Eigen::Vector2d& vc = fem.nodes[c];
        const double area =
            0.5 * std::abs((vb - va).x() * (vc - va).y() - (vc - va).x() * (vb - va).y());
        for (std::size_t p = 0; p < g.nodes.size(); ++p) {
            for (std::size_t q = 0; q < g.nodes.size(); ++q) {
                const double xi = g.nodes[p];
                const double eta = g.nodes[q] * (1.0 - xi);
                const double w = g.weights[p] * g.weights[q] * (1.0 - xi) * 2.0 * area;
                const Eigen::Vector2d pt = va + xi * (vb - va) + eta * (vc - va);
                f(a, b, c, 1.0 - xi - eta, xi, eta, pt.x(), pt.y(), w);
            }
        }
    };
    for (int cy = 0; cy < fem.n2; ++cy) {
        for (int cx = 0; cx < fem.n1; ++cx) {
            const int p00 = fem.node(cx, cy);
            const int p11 = fem.node(cx + 1, cy + 1);
            triangle(p00, fem.node(cx + 1, cy), p11);
            triangle(p00, p11, fem.node(cx, cy + 1));
        }
    }
}

} // namespace

GridFunction project(const OperatorFamily& fam, const PointFunction& u)
{
    const auto& dom = fam.domain();
    if (fam.backend() == Backend::Spectral) {
        const auto [n1, n2] = fam.resolution();
        auto composite = [](int modes, double length) {
            const int panels = std::max(2 * modes, 16);
            quad::Rule rule;
            for (int p = 0; p < panels; ++p) {
                const auto r = quad::gauss_legendre(8, length * p / panels, length * (p + 1) / panels);
                rule.nodes.insert(rule.nodes.end(), r.nodes.begin(), r.nodes.end());
                rule.weights.insert(rule.weights.end(), r.weights.begin(), r.weights.end());
            }
            return rule;
        };
        const auto rx = composite(n1, dom.l1);
        const auto ry = composite(n2, dom.l2);
        const auto nx = static_cast<Eigen::Index>(rx.nodes.size());
        const auto ny = static_cast<Eigen::Index>(ry.nodes.size());
        Matrix values(nx, ny);
        for (Eigen::Index b = 0; b < ny; ++b)
            for (Eigen::Index a = 0; a < nx; ++a)
                values(a, b) = rx.weights[a] * ry.weights[b] * u(rx.nodes[a], ry.nodes[b]);
        Matrix ex(nx, n1), ey(ny, n2);
        for (Eigen::Index a = 0; a < nx; ++a)
            for (int i = 0; i < n1; ++i)
                ex(a, i) = cosine_mode(i, dom.l1, rx.nodes[a]);
        for (Eigen::Index b = 0; b < ny; ++b)
            for (int j = 0; j < n2; ++j)
                ey(b, j) = cosine_mode(j, dom.l2, ry.nodes[b]);
        Matrix c = ex.transpose() * values * ey;
        return {Backend::Spectral, Eigen::Map<const Vector>(c.data(), c.size())};
    }

    // Fem: load vector by a 4x4 collapsed Gauss-Legendre rule on every triangle,
    // then a full mass solve.
    const auto& fem = fam.fem();
    Vector load = Vector::Zero(fem.num_nodes());
    for_each_triangle_point(fem, 4, [&](int a, int b, int c, double la, double lb, double lc,
                                        double x, double y, double w) {
        const double wu = w * u(x, y);
        load[a] += wu * la;
        load[b] += wu * lb;
        load[c] += wu * lc;
    });
    Vector x = fam.mass_solvers_->full.solve(load);
    for (std::size_t k = 0; k < fem.dirichlet_dofs.size(); ++k)
        x[fem.dirichlet_dofs[k]] = fem.dirichlet_values[static_cast<Eigen::Index>(k)];
    return {Backend::Fem, std::move(x)};
}

Vector mass_solve_free(const OperatorFamily& fam, const Vector& b_free)
{
    if (fam.backend() == Backend::Spectral)
        return b_free;
    return fam.mass_solvers_->free.solve(b_free);
}

double l2_inner(const OperatorFamily& fam, const GridFunction& u, const GridFunction& v)
{
    fam.require_member(u);
    fam.require_member(v);
    if (fam.backend() == Backend::Spectral)
        return u.values.dot(v.values);
    return u.values.dot(fam.fem().mass * v.values);
}

double l2_norm(const OperatorFamily& fam, const GridFunction& v)
{
    return std::sqrt(std::max(0.0, l2_inner(fam, v, v)));
}

double evaluate(const OperatorFamily& fam, const GridFunction& v, double x, double y)
{
    fam.require_member(v);
    const auto& dom = fam.domain();
    if (fam.backend() == Backend::Spectral) {
        const auto [n1, n2] = fam.resolution();
        Vector ex(n1), ey(n2);
        for (int i = 0; i < n1; ++i)
            ex[i] = cosine_mode(i, dom.l1, x);
        for (int j = 0; j < n2; ++j)
            ey[j] = cosine_mode(j, dom.l2, y);
        const Eigen::Map<const Matrix> c(v.values.data(), n1, n2);
        return ex.dot(c * ey);
    }
    const auto& fem = fam.fem();
    const double gx = std::clamp(x / dom.l1 * fem.n1, 0.0, static_cast<double>(fem.n1));
    const double gy = std::clamp(y / dom.l2 * fem.n2, 0.0, static_cast<double>(fem.n2));
    const int cx = std::min(static_cast<int>(gx), fem.n1 - 1);
    const int cy = std::min(static_cast<int>(gy), fem.n2 - 1);
    const double s = gx - cx;
    const double r = gy - cy;
    const double v00 = v.values[fem.node(cx, cy)];
    const double v10 = v.values[fem.node(cx + 1, cy)];
    const double v11 = v.values[fem.node(cx + 1, cy + 1)];
    const double v01 = v.values[fem.node(cx, cy + 1)];
    if (s >= r)
        return v00 * (1.0 - s) + v10 * (s - r) + v11 * r;
    return v00 * (1.0 - r) + v11 * s + v01 * (r - s);
}

double cross_backend_l2_distance(const OperatorFamily& fem_family, const GridFunction& fem_value,
                                 const OperatorFamily& spectral_family,
                                 const GridFunction& spectral_value)
{
    fem_family.require_member(fem_value);
    spectral_family.require_member(spectral_value);
    if (fem_family.backend() != Backend::Fem || spectral_family.backend() != Backend::Spectral)
        throw ConfigError("cross_backend_l2_distance expects (Fem, Spectral) arguments");
    const auto& v = fem_value.values;
    double total = 0.0;
    for_each_triangle_point(fem_family.fem(), 6, [&](int a, int b, int c, double la, double lb,
                                                     double lc, double x, double y, double w) {
        const double diff = la * v[a] + lb * v[b] + lc * v[c] -
                            evaluate(spectral_family, spectral_value, x, y);
        total += w * diff * diff;
    });
    return std::sqrt(total);
}

} // namespace spde::operators
