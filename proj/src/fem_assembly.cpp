#include "spde/operators.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace spde::operators {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct Triangle {
    std::array<int, 3> node;
    std::array<Eigen::Vector2d, 3> vertex;
};

// Gradients of the three barycentric hat functions and the (positive) area.
void hat_gradients(const Triangle& tri, std::array<Eigen::Vector2d, 3>& grad, double& area)
{
    const auto& v = tri.vertex;
    const double det = (v[1].x() - v[0].x()) * (v[2].y() - v[0].y()) -
                       (v[2].x() - v[0].x()) * (v[1].y() - v[0].y());
    area = 0.5 * det;
    for (int a = 0; a < 3; ++a) {
        const auto& p = v[(a + 1) % 3];
        const auto& q = v[(a + 2) % 3];
        grad[a] = Eigen::Vector2d(p.y() - q.y(), q.x() - p.x()) / det;
    }
}

Eigen::SparseMatrix<double> to_sparse(int n, const Triplets& t)
{
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

Eigen::SparseMatrix<double> selector(const std::vector<int>& rows, int n)
{
    Triplets t;
    t.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        t.emplace_back(static_cast<int>(r), rows[r], 1.0);
    Eigen::SparseMatrix<double> s(static_cast<int>(rows.size()), n);
    s.setFromTriplets(t.begin(), t.end());
    return s;
}

} // namespace

Vector FemData::restrict_free(const Vector& full) const
{
    Vector out(num_free());
    for (int k = 0; k < num_free(); ++k)
        out[k] = full[free_dofs[k]];
    return out;
}

Vector FemData::extend(const Vector& free_values) const
{
    Vector out(num_nodes());
    for (int k = 0; k < num_free(); ++k)
        out[free_dofs[k]] = free_values[k];
    for (std::size_t k = 0; k < dirichlet_dofs.size(); ++k)
        out[dirichlet_dofs[k]] = dirichlet_values[static_cast<Eigen::Index>(k)];
    return out;
}

FemData assemble_fem(const Rectangle& domain, Resolution cells, const VelocityField* advection,
                     const BoundarySpec& bc)
{
    if (cells.n1 < 2 || cells.n2 < 2)
        throw ConfigError("FEM cell counts must be >= 2, got " + std::to_string(cells.n1) + "x" +
                          std::to_string(cells.n2));
    if (!(domain.l1 > 0.0) || !(domain.l2 > 0.0))
        throw ConfigError("domain extents must be positive");

    FemData fem;
    fem.n1 = cells.n1;
    fem.n2 = cells.n2;
    const double h1 = domain.l1 / cells.n1;
    const double h2 = domain.l2 / cells.n2;
    const int n = fem.num_nodes();

    fem.nodes.resize(n);
    for (int iy = 0; iy <= cells.n2; ++iy)
        for (int ix = 0; ix <= cells.n1; ++ix)
            fem.nodes[fem.node(ix, iy)] = Eigen::Vector2d(ix * h1, iy * h2);

    Triplets mass, stiff, adv;
    const std::size_t per_cell = 2 * 9;
    mass.reserve(per_cell * cells.n1 * cells.n2);
    stiff.reserve(per_cell * cells.n1 * cells.n2);
    adv.reserve(per_cell * cells.n1 * cells.n2);

    auto add_triangle = [&](const Triangle& tri) {
        std::array<Eigen::Vector2d, 3> grad;
        double area = 0.0;
        hat_gradients(tri, grad, area);
        Eigen::Vector2d q = Eigen::Vector2d::Zero();
        if (advection) {
            const Eigen::Vector2d c = (tri.vertex[0] + tri.vertex[1] + tri.vertex[2]) / 3.0;
            q = (*advection)(c.x(), c.y());
            if (!q.allFinite())
                throw NumericalError("advection field is not finite at (" + std::to_string(c.x()) +
                                     ", " + std::to_string(c.y()) + ")");
        }
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                const int ra = tri.node[a];
                const int cb = tri.node[b];
                mass.emplace_back(ra, cb, area / 12.0 * (a == b ? 2.0 : 1.0));
                stiff.emplace_back(ra, cb, area * grad[a].dot(grad[b]));
                if (advection)
                    adv.emplace_back(ra, cb, q.dot(grad[b]) * area / 3.0);
            }
        }
    };

    for (int cy = 0; cy < cells.n2; ++cy) {
        for (int cx = 0; cx < cells.n1; ++cx) {
            const int p00 = fem.node(cx, cy);
            const int p10 = fem.node(cx + 1, cy);
            const int p11 = fem.node(cx + 1, cy + 1);
            const int p01 = fem.node(cx, cy + 1);
            add_triangle({{p00, p10, p11}, {fem.nodes[p00], fem.nodes[p10], fem.nodes[p11]}});
            add_triangle({{p00, p11, p01}, {fem.nodes[p00], fem.nodes[p11], fem.nodes[p01]}});
        }
    }

    fem.mass = to_sparse(n, mass);
    fem.stiffness = to_sparse(n, stiff);
    fem.advection = to_sparse(n, adv);
    fem.reaction_mass = fem.mass;

    // Dirichlet classification: edges checked in Left, Right, Bottom, Top order.
    fem.free_index.assign(n, -1);
    std::vector<double> prescribed;
    for (int iy = 0; iy <= cells.n2; ++iy) {
        for (int ix = 0; ix <= cells.n1; ++ix) {
            const int k = fem.node(ix, iy);
            const std::array<bool, 4> on_edge = {ix == 0, ix == cells.n1, iy == 0, iy == cells.n2};
            std::optional<double> value;
            for (int e = 0; e < 4 && !value; ++e)
                if (on_edge[e] && bc[e].is_dirichlet())
                    value = bc[e].value;
            if (value) {
                fem.dirichlet_dofs.push_back(k);
                prescribed.push_back(*value);
            } else {
                fem.free_index[k] = static_cast<int>(fem.free_dofs.size());
                fem.free_dofs.push_back(k);
            }
        }
    }
    if (fem.free_dofs.empty())
        throw ConfigError("FEM mesh has no free degrees of freedom");
    fem.dirichlet_values = Eigen::Map<const Vector>(prescribed.data(),
                                                    static_cast<Eigen::Index>(prescribed.size()));

    const auto pf = selector(fem.free_dofs, n);
    const auto pd = selector(fem.dirichlet_dofs, n);
    auto block_ff = [&](const Eigen::SparseMatrix<double>& m) {
        Eigen::SparseMatrix<double> b = pf * m * pf.transpose();
        b.makeCompressed();
        return b;
    };
    auto block_fd = [&](const Eigen::SparseMatrix<double>& m) {
        Eigen::SparseMatrix<double> b = pf * m * pd.transpose();
        b.makeCompressed();
        return b;
    };
    fem.mass_ff = block_ff(fem.mass);
    fem.stiffness_ff = block_ff(fem.stiffness);
    fem.advection_ff = block_ff(fem.advection);
    fem.reaction_ff = block_ff(fem.reaction_mass);
    fem.mass_fd = block_fd(fem.mass);
    fem.stiffness_fd = block_fd(fem.stiffness);
    fem.advection_fd = block_fd(fem.advection);
    fem.reaction_fd = block_fd(fem.reaction_mass);
    return fem;
}

} // namespace spde::operators
