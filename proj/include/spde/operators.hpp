#pragma once

#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "spde/core.hpp"

namespace spde::operators {

/// Velocity field q(x, y) of the advection term.
using VelocityField = std::function<Eigen::Vector2d(double, double)>;

enum class Edge { Left = 0, Right = 1, Bottom = 2, Top = 3 };

struct EdgeCondition {
    enum class Kind { NeumannHomogeneous, DirichletConstant };
    Kind kind = Kind::NeumannHomogeneous;
    double value = 0.0;

    static EdgeCondition neumann() { return {}; }
    static EdgeCondition dirichlet(double v) { return {Kind::DirichletConstant, v}; }
    bool is_dirichlet() const { return kind == Kind::DirichletConstant; }
};

/// One condition per edge, indexed by Edge.
using BoundarySpec = std::array<EdgeCondition, 4>;

inline BoundarySpec all_neumann()
{
    return {EdgeCondition::neumann(), EdgeCondition::neumann(), EdgeCondition::neumann(),
            EdgeCondition::neumann()};
}

/// Time-dependent coefficients shared by both backends. A(t) has principal part
/// theta(t) * (-Laplacian + q . grad) and zero-order part reaction(t) + garding_shift.
struct Coefficients {
    TimeCoefficient theta = TimeCoefficient::constant(1.0);
    TimeCoefficient reaction = TimeCoefficient::constant(0.0);
    /// Interval [0, horizon] on which theta >= theta_min > 0 is checked.
    double horizon = 1.0;
};

/// L2-normalized Neumann cosine e_i(x) on [0, length].
double cosine_mode(int i, double length, double x);

/// Assembled P1 data on the structured right-triangle mesh.
struct FemData {
    int n1 = 0;
    int n2 = 0;
    std::vector<Eigen::Vector2d> nodes;
    /// Full matrices over all nodes.
    Eigen::SparseMatrix<double> mass;
    Eigen::SparseMatrix<double> stiffness;  // K_diff
    Eigen::SparseMatrix<double> advection;  // K_adv, entry (a, b) = int (q . grad phi_b) phi_a
    Eigen::SparseMatrix<double> reaction_mass;  // M_react

    std::vector<int> free_dofs;
    std::vector<int> dirichlet_dofs;
    /// free_index[node] = position among free dofs, or -1 on Dirichlet nodes.
    std::vector<int> free_index;
    /// Prescribed values on dirichlet_dofs (same order).
    Vector dirichlet_values;

    /// Free-free blocks.
    Eigen::SparseMatrix<double> mass_ff;
    Eigen::SparseMatrix<double> stiffness_ff;
    Eigen::SparseMatrix<double> advection_ff;
    Eigen::SparseMatrix<double> reaction_ff;
    /// Free-Dirichlet coupling blocks.
    Eigen::SparseMatrix<double> mass_fd;
    Eigen::SparseMatrix<double> stiffness_fd;
    Eigen::SparseMatrix<double> advection_fd;
    Eigen::SparseMatrix<double> reaction_fd;

    int node(int ix, int iy) const { return ix + (n1 + 1) * iy; }
    int num_nodes() const { return (n1 + 1) * (n2 + 1); }
    int num_free() const { return static_cast<int>(free_dofs.size()); }
    bool is_dirichlet(int node_index) const { return free_index[node_index] < 0; }

    Vector restrict_free(const Vector& full) const;
    /// Full nodal vector from free values, with the prescribed Dirichlet values reinstated.
    Vector extend(const Vector& free_values) const;
};

/// Builds the four FEM matrices on an n1 x n2 cell mesh of `domain`.
/// Each cell is split along its (+1, +1) diagonal. Exposed for testing.
FemData assemble_fem(const Rectangle& domain, Resolution cells, const VelocityField* advection,
                     const BoundarySpec& bc);

class OperatorFamily;

std::unique_ptr<OperatorFamily> build_spectral_family(const Rectangle& domain, Resolution modes,
                                                      Coefficients coeffs);
std::unique_ptr<OperatorFamily> build_fem_family(const Rectangle& domain, Resolution cells,
                                                 Coefficients coeffs, VelocityField advection,
                                                 const BoundarySpec& bc, double garding_shift);

/// Result of apply_A. For Fem, `action` holds A_ff v_f on free nodes (zero on Dirichlet
/// nodes) and `load_correction` holds A_fd v_d over the free dofs.
struct OperatorAction {
    GridFunction action;
    Vector load_correction;
};

/// The discrete non-autonomous family A_h(t) on one of the two backends.
/// Immutable after construction apart from an internally synchronized
/// one-slot resolvent factorization cache.
class OperatorFamily {
public:
    OperatorFamily(const OperatorFamily&) = delete;
    OperatorFamily& operator=(const OperatorFamily&) = delete;
    ~OperatorFamily();

    Backend backend() const { return backend_; }
    const Rectangle& domain() const { return domain_; }
    Resolution resolution() const { return resolution_; }
    const Coefficients& coefficients() const { return coeffs_; }
    double garding_shift() const { return garding_shift_; }
    double theta(double t) const { return coeffs_.theta(t); }
    double reaction(double t) const { return coeffs_.reaction(t); }

    /// Length of a GridFunction on this family.
    Eigen::Index size() const;

    /// Spectral only: Laplacian eigenvalue (i pi / L1)^2 + (j pi / L2)^2.
    double laplace_eigenvalue(int i, int j) const;
    /// Spectral only: theta(t) lambda_ij + k(t) + c0.
    double eigenvalue(int i, int j, double t) const;
    int mode_index(int i, int j) const { return i + resolution_.n1 * j; }

    /// Fem only.
    const FemData& fem() const;
    bool has_advection() const { return has_advection_; }

    void require_member(const GridFunction& v) const;

private:
    friend std::unique_ptr<OperatorFamily> build_spectral_family(const Rectangle&, Resolution,
                                                                 Coefficients);
    friend std::unique_ptr<OperatorFamily> build_fem_family(const Rectangle&, Resolution,
                                                            Coefficients, VelocityField,
                                                            const BoundarySpec&, double);
    friend GridFunction solve_resolvent(const OperatorFamily&, double, double, const GridFunction&);
    friend void solve_resolvent_many(const OperatorFamily&, double, double,
                                     std::vector<GridFunction>&);
    friend GridFunction project(const OperatorFamily&, const PointFunction&);
    friend Vector mass_solve_free(const OperatorFamily&, const Vector&);
    friend Matrix spectral_to_grid(const OperatorFamily&, const GridFunction&);
    friend GridFunction grid_to_spectral(const OperatorFamily&, const Matrix&);

    struct Factorization;
    struct MassSolvers;

    OperatorFamily() = default;

    std::shared_ptr<const Factorization> factorization(double t, double dt) const;

    Backend backend_ = Backend::Spectral;
    Rectangle domain_;
    Resolution resolution_;
    Coefficients coeffs_;
    double garding_shift_ = 0.0;
    bool has_advection_ = false;
    Vector laplace_eigenvalues_;  // Spectral
    Matrix transform1_, transform2_;  // Spectral: e_i at the Nemytskii grid nodes
    std::optional<FemData> fem_;
    std::unique_ptr<MassSolvers> mass_solvers_;

    mutable std::mutex cache_mutex_;
    mutable std::optional<std::pair<double, double>> cache_key_;
    mutable std::shared_ptr<Factorization> cache_value_;
};

/// Cosine-basis family on `domain` with mode indices 0 <= i < N1, 0 <= j < N2.
std::unique_ptr<OperatorFamily> build_spectral_family(const Rectangle& domain, Resolution modes,
                                                      Coefficients coeffs);

/// P1 family on an n1 x n2 cell mesh. `advection` may be empty.
std::unique_ptr<OperatorFamily> build_fem_family(const Rectangle& domain, Resolution cells,
                                                 Coefficients coeffs, VelocityField advection,
                                                 const BoundarySpec& bc, double garding_shift = 0.0);

OperatorAction apply_A(const OperatorFamily& fam, double t, const GridFunction& v);

/// (I + dt A_h(t))^{-1} rhs. For Fem the Dirichlet entries of rhs are ignored and
/// replaced by the prescribed values.
GridFunction solve_resolvent(const OperatorFamily& fam, double t, double dt,
                             const GridFunction& rhs);

/// In-place batched variant sharing one factorization.
void solve_resolvent_many(const OperatorFamily& fam, double t, double dt,
                          std::vector<GridFunction>& rhs);

/// Largest free-dof count accepted by fractional_apply on the Fem backend.
inline constexpr int kMaxDenseFractionalDofs = 2000;

/// A_h(t)^power v, defined spectrally.
GridFunction fractional_apply(const OperatorFamily& fam, double t, double power,
                              const GridFunction& v);

/// L2 projection P_h u.
GridFunction project(const OperatorFamily& fam, const PointFunction& u);

/// Solves M x = b over the free dofs (Fem); identity for Spectral.
Vector mass_solve_free(const OperatorFamily& fam, const Vector& b_free);

double l2_inner(const OperatorFamily& fam, const GridFunction& u, const GridFunction& v);
double l2_norm(const OperatorFamily& fam, const GridFunction& v);

/// Point value of a discrete function.
double evaluate(const OperatorFamily& fam, const GridFunction& v, double x, double y);

/// L2 distance between a Fem function and a Spectral function on the same domain,
/// by collapsed Gauss-Legendre quadrature on every triangle.
double cross_backend_l2_distance(const OperatorFamily& fem_family, const GridFunction& fem_value,
                                 const OperatorFamily& spectral_family,
                                 const GridFunction& spectral_value);

/// Spectral only: 1D cell-midpoint nodes of the Nemytskii transform grid.
std::vector<double> transform_nodes(int modes, double length);
/// Spectral coefficients -> values on the (N1+1) x (N2+1) transform grid.
Matrix spectral_to_grid(const OperatorFamily& fam, const GridFunction& v);
/// Inverse of spectral_to_grid on band-limited data.
GridFunction grid_to_spectral(const OperatorFamily& fam, const Matrix& grid);

} // namespace spde::operators
