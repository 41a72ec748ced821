#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "spde/core.hpp"
#include "spde/operators.hpp"

namespace spde::noise {

/// Covariance spectrum q_ij = (i^2 + j^2)^-(beta + delta) for 1 <= i <= K1, 1 <= j <= K2.
struct NoiseSpec {
    double beta = 1.0;
    double delta = 0.001;
    Resolution modes;  // (K1, K2)
    Rectangle domain;
    Vector q;          // q_ij at (i-1) + K1 * (j-1)
    Vector sqrt_q;
    double trace = 0.0;

    Eigen::Index index(int i, int j) const { return (i - 1) + static_cast<Eigen::Index>(modes.n1) * (j - 1); }
    double q_at(int i, int j) const;
    Eigen::Index num_modes() const { return q.size(); }
};

NoiseSpec make_noise_spec(double beta, double delta, Resolution modes, const Rectangle& domain);

/// Table of Brownian increments dB_ij^(m), one vector per step laid out like NoiseSpec::q.
///
/// A coarsened path keeps a handle on the fine table it came from, so coarse increments
/// are always summed from the original fine increments in ascending order.
struct NoisePath {
    double dt = 0.0;
    int steps = 0;
    Resolution modes;
    std::uint64_t seed = 0;
    int stride = 1;  // fine steps per step of this path
    std::vector<Vector> increments;
    std::shared_ptr<const std::vector<Vector>> fine;

    double at(int m, int i, int j) const;
};

/// Increments of step m under `seed`: dB_ij = sqrt(dt) * z0(seed, i, j, m).
/// If `residual` is non-null it receives the paired independent normal z1.
void draw_increments(std::uint64_t seed, Resolution modes, int m, double dt, Vector& increments,
                     Vector* residual = nullptr);

NoisePath sample_path(const NoiseSpec& spec, int steps, double dt, std::uint64_t master_seed);

NoisePath coarsen_path(const NoisePath& path, int factor);

/// Converts weighted mode coefficients sqrt(q_ij) dB_ij into a field on a family.
/// Spectral: scatter into the operator's modes. Fem: cosine series at the mesh nodes,
/// zero on Dirichlet nodes.
class FieldSynthesizer {
public:
    FieldSynthesizer(const NoiseSpec& spec, const operators::OperatorFamily& fam);

    /// `increments` in NoiseSpec layout; the sqrt(q) weight is applied here.
    GridFunction field(const Vector& increments) const;

private:
    const NoiseSpec& spec_;
    const operators::OperatorFamily& fam_;
    Matrix e1_, e2_;  // Fem: node-by-mode cosine tables
    std::vector<Eigen::Index> target_;  // Spectral: operator index per noise mode
};

GridFunction increment_field(const NoiseSpec& spec, const NoisePath& path, int m,
                             const operators::OperatorFamily& fam);

/// Debug dump: header "m,i,j,increment" then one row per entry, shortest round-trip decimals.
void write_path_csv(const NoisePath& path, std::ostream& out);
/// Reads a dump written by write_path_csv; dt and seed are not part of the table.
NoisePath read_path_csv(std::istream& in, double dt);

} // namespace spde::noise
