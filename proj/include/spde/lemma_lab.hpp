#pragma once

#include <string>
#include <vector>

#include "spde/core.hpp"
#include "spde/matrix_functions.hpp"

namespace spde::lemma {

/// Dense time-dependent family A(t) = theta(t) B + k(t) I.
struct DenseFamily {
    Matrix generator;  // B
    double advection = 0.0;
    TimeCoefficient theta;
    TimeCoefficient reaction;
    double horizon = 1.0;
    dense::EigenDecomposition eig;  // of B
    /// Largest ||(A(t) - A(s)) A(0)^{-1}|| / |t - s| on the construction grid.
    double lipschitz = 0.0;

    int dim() const { return static_cast<int>(generator.rows()); }
    Matrix A(double t) const;
    Matrix power(double t, double p) const;
    /// exp(-s A(t)).
    Matrix exp_minus(double t, double s) const;
    /// (I + dt A(t))^{-1}.
    Matrix resolvent(double t, double dt) const;
};

/// Default theta(t) = 1 + exp(-t).
TimeCoefficient default_theta();

/// Checks positivity of the spectrum on a 65-point grid over [0, horizon] and records the
/// Lipschitz constant. Throws ConfigError if some eigenvalue has nonpositive real part.
DenseFamily make_family(Matrix generator, TimeCoefficient theta, TimeCoefficient reaction,
                        double horizon = 1.0, double advection = 0.0);

/// B = tridiag(-1, 2, -1) / h^2 + nu * central difference / h, h = 1 / (n + 1).
Matrix advection_diffusion_generator(int n, double nu);

/// Built-in family on the generator above with theta = 1 + e^-t, k = 0, horizon 1.
DenseFamily make_dense_family(int n, double nu);

/// exp(-s A(t)) v.
Vector matrix_exp_apply(const DenseFamily& fam, double t, double s, const Vector& v);

/// sup over 1 <= i <= m <= M of t_{m-i+1}^alpha ||A(t_i)^alpha prod_{j=i}^m (I + dt A(t_j))^{-1}||.
double smoothing_sup(const DenseFamily& fam, double alpha, double dt, int steps);

/// ||A(t_k)^{-a1} (exp(-dt A(t_j)) - (I + dt A(t_j))^{-1}) A(t_j)^{-a2}|| / dt^(a1 + a2).
double exp_resolvent_gap(const DenseFamily& fam, double a1, double a2, double dt, int j, int k);

/// sup over j, k in {0, j} of ||A(t_k)^alpha (I + s A(t_j))^{-n}|| (n s)^alpha, j = 0..steps.
double resolvent_power_sup(const DenseFamily& fam, double alpha, int n, double s, int steps);

enum class GapMode { ExpVsResolvent, EvolutionVsResolvent };
enum class DataKind { Smooth, NonSmooth };

struct ProductGap {
    /// Smooth: sup_{1<=i<=m} ||D A(0)^{-alpha/2}|| / dt^{alpha/2}.
    /// NonSmooth: sup_{1<=i<m} t_{m-i}^{alpha/2} ||D|| / dt^{alpha/2}.
    /// D = prod_{j=i}^m X_j - prod_{j=i-1}^{m-1} (I + dt A(t_j))^{-1}, X_j = exp(-dt A(t_j))
    /// or U(t_j, t_{j-1}).
    double scaled_sup = 0.0;
    /// Largest unscaled ||D A(0)^{-alpha/2}|| (Smooth) or ||D|| (NonSmooth).
    double max_gap = 0.0;
    /// Bound on the evolution oracle's error in any product (0 for ExpVsResolvent).
    double oracle_error = 0.0;
};

/// Sub-steps of the exponential midpoint oracle for U(t_j, t_{j-1}).
inline constexpr int kOracleSubsteps = 64;

/// U(t1, t0) for y' = -A(t) y by `substeps` exponential midpoint steps.
Matrix evolution_oracle(const DenseFamily& fam, double t0, double t1, int substeps);

/// Throws NumericalError when the oracle error is not 100x below max_gap.
ProductGap product_gap(const DenseFamily& fam, GapMode mode, DataKind data, double alpha, double dt,
                       int steps);

/// (dt sum_{j=1}^m t_{m-j+1}^{-1+a1} t_j^{-1+a2}) / t_m^{-1+a1+a2}.
double convolution_bound_check(double a1, double a2, double dt, int m);

/// ||[(I + dt A_{j+1})^{-1} - (I + dt A_i)^{-1}] - dt (I + dt A_{j+1})^{-1} (A_i - A_{j+1})
/// (I + dt A_i)^{-1}||, which vanishes identically.
double resolvent_identity_residual(const DenseFamily& fam, double dt, int i, int j);

/// Sweep steps dt = 2^-3 .. 2^-10 on [0, 1].
std::vector<double> sweep_dts();

struct SweepResult {
    std::string lemma;       // "6", "7", "8", "9", "10"
    std::string parameters;  // "key=value;..." without commas
    std::vector<double> dts;
    std::vector<double> values;

    /// max / min of the values over the sweep.
    double ratio() const;
};

/// Built-in family grid.
inline constexpr int kBuiltinDims[] = {1, 4, 8, 16};
inline constexpr double kBuiltinAdvections[] = {0.0, 1.0, 5.0};

/// Built-in parameter sets of one sweep id ("6".."10") or "all" on the n-dimensional family.
std::vector<SweepResult> run_sweeps(const std::string& which, int n, double nu);

/// Convolution ratio with a1 = a2 = 1/2 at step count m on [0, 1]; tends to pi.
double convolution_limit_ratio(int m);

/// CSV with header lemma,parameters,dt,value.
std::string sweep_csv(const std::vector<SweepResult>& results);

} // namespace spde::lemma
