#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "homlab/field.hpp"
#include "homlab/profile.hpp"

namespace homlab {

enum class LagrangianKind { power, custom };

/// Convex Lagrangian L(y, s) with growth c0 |s|^p <= L <= C0 (1 + |s|)^p.
/// "power" is L(y, s) = a(y) |s|^p with the coefficient field supplied at
/// solve time; "custom" tabulates convex s-profiles on a periodic y lattice.
struct LagrangianSpec {
    LagrangianKind kind = LagrangianKind::power;
    double p = 2.0;
    double c0 = 1.0;
    double C0 = 2.0;

    // custom: values(j, k) = L(y_j, s_k) on y_j = j * y_step (periodic).
    Eigen::ArrayXd s_grid;
    Eigen::MatrixXd values;
    double y_step = 1.0;

    static LagrangianSpec power_law(double p, double c0 = 1.0, double C0 = 2.0);
    static LagrangianSpec tabulated(Eigen::ArrayXd s_grid, Eigen::MatrixXd values, double y_step,
                                    double p, double c0, double C0);

    /// Checks the growth sandwich and midpoint convexity on the tabulated
    /// samples; throws std::invalid_argument on violation.
    void validate() const;
};

struct HomogenizedPoint {
    double q = 0;
    double R = 0;
    double m_R = 0;        // cell minimum per unit volume
    double lambda = 0;     // dual multiplier for the mean-slope constraint
    double mean_residual = 0;  // |mean u' - q| after bisection
    std::uint64_t seed = 0;
};

/// One-dimensional cell minimum
///   m_R(q) = min { avg_{Q_R} L(y, u'(y)) : u(+-R) = +-qR }
/// computed by convex duality: u'(y) minimizes L(y, s) - lambda s pointwise
/// and lambda is tuned by bisection until the mean slope equals q. Tabulated
/// Lagrangians complete tied cells fractionally so the constraint is met
/// exactly.
HomogenizedPoint cell_minimum_1d(const LagrangianSpec& L, const CoefficientField& a, double q, double R,
                                 double dx = 0.05);

struct HomogenizedSummary {
    double q = 0;
    std::vector<double> r_schedule;
    std::vector<double> mean_m;  // across seeds, per R
    std::vector<double> std_m;
    double f_star = 0;  // mean at the largest R
    bool concentrated = true;
};

/// Homogenized Lagrangian estimates f_*(q) per requested slope: cell minima
/// over every (R, seed) pair, averaged across seeds at the largest R.
std::vector<HomogenizedSummary> homogenized_lagrangian(const LagrangianSpec& L, const FieldModel& model,
                                                       const std::vector<double>& q_values,
                                                       const std::vector<double>& r_schedule,
                                                       const std::vector<std::uint64_t>& seeds,
                                                       double dx = 0.05);

/// v(y) = q y + cut(y / R) * (u(y) - q y) with a piecewise-linear cutoff that
/// is 1 on Q_{1-delta} and 0 at the boundary (slope bounded by 2 / delta).
/// The result matches the affine boundary data exactly.
DiscreteProfile glue_affine_boundary(const DiscreteProfile& u, double q, double delta);

struct ConvexityReport {
    int checked = 0;
    int violations = 0;
    double max_excess = 0;  // worst midpoint violation beyond tolerance
};

/// Midpoint-convexity audit of sampled (q, f) pairs: for every pair with a
/// sampled midpoint, f(mid) <= (f(lo) + f(hi)) / 2 + tol.
ConvexityReport convexity_check(std::vector<std::pair<double, double>> points, double tol = 1e-9);

}  // namespace homlab
