#pragma once

#include <vector>

#include "homlab/field.hpp"

namespace homlab {

/// Continuous piecewise-linear profile with slope alternating in {-1, +1} on
/// the window [-half_width, +half_width]. "Jumps" are the slope-flip positions.
struct SawtoothProfile {
    double anchor_value = 0.0;  // u at the left end of the window
    int initial_slope = +1;     // +1 or -1
    std::vector<double> jumps;  // strictly increasing, inside the open window
    double half_width = 0.5;

    double window_length() const { return 2.0 * half_width; }
    int jump_count() const { return static_cast<int>(jumps.size()); }

    /// Throws std::invalid_argument on an ill-formed profile.
    void validate() const;

    double value_at(double t) const;
    int slope_at(double t) const;
    double end_value() const;

    /// sup |u| over the window (attained at a breakpoint).
    double sup_abs() const;
};

/// Minimum gap between consecutive jumps; window length when there are fewer
/// than two jumps.
double min_jump_spacing(const SawtoothProfile& u);

/// sup |u| over the window; bounded independently of R for energy minimizers.
double sup_bound_check(const SawtoothProfile& u);

/// Sharp-interface cell energy per unit length,
///   (1/R) * (A0 * jump_count + m * integral a(t) u(t)^2 dt),
/// charging one transition cost A0 = 8/3 per slope flip. The integral is done
/// piecewise-exactly between jumps and coefficient breakpoints (Simpson), with
/// max_step capping the segment length for smooth coefficients.
double sharp_energy(const SawtoothProfile& u, const CoefficientField& a, double m, double R,
                    double max_step = 1e-2);

/// integral_{lo}^{hi} a(t) u(t)^2 dt for a piecewise-linear u.
double integrate_a_u_squared(const SawtoothProfile& u, const CoefficientField& a, double lo, double hi,
                             double max_step = 1e-2);

}  // namespace homlab
