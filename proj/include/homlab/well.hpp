#pragma once

namespace homlab {

/// Double-well potential W(s) = (1 - s^2)^2, minimized at s = +-1.
inline double double_well(double s) {
    const double q = 1.0 - s * s;
    return q * q;
}

/// W'(s) = -4 s (1 - s^2).
inline double double_well_deriv(double s) {
    return -4.0 * s * (1.0 - s * s);
}

/// Cost of one slope transition between the wells, 2 * integral_{-1}^{1} sqrt(W).
/// For the quartic well this is 2 * (4/3) = 8/3.
inline constexpr double kTransitionCost = 8.0 / 3.0;

}  // namespace homlab
