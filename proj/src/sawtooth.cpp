#include "homlab/sawtooth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "homlab/well.hpp"

namespace homlab {

void SawtoothProfile::validate() const {
    if (half_width <= 0) throw std::invalid_argument("sawtooth window must have positive length");
    if (initial_slope != 1 && initial_slope != -1)
        throw std::invalid_argument("sawtooth slope must be +1 or -1");
    double prev = -half_width;
    for (double j : jumps) {
        if (!(j > prev)) throw std::invalid_argument("jump positions must be strictly increasing");
        prev = j;
    }
    if (!jumps.empty() && (jumps.front() <= -half_width || jumps.back() >= half_width))
        throw std::invalid_argument("jump positions must lie inside the open window");
}

double SawtoothProfile::value_at(double t) const {
    double v = anchor_value;
    double pos = -half_width;
    int s = initial_slope;
    for (double j : jumps) {
        if (t <= j) break;
        v += s * (j - pos);
        pos = j;
        s = -s;
    }
    return v + s * (std::min(t, half_width) - pos);
}

int SawtoothProfile::slope_at(double t) const {
    int s = initial_slope;
    for (double j : jumps) {
        if (t < j) break;
        s = -s;
    }
    return s;
}

double SawtoothProfile::end_value() const { return value_at(half_width); }

double SawtoothProfile::sup_abs() const {
    double m = std::max(std::abs(value_at(-half_width)), std::abs(value_at(half_width)));
    for (double j : jumps) m = std::max(m, std::abs(value_at(j)));
    return m;
}

double min_jump_spacing(const SawtoothProfile& u) {
    if (u.jumps.size() < 2) return u.window_length();
    double gap = u.window_length();
    for (std::size_t i = 1; i < u.jumps.size(); ++i) gap = std::min(gap, u.jumps[i] - u.jumps[i - 1]);
    return gap;
}

double sup_bound_check(const SawtoothProfile& u) { return u.sup_abs(); }

namespace {

/// Simpson rule on [lo, hi] for a(t) * u(t)^2 with u linear on the segment.
/// Exact when a is constant there (integrand is a cubic).
double simpson_a_u2(const SawtoothProfile& u, const CoefficientField& a, double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    auto f = [&](double t) {
        const double v = u.value_at(t);
        return a.eval(t) * v * v;
    };
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
}

}  // namespace

double integrate_a_u_squared(const SawtoothProfile& u, const CoefficientField& a, double lo, double hi,
                             double max_step) {
    if (hi <= lo) return 0.0;
    std::vector<double> cuts;
    cuts.push_back(lo);
    for (double j : u.jumps)
        if (j > lo && j < hi) cuts.push_back(j);
    a.breakpoints_in(lo, hi, cuts);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        const double s0 = cuts[i - 1];
        const double s1 = cuts[i];
        if (s1 - s0 < 1e-14) continue;
        const int nsub = std::max(1, static_cast<int>(std::ceil((s1 - s0) / max_step)));
        const double ds = (s1 - s0) / nsub;
        for (int k = 0; k < nsub; ++k) total += simpson_a_u2(u, a, s0 + k * ds, s0 + (k + 1) * ds);
    }
    return total;
}

double sharp_energy(const SawtoothProfile& u, const CoefficientField& a, double m, double R,
                    double max_step) {
    u.validate();
    if (std::abs(u.window_length() - R) > 1e-9 * std::max(1.0, R))
        throw std::invalid_argument("profile window does not match the requested cell size R");
    if (m <= 0) throw std::invalid_argument("modulus m must be positive");
    const double jumps = kTransitionCost * u.jump_count();
    const double quad = integrate_a_u_squared(u, a, -u.half_width, u.half_width, max_step);
    return (jumps + m * quad) / R;
}

}  // namespace homlab
