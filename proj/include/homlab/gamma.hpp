#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "homlab/field.hpp"
#include "homlab/profile.hpp"
#include "homlab/sawtooth.hpp"

namespace homlab {

/// One sampled point of a functional: a window profile u, an offset y and the
/// (possibly infinite) value f(u, y).
struct FunctionalSample {
    std::string label;
    DiscreteProfile u;
    double y = 0;
    double value = 0;
};

/// A functional discretized to finitely many sample points. The infimum in
/// the Yosida regularization runs over the samples, an upper bound for the
/// true regularization. Base metric: L2 on the window, |.| on y.
struct DiscretizedFunctional {
    std::vector<FunctionalSample> samples;
};

/// L2 window distance sqrt(h * sum (u_i - v_i)^2); profiles must share grids.
double profile_distance(const DiscreteProfile& a, const DiscreteProfile& b);

/// R_lambda f(u0, y0) = min over samples of value + lambda (d(u, u0) + |y - y0|).
double yosida(const DiscretizedFunctional& f, double lambda, const DiscreteProfile& u0, double y0);

struct GammaDistanceConfig {
    std::vector<std::pair<DiscreteProfile, double>> probes;  // (u_k, y_k), k = 1, 2, ...
    std::vector<double> lambda_ladder{1, 2, 4, 8, 16};
    int max_probe_terms = 16;  // tail weights 2^-(lambda+k) make further terms immaterial
};

/// d(f, g) = sum over (lambda, k) of 2^-(lambda+k) |phi(R_lambda f(p_k)) -
/// phi(R_lambda g(p_k))| with phi(t) = t / (1 + t); a pseudometric that
/// vanishes iff all probed Yosida values coincide.
double gamma_distance(const DiscretizedFunctional& f, const DiscretizedFunctional& g,
                      const GammaDistanceConfig& cfg);

/// A probe window: sampled profile plus the generating sawtooth when the
/// profile is one (finite sharp value), used for jump counts and smoothing.
struct Probe {
    std::string label;
    DiscreteProfile u;
    double y = 0;
    std::optional<SawtoothProfile> saw;
};

struct ProbeSet {
    double window_len = 2.0;
    double step = 2.0 / 8192;
    std::vector<Probe> probes;
};

/// Deterministic mix of affine, sawtooth, fractional-slope, smooth-bump and
/// noise windows; sawtooth probes carry their generating profiles.
ProbeSet make_default_probes(int count = 64, double window_len = 2.0, double step = 2.0 / 8192,
                             std::uint64_t seed = 0);

GammaDistanceConfig distance_config(const ProbeSet& probes);

/// Snapshot of the microscale integrand f_eps on the probe windows. Sawtooth
/// probes contribute an additional sample smoothed at the layer scale eps^2,
/// whose transition cost is evaluated in closed form (the tanh layer energy
/// (4/3)(eps^2/tau + tau/eps^2) per flip) and whose confinement term is the
/// window quadrature of the smoothed profile.
DiscretizedFunctional snapshot_integrand(double eps, const CoefficientField& a, double m_value,
                                         const ProbeSet& probes, bool add_smoothed = true);

/// Snapshot of the sharp-interface integrand: A0 per jump plus the window
/// quadrature of m a u^2 on sawtooth probes, infinity elsewhere.
DiscretizedFunctional snapshot_sharp(const CoefficientField& a, double m_value, const ProbeSet& probes);

/// Direct fine-grid value of f_eps at the eps-smoothed version of a sawtooth
/// window (grid step resolving the eps^2 layer). Converges to
/// A0 * jumps + integral m a u^2 as eps goes to zero.
double smoothed_transition_value(double eps, const CoefficientField& a, double m_value,
                                 const SawtoothProfile& saw, double window_len, double y = 0.0);

struct GammaLimitReport {
    std::vector<double> eps_schedule;
    std::vector<double> distances;       // gamma_distance(f_eps, sharp) per eps
    bool distances_decreasing = false;
    std::vector<std::string> probe_labels;
    std::vector<double> sharp_values;                // per probe (inf allowed)
    std::vector<std::vector<double>> probe_values;   // [eps][probe]
    bool divergent_probes_confirmed = false;         // non-sawtooth values blow up
};

/// Snapshot f_eps for every eps in the schedule, measure the metric distance
/// to the sharp snapshot, and track per-probe value traces.
GammaLimitReport gamma_limit_check(const std::vector<double>& eps_schedule, const CoefficientField& a,
                                   double m_value, const ProbeSet& probes);

}  // namespace homlab
