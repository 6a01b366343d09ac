#include "homlab/gamma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "homlab/diffuse.hpp"
#include "homlab/rng.hpp"
#include "homlab/well.hpp"

namespace homlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double phi(double t) { return std::isinf(t) ? 1.0 : t / (1.0 + t); }

/// Trapezoid of m a u^2 over the unit window around y, on the probe grid.
double window_confinement(const DiscreteProfile& u, const CoefficientField& a, double m, double y) {
    const auto K = static_cast<Eigen::Index>(std::lround(1.0 / u.h));
    const auto i0 = static_cast<Eigen::Index>(std::lround((y - 0.5 - u.x0) / u.h));
    if (i0 < 0 || i0 + K >= u.size()) throw std::domain_error("unit window exceeds the probe window");
    double s = 0;
    for (Eigen::Index i = i0; i <= i0 + K; ++i) {
        const double t = u.x0 + u.h * static_cast<double>(i);
        const double g = m * a.eval(t) * u.values[i] * u.values[i];
        s += (i == i0 || i == i0 + K) ? 0.5 * g : g;
    }
    return u.h * s;
}

int jumps_in_unit_window(const SawtoothProfile& saw, double y) {
    int k = 0;
    for (double j : saw.jumps)
        if (j > y - 0.5 && j < y + 0.5) ++k;
    return k;
}

/// Sample a sawtooth on the probe grid with each corner replaced by the tanh
/// layer of scale tau (correction -s * tau * log(1 + exp(-2|t - c|/tau))).
DiscreteProfile smoothed_profile(const SawtoothProfile& saw, double tau, double x0, double h,
                                 Eigen::Index n) {
    DiscreteProfile out = DiscreteProfile::sample(x0, h, n, [&](double t) { return saw.value_at(t); });
    int s_in = saw.initial_slope;
    for (double c : saw.jumps) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = std::abs(x0 + h * static_cast<double>(i) - c) / tau;
            if (z < 40.0) out.values[i] += s_in * (-tau * std::log1p(std::exp(-2.0 * z)));
        }
        s_in = -s_in;
    }
    return out;
}

}  // namespace

double profile_distance(const DiscreteProfile& a, const DiscreteProfile& b) {
    if (a.size() != b.size() || std::abs(a.h - b.h) > 1e-15)
        throw std::invalid_argument("profiles must share one window grid");
    const Eigen::Index n = a.size() - 1;
    double s = (a.values - b.values).square().sum();
    s -= 0.5 * ((a.values[0] - b.values[0]) * (a.values[0] - b.values[0]) +
                (a.values[n] - b.values[n]) * (a.values[n] - b.values[n]));
    return std::sqrt(a.h * s);
}

double yosida(const DiscretizedFunctional& f, double lambda, const DiscreteProfile& u0, double y0) {
    if (f.samples.empty()) throw std::invalid_argument("functional has no sample points");
    if (lambda <= 0) throw std::invalid_argument("lambda must be positive");
    double best = kInf;
    for (const auto& s : f.samples) {
        if (std::isinf(s.value)) continue;
        best = std::min(best, s.value + lambda * (profile_distance(s.u, u0) + std::abs(s.y - y0)));
    }
    return best;
}

double gamma_distance(const DiscretizedFunctional& f, const DiscretizedFunctional& g,
                      const GammaDistanceConfig& cfg) {
    if (cfg.probes.empty()) throw std::invalid_argument("distance config has no probes");
    if (cfg.lambda_ladder.empty() ||
        !std::is_sorted(cfg.lambda_ladder.begin(), cfg.lambda_ladder.end()) ||
        cfg.lambda_ladder.front() <= 0)
        throw std::invalid_argument("lambda ladder must be positive and increasing");
    const int terms = std::min<int>(cfg.max_probe_terms, static_cast<int>(cfg.probes.size()));
    double d = 0;
    for (double lambda : cfg.lambda_ladder) {
        for (int k = 0; k < terms; ++k) {
            const auto& [u, y] = cfg.probes[static_cast<std::size_t>(k)];
            const double w = std::exp2(-lambda - static_cast<double>(k + 1));
            d += w * std::abs(phi(yosida(f, lambda, u, y)) - phi(yosida(g, lambda, u, y)));
        }
    }
    return d;
}

ProbeSet make_default_probes(int count, double window_len, double step, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("probe count must be positive");
    ProbeSet set;
    set.window_len = window_len;
    set.step = step;
    const double hw = 0.5 * window_len;
    const auto n = static_cast<Eigen::Index>(std::lround(window_len / step)) + 1;
    const double ys[3] = {0.0, 0.25, -0.25};

    for (int i = 0; i < count; ++i) {
        Probe p;
        p.y = ys[i % 3];
        const double r1 = uniform01(mix64(seed, 1000 + static_cast<std::uint64_t>(i)));
        const double r2 = uniform01(mix64(seed, 2000 + static_cast<std::uint64_t>(i)));
        const double r3 = uniform01(mix64(seed, 3000 + static_cast<std::uint64_t>(i)));
        switch (i % 9) {
            case 0: {
                p.label = "affine+";
                SawtoothProfile saw;
                saw.half_width = hw;
                saw.anchor_value = -hw + 0.2 * (r1 - 0.5);
                saw.initial_slope = +1;
                p.saw = saw;
                break;
            }
            case 1: {
                p.label = "affine-";
                SawtoothProfile saw;
                saw.half_width = hw;
                saw.anchor_value = hw * 0.5;
                saw.initial_slope = -1;
                p.saw = saw;
                break;
            }
            case 2: {
                p.label = "tent";
                SawtoothProfile saw;
                saw.half_width = hw;
                saw.anchor_value = 0.1 * (r2 - 0.5);
                saw.initial_slope = +1;
                saw.jumps = {0.3 * (r1 - 0.5)};
                p.saw = saw;
                break;
            }
            case 3: {
                p.label = "zigzag3";
                SawtoothProfile saw;
                saw.half_width = hw;
                saw.anchor_value = 0.0;
                saw.initial_slope = (i / 8) % 2 ? -1 : +1;
                const double c = 0.2 * (r1 - 0.5);
                saw.jumps = {c - 0.45 * hw, c, c + 0.45 * hw};
                p.saw = saw;
                break;
            }
            case 4: {
                p.label = "zigzag5";
                SawtoothProfile saw;
                saw.half_width = hw;
                saw.anchor_value = 0.05;
                saw.initial_slope = +1;
                const double c = 0.1 * (r2 - 0.5);
                saw.jumps = {c - 0.6 * hw, c - 0.3 * hw, c, c + 0.3 * hw, c + 0.6 * hw};
                p.saw = saw;
                break;
            }
            case 5:
                p.label = "halfslope";
                p.u = DiscreteProfile::sample(-hw, step, n,
                                              [&](double t) { return 0.5 * t + 0.1 * (r1 - 0.5); });
                break;
            case 6:
                p.label = "bump";
                p.u = DiscreteProfile::sample(-hw, step, n, [&](double t) {
                    return (0.5 + 0.4 * r2) * std::exp(-t * t / (0.2 + 0.3 * r3));
                });
                break;
            case 7: {
                // Transition smoothed at a fixed scale: close to a tent in
                // L2 but never a sawtooth.
                p.label = "smoothstep";
                SawtoothProfile tent;
                tent.half_width = hw;
                tent.anchor_value = 0.05 * (r1 - 0.5);
                tent.initial_slope = +1;
                tent.jumps = {0.3 * (r2 - 0.5)};
                p.u = smoothed_profile(tent, 0.05 + 0.05 * r3, -hw, step, n);
                break;
            }
            default:
                p.label = "noise";
                p.u = DiscreteProfile::sample(-hw, step, n, [&](double t) {
                    return 0.3 * std::sin((1.0 + 3.0 * r1) * t + 6.28 * r2) +
                           0.2 * std::cos((2.0 + 2.0 * r3) * t);
                });
                break;
        }
        if (p.saw) {
            p.saw->validate();
            p.u = DiscreteProfile::sample(-hw, step, n, [&](double t) { return p.saw->value_at(t); });
        }
        p.label += "#" + std::to_string(i);
        set.probes.push_back(std::move(p));
    }
    return set;
}

GammaDistanceConfig distance_config(const ProbeSet& probes) {
    GammaDistanceConfig cfg;
    for (const auto& p : probes.probes) cfg.probes.emplace_back(p.u, p.y);
    return cfg;
}

DiscretizedFunctional snapshot_integrand(double eps, const CoefficientField& a, double m_value,
                                         const ProbeSet& probes, bool add_smoothed) {
    if (eps <= 0) throw std::invalid_argument("eps must be positive");
    DiscretizedFunctional f;
    const double tau = micro_transition_scale(eps);
    for (const auto& p : probes.probes) {
        FunctionalSample s;
        s.label = p.label;
        s.u = p.u;
        s.y = p.y;
        s.value = local_average_integrand(p.u, a, m_value, p.y, eps);
        f.samples.push_back(std::move(s));

        if (add_smoothed && p.saw && !p.saw->jumps.empty()) {
            FunctionalSample sm;
            sm.label = "smoothed:" + p.label;
            sm.y = p.y;
            sm.u = smoothed_profile(*p.saw, tau, p.u.x0, p.u.h, p.u.size());
            // The tanh layers are far below the probe grid, so their energy
            // enters in closed form: (4/3)(eps^2/tau + tau/eps^2) per flip,
            // equal to A0 at the optimal scale tau = eps^2. The confinement
            // term is the window quadrature of the smoothed profile.
            const double per_flip = (4.0 / 3.0) * (eps * eps / tau + tau / (eps * eps));
            sm.value = per_flip * jumps_in_unit_window(*p.saw, p.y) +
                       window_confinement(sm.u, a, m_value, p.y);
            f.samples.push_back(std::move(sm));
        }
    }
    return f;
}

DiscretizedFunctional snapshot_sharp(const CoefficientField& a, double m_value, const ProbeSet& probes) {
    DiscretizedFunctional f;
    for (const auto& p : probes.probes) {
        FunctionalSample s;
        s.label = p.label;
        s.u = p.u;
        s.y = p.y;
        if (p.saw) {
            s.value = kTransitionCost * jumps_in_unit_window(*p.saw, p.y) +
                      window_confinement(p.u, a, m_value, p.y);
        } else {
            s.value = kInf;
        }
        f.samples.push_back(std::move(s));
    }
    return f;
}

double smoothed_transition_value(double eps, const CoefficientField& a, double m_value,
                                 const SawtoothProfile& saw, double window_len, double y) {
    const double tau = micro_transition_scale(eps);
    const double h = tau / 8.0;
    const double hw = 0.5 * window_len;
    const auto n = static_cast<Eigen::Index>(std::lround(window_len / h)) + 1;
    const DiscreteProfile u = smoothed_profile(saw, tau, -hw, h, n);
    return local_average_integrand(u, a, m_value, y, eps);
}

GammaLimitReport gamma_limit_check(const std::vector<double>& eps_schedule, const CoefficientField& a,
                                   double m_value, const ProbeSet& probes) {
    if (eps_schedule.empty()) throw std::invalid_argument("eps schedule must be nonempty");
    GammaLimitReport rep;
    rep.eps_schedule = eps_schedule;

    const DiscretizedFunctional sharp = snapshot_sharp(a, m_value, probes);
    const GammaDistanceConfig cfg = distance_config(probes);
    for (const auto& p : probes.probes) rep.probe_labels.push_back(p.label);
    for (const auto& s : sharp.samples) rep.sharp_values.push_back(s.value);

    for (double eps : eps_schedule) {
        const DiscretizedFunctional feps = snapshot_integrand(eps, a, m_value, probes);
        rep.distances.push_back(gamma_distance(feps, sharp, cfg));
        std::vector<double> vals;
        for (const auto& s : feps.samples)
            if (s.label.rfind("smoothed:", 0) != 0) vals.push_back(s.value);
        rep.probe_values.push_back(std::move(vals));
    }

    rep.distances_decreasing = true;
    for (std::size_t i = 1; i < rep.distances.size(); ++i)
        if (!(rep.distances[i] < rep.distances[i - 1])) rep.distances_decreasing = false;

    rep.divergent_probes_confirmed = true;
    for (std::size_t k = 0; k < rep.probe_labels.size(); ++k) {
        if (!std::isinf(rep.sharp_values[k])) continue;
        if (rep.probe_values.back()[k] <= rep.probe_values.front()[k])
            rep.divergent_probes_confirmed = false;
    }
    return rep;
}

}  // namespace homlab
