#include "homlab/diffuse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "homlab/parallel.hpp"
#include "homlab/well.hpp"

namespace homlab {

namespace {

void check_unit_profile(const DiscreteProfile& v) {
    v.validate();
    if (!v.spans_unit_interval())
        throw std::invalid_argument("diffuse profiles must be sampled on [0, 1]");
}

}  // namespace

DiffuseProblem::DiffuseProblem(double eps, const CoefficientField& a, const MacroModulus& m, double h,
                               Eigen::Index nodes)
    : eps_(eps), h_(h) {
    if (eps <= 0) throw std::invalid_argument("eps must be positive");
    if (h <= 0 || nodes < 3) throw std::invalid_argument("invalid diffuse grid");
    coeff_.resize(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
        const double x = std::min(1.0, h * static_cast<double>(i));
        coeff_[i] = eval_macro(m, x) * a.eval(x / eps);
    }
}

double DiffuseProblem::energy(const Eigen::ArrayXd& v) const {
    const Eigen::Index n = v.size() - 1;
    const double h = h_;
    const double inv_h = 1.0 / h;
    const double inv_2h = 0.5 / h;
    const double inv_h2 = 1.0 / (h * h);
    const double e4 = eps_ * eps_ * eps_ * eps_;
    const double ie2 = 1.0 / (eps_ * eps_);

    auto node = [&](double d1, double d2, Eigen::Index i) {
        return e4 * d2 * d2 + ie2 * (double_well(d1) + coeff_[i] * v[i] * v[i]);
    };

    double sum = 0.5 * node((v[1] - v[0]) * inv_h, (v[2] - 2.0 * v[1] + v[0]) * inv_h2, 0);
    for (Eigen::Index i = 1; i < n; ++i) {
        const double d1 = (v[i + 1] - v[i - 1]) * inv_2h;
        const double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_h2;
        sum += node(d1, d2, i);
    }
    sum += 0.5 * node((v[n] - v[n - 1]) * inv_h, (v[n] - 2.0 * v[n - 1] + v[n - 2]) * inv_h2, n);
    return h * sum;
}

double DiffuseProblem::energy_gradient(const Eigen::ArrayXd& v, Eigen::ArrayXd& grad) const {
    const Eigen::Index n = v.size() - 1;
    const double h = h_;
    const double inv_h = 1.0 / h;
    const double inv_2h = 0.5 / h;
    const double inv_h2 = 1.0 / (h * h);
    const double e4 = eps_ * eps_ * eps_ * eps_;
    const double ie2 = 1.0 / (eps_ * eps_);

    grad.resize(v.size());
    grad.setZero();
    double sum = 0;

    // Endpoint nodes use one-sided stencils and trapezoid weight 1/2.
    {
        const double d1 = (v[1] - v[0]) * inv_h;
        const double d2 = (v[2] - 2.0 * v[1] + v[0]) * inv_h2;
        sum += 0.5 * (e4 * d2 * d2 + ie2 * (double_well(d1) + coeff_[0] * v[0] * v[0]));
        const double wA = 0.5 * h * e4 * 2.0 * d2 * inv_h2;
        grad[0] += wA;
        grad[1] -= 2.0 * wA;
        grad[2] += wA;
        const double wB = 0.5 * h * ie2 * double_well_deriv(d1) * inv_h;
        grad[1] += wB;
        grad[0] -= wB;
        grad[0] += 0.5 * h * ie2 * coeff_[0] * 2.0 * v[0];
    }
    for (Eigen::Index i = 1; i < n; ++i) {
        const double d1 = (v[i + 1] - v[i - 1]) * inv_2h;
        const double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_h2;
        sum += e4 * d2 * d2 + ie2 * (double_well(d1) + coeff_[i] * v[i] * v[i]);
        const double wA = h * e4 * 2.0 * d2 * inv_h2;
        grad[i - 1] += wA;
        grad[i] -= 2.0 * wA;
        grad[i + 1] += wA;
        const double wB = h * ie2 * double_well_deriv(d1) * inv_2h;
        grad[i + 1] += wB;
        grad[i - 1] -= wB;
        grad[i] += h * ie2 * coeff_[i] * 2.0 * v[i];
    }
    {
        const double d1 = (v[n] - v[n - 1]) * inv_h;
        const double d2 = (v[n] - 2.0 * v[n - 1] + v[n - 2]) * inv_h2;
        sum += 0.5 * (e4 * d2 * d2 + ie2 * (double_well(d1) + coeff_[n] * v[n] * v[n]));
        const double wA = 0.5 * h * e4 * 2.0 * d2 * inv_h2;
        grad[n] += wA;
        grad[n - 1] -= 2.0 * wA;
        grad[n - 2] += wA;
        const double wB = 0.5 * h * ie2 * double_well_deriv(d1) * inv_h;
        grad[n] += wB;
        grad[n - 1] -= wB;
        grad[n] += 0.5 * h * ie2 * coeff_[n] * 2.0 * v[n];
    }
    return h * sum;
}

namespace {

DiffuseProblem make_problem(const DiscreteProfile& v, double eps, const CoefficientField& a,
                            const MacroModulus& m) {
    check_unit_profile(v);
    if (v.h > max_eval_grid_step(eps)) {
        std::ostringstream os;
        os << "grid too coarse for eps=" << eps << ": h=" << v.h << " exceeds "
           << max_eval_grid_step(eps) << "; the minimization default is h=" << default_grid_step(eps);
        throw SolverRefusal(os.str());
    }
    return DiffuseProblem(eps, a, m, v.h, v.size());
}

}  // namespace

double diffuse_energy(const DiscreteProfile& v, double eps, const CoefficientField& a,
                      const MacroModulus& m) {
    return make_problem(v, eps, a, m).energy(v.values);
}

Eigen::ArrayXd diffuse_gradient(const DiscreteProfile& v, double eps, const CoefficientField& a,
                                const MacroModulus& m) {
    Eigen::ArrayXd grad;
    make_problem(v, eps, a, m).energy_gradient(v.values, grad);
    return grad;
}

// ---------------------------------------------------------------------------
// Test-function construction

namespace {

struct Region {
    double start = 0, end = 0;
    int start_slope = +1;
    std::vector<double> flips;  // strictly inside (start, end)
    int end_slope() const { return flips.size() % 2 == 0 ? start_slope : -start_slope; }
};

/// Rebase a sawtooth block to start and end exactly at zero by shifting the
/// anchor and nudging the last flip.
std::vector<double> closed_block_flips(const SawtoothProfile& u) {
    if (std::abs(u.anchor_value) > 0.2)
        throw std::invalid_argument("construction pieces must be pinned (anchor near zero)");
    std::vector<double> flips = u.jumps;
    double e = u.end_value() - u.anchor_value;
    if (std::abs(e) > 0.4)
        throw std::invalid_argument("construction pieces must be pinned (end value near zero)");
    if (e != 0.0) {
        if (flips.empty())
            throw std::invalid_argument("cannot close a sawtooth block without slope flips");
        const double s_before = (flips.size() % 2 == 1 ? u.initial_slope : -u.initial_slope);
        // Moving the last flip by d changes the end value by 2 * s_before * d.
        const double d = -e / (2.0 * s_before);
        double& last = flips.back();
        const double lo = flips.size() >= 2 ? flips[flips.size() - 2] : -u.half_width;
        last += d;
        if (!(last > lo && last < u.half_width))
            throw std::invalid_argument("cannot close sawtooth block: end correction exceeds spacing");
    }
    return flips;
}

Region filler_region(double lo, double hi, double eps) {
    Region r;
    r.start = lo;
    r.end = hi;
    r.start_slope = +1;
    const double g = hi - lo;
    const auto nteeth = std::max<long>(1, std::lround(g / eps));
    const double p = g / (2.0 * static_cast<double>(nteeth));
    for (long j = 1; j < 2 * nteeth; ++j) r.flips.push_back(lo + p * static_cast<double>(j));
    return r;
}

}  // namespace

DiscreteProfile build_test_function(const std::vector<MacroPiece>& pieces, double eps, double delta,
                                    double h) {
    if (eps <= 0 || eps > 0.25)
        throw std::invalid_argument("build_test_function needs eps in (0, 0.25]");
    if (delta <= 0 || delta > 1) throw std::invalid_argument("delta must lie in (0, 1]");
    if (h <= 0) h = default_grid_step(eps);
    if (h > 0.5 * transition_scale(eps)) {
        std::ostringstream os;
        os << "grid step h=" << h << " cannot resolve the transition layer; use h <= "
           << default_grid_step(eps);
        throw SolverRefusal(os.str());
    }

    struct Cell {
        double lo, hi, center;
        const SawtoothProfile* u;
    };
    std::vector<Cell> cells;
    for (const auto& piece : pieces) {
        piece.profile.validate();
        const double half = eps * piece.profile.half_width;
        cells.push_back({piece.center - half, piece.center + half, piece.center, &piece.profile});
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.lo < b.lo; });

    const double k = static_cast<double>(std::max<std::size_t>(1, cells.size()));
    const double max_gap = delta / k + 1e-12;
    double cursor = 0.0;
    for (const auto& c : cells) {
        if (c.lo < cursor - 1e-12) throw std::invalid_argument("construction pieces overlap");
        if (c.lo < -1e-12 || c.hi > 1.0 + 1e-12)
            throw std::invalid_argument("construction pieces must lie inside [0, 1]");
        if (!pieces.empty() && c.lo - cursor > max_gap)
            throw std::invalid_argument("gap between construction pieces exceeds delta / k");
        cursor = c.hi;
    }
    if (!pieces.empty() && 1.0 - cursor > max_gap)
        throw std::invalid_argument("gap between construction pieces exceeds delta / k");

    // Tile [0, 1] with block regions and sawtooth fillers.
    std::vector<Region> regions;
    cursor = 0.0;
    for (const auto& c : cells) {
        if (c.lo - cursor > 1e-12) regions.push_back(filler_region(cursor, c.lo, eps));
        Region r;
        r.start = c.lo;
        r.end = c.hi;
        r.start_slope = c.u->initial_slope;
        for (double f : closed_block_flips(*c.u)) r.flips.push_back(c.center + eps * f);
        regions.push_back(std::move(r));
        cursor = c.hi;
    }
    if (1.0 - cursor > 1e-12) regions.push_back(filler_region(cursor, 1.0, eps));

    // Merge into one global flip list. Negating a region changes neither its
    // energy (even confinement, same flip count) nor its zero endpoints, so
    // regions are sign-matched at the junctions instead of paying a flip.
    std::vector<double> flips;
    int cur_slope = 0;
    for (auto& r : regions) {
        if (cur_slope != 0 && r.start_slope != cur_slope) r.start_slope = -r.start_slope;
        flips.insert(flips.end(), r.flips.begin(), r.flips.end());
        cur_slope = r.end_slope();
    }
    const int slope0 = regions.front().start_slope;
    for (std::size_t i = 1; i < flips.size(); ++i)
        if (!(flips[i] > flips[i - 1]))
            throw std::invalid_argument("construction produced unordered flips");

    // Sawtooth node values (exact piecewise-linear integration of the slopes).
    const auto cellsn = static_cast<Eigen::Index>(std::lround(1.0 / h));
    DiscreteProfile out = DiscreteProfile::zeros(0.0, 1.0 / static_cast<double>(cellsn), cellsn + 1);
    const double hh = out.h;
    std::vector<double> flip_values(flips.size() + 1, 0.0);
    {
        double val = 0.0, pos = 0.0;
        int s = slope0;
        for (std::size_t r = 0; r < flips.size(); ++r) {
            val += s * (flips[r] - pos);
            flip_values[r + 1] = val;
            pos = flips[r];
            s = -s;
        }
    }
    {
        Eigen::Index i = 0;
        double pos = 0.0;
        int s = slope0;
        for (std::size_t r = 0; r <= flips.size(); ++r) {
            const double seg_end = r < flips.size() ? flips[r] : 1.0 + hh;
            const double base = flip_values[r];
            while (i <= cellsn && static_cast<double>(i) * hh <= seg_end) {
                out.values[i] = base + s * (static_cast<double>(i) * hh - pos);
                ++i;
            }
            pos = seg_end;
            s = -s;
        }
    }

    // Replace each corner by the tanh transition layer: for incoming slope s
    // the smoothed derivative is v' = -s * tanh((x - c) / tau), which means
    // adding s * corr to v with corr = -tau * log(1 + exp(-2 |x - c| / tau)).
    const double tau = transition_scale(eps);
    int s_in = slope0;
    for (std::size_t r = 0; r < flips.size(); ++r) {
        const double c = flips[r];
        const double gap_l = r == 0 ? c : c - flips[r - 1];
        const double gap_r = r + 1 == flips.size() ? 1.0 - c : flips[r + 1] - c;
        const double w = std::min({18.0 * tau, 0.4 * gap_l, 0.4 * gap_r});
        const auto ilo = static_cast<Eigen::Index>(std::ceil((c - w) / hh));
        const auto ihi = static_cast<Eigen::Index>(std::floor((c + w) / hh));
        for (Eigen::Index i = std::max<Eigen::Index>(0, ilo); i <= std::min(cellsn, ihi); ++i) {
            const double z = std::abs(static_cast<double>(i) * hh - c) / tau;
            out.values[i] += s_in * (-tau * std::log1p(std::exp(-2.0 * z)));
        }
        s_in = -s_in;
    }
    return out;
}

std::vector<MacroPiece> default_pieces(double eps, const CoefficientField& a, const MacroModulus& m,
                                       const DpGrid& grid) {
    std::vector<double> bounds{0.0};
    if (m.kind == MacroKind::piecewise_constant) {
        for (double b : m.breakpoints) bounds.push_back(b);
    } else if (m.kind == MacroKind::smooth_sampled) {
        for (int i = 1; i < 8; ++i) bounds.push_back(i / 8.0);
    }
    bounds.push_back(1.0);

    std::vector<MacroPiece> pieces(bounds.size() - 1);
    parallel_for(pieces.size(), [&](std::size_t i) {
        const double lo = bounds[i], hi = bounds[i + 1];
        const double center = 0.5 * (lo + hi);
        const double R = (hi - lo) / eps;
        if (R < 2.0)
            throw SolverRefusal("macro cells are too narrow for this eps; use a smaller eps");
        const double mi = eval_macro(m, center);
        auto [res, profile] = minimize_sharp_dp(a.shifted(center / eps), mi, R, grid, BoundaryMode::pinned);
        (void)res;
        pieces[i] = MacroPiece{std::move(profile), center};
    });
    return pieces;
}

std::vector<DiscreteProfile> default_warm_starts(double eps, const CoefficientField& a,
                                                 const MacroModulus& m, const DpGrid& grid) {
    DiscreteProfile built = build_test_function(default_pieces(eps, a, m, grid), eps, 0.5);
    DiscreteProfile zero = DiscreteProfile::zeros(0.0, built.h, built.size());
    return {std::move(built), std::move(zero)};
}

MinResult minimize_diffuse(double eps, const CoefficientField& a, const MacroModulus& m,
                           const std::vector<DiscreteProfile>& warm_starts, const MinimizeOptions& opts,
                           const std::vector<std::string>& labels) {
    if (!(eps > 0.0 && eps <= 0.1))
        throw std::invalid_argument("minimize_diffuse expects eps in (0, 0.1]");
    if (warm_starts.empty()) throw std::invalid_argument("at least one warm start is required");
    for (const auto& w : warm_starts) {
        check_unit_profile(w);
        if (w.size() != warm_starts.front().size() || std::abs(w.h - warm_starts.front().h) > 1e-15)
            throw std::invalid_argument("warm starts must share one grid");
    }

    const DiffuseProblem problem(eps, a, m, warm_starts.front().h, warm_starts.front().size());
    auto eval = [&problem](const Eigen::ArrayXd& x, Eigen::ArrayXd& g) {
        return problem.energy_gradient(x, g);
    };

    LbfgsOptions lopts;
    lopts.max_iterations = opts.max_iterations;
    lopts.history = opts.lbfgs_history;
    lopts.tol = opts.tol;

    struct Run {
        Eigen::ArrayXd x;
        LbfgsResult r;
    };
    std::vector<Run> runs(warm_starts.size());
    // Keep a single working set in memory when the grid is large.
    const int workers = warm_starts.front().size() > (1 << 21) ? 1 : 0;
    parallel_for(
        warm_starts.size(),
        [&](std::size_t i) {
            runs[i].x = warm_starts[i].values;
            runs[i].r = minimize_lbfgs(eval, runs[i].x, lopts);
        },
        workers);

    MinResult out;
    out.starts.resize(runs.size());
    int best = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        StartOutcome& so = out.starts[i];
        so.label = i < labels.size() ? labels[i] : "start-" + std::to_string(i);
        so.energy = runs[i].r.value;
        so.iterations = runs[i].r.iterations;
        so.converged = runs[i].r.converged;
        so.line_search_failed = runs[i].r.line_search_failed;
        if (runs[i].r.value < runs[best].r.value) best = static_cast<int>(i);
    }
    out.best_start = best;
    out.energy = runs[static_cast<std::size_t>(best)].r.value;
    out.iterations = runs[static_cast<std::size_t>(best)].r.iterations;
    out.gradient_rms = runs[static_cast<std::size_t>(best)].r.gradient_rms;
    out.converged = runs[static_cast<std::size_t>(best)].r.converged;
    out.profile.x0 = 0.0;
    out.profile.h = warm_starts.front().h;
    out.profile.values = std::move(runs[static_cast<std::size_t>(best)].x);
    return out;
}

// ---------------------------------------------------------------------------
// Microscale unit-window integrand

namespace {

template <typename AFn>
double window_sum(const Eigen::ArrayXd& u, double h, Eigen::Index i0, Eigen::Index K, const AFn& a_at,
                  double m, double eps) {
    const Eigen::Index n = u.size() - 1;
    const double inv_h = 1.0 / h;
    const double inv_2h = 0.5 / h;
    const double inv_h2 = inv_h * inv_h;
    const double e2 = eps * eps;
    const double ie2 = 1.0 / e2;
    double sum = 0;
    for (Eigen::Index i = i0; i <= i0 + K; ++i) {
        double d1, d2;
        if (i == 0) {
            d1 = (u[1] - u[0]) * inv_h;
            d2 = (u[2] - 2.0 * u[1] + u[0]) * inv_h2;
        } else if (i == n) {
            d1 = (u[n] - u[n - 1]) * inv_h;
            d2 = (u[n] - 2.0 * u[n - 1] + u[n - 2]) * inv_h2;
        } else {
            d1 = (u[i + 1] - u[i - 1]) * inv_2h;
            d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_h2;
        }
        const double g = e2 * d2 * d2 + ie2 * double_well(d1) + m * a_at(i) * u[i] * u[i];
        sum += (i == i0 || i == i0 + K) ? 0.5 * g : g;
    }
    return h * sum;
}

}  // namespace

double local_average_integrand_sampled(const Eigen::ArrayXd& u, const Eigen::ArrayXd& a_nodes, double h,
                                       Eigen::Index window_start, Eigen::Index window_cells,
                                       double m_value, double eps) {
    if (window_start < 0 || window_start + window_cells >= u.size())
        throw std::domain_error("unit window exceeds the sampled profile");
    return window_sum(
        u, h, window_start, window_cells, [&](Eigen::Index i) { return a_nodes[i]; }, m_value, eps);
}

double local_average_integrand(const DiscreteProfile& u, const CoefficientField& a, double m_value,
                               double y, double eps) {
    u.validate();
    if (eps <= 0) throw std::invalid_argument("eps must be positive");
    const auto K = static_cast<Eigen::Index>(std::lround(1.0 / u.h));
    const auto i0 = static_cast<Eigen::Index>(std::lround((y - 0.5 - u.x0) / u.h));
    if (i0 < 0 || i0 + K >= u.size())
        throw std::domain_error("unit window around y exceeds the profile domain");
    return window_sum(
        u.values, u.h, i0, K,
        [&](Eigen::Index i) { return a.eval(u.x0 + u.h * static_cast<double>(i)); }, m_value, eps);
}

}  // namespace homlab
