#include "homlab/convex_cell.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "homlab/parallel.hpp"
#include "homlab/stats.hpp"

namespace homlab {

LagrangianSpec LagrangianSpec::power_law(double p, double c0, double C0) {
    LagrangianSpec L;
    L.kind = LagrangianKind::power;
    L.p = p;
    L.c0 = c0;
    L.C0 = C0;
    return L;
}

LagrangianSpec LagrangianSpec::tabulated(Eigen::ArrayXd s_grid, Eigen::MatrixXd values, double y_step,
                                         double p, double c0, double C0) {
    LagrangianSpec L;
    L.kind = LagrangianKind::custom;
    L.s_grid = std::move(s_grid);
    L.values = std::move(values);
    L.y_step = y_step;
    L.p = p;
    L.c0 = c0;
    L.C0 = C0;
    return L;
}

void LagrangianSpec::validate() const {
    if (p <= 1.0) throw std::invalid_argument("growth exponent p must exceed 1");
    if (c0 <= 0 || C0 < c0) throw std::invalid_argument("growth constants must satisfy 0 < c0 <= C0");
    if (kind == LagrangianKind::power) return;
    if (y_step <= 0) throw std::invalid_argument("custom Lagrangian needs a positive y step");
    if (s_grid.size() < 2 || values.cols() != s_grid.size() || values.rows() < 1)
        throw std::invalid_argument("custom Lagrangian table has inconsistent shape");
    for (Eigen::Index k = 1; k < s_grid.size(); ++k)
        if (!(s_grid[k] > s_grid[k - 1]))
            throw std::invalid_argument("custom Lagrangian s grid must be increasing");
    for (Eigen::Index j = 0; j < values.rows(); ++j) {
        for (Eigen::Index k = 0; k < s_grid.size(); ++k) {
            const double s = s_grid[k];
            const double v = values(j, k);
            if (v < c0 * std::pow(std::abs(s), p) - 1e-9 ||
                v > C0 * std::pow(1.0 + std::abs(s), p) + 1e-9)
                throw std::invalid_argument("custom Lagrangian violates the growth sandwich");
        }
        for (Eigen::Index k = 1; k + 1 < s_grid.size(); ++k) {
            // Midpoint convexity on consecutive sample triples (slope form).
            const double dl = (values(j, k) - values(j, k - 1)) / (s_grid[k] - s_grid[k - 1]);
            const double dr = (values(j, k + 1) - values(j, k)) / (s_grid[k + 1] - s_grid[k]);
            if (dr < dl - 1e-9)
                throw std::invalid_argument("custom Lagrangian rows must be convex in s");
        }
    }
}

namespace {

/// Pointwise minimizer interval of s -> L(y, s) - lambda * s.
struct ArgminInterval {
    double s_lo, s_hi;
    double L_lo, L_hi;
};

class CellSolver {
  public:
    CellSolver(const LagrangianSpec& L, const CoefficientField& a, double R, double dx) : spec_(L) {
        const auto n = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::lround(2.0 * R / dx)));
        step_ = 2.0 * R / static_cast<double>(n);
        if (spec_.kind == LagrangianKind::power) {
            coeff_.resize(n);
            for (Eigen::Index i = 0; i < n; ++i)
                coeff_[i] = a.eval(-R + (static_cast<double>(i) + 0.5) * step_);
        } else {
            rows_.resize(n);
            const auto nrows = static_cast<double>(spec_.values.rows());
            for (Eigen::Index i = 0; i < n; ++i) {
                const double y = -R + (static_cast<double>(i) + 0.5) * step_;
                double pos = y / spec_.y_step;
                pos -= std::floor(pos / nrows) * nrows;
                rows_[i] = static_cast<Eigen::Index>(pos) % spec_.values.rows();
            }
        }
    }

    Eigen::Index cells() const {
        return spec_.kind == LagrangianKind::power ? coeff_.size()
                                                   : static_cast<Eigen::Index>(rows_.size());
    }

    ArgminInterval argmin(Eigen::Index i, double lambda) const {
        if (spec_.kind == LagrangianKind::power) {
            const double a = coeff_[i];
            const double mag = std::pow(std::abs(lambda) / (spec_.p * a), 1.0 / (spec_.p - 1.0));
            const double s = lambda >= 0 ? mag : -mag;
            const double v = a * std::pow(std::abs(s), spec_.p);
            return {s, s, v, v};
        }
        const auto& row = spec_.values;
        const Eigen::Index j = rows_[static_cast<std::size_t>(i)];
        Eigen::Index klo = 0, khi = 0;
        double best = row(j, 0) - lambda * spec_.s_grid[0];
        for (Eigen::Index k = 1; k < spec_.s_grid.size(); ++k) {
            const double t = row(j, k) - lambda * spec_.s_grid[k];
            const double tie = 1e-10 * (1.0 + std::abs(best));
            if (t < best - tie) {
                best = t;
                klo = khi = k;
            } else if (t <= best + tie) {
                khi = k;
            }
        }
        return {spec_.s_grid[klo], spec_.s_grid[khi], row(j, klo), row(j, khi)};
    }

    double mean_slope(double lambda, bool upper) const {
        double s = 0;
        const Eigen::Index n = cells();
        for (Eigen::Index i = 0; i < n; ++i) {
            const ArgminInterval ai = argmin(i, lambda);
            s += upper ? ai.s_hi : ai.s_lo;
        }
        return s / static_cast<double>(n);
    }

    /// Mean of L and of s at the multiplier, with tied cells mixed by theta.
    std::pair<double, double> value_at(double lambda, double theta) const {
        double vs = 0, ss = 0;
        const Eigen::Index n = cells();
        for (Eigen::Index i = 0; i < n; ++i) {
            const ArgminInterval ai = argmin(i, lambda);
            vs += ai.L_lo + theta * (ai.L_hi - ai.L_lo);
            ss += ai.s_lo + theta * (ai.s_hi - ai.s_lo);
        }
        return {vs / static_cast<double>(n), ss / static_cast<double>(n)};
    }

  private:
    LagrangianSpec spec_;
    Eigen::ArrayXd coeff_;
    std::vector<Eigen::Index> rows_;
    double step_ = 0;
};

}  // namespace

HomogenizedPoint cell_minimum_1d(const LagrangianSpec& L, const CoefficientField& a, double q, double R,
                                 double dx) {
    L.validate();
    if (R < 1.0) throw std::invalid_argument("cell size R must be at least 1");
    if (dx <= 0 || dx > 0.1) throw std::invalid_argument("cell grid needs 0 < dx <= 0.1");

    const CellSolver solver(L, a, R, dx);

    // Bracket the multiplier; the mean slope is nondecreasing in lambda.
    double B = 4.0 * L.C0 * L.p * std::pow(1.0 + std::abs(q), L.p - 1.0);
    int expansions = 0;
    while (solver.mean_slope(B, true) < q || solver.mean_slope(-B, false) > q) {
        B *= 2.0;
        if (++expansions > 60)
            throw std::runtime_error("cell multiplier bracket failed: Lagrangian is not coercive");
    }
    double lo = -B, hi = B;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (solver.mean_slope(mid, true) < q)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * std::max(1.0, B)) break;
    }
    const double lambda = hi;

    // Tied cells absorb whatever fraction closes the constraint exactly.
    const double s_lo = solver.mean_slope(lambda, false);
    const double s_hi = solver.mean_slope(lambda, true);
    double theta = 0.0;
    if (s_hi > s_lo + 1e-18) theta = std::clamp((q - s_lo) / (s_hi - s_lo), 0.0, 1.0);
    const auto [m_R, mean_s] = solver.value_at(lambda, theta);

    HomogenizedPoint out;
    out.q = q;
    out.R = R;
    out.m_R = m_R;
    out.lambda = lambda;
    out.mean_residual = std::abs(mean_s - q);
    out.seed = a.model().seed;
    if (out.mean_residual > 1e-8)
        throw std::runtime_error("cell multiplier bisection left a slope residual above 1e-8");
    if (out.m_R < L.c0 * std::pow(std::abs(q), L.p) - 1e-6)
        throw std::runtime_error("cell minimum violates the growth lower bound");
    return out;
}

std::vector<HomogenizedSummary> homogenized_lagrangian(const LagrangianSpec& L, const FieldModel& model,
                                                       const std::vector<double>& q_values,
                                                       const std::vector<double>& r_schedule,
                                                       const std::vector<std::uint64_t>& seeds,
                                                       double dx) {
    if (q_values.empty() || r_schedule.empty() || seeds.empty())
        throw std::invalid_argument("homogenized_lagrangian needs nonempty schedules");
    if (!std::is_sorted(r_schedule.begin(), r_schedule.end()))
        throw std::invalid_argument("R schedule must be increasing");

    std::vector<HomogenizedSummary> out(q_values.size());
    const std::size_t nr = r_schedule.size(), ns = seeds.size();
    std::vector<double> table(q_values.size() * nr * ns, 0.0);
    parallel_for(table.size(), [&](std::size_t c) {
        const std::size_t qi = c / (nr * ns);
        const std::size_t ri = (c / ns) % nr;
        const std::size_t si = c % ns;
        const CoefficientField field = realize(model, seeds[si]);
        table[c] = cell_minimum_1d(L, field, q_values[qi], r_schedule[ri], dx).m_R;
    });

    for (std::size_t qi = 0; qi < q_values.size(); ++qi) {
        HomogenizedSummary& s = out[qi];
        s.q = q_values[qi];
        s.r_schedule = r_schedule;
        for (std::size_t ri = 0; ri < nr; ++ri) {
            std::vector<double> row(table.begin() + static_cast<long>((qi * nr + ri) * ns),
                                    table.begin() + static_cast<long>((qi * nr + ri + 1) * ns));
            s.mean_m.push_back(mean_of(row));
            s.std_m.push_back(sample_std(row));
        }
        s.f_star = s.mean_m.back();
        s.concentrated = s.std_m.back() <= s.std_m.front() * 1.1 + 1e-12;
    }
    return out;
}

DiscreteProfile glue_affine_boundary(const DiscreteProfile& u, double q, double delta) {
    u.validate();
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("delta must lie in (0, 1)");
    const double R = 0.5 * u.length();
    if (std::abs(u.x0 + R) > 1e-9 * std::max(1.0, R))
        throw std::invalid_argument("glue_affine_boundary expects a profile on [-R, R]");

    auto cutoff = [delta](double z) {
        const double t = std::abs(z);
        if (t <= 1.0 - delta) return 1.0;
        if (t >= 1.0) return 0.0;
        return (1.0 - t) / delta;
    };

    DiscreteProfile v = u;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double y = u.x0 + u.h * static_cast<double>(i);
        const double affine = q * y;
        v.values[i] = affine + cutoff(y / R) * (u.values[i] - affine);
    }
    // The cutoff vanishes at the boundary: enforce the affine data exactly.
    v.values[0] = q * u.x0;
    v.values[u.size() - 1] = q * u.x_end();
    return v;
}

ConvexityReport convexity_check(std::vector<std::pair<double, double>> points, double tol) {
    if (points.size() < 3) throw std::invalid_argument("convexity check needs at least 3 points");
    std::sort(points.begin(), points.end());
    std::map<double, double> by_q(points.begin(), points.end());

    ConvexityReport rep;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 2; j < points.size(); ++j) {
            const double qm = 0.5 * (points[i].first + points[j].first);
            auto it = by_q.lower_bound(qm - 1e-9);
            if (it == by_q.end() || std::abs(it->first - qm) > 1e-9) continue;
            ++rep.checked;
            const double excess = it->second - 0.5 * (points[i].second + points[j].second) - tol;
            if (excess > 0) {
                ++rep.violations;
                rep.max_excess = std::max(rep.max_excess, excess);
            }
        }
    }
    return rep;
}

}  // namespace homlab
