#include "homlab/sharp_cell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "homlab/parallel.hpp"
#include "homlab/stats.hpp"
#include "homlab/well.hpp"

namespace homlab {

double alpha_constant_coefficient(double c) {
    return 3.0 * std::cbrt(kTransitionCost * kTransitionCost * c / 48.0);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Lattice {
    int steps;       // N: number of dx steps
    double dx;
    int levels_per_step;  // k: u moves k*du per step
    double du;
    int max_level;   // J: u in [-J*du, J*du]
    int width() const { return 2 * max_level + 1; }
};

Lattice make_lattice(double R, const DpGrid& grid, double m) {
    if (grid.dx <= 0 || grid.du <= 0 || grid.m_cap <= 0)
        throw std::invalid_argument("dp grid parameters must be positive");
    if (R < 1.0) throw std::invalid_argument("cell size R must be at least 1");
    Lattice lat{};
    lat.steps = std::max(1, static_cast<int>(std::lround(R / grid.dx)));
    lat.dx = R / lat.steps;
    lat.levels_per_step = std::max(1, static_cast<int>(std::lround(lat.dx / grid.du)));
    lat.du = lat.dx / lat.levels_per_step;
    lat.max_level = static_cast<int>(std::ceil(grid.m_cap / lat.du));

    // The optimal spacing between jumps is at least the half period of the
    // uniform sawtooth at the strongest admissible coefficient m * a = 2m.
    const double spacing = 0.5 * std::cbrt(48.0 * kTransitionCost / (2.0 * m));
    if (lat.dx > spacing / 4.0) {
        std::ostringstream os;
        os << "dp grid too coarse: dx=" << lat.dx << " exceeds a quarter of the expected jump spacing "
           << spacing << "; use dx <= " << spacing / 4.0;
        throw SolverRefusal(os.str());
    }
    return lat;
}

}  // namespace

std::pair<CellResult, SawtoothProfile> minimize_sharp_dp(const CoefficientField& a, double m, double R,
                                                         const DpGrid& grid, BoundaryMode boundary) {
    if (m <= 0) throw std::invalid_argument("modulus m must be positive");
    const Lattice lat = make_lattice(R, grid, m);
    const int W = lat.width();
    const int J = lat.max_level;
    const int N = lat.steps;
    const double left = -0.5 * R;

    // State (layer i, level j, slope index s): cost of the cheapest path.
    // Slope index 0 is +1, 1 is -1.
    const std::size_t layer = static_cast<std::size_t>(W) * 2;
    std::vector<double> cost(static_cast<std::size_t>(N + 1) * layer, kInf);
    std::vector<std::int32_t> njumps(cost.size(), 0);
    std::vector<std::int32_t> parent_level(cost.size(), 0);
    std::vector<std::int8_t> parent_slope(cost.size(), 0);

    auto idx = [&](int i, int j, int s) {
        return static_cast<std::size_t>(i) * layer + static_cast<std::size_t>(j + J) * 2 +
               static_cast<std::size_t>(s);
    };

    const bool pinned = boundary == BoundaryMode::pinned;
    for (int j = -J; j <= J; ++j) {
        if (pinned && std::abs(j) * lat.du > lat.du + 1e-12) continue;
        cost[idx(0, j, 0)] = 0.0;
        cost[idx(0, j, 1)] = 0.0;
    }

    // Midpoint coefficient samples, shared by every path.
    std::vector<double> a_mid(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) a_mid[static_cast<std::size_t>(i)] = a.eval(left + (i + 0.5) * lat.dx);

    const int dirs[2] = {+1, -1};
    for (int i = 0; i < N; ++i) {
        const double am = m * a_mid[static_cast<std::size_t>(i)] * lat.dx;
        for (int j = -J; j <= J; ++j) {
            for (int s = 0; s < 2; ++s) {
                const double c0 = cost[idx(i, j, s)];
                if (c0 == kInf) continue;
                const std::int32_t nj0 = njumps[idx(i, j, s)];
                for (int s2 = 0; s2 < 2; ++s2) {
                    const int j2 = j + dirs[s2] * lat.levels_per_step;
                    if (j2 < -J || j2 > J) continue;
                    const double u_mid = j * lat.du + dirs[s2] * 0.5 * lat.dx;
                    double c = c0;
                    std::int32_t nj = nj0;
                    if (i > 0 && s2 != s) {
                        c += kTransitionCost;
                        nj += 1;
                    }
                    c += am * u_mid * u_mid;
                    const std::size_t t = idx(i + 1, j2, s2);
                    if (c < cost[t] || (c == cost[t] && nj < njumps[t])) {
                        cost[t] = c;
                        njumps[t] = nj;
                        parent_level[t] = j;
                        parent_slope[t] = static_cast<std::int8_t>(s);
                    }
                }
            }
        }
    }

    // Pick the best terminal state deterministically (lowest cost, then fewest
    // jumps, then lowest level / slope index).
    double best = kInf;
    std::int32_t best_jumps = 0;
    int best_j = 0, best_s = 0;
    for (int j = -J; j <= J; ++j) {
        if (pinned && std::abs(j) * lat.du > lat.du + 1e-12) continue;
        for (int s = 0; s < 2; ++s) {
            const double c = cost[idx(N, j, s)];
            if (c == kInf) continue;
            const std::int32_t nj = njumps[idx(N, j, s)];
            if (c < best || (c == best && nj < best_jumps)) {
                best = c;
                best_jumps = nj;
                best_j = j;
                best_s = s;
            }
        }
    }
    if (best == kInf) throw SolverRefusal("dp found no feasible path; raise m_cap or refine the grid");

    // Reconstruct levels and slopes right-to-left.
    std::vector<int> level(static_cast<std::size_t>(N + 1));
    std::vector<int> slope(static_cast<std::size_t>(N + 1));  // slope used on step i (1..N)
    int cj = best_j, cs = best_s;
    for (int i = N; i >= 1; --i) {
        level[static_cast<std::size_t>(i)] = cj;
        slope[static_cast<std::size_t>(i)] = cs;
        const std::size_t t = idx(i, cj, cs);
        cj = parent_level[t];
        cs = parent_slope[t];
    }
    level[0] = cj;

    SawtoothProfile profile;
    profile.half_width = 0.5 * R;
    profile.anchor_value = level[0] * lat.du;
    profile.initial_slope = dirs[slope[1]];
    for (int i = 2; i <= N; ++i)
        if (slope[static_cast<std::size_t>(i)] != slope[static_cast<std::size_t>(i - 1)])
            profile.jumps.push_back(left + (i - 1) * lat.dx);

    double sup_u = 0.0;
    for (int i = 0; i <= N; ++i)
        sup_u = std::max(sup_u, std::abs(level[static_cast<std::size_t>(i)] * lat.du));
    if (sup_u >= grid.m_cap - 0.5 * lat.du) {
        std::ostringstream os;
        os << "optimal path reaches the value cap m_cap=" << grid.m_cap << "; raise m_cap";
        throw SolverRefusal(os.str());
    }

    CellResult res;
    res.R = R;
    res.energy_per_length = best / R;
    res.jump_count = profile.jump_count();
    res.min_spacing = min_jump_spacing(profile);
    res.sup_abs_u = sup_u;
    res.boundary = boundary;
    res.stats.grid_steps = N;
    res.stats.dp_nodes = static_cast<long>((N + 1)) * W * 2;
    return {res, profile};
}

AlphaEstimate estimate_alpha(const FieldModel& model, double m, std::vector<double> r_schedule,
                             std::vector<std::uint64_t> seeds, const DpGrid& grid, BoundaryMode boundary) {
    if (r_schedule.empty()) throw std::invalid_argument("R schedule must be nonempty");
    if (!std::is_sorted(r_schedule.begin(), r_schedule.end()))
        throw std::invalid_argument("R schedule must be increasing");
    if (seeds.size() < 2) throw std::invalid_argument("estimate_alpha needs at least 2 seeds");

    AlphaEstimate est;
    est.m = m;
    est.model = model.describe();
    est.boundary = boundary;
    est.r_schedule = r_schedule;
    est.seeds = seeds;
    est.energies.assign(r_schedule.size(), std::vector<double>(seeds.size(), 0.0));

    const std::size_t cells = r_schedule.size() * seeds.size();
    parallel_for(cells, [&](std::size_t c) {
        const std::size_t ri = c / seeds.size();
        const std::size_t si = c % seeds.size();
        const CoefficientField field = realize(model, seeds[si]);
        est.energies[ri][si] =
            minimize_sharp_dp(field, m, r_schedule[ri], grid, boundary).first.energy_per_length;
    });

    for (const auto& row : est.energies) {
        est.mean_energy.push_back(mean_of(row));
        est.std_energy.push_back(sample_std(row));
    }
    est.alpha = est.mean_energy.back();

    if (r_schedule.size() >= 2) {
        const std::size_t last = r_schedule.size() - 1;
        const bool std_grew = est.std_energy[last] > 1.1 * est.std_energy[last - 1] + 1e-12;
        const bool mean_moved = std::abs(est.mean_energy[last] - est.mean_energy[last - 1]) >
                                0.05 * std::max(std::abs(est.mean_energy[last]), 1e-12);
        est.flagged = std_grew && mean_moved;
    }
    return est;
}

}  // namespace homlab
