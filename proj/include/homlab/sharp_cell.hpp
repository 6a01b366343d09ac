#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "homlab/errors.hpp"
#include "homlab/field.hpp"
#include "homlab/sawtooth.hpp"

namespace homlab {

/// Discretization of the cell problem: positions step dx, profile values on a
/// du lattice clipped to [-m_cap, m_cap]. dx is snapped so that an integer
/// number of steps covers the window and du so that one step moves an integer
/// number of value levels.
struct DpGrid {
    double dx = 0.05;
    double du = 0.05;
    double m_cap = 4.0;
};

enum class BoundaryMode { free_ends, pinned };

struct SolverStats {
    long grid_steps = 0;
    long dp_nodes = 0;
};

struct CellResult {
    double R = 0;
    double energy_per_length = 0;
    int jump_count = 0;
    double min_spacing = 0;
    double sup_abs_u = 0;
    BoundaryMode boundary = BoundaryMode::free_ends;
    SolverStats stats{};
};

/// Shortest-path minimization of the sharp cell energy over grid sawtooth
/// profiles on [-R/2, R/2]. Transition cost per dx step is the midpoint rule
/// for m * a * u^2 with u linear on the step; a slope flip costs A0 = 8/3.
/// Pinned mode constrains |u| <= du at both ends.
///
/// Ties are broken deterministically: lower cost, then fewer jumps, then the
/// first path found in the fixed scan order.
///
/// Throws SolverRefusal when dx cannot resolve the expected jump spacing or
/// when the optimal path runs into the m_cap value clip.
std::pair<CellResult, SawtoothProfile> minimize_sharp_dp(const CoefficientField& a, double m, double R,
                                                         const DpGrid& grid,
                                                         BoundaryMode boundary = BoundaryMode::free_ends);

struct AlphaEstimate {
    double m = 1;
    std::string model;
    BoundaryMode boundary = BoundaryMode::free_ends;
    std::vector<double> r_schedule;
    std::vector<double> mean_energy;  // across seeds, per R
    std::vector<double> std_energy;
    std::vector<std::vector<double>> energies;  // [r_index][seed_index]
    double alpha = 0;                 // mean at the largest R
    bool flagged = false;             // non-convergent trend
    std::vector<std::uint64_t> seeds;
};

/// Monte-Carlo estimate of the cell limit alpha_m: solve the DP on every
/// (R, seed) pair, average across seeds per R, and report the mean at the
/// largest R. A non-convergent trend is flagged, never thrown.
///
/// Pinned windows are the default estimator: free ends save one transition,
/// which biases the per-length energy by -A0/R (3% at R = 50), while the
/// pinned value sits within O(1/R) above the limit with a much smaller
/// constant.
AlphaEstimate estimate_alpha(const FieldModel& model, double m, std::vector<double> r_schedule,
                             std::vector<std::uint64_t> seeds, const DpGrid& grid,
                             BoundaryMode boundary = BoundaryMode::pinned);

/// Closed-form cell limit for a constant coefficient c = m * a: the optimal
/// uniform sawtooth gives alpha = 3 * (A0^2 * c / 48)^(1/3) = 2^(2/3) c^(1/3).
double alpha_constant_coefficient(double m_times_a);

}  // namespace homlab
