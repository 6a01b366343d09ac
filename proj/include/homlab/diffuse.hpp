#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "homlab/errors.hpp"
#include "homlab/field.hpp"
#include "homlab/lbfgs.hpp"
#include "homlab/profile.hpp"
#include "homlab/sawtooth.hpp"
#include "homlab/sharp_cell.hpp"

namespace homlab {

/// Width of the optimal slope transition of the macroscale functional: the
/// curvature term eps^4 v''^2 balances eps^-2 W(v') on layers of width eps^3,
/// where v' crosses the well barrier as tanh((x - c) / eps^3).
inline double transition_scale(double eps) { return eps * eps * eps; }

/// Same balance in microscale variables (eps^2 u''^2 against eps^-2 W(u')):
/// layer width eps^2, per-transition cost exactly A0.
inline double micro_transition_scale(double eps) { return eps * eps; }

/// Default grid step: six nodes per transition layer.
inline double default_grid_step(double eps) { return transition_scale(eps) / 6.0; }

/// Coarsest step accepted for plain energy/gradient evaluation. Minimization
/// and test-function construction use layer-resolving grids; evaluating a
/// given profile only needs the teeth themselves resolved.
inline double max_eval_grid_step(double eps) { return std::pow(eps, 1.5); }

/// Discretization of the two-scale energy
///   integral_0^1 eps^4 v''^2 + eps^-2 W(v') + eps^-2 m(x) a(x/eps) v^2 dx
/// on the uniform grid of [0, 1]: central differences (one-sided at the
/// endpoints) and the composite trapezoid rule. Coefficient samples are
/// cached once, so evaluation is pure and cheap.
class DiffuseProblem {
  public:
    DiffuseProblem(double eps, const CoefficientField& a, const MacroModulus& m, double h,
                   Eigen::Index nodes);

    double energy(const Eigen::ArrayXd& v) const;
    double energy_gradient(const Eigen::ArrayXd& v, Eigen::ArrayXd& grad) const;

    double eps() const { return eps_; }
    double grid_step() const { return h_; }
    Eigen::Index nodes() const { return coeff_.size(); }

  private:
    double eps_;
    double h_;
    Eigen::ArrayXd coeff_;  // m(x_i) * a(x_i / eps) per node
};

/// Energy of a profile on [0, 1]. Refuses grids coarser than
/// max_eval_grid_step(eps), reporting the required step.
double diffuse_energy(const DiscreteProfile& v, double eps, const CoefficientField& a,
                      const MacroModulus& m);

/// Exact gradient of the discretized energy with respect to the grid values.
Eigen::ArrayXd diffuse_gradient(const DiscreteProfile& v, double eps, const CoefficientField& a,
                                const MacroModulus& m);

/// One sharp-interface block of the upper-bound construction: a sawtooth cell
/// minimizer to be planted at macro position center with microscale window
/// profile.window_length() * eps.
struct MacroPiece {
    SawtoothProfile profile;
    double center = 0.5;
};

/// Assemble the two-scale test profile: each block is rescaled by
/// v(x) = eps * u((x - center) / eps), blocks are closed to zero boundary
/// values, gaps are filled with a sawtooth of period ~eps pinned at zero, and
/// every slope flip is replaced by the tanh transition profile on a
/// transition_scale(eps)-wide layer. The output is continuous with a
/// continuous first difference.
DiscreteProfile build_test_function(const std::vector<MacroPiece>& pieces, double eps, double delta,
                                    double h = 0.0);

/// Pinned cell minimizers on the macro cells induced by m (breakpoints for a
/// piecewise modulus, a single cell for a constant one).
std::vector<MacroPiece> default_pieces(double eps, const CoefficientField& a, const MacroModulus& m,
                                       const DpGrid& grid = {});

struct MinimizeOptions {
    double tol = 1e-6;
    int max_iterations = 10000;
    int lbfgs_history = 4;
};

struct StartOutcome {
    std::string label;
    double energy = 0;
    int iterations = 0;
    bool converged = false;
    bool line_search_failed = false;
};

struct MinResult {
    double energy = 0;
    DiscreteProfile profile;
    int iterations = 0;
    double gradient_rms = 0;
    bool converged = false;
    int best_start = 0;
    std::vector<StartOutcome> starts;
};

/// Quasi-Newton descent from each warm start; returns the lowest terminal
/// profile. Per-start line-search failures are recorded, not thrown. The
/// result energy never exceeds the energy of any warm start.
MinResult minimize_diffuse(double eps, const CoefficientField& a, const MacroModulus& m,
                           const std::vector<DiscreteProfile>& warm_starts,
                           const MinimizeOptions& opts = {},
                           const std::vector<std::string>& labels = {});

/// Construction profile plus the zero profile, on the default grid.
std::vector<DiscreteProfile> default_warm_starts(double eps, const CoefficientField& a,
                                                 const MacroModulus& m, const DpGrid& grid = {});

/// Unit-window integrand of the microscale functional,
///   f(u, y) = integral_{y-1/2}^{y+1/2} eps^2 u''^2 + eps^-2 W(u') + m a(t) u^2 dt,
/// for a profile sampled on a micro grid containing the window. Window
/// endpoints snap to the nearest grid nodes.
double local_average_integrand(const DiscreteProfile& u, const CoefficientField& a, double m_value,
                               double y, double eps);

/// Same, with coefficient samples supplied per node (aligned with u.values).
double local_average_integrand_sampled(const Eigen::ArrayXd& u, const Eigen::ArrayXd& a_nodes,
                                       double h, Eigen::Index window_start, Eigen::Index window_cells,
                                       double m_value, double eps);

}  // namespace homlab
