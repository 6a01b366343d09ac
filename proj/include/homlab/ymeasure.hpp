#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "homlab/field.hpp"
#include "homlab/profile.hpp"

namespace homlab {

/// One atom of the empirical measure: the macro point x together with the
/// coefficient and profile windows shifted to x / eps. The microscale
/// functional at the atom is determined by (coeff_window, eps, m_value).
struct WindowAtom {
    double x = 0;
    double weight = 0;
    double m_value = 1;
    Eigen::ArrayXd coeff_window;
    Eigen::ArrayXd profile_window;
};

/// Empirical measure on (macro point, coefficient pattern, profile pattern).
/// Windows share one grid; the unit window I_0 starts margin_cells into the
/// stored arrays and spans unit_cells grid cells.
struct EmpiricalMeasure {
    std::vector<WindowAtom> atoms;
    double eps = 0;
    double window_len = 0;
    double step = 0;
    Eigen::Index unit_cells = 0;
    Eigen::Index margin_cells = 0;
    int requested_atoms = 0;
    int dropped_atoms = 0;
    std::string model;
    std::uint64_t seed = 0;
    std::string minimizer_id;
};

/// Sample N equally weighted atoms at macro points (j + 1/2) / N from a
/// microscale profile. Windows of length W that overflow the profile domain
/// are dropped and the remaining weights renormalized to one.
EmpiricalMeasure window_samples(const DiscreteProfile& u, const CoefficientField& a,
                                const MacroModulus& m, double eps, double W, int N,
                                const std::string& minimizer_id = "");

/// Energy rewrite: sum of weight * f(profile_window, 0) over atoms, where f
/// is the unit-window integrand evaluated on the stored samples. Equals the
/// plain grid average of the unit-window integrands by construction.
double energy_from_measure(const EmpiricalMeasure& P);

enum class WindowObservable { coeff_mean, energy_density, mean_abs_slope };

/// Kolmogorov distance between the empirical law of scalar window
/// observables and the same law after shifting every window by y; the
/// returned value is the max over the observables. Vanishes exactly at y = 0
/// and should shrink as eps does on minimizer data.
double invariance_diagnostic(const EmpiricalMeasure& P, double y,
                             const std::vector<WindowObservable>& observables = {
                                 WindowObservable::coeff_mean, WindowObservable::energy_density,
                                 WindowObservable::mean_abs_slope});

enum class MarginalStatistic { center_value, window_mean };

/// Kolmogorov distance between coefficient-window statistics under the atoms
/// of P and the same statistics over fresh realizations windowed at the
/// origin. center_value decorrelates neighbouring atoms and is the default
/// witness; window_mean is available for wider summaries.
double marginal_q_diagnostic(const EmpiricalMeasure& P, const FieldModel& model,
                             const std::vector<std::uint64_t>& reference_seeds,
                             MarginalStatistic stat = MarginalStatistic::center_value);

/// Directory layout: atoms.csv (x, weight, summary stats), windows.bin (flat
/// little-endian float64, coefficient then profile window per atom) and
/// manifest.json with the grid geometry and provenance.
void save_measure(const EmpiricalMeasure& P, const std::string& dir);
EmpiricalMeasure load_measure(const std::string& dir);

}  // namespace homlab
