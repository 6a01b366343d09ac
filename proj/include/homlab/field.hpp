#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace homlab {

enum class FieldKind { constant, periodic_random_phase, checkerboard, poisson_bumps };

/// Per-cell value law for the checkerboard model, supported in [1, 2].
struct ValueDistribution {
    enum class Type { two_point, uniform_range };
    Type type = Type::two_point;
    double lo = 1.0;
    double hi = 2.0;

    double draw(std::uint64_t bits) const;
    double mean() const;
    double mean_reciprocal() const;
};

/// Description of a stationary random coefficient model. A realization is a
/// deterministic function of (model, seed).
struct FieldModel {
    FieldKind kind = FieldKind::constant;
    std::uint64_t seed = 0;

    double value = 1.5;            // constant
    std::vector<double> samples;   // periodic_random_phase: one period
    bool periodic_nearest = false; // piecewise constant instead of linear interp
    double period = 1.0;
    double cell = 1.0;             // checkerboard
    ValueDistribution values{};
    double intensity = 1.0;        // poisson_bumps: mean bumps per unit length
    double bump_height = 1.0;
    double bump_width = 0.5;       // bump support half-width

    static FieldModel constant(double v);
    static FieldModel periodic(std::vector<double> samples, double period, std::uint64_t seed = 0,
                               bool nearest = false);
    static FieldModel checkerboard(double cell, ValueDistribution vd = {}, std::uint64_t seed = 0);
    static FieldModel poisson(double intensity, double height, double width, std::uint64_t seed = 0);

    /// Throws std::invalid_argument if parameters fall outside the admissible
    /// range (values must stay in [1, 2], period/intensity positive, ...).
    void validate() const;

    double min_value() const;
    double max_value() const;
    /// Spatial mean of one realization (equals the ensemble mean for the
    /// ergodic models); poisson_bumps has no closed form and reports a
    /// midpoint guess used only for diagnostics.
    double mean_value() const;

    std::string describe() const;
};

/// One realization a(omega, .) together with its shift state. Evaluation is
/// pure and thread-safe; shifting only changes the stored offset, which makes
/// shifted(y).eval(t) == eval(t + y) hold exactly for freshly realized fields.
class CoefficientField {
  public:
    CoefficientField() = default;
    explicit CoefficientField(FieldModel model);

    /// Value at t, always in [1, 2].
    double eval(double t) const;

    /// The field t -> eval(t + y); composes additively.
    CoefficientField shifted(double y) const;

    double phase() const { return phase_; }
    const FieldModel& model() const { return model_; }

    /// Discontinuities / kink locations of the realization in (lo, hi),
    /// appended in increasing order. Used for exact piecewise quadrature.
    void breakpoints_in(double lo, double hi, std::vector<double>& out) const;

  private:
    double raw_eval(double tau) const;

    FieldModel model_{};
    double phase_ = 0.0;
    // Seed-derived random offsets realized once so the law is shift-stationary.
    double lattice_offset_ = 0.0;
};

/// Realize the model with the given seed (overrides model.seed).
CoefficientField realize(const FieldModel& model, std::uint64_t seed);
CoefficientField realize(const FieldModel& model);

/// a(omega + y, .): the shift action on the realized parameter.
inline CoefficientField shift(const CoefficientField& f, double y) { return f.shifted(y); }

enum class MacroKind { constant, piecewise_constant, smooth_sampled };

/// Macroscopic modulus m(x) on [0, 1], bounded between alpha_bound and beta_bound.
struct MacroModulus {
    MacroKind kind = MacroKind::constant;
    double value = 1.0;
    std::vector<double> breakpoints;  // interior, increasing
    std::vector<double> piece_values;
    std::vector<double> grid;         // smooth_sampled knots in [0, 1]
    std::vector<double> grid_values;

    static MacroModulus constant(double m);
    static MacroModulus piecewise(std::vector<double> breakpoints, std::vector<double> values);
    static MacroModulus sampled(std::vector<double> grid, std::vector<double> values);

    void validate() const;
    double min_value() const;
    double max_value() const;
    std::string describe() const;
};

/// m(x) for x in [0, 1]; anything else is a std::domain_error.
double eval_macro(const MacroModulus& m, double x);

}  // namespace homlab
