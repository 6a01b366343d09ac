#include "homlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "homlab/rng.hpp"

namespace homlab {

namespace {

constexpr std::uint64_t kSaltLattice = 0x6c61747469636531ULL;
constexpr std::uint64_t kSaltCell = 0x63656c6c76616c75ULL;
constexpr std::uint64_t kSaltCount = 0x636f756e74626d70ULL;
constexpr std::uint64_t kSaltCenter = 0x63656e7465726273ULL;

double bump_shape(double r) {
    // Quartic bump supported on |r| < 1.
    if (std::abs(r) >= 1.0) return 0.0;
    const double q = 1.0 - r * r;
    return q * q;
}

}  // namespace

double ValueDistribution::draw(std::uint64_t bits) const {
    if (type == Type::two_point) return (bits & 1ULL) ? hi : lo;
    return lo + uniform01(bits) * (hi - lo);
}

double ValueDistribution::mean() const {
    return 0.5 * (lo + hi);
}

double ValueDistribution::mean_reciprocal() const {
    if (type == Type::two_point) return 0.5 * (1.0 / lo + 1.0 / hi);
    return std::log(hi / lo) / (hi - lo);
}

FieldModel FieldModel::constant(double v) {
    FieldModel m;
    m.kind = FieldKind::constant;
    m.value = v;
    return m;
}

FieldModel FieldModel::periodic(std::vector<double> samples, double period, std::uint64_t seed,
                                bool nearest) {
    FieldModel m;
    m.kind = FieldKind::periodic_random_phase;
    m.samples = std::move(samples);
    m.period = period;
    m.seed = seed;
    m.periodic_nearest = nearest;
    return m;
}

FieldModel FieldModel::checkerboard(double cell, ValueDistribution vd, std::uint64_t seed) {
    FieldModel m;
    m.kind = FieldKind::checkerboard;
    m.cell = cell;
    m.values = vd;
    m.seed = seed;
    return m;
}

FieldModel FieldModel::poisson(double intensity, double height, double width, std::uint64_t seed) {
    FieldModel m;
    m.kind = FieldKind::poisson_bumps;
    m.intensity = intensity;
    m.bump_height = height;
    m.bump_width = width;
    m.seed = seed;
    return m;
}

void FieldModel::validate() const {
    auto in_range = [](double v) { return v >= 1.0 && v <= 2.0; };
    switch (kind) {
        case FieldKind::constant:
            if (!in_range(value)) throw std::invalid_argument("constant field value must lie in [1, 2]");
            break;
        case FieldKind::periodic_random_phase:
            if (period <= 0) throw std::invalid_argument("period must be positive");
            if (samples.size() < 2) throw std::invalid_argument("periodic profile needs at least 2 samples");
            for (double s : samples)
                if (!in_range(s)) throw std::invalid_argument("periodic profile samples must lie in [1, 2]");
            break;
        case FieldKind::checkerboard:
            if (cell <= 0) throw std::invalid_argument("cell length must be positive");
            if (!(values.lo >= 1.0 && values.hi <= 2.0 && values.lo <= values.hi))
                throw std::invalid_argument("checkerboard value distribution must be supported in [1, 2]");
            break;
        case FieldKind::poisson_bumps:
            if (intensity <= 0) throw std::invalid_argument("intensity must be positive");
            if (bump_width <= 0) throw std::invalid_argument("bump width must be positive");
            if (bump_height <= 0 || bump_height > 1.0)
                throw std::invalid_argument("bump height must lie in (0, 1] to keep values in [1, 2]");
            break;
    }
}

double FieldModel::min_value() const {
    switch (kind) {
        case FieldKind::constant: return value;
        case FieldKind::periodic_random_phase: return *std::min_element(samples.begin(), samples.end());
        case FieldKind::checkerboard: return values.lo;
        case FieldKind::poisson_bumps: return 1.0;
    }
    return 1.0;
}

double FieldModel::max_value() const {
    switch (kind) {
        case FieldKind::constant: return value;
        case FieldKind::periodic_random_phase: return *std::max_element(samples.begin(), samples.end());
        case FieldKind::checkerboard: return values.hi;
        case FieldKind::poisson_bumps: return std::min(2.0, 1.0 + bump_height);
    }
    return 2.0;
}

double FieldModel::mean_value() const {
    switch (kind) {
        case FieldKind::constant: return value;
        case FieldKind::periodic_random_phase:
            // Mean of the periodic linear interpolant over one period.
            return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
        case FieldKind::checkerboard: return values.mean();
        case FieldKind::poisson_bumps: return 0.5 * (min_value() + max_value());
    }
    return 1.5;
}

std::string FieldModel::describe() const {
    std::ostringstream os;
    switch (kind) {
        case FieldKind::constant: os << "constant(" << value << ")"; break;
        case FieldKind::periodic_random_phase:
            os << "periodic_random_phase(n=" << samples.size() << ", period=" << period << ")";
            break;
        case FieldKind::checkerboard:
            os << "checkerboard(cell=" << cell << ", "
               << (values.type == ValueDistribution::Type::two_point ? "two_point" : "uniform") << "["
               << values.lo << "," << values.hi << "])";
            break;
        case FieldKind::poisson_bumps:
            os << "poisson_bumps(intensity=" << intensity << ", height=" << bump_height << ", width="
               << bump_width << ")";
            break;
    }
    return os.str();
}

CoefficientField::CoefficientField(FieldModel model) : model_(std::move(model)) {
    model_.validate();
    switch (model_.kind) {
        case FieldKind::periodic_random_phase:
            lattice_offset_ = uniform01(mix64(model_.seed, kSaltLattice)) * model_.period;
            break;
        case FieldKind::checkerboard:
            lattice_offset_ = uniform01(mix64(model_.seed, kSaltLattice)) * model_.cell;
            break;
        default:
            break;
    }
}

double CoefficientField::raw_eval(double tau) const {
    switch (model_.kind) {
        case FieldKind::constant:
            return model_.value;
        case FieldKind::periodic_random_phase: {
            const double n = static_cast<double>(model_.samples.size());
            double pos = (tau - lattice_offset_) / model_.period;
            pos -= std::floor(pos);
            const double s = pos * n;
            const auto i = static_cast<std::size_t>(s);
            const std::size_t i0 = i % model_.samples.size();
            if (model_.periodic_nearest) return model_.samples[i0];
            const double frac = s - static_cast<double>(i);
            const std::size_t i1 = (i0 + 1) % model_.samples.size();
            return model_.samples[i0] + frac * (model_.samples[i1] - model_.samples[i0]);
        }
        case FieldKind::checkerboard: {
            const auto c = static_cast<std::int64_t>(std::floor((tau - lattice_offset_) / model_.cell));
            return model_.values.draw(mix64(mix64(model_.seed, kSaltCell), zigzag64(c)));
        }
        case FieldKind::poisson_bumps: {
            const double w = model_.bump_width;
            const auto klo = static_cast<std::int64_t>(std::floor(tau - w));
            const auto khi = static_cast<std::int64_t>(std::floor(tau + w));
            double s = 0.0;
            for (std::int64_t k = klo; k <= khi; ++k) {
                const std::uint64_t cell_key = mix64(model_.seed, zigzag64(k));
                const int count = poisson_count(model_.intensity, mix64(cell_key, kSaltCount));
                for (int j = 0; j < count; ++j) {
                    const double center =
                        static_cast<double>(k) +
                        uniform01(mix64(cell_key, kSaltCenter + static_cast<std::uint64_t>(j)));
                    s += model_.bump_height * bump_shape((tau - center) / w);
                }
            }
            // Overlapping bumps saturate at the upper bound.
            return 1.0 + std::min(s, 1.0);
        }
    }
    return 1.0;
}

double CoefficientField::eval(double t) const {
    return raw_eval(phase_ + t);
}

CoefficientField CoefficientField::shifted(double y) const {
    CoefficientField f(*this);
    f.phase_ = phase_ + y;
    return f;
}

void CoefficientField::breakpoints_in(double lo, double hi, std::vector<double>& out) const {
    // Positions reported in the caller's coordinate t; raw coordinate is phase_ + t.
    auto emit_lattice = [&](double step, double offset) {
        const double rlo = phase_ + lo;
        const double rhi = phase_ + hi;
        auto k = static_cast<std::int64_t>(std::ceil((rlo - offset) / step));
        for (; offset + static_cast<double>(k) * step < rhi; ++k) {
            const double t = offset + static_cast<double>(k) * step - phase_;
            if (t > lo && t < hi) out.push_back(t);
        }
    };
    switch (model_.kind) {
        case FieldKind::constant:
            break;
        case FieldKind::periodic_random_phase:
            emit_lattice(model_.period / static_cast<double>(model_.samples.size()), lattice_offset_);
            break;
        case FieldKind::checkerboard:
            emit_lattice(model_.cell, lattice_offset_);
            break;
        case FieldKind::poisson_bumps:
            // Smooth except at bump-support edges; one knot per unit cell is a
            // cheap upper bound that keeps quadrature segments small.
            emit_lattice(1.0, 0.0);
            break;
    }
}

CoefficientField realize(const FieldModel& model, std::uint64_t seed) {
    FieldModel m = model;
    m.seed = seed;
    return CoefficientField(std::move(m));
}

CoefficientField realize(const FieldModel& model) {
    return CoefficientField(model);
}

MacroModulus MacroModulus::constant(double m) {
    MacroModulus mm;
    mm.kind = MacroKind::constant;
    mm.value = m;
    return mm;
}

MacroModulus MacroModulus::piecewise(std::vector<double> breakpoints, std::vector<double> values) {
    MacroModulus mm;
    mm.kind = MacroKind::piecewise_constant;
    mm.breakpoints = std::move(breakpoints);
    mm.piece_values = std::move(values);
    return mm;
}

MacroModulus MacroModulus::sampled(std::vector<double> grid, std::vector<double> values) {
    MacroModulus mm;
    mm.kind = MacroKind::smooth_sampled;
    mm.grid = std::move(grid);
    mm.grid_values = std::move(values);
    return mm;
}

void MacroModulus::validate() const {
    switch (kind) {
        case MacroKind::constant:
            if (value <= 0) throw std::invalid_argument("macro modulus must be positive");
            break;
        case MacroKind::piecewise_constant: {
            if (piece_values.size() != breakpoints.size() + 1)
                throw std::invalid_argument("piecewise modulus needs one more value than breakpoints");
            if (!std::is_sorted(breakpoints.begin(), breakpoints.end()))
                throw std::invalid_argument("breakpoints must be increasing");
            for (double b : breakpoints)
                if (b <= 0 || b >= 1) throw std::invalid_argument("breakpoints must lie in (0, 1)");
            for (double v : piece_values)
                if (v <= 0) throw std::invalid_argument("macro modulus must be positive");
            break;
        }
        case MacroKind::smooth_sampled: {
            if (grid.size() != grid_values.size() || grid.size() < 2)
                throw std::invalid_argument("sampled modulus needs matching grid/value arrays");
            if (!std::is_sorted(grid.begin(), grid.end()))
                throw std::invalid_argument("sample grid must be increasing");
            if (grid.front() > 0 || grid.back() < 1)
                throw std::invalid_argument("sample grid must cover [0, 1]");
            for (double v : grid_values)
                if (v <= 0) throw std::invalid_argument("macro modulus must be positive");
            break;
        }
    }
}

double MacroModulus::min_value() const {
    switch (kind) {
        case MacroKind::constant: return value;
        case MacroKind::piecewise_constant:
            return *std::min_element(piece_values.begin(), piece_values.end());
        case MacroKind::smooth_sampled:
            return *std::min_element(grid_values.begin(), grid_values.end());
    }
    return value;
}

double MacroModulus::max_value() const {
    switch (kind) {
        case MacroKind::constant: return value;
        case MacroKind::piecewise_constant:
            return *std::max_element(piece_values.begin(), piece_values.end());
        case MacroKind::smooth_sampled:
            return *std::max_element(grid_values.begin(), grid_values.end());
    }
    return value;
}

std::string MacroModulus::describe() const {
    std::ostringstream os;
    switch (kind) {
        case MacroKind::constant: os << "constant(" << value << ")"; break;
        case MacroKind::piecewise_constant: os << "piecewise_constant(" << piece_values.size() << " pieces)"; break;
        case MacroKind::smooth_sampled: os << "smooth_sampled(" << grid.size() << " knots)"; break;
    }
    return os.str();
}

double eval_macro(const MacroModulus& m, double x) {
    if (x < 0.0 || x > 1.0) throw std::domain_error("macro modulus evaluated outside [0, 1]");
    switch (m.kind) {
        case MacroKind::constant:
            return m.value;
        case MacroKind::piecewise_constant: {
            const auto it = std::upper_bound(m.breakpoints.begin(), m.breakpoints.end(), x);
            return m.piece_values[static_cast<std::size_t>(it - m.breakpoints.begin())];
        }
        case MacroKind::smooth_sampled: {
            auto it = std::upper_bound(m.grid.begin(), m.grid.end(), x);
            if (it == m.grid.begin()) return m.grid_values.front();
            if (it == m.grid.end()) return m.grid_values.back();
            const auto i = static_cast<std::size_t>(it - m.grid.begin());
            const double t = (x - m.grid[i - 1]) / (m.grid[i] - m.grid[i - 1]);
            return m.grid_values[i - 1] + t * (m.grid_values[i] - m.grid_values[i - 1]);
        }
    }
    return m.value;
}

}  // namespace homlab
