#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace homlab {

/// Uniformly gridded function samples on [x0, x0 + h * (n - 1)], endpoints
/// included. The macroscale profiles live on [0, 1] (x0 = 0); microscale
/// windows carry their own origin.
struct DiscreteProfile {
    double x0 = 0.0;
    double h = 0.0;
    Eigen::ArrayXd values;

    Eigen::Index size() const { return values.size(); }
    double x_end() const { return x0 + h * static_cast<double>(values.size() - 1); }
    double length() const { return h * static_cast<double>(values.size() - 1); }

    void validate() const {
        if (h <= 0) throw std::invalid_argument("grid step must be positive");
        if (values.size() < 3) throw std::invalid_argument("profile needs at least 3 samples");
    }

    bool spans_unit_interval(double tol = 1e-9) const {
        return std::abs(x0) <= tol && std::abs(length() - 1.0) <= tol;
    }

    static DiscreteProfile zeros(double x0, double h, Eigen::Index n) {
        DiscreteProfile p;
        p.x0 = x0;
        p.h = h;
        p.values = Eigen::ArrayXd::Zero(n);
        return p;
    }

    /// Samples covering [0, 1] with n cells (n + 1 nodes).
    static DiscreteProfile unit_interval(Eigen::Index cells) {
        return zeros(0.0, 1.0 / static_cast<double>(cells), cells + 1);
    }

    template <typename Fn>
    static DiscreteProfile sample(double x0, double h, Eigen::Index n, const Fn& f) {
        DiscreteProfile p = zeros(x0, h, n);
        for (Eigen::Index i = 0; i < n; ++i) p.values[i] = f(x0 + h * static_cast<double>(i));
        return p;
    }
};

}  // namespace homlab
