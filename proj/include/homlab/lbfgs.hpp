#pragma once

#include <Eigen/Core>
#include <cmath>
#include <deque>
#include <vector>

namespace homlab {

struct LbfgsOptions {
    int max_iterations = 10000;
    int history = 4;
    /// Converged when the rms gradient drops below tol * max(1, |f0|).
    double tol = 1e-6;
    int max_line_search = 40;
};

struct LbfgsResult {
    double value = 0;
    int iterations = 0;
    double gradient_rms = 0;
    bool converged = false;
    bool line_search_failed = false;
};

/// Limited-memory quasi-Newton descent with Armijo backtracking. The functor
/// is called as f(x, grad) -> value and must fill grad. Only decreasing steps
/// are accepted, so the result never exceeds the starting value.
template <typename F>
LbfgsResult minimize_lbfgs(const F& f, Eigen::ArrayXd& x, const LbfgsOptions& opts = {}) {
    const auto n = x.size();
    const double nrm = std::sqrt(static_cast<double>(n));
    Eigen::ArrayXd grad(n), x_new(n), grad_new(n), dir(n);

    std::deque<Eigen::ArrayXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    LbfgsResult res;
    double fx = f(x, grad);
    const double scale = std::max(1.0, std::abs(fx));

    for (int it = 0; it < opts.max_iterations; ++it) {
        res.gradient_rms = std::sqrt(grad.square().sum()) / nrm;
        if (res.gradient_rms <= opts.tol * scale) {
            res.converged = true;
            break;
        }

        // Two-loop recursion for the quasi-Newton direction.
        dir = -grad;
        const int m = static_cast<int>(s_hist.size());
        std::vector<double> alpha(static_cast<std::size_t>(m));
        for (int i = m - 1; i >= 0; --i) {
            alpha[static_cast<std::size_t>(i)] = rho_hist[i] * (s_hist[i] * dir).sum();
            dir -= alpha[static_cast<std::size_t>(i)] * y_hist[i];
        }
        if (m > 0) {
            const double yy = y_hist.back().square().sum();
            const double sy = 1.0 / rho_hist.back();
            if (yy > 0) dir *= sy / yy;
        }
        for (int i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * (y_hist[i] * dir).sum();
            dir += (alpha[static_cast<std::size_t>(i)] - beta) * s_hist[i];
        }

        double gd = (grad * dir).sum();
        if (!(gd < 0)) {  // not a descent direction: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -grad;
            gd = (grad * dir).sum();
            if (!(gd < 0)) break;  // stationary point
        }

        double step = 1.0;
        double f_trial = fx;
        bool accepted = false;
        for (int ls = 0; ls < opts.max_line_search; ++ls) {
            x_new = x + step * dir;
            f_trial = f(x_new, grad_new);
            if (std::isfinite(f_trial) && f_trial <= fx + 1e-4 * step * gd) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.line_search_failed = true;
            break;
        }

        if (static_cast<int>(s_hist.size()) == opts.history) {
            s_hist.pop_front();
            y_hist.pop_front();
            rho_hist.pop_front();
        }
        s_hist.emplace_back(step * dir);
        y_hist.emplace_back(grad_new - grad);
        const double sy = (s_hist.back() * y_hist.back()).sum();
        if (sy > 1e-30) {
            rho_hist.push_back(1.0 / sy);
        } else {  // curvature too flat to be useful
            s_hist.pop_back();
            y_hist.pop_back();
        }

        x.swap(x_new);
        grad.swap(grad_new);
        fx = f_trial;
        res.iterations = it + 1;
    }
    res.value = fx;
    res.gradient_rms = std::sqrt(grad.square().sum()) / nrm;
    return res;
}

}  // namespace homlab
