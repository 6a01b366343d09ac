#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "homlab/diffuse.hpp"
#include "homlab/rng.hpp"
#include "homlab/well.hpp"

using namespace homlab;

namespace {

const CoefficientField kUnitField = realize(FieldModel::constant(1.0), 0);
const MacroModulus kUnitModulus = MacroModulus::constant(1.0);

DiscreteProfile random_smooth_profile(std::uint64_t seed, Eigen::Index cells) {
    DiscreteProfile p = DiscreteProfile::unit_interval(cells);
    const double a1 = 0.3 * uniform01(splitmix64(seed));
    const double a2 = 0.1 * uniform01(splitmix64(seed + 1));
    const double a3 = 0.4 * uniform01(splitmix64(seed + 2));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double x = p.h * static_cast<double>(i);
        p.values[i] = a1 * std::sin(2 * M_PI * x) + a2 * std::cos(6 * M_PI * x) + a3 * x * (1 - x);
    }
    return p;
}

// Confinement part eps^-2 * integral m a v^2 on the profile grid (trapezoid),
// used to isolate the transition cost.
double confinement_part(const DiscreteProfile& v, double eps, const CoefficientField& a,
                        const MacroModulus& m) {
    const double ie2 = 1.0 / (eps * eps);
    double sum = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = std::min(1.0, v.h * static_cast<double>(i));
        const double g = ie2 * eval_macro(m, x) * a.eval(x / eps) * v.values[i] * v.values[i];
        sum += (i == 0 || i == v.size() - 1) ? 0.5 * g : g;
    }
    return v.h * sum;
}

}  // namespace

TEST_CASE("diffuse energy of the zero profile is the well barrier") {
    DiscreteProfile v = DiscreteProfile::unit_interval(400);
    CHECK(diffuse_energy(v, 0.1, kUnitField, kUnitModulus) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("diffuse energy of the affine profile is the confinement integral") {
    DiscreteProfile v = DiscreteProfile::sample(0.0, 1.0 / 2000, 2001, [](double x) { return x; });
    CHECK(diffuse_energy(v, 0.1, kUnitField, kUnitModulus) ==
          doctest::Approx(100.0 / 3.0).epsilon(1e-4));
}

TEST_CASE("diffuse energy is linear in the modulus") {
    DiscreteProfile v = DiscreteProfile::sample(0.0, 1.0 / 2000, 2001, [](double x) { return x; });
    const double e1 = diffuse_energy(v, 0.1, kUnitField, MacroModulus::constant(1.0));
    const double e2 = diffuse_energy(v, 0.1, kUnitField, MacroModulus::constant(2.0));
    CHECK(e2 == doctest::Approx(2.0 * e1).epsilon(1e-12));
}

TEST_CASE("too-coarse evaluation grids are refused with the required step") {
    DiscreteProfile v = DiscreteProfile::unit_interval(20);
    CHECK_THROWS_AS(diffuse_energy(v, 0.1, kUnitField, kUnitModulus), SolverRefusal);
}

TEST_CASE("analytic gradient matches central finite differences") {
    const double eps = 0.1;
    const double h = 0.005;
    const auto cells = static_cast<Eigen::Index>(std::lround(1.0 / h));
    const double fd_step = std::cbrt(2.2e-16);  // cube-root-of-machine-epsilon rule
    for (std::uint64_t inst = 0; inst < 5; ++inst) {
        DiscreteProfile v = random_smooth_profile(1000 + inst, cells);
        const CoefficientField field = realize(FieldModel::checkerboard(1.0), inst);
        const Eigen::ArrayXd grad = diffuse_gradient(v, eps, field, kUnitModulus);
        std::uint64_t ctr = 77 * inst;
        for (int k = 0; k < 20; ++k) {
            const auto j = static_cast<Eigen::Index>(splitmix64(ctr++) % static_cast<std::uint64_t>(v.size()));
            const double s = fd_step * std::max(1.0, std::abs(v.values[j]));
            DiscreteProfile vp = v, vm = v;
            vp.values[j] += s;
            vm.values[j] -= s;
            const double fd =
                (diffuse_energy(vp, eps, field, kUnitModulus) - diffuse_energy(vm, eps, field, kUnitModulus)) /
                (2 * s);
            CHECK(std::abs(grad[j] - fd) / std::max({std::abs(fd), std::abs(grad[j]), 1e-6}) < 1e-5);
        }
    }
}

TEST_CASE("gradient vanishes at the zero profile") {
    DiscreteProfile v = DiscreteProfile::unit_interval(500);
    const Eigen::ArrayXd grad = diffuse_gradient(v, 0.1, kUnitField, kUnitModulus);
    CHECK(grad.abs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("halving the grid step changes the energy of a smooth profile by under 1%") {
    const double eps = 0.1;
    auto f = [](double x) { return 0.1 * std::sin(2 * M_PI * x) + 0.05 * x; };
    const DiscreteProfile v1 = DiscreteProfile::sample(0.0, 1.0 / 800, 801, f);
    const DiscreteProfile v2 = DiscreteProfile::sample(0.0, 1.0 / 1600, 1601, f);
    const double e1 = diffuse_energy(v1, eps, kUnitField, kUnitModulus);
    const double e2 = diffuse_energy(v2, eps, kUnitField, kUnitModulus);
    CHECK(std::abs(e1 - e2) / std::abs(e2) < 0.01);
}

TEST_CASE("rescaling u(t) = v(eps t)/eps maps window energies exactly") {
    const double eps = 0.05;
    const double ht = 0.01;
    const double hx = eps * ht;
    const CoefficientField field = realize(FieldModel::periodic({1.0, 1.8, 1.3, 1.6}, 2.0, 4), 4);
    const double m = 1.3;

    // Micro profile on [0, 20] and its macro rescaling on [0, 1], same nodes.
    const auto nt = static_cast<Eigen::Index>(std::lround(20.0 / ht)) + 1;
    DiscreteProfile u = DiscreteProfile::sample(0.0, ht, nt, [](double t) {
        return 0.4 * std::sin(1.7 * t) + 0.2 * std::cos(0.4 * t);
    });
    DiscreteProfile v;
    v.x0 = 0.0;
    v.h = hx;
    v.values = eps * u.values;

    const double y = 7.3;
    const double micro = local_average_integrand(u, field, m, y, eps);

    // Same trapezoid + stencils on the macro grid over [eps(y-1/2), eps(y+1/2)].
    const auto i0 = static_cast<Eigen::Index>(std::lround((y - 0.5) / ht));
    const auto K = static_cast<Eigen::Index>(std::lround(1.0 / ht));
    const double e4 = eps * eps * eps * eps;
    const double ie2 = 1.0 / (eps * eps);
    double sum = 0;
    for (Eigen::Index i = i0; i <= i0 + K; ++i) {
        const double d1 = (v.values[i + 1] - v.values[i - 1]) / (2 * hx);
        const double d2 = (v.values[i + 1] - 2 * v.values[i] + v.values[i - 1]) / (hx * hx);
        const double x = hx * static_cast<double>(i);
        const double g =
            e4 * d2 * d2 + ie2 * (double_well(d1) + m * field.eval(x / eps) * v.values[i] * v.values[i]);
        sum += (i == i0 || i == i0 + K) ? 0.5 * g : g;
    }
    const double macro = hx * sum;
    CHECK(macro == doctest::Approx(eps * micro).epsilon(1e-10));
}

TEST_CASE("local average integrand trivial values") {
    const double eps = 0.1;
    DiscreteProfile u = DiscreteProfile::zeros(-2.0, 0.01, 401);  // [-2, 2]
    CHECK(local_average_integrand(u, kUnitField, 1.0, 0.0, eps) ==
          doctest::Approx(1.0 / (eps * eps)).epsilon(1e-12));

    DiscreteProfile ut = DiscreteProfile::sample(-2.0, 0.01, 401, [](double t) { return t; });
    CHECK(local_average_integrand(ut, kUnitField, 1.0, 0.0, 1.0) ==
          doctest::Approx(1.0 / 12.0).epsilon(1e-3));

    CHECK_THROWS_AS(local_average_integrand(u, kUnitField, 1.0, 5.0, eps), std::domain_error);
}

TEST_CASE("averaging identity: mean of unit-window integrands matches the macro energy") {
    const double eps = 0.05;
    const CoefficientField field = realize(FieldModel::checkerboard(1.0), 6);
    const DiscreteProfile v = build_test_function(default_pieces(eps, field, kUnitModulus), eps, 0.5);
    const double macro_energy = diffuse_energy(v, eps, field, kUnitModulus);

    // Micro rescaling on the same nodes.
    DiscreteProfile u;
    u.x0 = 0.0;
    u.h = v.h / eps;
    u.values = v.values / eps;

    const int N = 200;
    double sum = 0;
    int kept = 0;
    for (int j = 0; j < N; ++j) {
        const double x = (j + 0.5) / N;
        const double y = x / eps;
        if (y - 0.5 < 0.0 || y + 0.5 > u.x_end()) continue;
        sum += local_average_integrand(u, field, eval_macro(kUnitModulus, x), y, eps);
        ++kept;
    }
    const double riemann = sum / kept;
    CHECK(std::abs(riemann - macro_energy) / macro_energy < 0.15);
}

TEST_CASE("gap filler alone produces a finite order-one energy") {
    const double eps = 0.05;
    const DiscreteProfile v = build_test_function({}, eps, 1.0);
    const double e = diffuse_energy(v, eps, kUnitField, kUnitModulus);
    CHECK(e > 0.0);
    CHECK(e < 10.0);
}

TEST_CASE("one smoothed transition costs the per-flip energy eps * A0") {
    const double eps = 0.05;
    // Single tent block covering [0, 1]: one interior flip, pinned ends.
    SawtoothProfile tent;
    tent.half_width = 0.5 / eps;
    tent.anchor_value = 0.0;
    tent.initial_slope = +1;
    tent.jumps = {0.0};
    const DiscreteProfile v = build_test_function({MacroPiece{tent, 0.5}}, eps, 1.0);

    const double total = diffuse_energy(v, eps, kUnitField, kUnitModulus);
    // Two further flips live at the pinned block ends (junction corners are
    // outside [0,1], so only the apex transition is interior).
    const double excess = total - confinement_part(v, eps, kUnitField, kUnitModulus);
    CHECK(std::abs(excess - eps * kTransitionCost) < 0.05 * eps * kTransitionCost);
}

TEST_CASE("construction stays within the expected band of the cell limit") {
    const double eps = 0.02;
    const DiscreteProfile v = build_test_function(default_pieces(eps, kUnitField, kUnitModulus), eps, 0.5);
    const double e = diffuse_energy(v, eps, kUnitField, kUnitModulus);
    const double alpha = alpha_constant_coefficient(1.0);
    CHECK(e <= alpha + 0.15);
    CHECK(e >= alpha - 0.15);
}

TEST_CASE("construction rejects overlapping or gapped pieces") {
    SawtoothProfile tent;
    tent.half_width = 5.0;
    tent.anchor_value = 0.0;
    tent.initial_slope = +1;
    tent.jumps = {0.0};
    const double eps = 0.05;  // cells of width 0.5
    CHECK_THROWS_AS(build_test_function({MacroPiece{tent, 0.3}, MacroPiece{tent, 0.5}}, eps, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_test_function({MacroPiece{tent, 0.25}}, eps, 0.1), std::invalid_argument);
}

TEST_CASE("minimize_diffuse descends below every warm start") {
    const double eps = 0.05;
    const CoefficientField field = realize(FieldModel::checkerboard(1.0), 12);
    const auto starts = default_warm_starts(eps, field, kUnitModulus);
    MinimizeOptions opts;
    opts.max_iterations = 200;
    const MinResult res = minimize_diffuse(eps, field, kUnitModulus, starts, opts);
    const DiffuseProblem problem(eps, field, kUnitModulus, starts[0].h, starts[0].size());
    for (const auto& w : starts) CHECK(res.energy <= problem.energy(w.values) + 1e-12);
    CHECK(res.starts.size() == starts.size());
}

TEST_CASE("minimize_diffuse reaches the cell limit at moderate eps") {
    const double eps = 0.04;
    MinimizeOptions opts;
    opts.max_iterations = 400;
    const MinResult res = minimize_diffuse(eps, kUnitField, kUnitModulus,
                                           default_warm_starts(eps, kUnitField, kUnitModulus), opts);
    const double alpha = alpha_constant_coefficient(1.0);
    CHECK(std::abs(res.energy - alpha) < 0.12 * alpha);
}

TEST_CASE("minimum is stable under mesh refinement") {
    const double eps = 0.05;
    MinimizeOptions opts;
    opts.max_iterations = 300;
    const auto pieces = default_pieces(eps, kUnitField, kUnitModulus);
    const DiscreteProfile w1 = build_test_function(pieces, eps, 0.5, default_grid_step(eps));
    const DiscreteProfile w2 = build_test_function(pieces, eps, 0.5, default_grid_step(eps) / 2);
    const double e1 = minimize_diffuse(eps, kUnitField, kUnitModulus, {w1}, opts).energy;
    const double e2 = minimize_diffuse(eps, kUnitField, kUnitModulus, {w2}, opts).energy;
    CHECK(std::abs(e1 - e2) / e2 < 0.03);
}

TEST_CASE("two-sided squeeze at eps = 0.01") {
    const double eps = 0.01;
    const double alpha = alpha_constant_coefficient(1.0);
    const DpGrid grid{0.05, 0.05, 4.0};
    const double dp_proxy =
        minimize_sharp_dp(kUnitField, 1.0, 50.0, grid, BoundaryMode::pinned).first.energy_per_length;

    const DiscreteProfile built = build_test_function(default_pieces(eps, kUnitField, kUnitModulus), eps, 0.5);
    const double built_energy = diffuse_energy(built, eps, kUnitField, kUnitModulus);

    MinimizeOptions opts;
    opts.tol = 1e-5;
    opts.max_iterations = 150;
    const MinResult res = minimize_diffuse(eps, kUnitField, kUnitModulus, {built}, opts, {"construction"});

    CHECK(dp_proxy <= res.energy + 1e-9);
    CHECK(res.energy <= built_energy + 1e-12);
    CHECK(built_energy - dp_proxy <= 0.2 * alpha);
}

TEST_CASE("minimize_diffuse input validation") {
    CHECK_THROWS_AS(minimize_diffuse(0.2, kUnitField, kUnitModulus, {DiscreteProfile::unit_interval(100)}),
                    std::invalid_argument);
    CHECK_THROWS_AS(minimize_diffuse(0.05, kUnitField, kUnitModulus, {}), std::invalid_argument);
}
