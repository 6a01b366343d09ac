#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "homlab/diffuse.hpp"
#include "homlab/sharp_cell.hpp"
#include "homlab/ymeasure.hpp"

using namespace homlab;

namespace {

const MacroModulus kUnit = MacroModulus::constant(1.0);

DiscreteProfile micro_profile(double eps, double h, double margin, std::uint64_t shape_seed) {
    const double len = 1.0 / eps + 2.0 * margin;
    const auto n = static_cast<Eigen::Index>(std::lround(len / h)) + 1;
    const double a1 = 0.2 + 0.1 * static_cast<double>(shape_seed % 5);
    return DiscreteProfile::sample(-margin, h, n, [&](double t) {
        return a1 * std::sin(0.9 * t) + 0.15 * std::cos(2.3 * t + 1.0);
    });
}

// The plain Riemann mean of the unit-window integrands on the atom grid,
// over the same kept-atom set as the measure (margin matches extraction).
double direct_grid_sum(const DiscreteProfile& u, const CoefficientField& a, const MacroModulus& m,
                       double eps, double W, int N) {
    const double h = u.h;
    const auto unit_cells = static_cast<Eigen::Index>(std::lround(1.0 / h));
    const auto margin = static_cast<Eigen::Index>(std::lround((W - 1.0) / (2.0 * h))) + 2;
    double total = 0;
    int kept = 0;
    for (int j = 0; j < N; ++j) {
        const double x = (j + 0.5) / static_cast<double>(N);
        const double t = x / eps;
        const auto i0 = static_cast<Eigen::Index>(std::lround((t - 0.5 - u.x0) / h));
        if (i0 - margin < 0 || i0 + unit_cells + margin >= u.size()) continue;
        total += local_average_integrand(u, a, eval_macro(m, x), t, eps);
        ++kept;
    }
    return total / kept;
}

}  // namespace

TEST_CASE("window sampling basics") {
    const double eps = 0.05;
    const CoefficientField a = realize(FieldModel::constant(1.5), 0);
    const DiscreteProfile u = micro_profile(eps, 0.01, 2.0, 1);
    const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 2.0, 50);

    CHECK(P.atoms.size() == 50);  // margins cover every window
    double wsum = 0;
    for (const auto& atom : P.atoms) {
        wsum += atom.weight;
        CHECK(atom.coeff_window.minCoeff() == 1.5);
        CHECK(atom.coeff_window.maxCoeff() == 1.5);
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("atom coefficient windows are exact field shifts") {
    const double eps = 0.05;
    const CoefficientField a = realize(FieldModel::checkerboard(1.0), 11);
    const DiscreteProfile u = micro_profile(eps, 0.01, 2.0, 2);
    const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 2.0, 20);
    const auto unit_cells = P.unit_cells;
    const auto margin = P.margin_cells;
    for (const auto& atom : P.atoms) {
        const double t = atom.x / eps;
        const auto i0 = static_cast<Eigen::Index>(std::lround((t - 0.5 - u.x0) / u.h));
        for (Eigen::Index l = 0; l <= unit_cells + 2 * margin; l += 37) {
            const double node = u.x0 + u.h * static_cast<double>(i0 - margin + l);
            CHECK(atom.coeff_window[l] == a.eval(node));
        }
    }
}

TEST_CASE("windows that overflow the domain are dropped and weights renormalized") {
    const double eps = 0.05;
    const CoefficientField a = realize(FieldModel::checkerboard(1.0), 3);
    // No margin: atoms near 0 and 1 overflow.
    const auto n = static_cast<Eigen::Index>(std::lround(1.0 / eps / 0.01)) + 1;
    const DiscreteProfile u = DiscreteProfile::zeros(0.0, 0.01, n);
    const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 2.0, 40);
    CHECK(P.dropped_atoms > 0);
    CHECK(P.atoms.size() + static_cast<std::size_t>(P.dropped_atoms) == 40);
    double wsum = 0;
    for (const auto& atom : P.atoms) wsum += atom.weight;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("energy of the zero profile is the well barrier per unit window") {
    const double eps = 0.1;
    const CoefficientField a = realize(FieldModel::constant(1.0), 0);
    const DiscreteProfile u = DiscreteProfile::zeros(-3.0, 0.01, 1601);  // [-3, 13]
    const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 2.0, 10);
    CHECK(energy_from_measure(P) == doctest::Approx(1.0 / (eps * eps)).epsilon(1e-12));
}

TEST_CASE("energy rewrite equals the direct grid sum exactly") {
    const double eps = 0.05;
    struct Instance {
        FieldModel model;
        std::uint64_t seed;
        std::uint64_t shape;
    };
    const Instance instances[] = {
        {FieldModel::constant(1.3), 0, 1},
        {FieldModel::checkerboard(1.0), 7, 2},
        {FieldModel::periodic({1.0, 1.9, 1.4, 1.2}, 3.0, 5), 5, 3},
    };
    for (const auto& inst : instances) {
        const CoefficientField a = realize(inst.model, inst.seed);
        const DiscreteProfile u = micro_profile(eps, 0.005, 2.0, inst.shape);
        const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 2.0, 25);
        const double rewritten = energy_from_measure(P);
        const double direct = direct_grid_sum(u, a, kUnit, eps, 2.0, 25);
        CHECK(std::abs(rewritten - direct) <= 1e-12 * std::abs(direct));
    }
}

TEST_CASE("measure energy approximates the macro energy on a minimizer") {
    const double eps = 0.04;
    const CoefficientField a = realize(FieldModel::checkerboard(1.0), 8);
    MinimizeOptions opts;
    opts.max_iterations = 300;
    const MinResult res = minimize_diffuse(eps, a, kUnit, default_warm_starts(eps, a, kUnit), opts);

    DiscreteProfile u;
    u.x0 = 0.0;
    u.h = res.profile.h / eps;
    u.values = res.profile.values / eps;
    const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 2.0, 200, "minimizer");
    const double em = energy_from_measure(P);
    CHECK(std::abs(em - res.energy) / res.energy < 0.1);
}

TEST_CASE("invariance diagnostic vanishes at zero shift and on invariant data") {
    const double eps = 0.05;
    const CoefficientField cb = realize(FieldModel::checkerboard(1.0), 4);
    const DiscreteProfile u = micro_profile(eps, 0.01, 3.0, 4);
    const EmpiricalMeasure P = window_samples(u, cb, kUnit, eps, 4.0, 60);
    CHECK(invariance_diagnostic(P, 0.0) == 0.0);

    // Fully shift-invariant data: constant field, constant profile. A
    // dyadic grid keeps every stencil value bitwise identical under shifts.
    const double hb = 1.0 / 64.0;
    const CoefficientField cf = realize(FieldModel::constant(1.2), 0);
    const auto n = static_cast<Eigen::Index>(std::lround(28.0 / hb)) + 1;
    DiscreteProfile flat = DiscreteProfile::zeros(-4.0, hb, n);
    flat.values += 0.7;
    const EmpiricalMeasure Pf = window_samples(flat, cf, kUnit, eps, 4.0, 60);
    CHECK(invariance_diagnostic(Pf, 0.5) == 0.0);
    CHECK(invariance_diagnostic(Pf, -0.75) == 0.0);

    // Affine profile: the slope and coefficient laws are still exactly
    // invariant (the confinement observable is not, so it is excluded).
    DiscreteProfile affine = DiscreteProfile::sample(-4.0, hb, n, [](double t) { return 0.25 * t; });
    const EmpiricalMeasure Pa = window_samples(affine, cf, kUnit, eps, 4.0, 60);
    const std::vector<WindowObservable> shift_invariant{WindowObservable::coeff_mean,
                                                        WindowObservable::mean_abs_slope};
    CHECK(invariance_diagnostic(Pa, 0.5, shift_invariant) == 0.0);

    CHECK_THROWS_AS(invariance_diagnostic(P, 3.0), std::domain_error);
}

TEST_CASE("window sampling commutes with shifting the data") {
    // Presenting the same samples as t -> u(t + tau) with the field shifted by
    // tau must produce exactly the tau-shifted windows. Dyadic grid and shift
    // keep every argument bitwise identical.
    const double eps = 0.05;
    const double h = 1.0 / 64.0;
    const double tau = 32.0 * h;  // 0.5, exactly representable
    const CoefficientField a = realize(FieldModel::checkerboard(1.0), 15);
    const auto n = static_cast<Eigen::Index>(std::lround(28.0 / h)) + 1;
    const DiscreteProfile u =
        DiscreteProfile::sample(-4.0, h, n, [](double t) { return 0.3 * std::sin(0.8 * t); });

    DiscreteProfile shifted = u;  // same samples seen as t -> u(t + tau)
    shifted.x0 = u.x0 - tau;
    const EmpiricalMeasure P1 = window_samples(u, a, kUnit, eps, 2.0, 30);
    const EmpiricalMeasure P2 = window_samples(shifted, a.shifted(tau), kUnit, eps, 2.0, 30);

    REQUIRE(P1.atoms.size() == P2.atoms.size());
    const auto d = static_cast<Eigen::Index>(std::lround(tau / h));
    for (std::size_t j = 0; j < P1.atoms.size(); ++j) {
        const auto& a1 = P1.atoms[j];
        const auto& a2 = P2.atoms[j];
        const double t = a1.x / eps;
        const auto i0 = static_cast<Eigen::Index>(std::lround((t - 0.5 - u.x0) / h));
        const Eigen::Index lo = i0 + d - P2.margin_cells;  // windows sit d cells later
        CHECK((a2.profile_window - u.values.segment(lo, a2.profile_window.size())).abs().maxCoeff() ==
              0.0);
        for (Eigen::Index l = 0; l < a2.coeff_window.size(); l += 29) {
            CHECK(a2.coeff_window[l] == a.eval(u.x0 + h * static_cast<double>(lo + l)));
        }
    }
}

TEST_CASE("marginal diagnostic is zero for a constant field") {
    const double eps = 0.05;
    const FieldModel model = FieldModel::constant(1.5);
    const DiscreteProfile u = micro_profile(eps, 0.01, 2.0, 6);
    const EmpiricalMeasure P = window_samples(u, realize(model, 1), kUnit, eps, 2.0, 50);
    std::vector<std::uint64_t> ref(50);
    for (std::uint64_t i = 0; i < 50; ++i) ref[i] = 900 + i;
    CHECK(marginal_q_diagnostic(P, model, ref) == 0.0);
    CHECK(marginal_q_diagnostic(P, model, ref, MarginalStatistic::window_mean) == 0.0);
}

TEST_CASE("marginal diagnostic concentrates for the checkerboard") {
    const FieldModel model = FieldModel::checkerboard(0.1);
    std::vector<std::uint64_t> ref(500);
    for (std::uint64_t i = 0; i < 500; ++i) ref[i] = 5000 + i;

    auto diagnostic_at = [&](double eps) {
        const double h = 0.02;
        const auto n = static_cast<Eigen::Index>(std::lround((1.0 / eps + 6.0) / h)) + 1;
        const DiscreteProfile u = DiscreteProfile::zeros(-3.0, h, n);
        const EmpiricalMeasure P = window_samples(u, realize(model, 42), kUnit, eps, 2.0, 500);
        return marginal_q_diagnostic(P, model, ref);
    };

    const double d002 = diagnostic_at(0.02);
    CHECK(d002 < 0.1);
    // Shorter trajectories mix less: the distance at eps = 0.1 dominates the
    // one at eps = 0.01 up to 20% noise.
    CHECK(diagnostic_at(0.1) >= diagnostic_at(0.01) * 0.8);
}

TEST_CASE("save and load round-trip") {
    const double eps = 0.05;
    const CoefficientField a = realize(FieldModel::checkerboard(1.0), 19);
    const DiscreteProfile u = micro_profile(eps, 0.01, 2.0, 7);
    const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 2.0, 20, "roundtrip");

    const std::string dir = "ym_roundtrip_tmp";
    save_measure(P, dir);
    const EmpiricalMeasure Q = load_measure(dir);
    std::filesystem::remove_all(dir);

    REQUIRE(Q.atoms.size() == P.atoms.size());
    CHECK(Q.eps == P.eps);
    CHECK(Q.unit_cells == P.unit_cells);
    CHECK(Q.margin_cells == P.margin_cells);
    CHECK(Q.minimizer_id == "roundtrip");
    for (std::size_t j = 0; j < P.atoms.size(); ++j) {
        CHECK(Q.atoms[j].x == P.atoms[j].x);
        CHECK(Q.atoms[j].weight == P.atoms[j].weight);
        CHECK((Q.atoms[j].coeff_window - P.atoms[j].coeff_window).abs().maxCoeff() == 0.0);
        CHECK((Q.atoms[j].profile_window - P.atoms[j].profile_window).abs().maxCoeff() == 0.0);
    }
    CHECK(energy_from_measure(Q) == energy_from_measure(P));
}

TEST_CASE("loading rejects missing or truncated directories") {
    CHECK_THROWS_AS(load_measure("no_such_measure_dir"), std::invalid_argument);

    const double eps = 0.05;
    const CoefficientField a = realize(FieldModel::constant(1.5), 0);
    const DiscreteProfile u = micro_profile(eps, 0.01, 2.0, 9);
    const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 2.0, 12);
    const std::string dir = "ym_truncated_tmp";
    save_measure(P, dir);
    std::filesystem::resize_file(std::filesystem::path(dir) / "windows.bin", 64);
    CHECK_THROWS_AS(load_measure(dir), std::invalid_argument);
    std::filesystem::remove_all(dir);
}

TEST_CASE("per-cell cell limit bounds the measure energy from below") {
    const double eps = 0.01;
    const CoefficientField a = realize(FieldModel::checkerboard(1.0), 23);
    const DpGrid grid{0.05, 0.05, 4.0};

    MinimizeOptions opts;
    opts.tol = 1e-5;
    opts.max_iterations = 120;
    const DiscreteProfile built = build_test_function(default_pieces(eps, a, kUnit, grid), eps, 0.5);
    const MinResult res = minimize_diffuse(eps, a, kUnit, {built}, opts, {"construction"});

    DiscreteProfile u;
    u.x0 = 0.0;
    u.h = res.profile.h / eps;
    u.values = res.profile.values / eps;
    const EmpiricalMeasure P = window_samples(u, a, kUnit, eps, 1.5, 60, "minimizer");
    const double em = energy_from_measure(P);

    const double alpha_hat =
        minimize_sharp_dp(a, 1.0, 50.0, grid, BoundaryMode::pinned).first.energy_per_length;
    CHECK(alpha_hat <= em * 1.15);
}
