#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "homlab/field.hpp"
#include "homlab/rng.hpp"
#include "homlab/stats.hpp"

using namespace homlab;

namespace {

std::vector<FieldModel> all_models(std::uint64_t seed) {
    return {
        FieldModel::constant(1.5),
        FieldModel::periodic({1.0, 1.8, 1.2, 2.0}, 2.5, seed),
        FieldModel::checkerboard(1.0, {}, seed),
        FieldModel::poisson(1.0, 0.8, 0.4, seed),
    };
}

}  // namespace

TEST_CASE("constant field evaluates to its value everywhere") {
    const CoefficientField f = realize(FieldModel::constant(1.5), 7);
    for (double t : {-100.0, -0.3, 0.0, 0.25, 9.75}) CHECK(f.eval(t) == 1.5);
}

TEST_CASE("realization is deterministic in (model, seed)") {
    for (const auto& model : all_models(42)) {
        const CoefficientField f = realize(model, 42);
        const CoefficientField g = realize(model, 42);
        for (int i = 0; i < 1000; ++i) {
            const double t = -50.0 + 0.1 * i;
            CHECK(f.eval(t) == g.eval(t));
        }
    }
}

TEST_CASE("different seeds give different checkerboard realizations") {
    const FieldModel model = FieldModel::checkerboard(1.0);
    const CoefficientField f = realize(model, 1);
    const CoefficientField g = realize(model, 2);
    int differing = 0;
    for (int i = 0; i < 200; ++i)
        if (f.eval(0.5 + i) != g.eval(0.5 + i)) ++differing;
    CHECK(differing > 50);
}

TEST_CASE("shift acts exactly: shifted(y).eval(t) == eval(t + y)") {
    for (const auto& model : all_models(3)) {
        const CoefficientField f = realize(model, 3);
        std::uint64_t ctr = 123;
        for (int i = 0; i < 1000; ++i) {
            const double t = (uniform01(splitmix64(ctr++)) - 0.5) * 60.0;
            const double y = (uniform01(splitmix64(ctr++)) - 0.5) * 20.0;
            CHECK(f.shifted(y).eval(t) == f.eval(t + y));
        }
    }
}

TEST_CASE("zero shift and inverse shift reproduce the field") {
    const CoefficientField f = realize(FieldModel::checkerboard(1.0), 11);
    const CoefficientField id = f.shifted(0.0);
    const CoefficientField round = f.shifted(1.2).shifted(-1.2);
    for (int i = 0; i < 200; ++i) {
        const double t = -10.0 + 0.1 * i;
        CHECK(id.eval(t) == f.eval(t));
        CHECK(round.eval(t) == f.eval(t));
    }
}

TEST_CASE("shifts compose additively") {
    const CoefficientField f = realize(FieldModel::checkerboard(0.7), 21);
    const CoefficientField g1 = f.shifted(0.9).shifted(2.1);
    const CoefficientField g2 = f.shifted(0.9 + 2.1);
    for (int i = 0; i < 100; ++i) CHECK(g1.eval(0.3 * i) == g2.eval(0.3 * i));
}

TEST_CASE("checkerboard value is the cell value containing the lattice point") {
    const CoefficientField f = realize(FieldModel::checkerboard(1.0), 5);
    // eval(0.7) of the original equals eval(0) of the field shifted by 0.7.
    CHECK(f.shifted(0.7).eval(0.0) == f.eval(0.7));
    // Piecewise constant within one cell: points in the same cell share values.
    std::vector<double> bps;
    f.breakpoints_in(-0.5, 1.5, bps);
    REQUIRE(!bps.empty());
    const double b = bps.front();
    CHECK(f.eval(b + 1e-6) == f.eval(b + 0.5e-6));
}

TEST_CASE("all realizations stay inside [1, 2]") {
    for (const auto& model : all_models(17)) {
        const CoefficientField f = realize(model, 17);
        double lo = 1e9, hi = -1e9;
        for (int i = 0; i < 100000; ++i) {
            const double v = f.eval(-500.0 + 0.01 * i);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo >= 1.0);
        CHECK(hi <= 2.0);
    }
}

TEST_CASE("ergodic averaging approaches the model mean") {
    const FieldModel model = FieldModel::checkerboard(1.0);
    const CoefficientField f = realize(model, 2024);
    const double R = 1e4;
    const int n = 200000;
    const double dt = R / n;
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += f.eval((i + 0.5) * dt);
    const double avg = sum / n;
    CHECK(std::abs(avg - 1.5) < 0.02);
}

TEST_CASE("checkerboard law is stationary: window averages at two base points") {
    // Empirical distribution of window averages around t0 across 200 seeds
    // should not depend on t0.
    auto window_avg = [](const CoefficientField& f, double t0) {
        double s = 0;
        for (int i = 0; i < 64; ++i) s += f.eval(t0 + (i + 0.5) * (2.0 / 64));
        return s / 64;
    };
    const FieldModel model = FieldModel::checkerboard(1.0);
    std::vector<double> at0, at1;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const CoefficientField f = realize(model, seed);
        at0.push_back(window_avg(f, 0.0));
        at1.push_back(window_avg(f, 17.3));
    }
    CHECK(ks_distance(at0, at1) < 0.15);
}

TEST_CASE("invalid model parameters are rejected") {
    CHECK_THROWS_AS(realize(FieldModel::constant(0.5), 1), std::invalid_argument);
    CHECK_THROWS_AS(realize(FieldModel::constant(2.5), 1), std::invalid_argument);
    CHECK_THROWS_AS(realize(FieldModel::periodic({1.0, 1.5}, -1.0, 1), std::uint64_t(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(realize(FieldModel::checkerboard(1.0, {ValueDistribution::Type::two_point, 0.5, 2.0}),
                            1),
                    std::invalid_argument);
    CHECK_THROWS_AS(realize(FieldModel::poisson(-1.0, 0.5, 0.5), 1), std::invalid_argument);
}

TEST_CASE("macro modulus evaluation") {
    const MacroModulus c = MacroModulus::constant(1.0);
    CHECK(eval_macro(c, 0.5) == 1.0);

    const MacroModulus pw = MacroModulus::piecewise({0.5}, {1.0, 2.0});
    CHECK(eval_macro(pw, 0.25) == 1.0);
    CHECK(eval_macro(pw, 0.75) == 2.0);
    CHECK_THROWS_AS(eval_macro(pw, -0.1), std::domain_error);
    CHECK_THROWS_AS(eval_macro(pw, 1.1), std::domain_error);

    const MacroModulus sm = MacroModulus::sampled({0.0, 0.5, 1.0}, {1.0, 2.0, 1.0});
    CHECK(eval_macro(sm, 0.25) == doctest::Approx(1.5));
    CHECK(eval_macro(sm, 1.0) == doctest::Approx(1.0));

    CHECK(pw.min_value() == 1.0);
    CHECK(pw.max_value() == 2.0);
}

TEST_CASE("macro modulus validation") {
    CHECK_THROWS_AS(MacroModulus::piecewise({0.5}, {1.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(MacroModulus::piecewise({1.5}, {1.0, 2.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(MacroModulus::sampled({0.2, 1.0}, {1.0, 2.0}).validate(), std::invalid_argument);
}
