#include <catch2/catch.hpp>

#include <helmiter/thresholds.hpp>

#include "test_helpers.hpp"

using namespace helmiter;

TEST_CASE("annular threshold arithmetic on the tabulated field pairs") {
    // (sup E, sup L) -> k*A, pure closed-form arithmetic
    auto kstar = [](double e, double l) {
        Eigen::VectorXd E(1), L(1);
        E << e;
        L << l;
        return k_star_annular(E, L).first;
    };
    CHECK(kstar(0.03, 0.46) == Approx(1.93).margin(0.01));
    CHECK(kstar(0.15, 0.91) == Approx(0.95).margin(0.01));
    CHECK(kstar(0.20, 1.24) == Approx(0.72).margin(0.01));
}

TEST_CASE("cavity threshold formula and its failure mode") {
    Eigen::VectorXd E(3);
    E << 0.1, 1.0, 0.2;
    CHECK(k_star_cavity(E, 0.0) == Approx(1.0));
    Eigen::VectorXd E2(1);
    E2 << 0.25;
    CHECK(k_star_cavity(E2, 1.0) == Approx(std::sqrt(3.0)));
    CHECK_THROWS_AS(k_star_cavity(E2, 4.0), NoPositiveThreshold);
    CHECK_THROWS_AS(k_star_cavity(E2, -1.0), ThresholdError);
}

TEST_CASE("damping strictly lowers the cavity threshold") {
    Eigen::VectorXd E(1);
    E << 0.3;
    double prev = k_star_cavity(E, 0.0);
    for (double p : {0.5, 1.0, 2.0, 3.0}) {
        double ks = k_star_cavity(E, p);
        CHECK(ks < prev);
        prev = ks;
    }
}

TEST_CASE("khat satisfies the quadratic root identity on computed fields") {
    Grid g = build_grid(make_shape(ShapePreset::Shape1), 0.01);
    ThresholdReport rep = annular_threshold_report(g, "shape1");
    for (int r = 0; r < g.n_rows(); ++r) {
        double kh = rep.khat[r];
        if (!std::isfinite(kh)) continue;
        double resid = kh * kh * rep.exit_time[r] + kh * rep.local_time[r] - 1.0;
        REQUIRE(std::abs(resid) <= 1e-10);
    }
    CHECK(rep.k_star == Approx(rep.khat.minCoeff()));
}

TEST_CASE("sufficiency margins") {
    Grid g = build_grid(make_shape(ShapePreset::Shape1), 0.01);
    Eigen::VectorXd E = exit_time_field(g), L = local_time_field(g);
    SECTION("zero wavenumber and shift give zero margin") {
        CHECK(sufficiency_margin(E, L, 0.0, 0.0) == 0.0);
    }
    SECTION("margin is one at the threshold by construction") {
        auto [ks, khat] = k_star_annular(E, L);
        CHECK(sufficiency_margin(E, L, ks, ks * ks) == Approx(1.0).margin(1e-9));
    }
    SECTION("margin exceeds one in the divergent regime") {
        CHECK(sufficiency_margin(E, L, 2.9, 2.9 * 2.9) > 1.0);
    }
    SECTION("cavity variant") {
        CHECK(sufficiency_margin_cavity(E, 2.0, 3.0) == Approx(5.0 * E.maxCoeff()));
    }
}

TEST_CASE("threshold fields reproduce the reference suprema at h=0.01") {
    struct Expect { ShapePreset preset; double sup_e, sup_l, k_star; };
    // reference values: (0.03, 0.46, 1.93), (0.15, 0.91, 0.95), (0.20, 1.24, 0.72)
    Expect cases[] = {{ShapePreset::Shape1, 0.03, 0.46, 1.93},
                      {ShapePreset::Shape2, 0.15, 0.91, 0.95},
                      {ShapePreset::Shape3, 0.20, 1.24, 0.72}};
    for (const auto& c : cases) {
        Grid g = build_grid(make_shape(c.preset), 0.01);
        ThresholdReport rep = annular_threshold_report(g, "shape");
        CHECK(rep.sup_exit == Approx(c.sup_e).epsilon(0.15));
        CHECK(rep.sup_local == Approx(c.sup_l).epsilon(0.15));
        CHECK(rep.k_star == Approx(c.k_star).epsilon(0.10));
    }
}

TEST_CASE("scaling the domain up lowers the annular threshold") {
    Grid g1 = build_grid(make_shape(ShapePreset::Shape1), 0.01);
    Grid g2 = build_grid(scale_domain(make_shape(ShapePreset::Shape1), 2.0), 0.01);
    auto r1 = annular_threshold_report(g1, "base");
    auto r2 = annular_threshold_report(g2, "scaled");
    CHECK(r2.k_star < r1.k_star);
    CHECK(r2.sup_exit == Approx(4.0 * r1.sup_exit).epsilon(0.02));
}

TEST_CASE("waveguide feasibility certificates") {
    SECTION("second and higher modes are certified infeasible") {
        for (int m : {2, 3, 5}) {
            WaveguideFeasibility c = waveguide_feasibility(0.5, m);
            CHECK(c.decided);
            CHECK_FALSE(c.feasible);
            CHECK(c.coeff_num == long(m) * m);
            CHECK(c.coeff_den == 16);
            CHECK(c.bound == Approx(m * m * M_PI * M_PI / 16.0));
            CHECK(c.bound > 1.0);
        }
        CHECK(waveguide_feasibility(0.5, 2).bound == Approx(M_PI * M_PI / 4.0));
    }
    SECTION("the first mode is not decided by the bound alone") {
        WaveguideFeasibility c = waveguide_feasibility(0.5, 1);
        CHECK_FALSE(c.decided);
        CHECK(c.bound == Approx(M_PI * M_PI / 16.0));
        CHECK(c.bound < 1.0);
    }
    SECTION("the bound does not depend on the width") {
        CHECK(waveguide_feasibility(0.3, 2).bound == Approx(waveguide_feasibility(0.8, 2).bound));
    }
    SECTION("input validation") {
        CHECK_THROWS_AS(waveguide_feasibility(1.5, 2), ThresholdError);
        CHECK_THROWS_AS(waveguide_feasibility(0.5, 0), ThresholdError);
    }
}

TEST_CASE("threshold report serializes its scalars") {
    Grid g = build_grid(make_shape(ShapePreset::Shape1), 0.02);
    ThresholdReport rep = annular_threshold_report(g, "shape1");
    nlohmann::json j = to_json(rep);
    CHECK(j.at("shape") == "shape1");
    CHECK(j.at("scheme") == "annular");
    CHECK(j.at("sup_E").get<double>() == Approx(rep.sup_exit));
    CHECK(j.at("k_star").get<double>() == Approx(rep.k_star));
}

TEST_CASE("cavity report uses the exit field only") {
    Grid g = build_grid(make_cavity(0, 1, 0, 1), 0.05);
    ThresholdReport rep = cavity_threshold_report(g, "cavity", 0.5);
    CHECK(rep.scheme == "cavity");
    CHECK(rep.k_star == Approx(std::sqrt(1.0 / rep.sup_exit - 0.5)));
}
