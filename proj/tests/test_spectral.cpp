#include <catch2/catch.hpp>

#include <Eigen/Eigenvalues>

#include "test_helpers.hpp"

using namespace helmiter;

namespace {

Eigen::MatrixXcd dense_operator(const IterationOperator& G) {
    Eigen::MatrixXcd M(G.dim, G.dim);
    for (int j = 0; j < G.dim; ++j) {
        ComplexVec e(G.dim);
        e.re[j] = 1.0;
        ComplexVec col = apply_iteration_operator(G, e);
        for (int i = 0; i < G.dim; ++i) M(i, j) = {col.re[i], col.im[i]};
    }
    return M;
}

} // namespace

TEST_CASE("iteration operator basics") {
    Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
    SECTION("zero input maps to zero") {
        IterationOperator G = make_iteration_operator(g, 0.7);
        ComplexVec z(G.dim);
        ComplexVec y = apply_iteration_operator(G, z);
        CHECK(y.re.cwiseAbs().maxCoeff() == 0.0);
        CHECK(y.im.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("k=0 annihilates everything") {
        IterationOperator G = make_iteration_operator(g, 0.0);
        ComplexVec u(G.dim);
        u.re.setConstant(1.0);
        u.im.setLinSpaced(G.dim, -1.0, 1.0);
        ComplexVec y = apply_iteration_operator(G, u);
        CHECK(y.re.cwiseAbs().maxCoeff() == 0.0);
        CHECK(y.im.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("imaginary diagonal sits exactly on reflecting rows") {
        IterationOperator G = make_iteration_operator(g, 0.9);
        for (int r = 0; r < G.dim; ++r) {
            const GridNode& n = g.node(g.row_to_node()[r]);
            if (n.cls == NodeClass::ReflectingBoundary)
                CHECK(G.diag_im[r] != 0.0);
            else
                CHECK(G.diag_im[r] == 0.0);
        }
    }
}

TEST_CASE("repeated application matches the dense operator square") {
    Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
    IterationOperator G = make_iteration_operator(g, 0.5);
    REQUIRE(G.dim <= 200);
    Eigen::MatrixXcd Gd = dense_operator(G);
    Eigen::MatrixXcd G2 = Gd * Gd;
    ComplexVec e(G.dim);
    e.re[G.dim / 3] = 1.0;
    ComplexVec y = apply_iteration_operator(G, apply_iteration_operator(G, e));
    for (int i = 0; i < G.dim; ++i) {
        CHECK(y.re[i] == Approx(G2(i, G.dim / 3).real()).margin(1e-11));
        CHECK(y.im[i] == Approx(G2(i, G.dim / 3).imag()).margin(1e-11));
    }
}

TEST_CASE("power iteration agrees with the dense eigensolver on rho(G)") {
    Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
    for (double k : {0.5, 1.1}) {
        IterationOperator G = make_iteration_operator(g, k);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(dense_operator(G), false);
        double rho_dense = es.eigenvalues().cwiseAbs().maxCoeff();
        SpectralEstimate est = spectral_radius(G, 1e-10, 20000);
        CHECK(est.converged);
        CHECK(est.rho == Approx(rho_dense).margin(1e-6));
    }
    IterationOperator G = make_iteration_operator(g, 0.5);
    CHECK(spectral_radius(G).rho < 1.0);
}

TEST_CASE("adjoint application is the true adjoint") {
    Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
    IterationOperator G = make_iteration_operator(g, 0.8);
    std::mt19937 rng(4);
    std::normal_distribution<double> nd;
    ComplexVec x(G.dim), y(G.dim);
    for (int i = 0; i < G.dim; ++i) {
        x.re[i] = nd(rng);
        x.im[i] = nd(rng);
        y.re[i] = nd(rng);
        y.im[i] = nd(rng);
    }
    ComplexVec Gx = apply_iteration_operator(G, x);
    ComplexVec Gay = apply_iteration_operator_adjoint(G, y);
    // <Gx, y> == <x, G^H y> for the complex inner product
    double lhs_re = Gx.re.dot(y.re) + Gx.im.dot(y.im);
    double lhs_im = Gx.re.dot(y.im) - Gx.im.dot(y.re);
    double rhs_re = x.re.dot(Gay.re) + x.im.dot(Gay.im);
    double rhs_im = x.re.dot(Gay.im) - x.im.dot(Gay.re);
    CHECK(lhs_re == Approx(rhs_re).margin(1e-10));
    CHECK(lhs_im == Approx(rhs_im).margin(1e-10));
}

TEST_CASE("geometric series identities") {
    Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
    SECTION("k=0 collapses to the first term") {
        GeometricSumReport rep = geometric_sum_check(g, 0.0, 7);
        CHECK(rep.diff_vs_direct <= 1e-12 * rep.u0_norm);
        CHECK(rep.helmholtz_residual <= 1e-10 * rep.rhs_norm);
    }
    SECTION("summed series equals the direct resolvent and solves the system") {
        GeometricSumReport rep = geometric_sum_check(g, 0.5, 90);
        CHECK(rep.diff_vs_direct <= 1e-10 * rep.u0_norm);
        CHECK(rep.helmholtz_residual <= 1e-8 * rep.rhs_norm);
    }
    SECTION("a divergent series is flagged") {
        CHECK_THROWS_AS(geometric_sum_check(g, 1.8, 60), DivergentSeries);
    }
}

TEST_CASE("sweep output and crossing detection") {
    Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
    std::vector<double> ks;
    for (double k = 0.2; k <= 1.4001; k += 0.1) ks.push_back(k);
    auto sweep = spectral_radius_sweep(g, ks, 1e-9, 7, /*with_conditions=*/true);
    REQUIRE(sweep.size() == ks.size());
    for (const auto& p : sweep) {
        CHECK(p.error.empty());
        CHECK(p.converged);
        CHECK(p.cond_A > 1.0);
        CHECK(p.cond_IminusG > 0.0);
    }
    // rho grows with k here, so the crossing is bracketed once
    double cross = unit_crossing(sweep);
    CHECK(std::isfinite(cross));
    CHECK(cross > ks.front());
    CHECK(cross < ks.back());

    std::ostringstream os;
    export_sweep_csv(sweep, os);
    CHECK(os.str().rfind("k,rho,converged_flag,cond_A,cond_IminusG", 0) == 0);
}

TEST_CASE("condition of the resolvent grows towards the crossing") {
    Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
    auto sweep = spectral_radius_sweep(g, {0.3, 0.95}, 1e-9, 7, true);
    CHECK(sweep[1].cond_IminusG > sweep[0].cond_IminusG);
}

TEST_CASE("iteration verdicts cohere with the spectral radius") {
    Grid g = build_grid(make_shape(ShapePreset::Shape1), 0.02);
    for (double k : {1.0, 1.8, 2.6, 3.2}) {
        IterationOperator G = make_iteration_operator(g, k);
        double rho = spectral_radius(G, 1e-9).rho;
        if (std::abs(rho - 1.0) < 0.02) continue;  // dead band
        IterationConfig cfg;
        cfg.k = k;
        cfg.iterations = 30;
        IterationTrace t = run_annular(g, cfg);
        if (rho < 1.0)
            CHECK(t.verdict != Verdict::Diverged);
        else
            CHECK(t.verdict == Verdict::Diverged);
    }
}

TEST_CASE("definiteness of the real operator depends on the boundary type") {
    SECTION("absorbing-only: symmetric, strictly negative spectrum") {
        Grid g = build_grid(make_cavity(0, 1, 0, 1), 0.125);
        SparseOperator A = assemble_modified_poisson(g, 0, 0);
        Eigen::MatrixXd M(A.re);
        CHECK((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
        CHECK(es.eigenvalues().maxCoeff() < 0.0);
    }
    SECTION("reflecting rows break symmetry and definiteness") {
        Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
        SparseOperator A = assemble_modified_poisson(g, 0, 0);
        Eigen::MatrixXd M(A.re);
        CHECK((M - M.transpose()).cwiseAbs().maxCoeff() > 0.0);
        // not positive definite: the symmetrized quadratic form stays negative
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
        CHECK(es.eigenvalues().minCoeff() < 0.0);
    }
}
