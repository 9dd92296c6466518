#include <catch2/catch.hpp>

#include <thread>

#include "test_helpers.hpp"

using namespace helmiter;

namespace {

SparseOperator tiny_real(std::vector<Eigen::Triplet<double>> trips, int n) {
    SparseOperator op;
    op.field = ScalarField::Real;
    op.n = n;
    op.h = 1.0;
    op.re.resize(n, n);
    op.re.setFromTriplets(trips.begin(), trips.end());
    op.re.makeCompressed();
    return op;
}

} // namespace

TEST_CASE("scalar and identity solves") {
    SparseOperator two = tiny_real({{0, 0, 2.0}}, 1);
    Factorization F(two);
    Eigen::VectorXd b(1);
    b << 4.0;
    CHECK(F.solve(b)[0] == Approx(2.0));

    SparseOperator eye = tiny_real({{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}}, 3);
    Factorization Fi(eye);
    Eigen::VectorXd v(3);
    v << 1.5, -2.0, 0.25;
    CHECK((Fi.solve(v) - v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("real path keeps real data real") {
    Grid g = build_grid(make_cavity(0, 1, 0, 1), 0.2);
    SparseOperator A = assemble_modified_poisson(g, 0, 0);
    Factorization F(A);
    ComplexVec b(A.n);
    b.re.setConstant(1.0);
    ComplexVec x = F.solve(b);
    CHECK(x.im.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("singular and near-singular matrices fail loudly") {
    CHECK_THROWS_AS(Factorization(tiny_real({{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}}, 2)),
                    SingularMatrix);
    CHECK_THROWS_AS(Factorization(tiny_real({{0, 0, 1.0}, {1, 1, 1e-16}}, 2)), SingularMatrix);
    // structurally deficient: an empty row
    CHECK_THROWS_AS(Factorization(tiny_real({{0, 0, 1.0}}, 2)), SingularMatrix);
}

TEST_CASE("solve is a left inverse across assembled systems") {
    std::mt19937 rng(5);
    std::normal_distribution<double> nd;
    for (auto [preset, h] : std::vector<std::pair<ShapePreset, double>>{
             {ShapePreset::Shape1, 0.02}, {ShapePreset::SquareSquareHole, 0.05}}) {
        Grid g = build_grid(make_shape(preset), h);
        SparseOperator A = assemble_modified_poisson(g, 0.5, 0.5);
        Factorization F(A);
        for (int trial = 0; trial < 3; ++trial) {
            Eigen::VectorXd b(A.n);
            for (int i = 0; i < A.n; ++i) b[i] = nd(rng);
            Eigen::VectorXd x = F.solve(b);
            double resid = (A.re * x - b).cwiseAbs().maxCoeff();
            CHECK(resid <= 1e-10 * b.cwiseAbs().maxCoeff());
        }
        SparseOperator B = assemble_helmholtz(g, 0.8);
        Factorization FB(B);
        ComplexVec bc(B.n);
        for (int i = 0; i < B.n; ++i) {
            bc.re[i] = nd(rng);
            bc.im[i] = nd(rng);
        }
        ComplexVec x = FB.solve(bc);
        ComplexVec r = FB.apply(x);
        r.re -= bc.re;
        r.im -= bc.im;
        CHECK(r.sup_norm() <= 1e-10 * bc.sup_norm());
    }
}

TEST_CASE("power iteration on operators with known spectra") {
    SECTION("diagonal with entries -k^2 and +ik") {
        // rho = max(k, k^2); k = 1 is excluded since the two moduli tie there
        // and no power method separates them
        for (double k : {0.5, 0.9, 2.0}) {
            int n = 12;
            auto apply = [&](const ComplexVec& x) {
                ComplexVec y(n);
                for (int i = 0; i < n - 1; ++i) {
                    y.re[i] = -k * k * x.re[i];
                    y.im[i] = -k * k * x.im[i];
                }
                y.re[n - 1] = -k * x.im[n - 1];
                y.im[n - 1] = k * x.re[n - 1];
                return y;
            };
            auto est = power_iteration(apply, n, 1e-12, 20000, 3);
            double expect = k <= 1.0 ? k : k * k;
            CHECK(est.converged);
            CHECK(est.rho == Approx(expect).epsilon(1e-8));
        }
    }
    SECTION("nilpotent two-by-two") {
        auto apply = [](const ComplexVec& x) {
            ComplexVec y(2);
            y.re[0] = x.re[1];
            y.im[0] = x.im[1];
            return y;
        };
        auto est = power_iteration(apply, 2, 1e-10, 100, 1);
        CHECK(est.converged);
        CHECK(est.rho == 0.0);
    }
    SECTION("circulant 2I + shift peaks at eigenvalue three") {
        // eigenvalues 2 + omega^j over the 8th roots of unity; the dominant
        // one is simple, which is what power iteration requires
        int n = 8;
        auto apply = [&](const ComplexVec& x) {
            ComplexVec y(n);
            for (int i = 0; i < n; ++i) {
                y.re[i] = 2.0 * x.re[i] + x.re[(i + 1) % n];
                y.im[i] = 2.0 * x.im[i] + x.im[(i + 1) % n];
            }
            return y;
        };
        auto est = power_iteration(apply, n, 1e-12, 20000, 2);
        CHECK(est.converged);
        CHECK(est.rho == Approx(3.0).epsilon(1e-7));
    }
    SECTION("deterministic for a fixed seed") {
        Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.1);
        IterationOperator G = make_iteration_operator(g, 0.6);
        auto a = spectral_radius(G, 1e-10, 5000, 77);
        auto b = spectral_radius(G, 1e-10, 5000, 77);
        CHECK(a.rho == b.rho);
        CHECK(a.iterations == b.iterations);
    }
}

TEST_CASE("concurrent solves against one factorization agree with serial") {
    Grid g = build_grid(make_shape(ShapePreset::SquareSquareHole), 0.05);
    SparseOperator A = assemble_modified_poisson(g, 0, 0);
    Factorization F(A);
    std::vector<Eigen::VectorXd> inputs, serial(8), parallel(8);
    std::mt19937 rng(11);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 8; ++i) {
        Eigen::VectorXd b(A.n);
        for (int j = 0; j < A.n; ++j) b[j] = nd(rng);
        inputs.push_back(b);
    }
    for (int i = 0; i < 8; ++i) serial[i] = F.solve(inputs[i]);
    std::vector<std::thread> pool;
    for (int i = 0; i < 8; ++i)
        pool.emplace_back([&, i] { parallel[i] = F.solve(inputs[i]); });
    for (auto& t : pool) t.join();
    for (int i = 0; i < 8; ++i)
        CHECK((serial[i] - parallel[i]).cwiseAbs().maxCoeff() == 0.0);
}
