#pragma once

// Discrete iteration operator G = A^{-1} D(k) of the annular scheme: A is the
// real stair-stepped Laplacian with folded reflecting rows, D the diagonal
// per-step recursion (real -alpha on every row, imaginary coupling on
// reflecting rows). G is never formed; all spectral quantities work through
// operator application (two real solves per apply).

#include "iteration.hpp"

namespace helmiter {

class SpectralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergentSeries : public SpectralError {
public:
    using SpectralError::SpectralError;
};

struct IterationOperator {
    std::shared_ptr<Factorization> A;
    Eigen::VectorXd diag_re, diag_im;  // recursion coefficients per row
    int dim = 0;
    double k = 0.0, alpha = 0.0;
};

/// Build the iteration operator at wavenumber k (alpha defaults to k^2).
/// Rows with a nonzero imaginary coefficient are exactly the grid's
/// reflecting rows.
inline IterationOperator make_iteration_operator(const Grid& grid, double k,
                                                 std::optional<double> alpha = {}) {
    double a = alpha.value_or(k * k);
    SparseOperator op = assemble_modified_poisson(grid, a, k);
    IterationOperator G;
    G.A = std::make_shared<Factorization>(op);
    G.dim = grid.n_rows();
    G.k = k;
    G.alpha = a;
    G.diag_re = Eigen::VectorXd::Constant(G.dim, -a);
    G.diag_im = -(2.0 * k / grid.h()) * robin_ghost_weights(grid);
    return G;
}

/// One application u -> A^{-1}(D u), computed as two real solves.
inline ComplexVec apply_iteration_operator(const IterationOperator& G, const ComplexVec& u) {
    ComplexVec rhs(G.dim);
    rhs.re = G.diag_re.cwiseProduct(u.re) - G.diag_im.cwiseProduct(u.im);
    rhs.im = G.diag_im.cwiseProduct(u.re) + G.diag_re.cwiseProduct(u.im);
    return G.A->solve(rhs);
}

/// Adjoint application u -> D^H (A^{-H} u).
inline ComplexVec apply_iteration_operator_adjoint(const IterationOperator& G,
                                                   const ComplexVec& u) {
    ComplexVec y = G.A->solve_adjoint(u);
    ComplexVec out(G.dim);
    out.re = G.diag_re.cwiseProduct(y.re) + G.diag_im.cwiseProduct(y.im);
    out.im = -G.diag_im.cwiseProduct(y.re) + G.diag_re.cwiseProduct(y.im);
    return out;
}

/// Spectral radius of G by power iteration.
inline SpectralEstimate spectral_radius(const IterationOperator& G, double tol = 1e-8,
                                        int max_iter = 5000, std::uint64_t seed = 7) {
    return power_iteration([&](const ComplexVec& u) { return apply_iteration_operator(G, u); },
                           G.dim, tol, max_iter, seed);
}

/// 2-norm condition estimate of the factored matrix.
inline double condition_estimate(const Factorization& F, double tol = 1e-6, int max_iter = 400) {
    auto smax = largest_singular_value(
        [&](const ComplexVec& x) { return F.apply(x); },
        [&](const ComplexVec& x) { return F.apply_adjoint(x); }, F.dim(), tol, max_iter, 11);
    auto sinv = largest_singular_value(
        [&](const ComplexVec& x) { return F.solve(x); },
        [&](const ComplexVec& x) { return F.solve_adjoint(x); }, F.dim(), tol, max_iter, 12);
    return smax.rho * sinv.rho;
}

struct SweepPoint {
    double k = 0.0;
    double rho = 0.0;
    int iterations = 0;
    bool converged = false;
    double cond_A = 0.0;
    double cond_IminusG = 0.0;
    std::string error;  // per-k failure, sweep continues
};

/// Sweep the spectral radius and 2-norm condition estimates over a list of
/// wavenumbers (alpha = k^2 throughout).
inline std::vector<SweepPoint> spectral_radius_sweep(const Grid& grid,
                                                     const std::vector<double>& k_values,
                                                     double tol = 1e-8,
                                                     std::uint64_t seed = 7,
                                                     bool with_conditions = true) {
    std::vector<SweepPoint> sweep;
    // A is k-independent at alpha = k^2; factor once.
    IterationOperator base = make_iteration_operator(grid, 0.0, 0.0);
    Eigen::VectorXd rw = robin_ghost_weights(grid);
    double cond_A = with_conditions ? condition_estimate(*base.A) : 0.0;

    for (double k : k_values) {
        SweepPoint pt;
        pt.k = k;
        pt.cond_A = cond_A;
        try {
            IterationOperator G = base;
            G.k = k;
            G.alpha = k * k;
            G.diag_re = Eigen::VectorXd::Constant(G.dim, -k * k);
            G.diag_im = -(2.0 * k / grid.h()) * rw;
            SpectralEstimate est = spectral_radius(G, tol, 5000, seed);
            pt.rho = est.rho;
            pt.iterations = est.iterations;
            pt.converged = est.converged;
            if (with_conditions) {
                SparseOperator B = assemble_helmholtz(grid, k);
                Factorization FB(B);
                auto fwd = [&](const ComplexVec& x) {
                    ComplexVec gx = apply_iteration_operator(G, x);
                    return ComplexVec(x.re - gx.re, x.im - gx.im);
                };
                auto adj = [&](const ComplexVec& x) {
                    ComplexVec gx = apply_iteration_operator_adjoint(G, x);
                    return ComplexVec(x.re - gx.re, x.im - gx.im);
                };
                auto inv = [&](const ComplexVec& x) { return FB.solve(G.A->apply(x)); };
                auto inv_adj = [&](const ComplexVec& x) {
                    return G.A->apply_adjoint(FB.solve_adjoint(x));
                };
                double smax = largest_singular_value(fwd, adj, G.dim).rho;
                double sinv = largest_singular_value(inv, inv_adj, G.dim).rho;
                pt.cond_IminusG = smax * sinv;
            }
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
        sweep.push_back(std::move(pt));
    }
    return sweep;
}

/// First k where rho crosses one, linearly interpolated between sweep points;
/// NaN when the sweep never crosses.
inline double unit_crossing(const std::vector<SweepPoint>& sweep) {
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        if (!sweep[i - 1].error.empty() || !sweep[i].error.empty()) continue;
        double a = sweep[i - 1].rho - 1.0, b = sweep[i].rho - 1.0;
        if (a < 0.0 && b >= 0.0)
            return sweep[i - 1].k +
                   (sweep[i].k - sweep[i - 1].k) * (-a) / (b - a);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

struct GeometricSumReport {
    int terms = 0;
    double u0_norm = 0.0;
    double rhs_norm = 0.0;
    double diff_vs_direct = 0.0;      // || S_N - (I-G)^{-1} u0 ||_inf
    double helmholtz_residual = 0.0;  // || B S_N - b ||_inf
};

/// Sum the operator series S_N = sum_n G^n u0 by repeated application and
/// compare it against (a) the direct solve of (I - G) x = u0 and (b) the
/// direct complex Helmholtz solve on the same grid. u0 is the iteration
/// engine's own initial iterate.
inline GeometricSumReport geometric_sum_check(const Grid& grid, double k, int n_terms) {
    GeometricSumReport rep;
    rep.terms = n_terms;
    IterationOperator G = make_iteration_operator(grid, k);
    SparseOperator op = assemble_modified_poisson(grid, k * k, k);
    ComplexVec u0 = detail::annular_initial(grid, op, *G.A, k);
    rep.u0_norm = u0.sup_norm();

    ComplexVec sum = u0;
    ComplexVec term = u0;
    int growing = 0;
    double prev = term.sup_norm();
    for (int n = 1; n <= n_terms; ++n) {
        term = apply_iteration_operator(G, term);
        sum.re += term.re;
        sum.im += term.im;
        double cur = term.sup_norm();
        growing = cur > prev ? growing + 1 : 0;
        if (growing >= 10)
            throw DivergentSeries("spectral.geometric_sum_check: partial sums grew for 10 "
                                  "consecutive terms (rho(G) >= 1 at this k)");
        prev = cur;
    }

    SparseOperator B = assemble_helmholtz(grid, k);
    Factorization FB(B);
    // (I - G)^{-1} u0 = B^{-1} (A u0).
    ComplexVec direct = FB.solve(G.A->apply(u0));
    rep.diff_vs_direct = ComplexVec(sum.re - direct.re, sum.im - direct.im).sup_norm();

    ComplexVec b = build_rhs(B, grid, plane_wave_data(k));
    rep.rhs_norm = b.sup_norm();
    ComplexVec Bs = apply(B, sum);
    rep.helmholtz_residual = ComplexVec(Bs.re - b.re, Bs.im - b.im).sup_norm();
    return rep;
}

/// Sweep CSV: (k, rho, converged_flag, cond_A, cond_IminusG).
inline void export_sweep_csv(const std::vector<SweepPoint>& sweep, std::ostream& os) {
    os << "k,rho,converged_flag,cond_A,cond_IminusG\n";
    for (const auto& p : sweep) {
        os << p.k << ',' << p.rho << ',' << (p.converged ? 1 : 0) << ',' << p.cond_A << ','
           << p.cond_IminusG << '\n';
    }
}

} // namespace helmiter
