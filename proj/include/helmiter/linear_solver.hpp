#pragma once

// Direct sparse factorization and power-iteration primitives shared by the
// iteration engine and the spectral analyzer. Factorizations are immutable
// after construction; concurrent solves against one factorization are safe.

#include <complex>
#include <functional>
#include <memory>
#include <random>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "assembly.hpp"

namespace helmiter {

class SingularMatrix : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Eigen::SparseMatrix<std::complex<double>> to_complex(const SparseOperator& op) {
    using CT = Eigen::Triplet<std::complex<double>>;
    std::vector<CT> trips;
    for (int c = 0; c < op.re.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.re, c); it; ++it)
            trips.emplace_back(it.row(), it.col(), std::complex<double>(it.value(), 0.0));
    if (op.im.size() > 0)
        for (int c = 0; c < op.im.outerSize(); ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(op.im, c); it; ++it)
                trips.emplace_back(it.row(), it.col(), std::complex<double>(0.0, it.value()));
    Eigen::SparseMatrix<std::complex<double>> m(op.n, op.n);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

} // namespace detail

/// Reusable LU factorization of a SparseOperator. Construction fails loudly
/// (SingularMatrix) on structural or numerical singularity; the latter is
/// detected with a short inverse-power probe of the smallest singular value,
/// flagging sigma_min below 1e-14 of sigma_max. Near a discrete resonance of
/// the Helmholtz system this is the error the caller sees.
class Factorization {
public:
    explicit Factorization(const SparseOperator& op) : field_(op.field), n_(op.n) {
        if (op.re.rows() != op.re.cols())
            throw SingularMatrix("linear_solver.factorize: matrix not square");
        if (field_ == ScalarField::Real) {
            real_mat_ = op.re;
            real_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            real_lu_->compute(real_mat_);
            if (real_lu_->info() != Eigen::Success)
                throw SingularMatrix("linear_solver.factorize: LU factorization failed (singular matrix)");
        } else {
            cplx_mat_ = detail::to_complex(op);
            cplx_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>>>();
            cplx_lu_->compute(cplx_mat_);
            if (cplx_lu_->info() != Eigen::Success)
                throw SingularMatrix("linear_solver.factorize: LU factorization failed (singular matrix)");
        }
        probe_singularity();
    }

    ScalarField field() const { return field_; }
    int dim() const { return n_; }
    double sigma_max() const { return sigma_max_; }
    double sigma_min() const { return sigma_min_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        require_real("solve");
        return real_lu_->solve(b);
    }

    Eigen::VectorXd solve_adjoint(const Eigen::VectorXd& b) const {
        require_real("solve_adjoint");
        return real_lu_->adjoint().solve(b);
    }

    /// Split-complex solve. A real factorization handles the two parts with
    /// two independent real solves and never mixes them.
    ComplexVec solve(const ComplexVec& b) const {
        if (field_ == ScalarField::Real)
            return {real_lu_->solve(b.re), real_lu_->solve(b.im)};
        Eigen::VectorXcd rhs(n_);
        for (int i = 0; i < n_; ++i) rhs[i] = {b.re[i], b.im[i]};
        Eigen::VectorXcd x = cplx_lu_->solve(rhs);
        return {x.real(), x.imag()};
    }

    ComplexVec solve_adjoint(const ComplexVec& b) const {
        if (field_ == ScalarField::Real)
            return {real_lu_->adjoint().solve(b.re), real_lu_->adjoint().solve(b.im)};
        Eigen::VectorXcd rhs(n_);
        for (int i = 0; i < n_; ++i) rhs[i] = {b.re[i], b.im[i]};
        Eigen::VectorXcd x = cplx_lu_->adjoint().solve(rhs);
        return {x.real(), x.imag()};
    }

    /// Forward application of the factored matrix (kept for residual checks
    /// and the singular-value probes).
    ComplexVec apply(const ComplexVec& x) const {
        if (field_ == ScalarField::Real)
            return {real_mat_ * x.re, real_mat_ * x.im};
        Eigen::VectorXcd v(n_);
        for (int i = 0; i < n_; ++i) v[i] = {x.re[i], x.im[i]};
        Eigen::VectorXcd y = cplx_mat_ * v;
        return {y.real(), y.imag()};
    }

    ComplexVec apply_adjoint(const ComplexVec& x) const {
        if (field_ == ScalarField::Real)
            return {real_mat_.transpose() * x.re, real_mat_.transpose() * x.im};
        Eigen::VectorXcd v(n_);
        for (int i = 0; i < n_; ++i) v[i] = {x.re[i], x.im[i]};
        Eigen::VectorXcd y = cplx_mat_.adjoint() * v;
        return {y.real(), y.imag()};
    }

private:
    void require_real(const char* what) const {
        if (field_ != ScalarField::Real)
            throw std::logic_error(std::string("linear_solver.") + what +
                                   ": real solve requested on a complex factorization");
    }

    void probe_singularity() {
        std::mt19937_64 rng(0x5eed1234u);
        std::normal_distribution<double> nd;
        ComplexVec x(n_);
        for (int i = 0; i < n_; ++i) {
            x.re[i] = nd(rng);
            x.im[i] = field_ == ScalarField::Complex ? nd(rng) : 0.0;
        }
        auto normalize = [](ComplexVec& v) {
            double s = v.norm2();
            if (s > 0) {
                v.re /= s;
                v.im /= s;
            }
            return s;
        };
        normalize(x);
        double smax = 0;
        for (int it = 0; it < 8; ++it) {
            ComplexVec y = apply_adjoint(apply(x));
            double lam = normalize(y);
            smax = std::sqrt(lam);
            x = std::move(y);
        }
        ComplexVec z(n_);
        for (int i = 0; i < n_; ++i) {
            z.re[i] = nd(rng);
            z.im[i] = field_ == ScalarField::Complex ? nd(rng) : 0.0;
        }
        normalize(z);
        double smin = smax;
        for (int it = 0; it < 8; ++it) {
            ComplexVec y = solve(solve_adjoint(z));
            double lam = normalize(y);
            if (lam > 0) smin = 1.0 / std::sqrt(lam);
            z = std::move(y);
        }
        sigma_max_ = smax;
        sigma_min_ = smin;
        if (!(smin > 1e-14 * smax))
            throw SingularMatrix("linear_solver.factorize: matrix numerically singular "
                                 "(smallest singular value below 1e-14 of the largest)");
    }

    ScalarField field_;
    int n_;
    Eigen::SparseMatrix<double> real_mat_;
    Eigen::SparseMatrix<std::complex<double>> cplx_mat_;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> real_lu_;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>>> cplx_lu_;
    double sigma_max_ = 0, sigma_min_ = 0;
};

inline std::shared_ptr<Factorization> factorize(const SparseOperator& op) {
    return std::make_shared<Factorization>(op);
}

/// Result of a spectral-radius estimate; `converged` is false after max_iter
/// without settling (reported, not fatal - retry with another seed).
struct SpectralEstimate {
    double rho = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Power iteration with per-step normalization and Rayleigh-quotient
/// magnitude for a generic (complex, non-symmetric) linear operator given by
/// its application. Deterministic for a fixed seed.
inline SpectralEstimate power_iteration(const std::function<ComplexVec(const ComplexVec&)>& op,
                                        int dim, double tol = 1e-10, int max_iter = 5000,
                                        std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    ComplexVec x(dim);
    for (int i = 0; i < dim; ++i) {
        x.re[i] = nd(rng);
        x.im[i] = nd(rng);
    }
    double nx = x.norm2();
    x.re /= nx;
    x.im /= nx;

    double rho_prev = -1.0;
    int stable = 0;
    for (int it = 1; it <= max_iter; ++it) {
        ComplexVec y = op(x);
        // Rayleigh quotient x^H y with unit x.
        double rq_re = x.re.dot(y.re) + x.im.dot(y.im);
        double rq_im = x.re.dot(y.im) - x.im.dot(y.re);
        double rho = std::hypot(rq_re, rq_im);
        double ny = y.norm2();
        if (ny < 1e-280) {
            // Operator annihilated the iterate (nilpotent direction).
            return {0.0, it, true};
        }
        y.re /= ny;
        y.im /= ny;
        x = std::move(y);
        if (rho_prev >= 0 && std::abs(rho - rho_prev) <= tol * std::max(rho, 1e-30)) {
            if (++stable >= 3)
                return {rho, it, true};
        } else {
            stable = 0;
        }
        rho_prev = rho;
    }
    return {rho_prev < 0 ? 0.0 : rho_prev, max_iter, false};
}

/// 2-norm estimate via power iteration on M^H M.
inline SpectralEstimate largest_singular_value(const std::function<ComplexVec(const ComplexVec&)>& fwd,
                                               const std::function<ComplexVec(const ComplexVec&)>& adj,
                                               int dim, double tol = 1e-8, int max_iter = 2000,
                                               std::uint64_t seed = 2) {
    auto est = power_iteration([&](const ComplexVec& x) { return adj(fwd(x)); }, dim, tol,
                               max_iter, seed);
    est.rho = std::sqrt(est.rho);
    return est;
}

} // namespace helmiter
