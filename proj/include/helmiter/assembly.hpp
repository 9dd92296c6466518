#pragma once

// Sparse FD systems on a Grid:
//   - the complex Helmholtz system B(k) u = b(k),
//   - the real modified-Poisson operator (Laplacian minus (alpha - k^2)),
//   - the mean-exit-time and boundary-local-time systems.
//
// One row convention throughout: interior rows carry the 5-point stencil;
// reflecting rows enforce the PDE with the boundary condition folded in
// through a ghost node (central difference across the boundary, ghost value
// substituted from the condition, second order). Dirichlet nodal values are
// eliminated into the right-hand side. The stair-step normal is the axis
// direction of each missing neighbor.

#include <complex>
#include <functional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "grid.hpp"

namespace helmiter {

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScalarField { Real, Complex };

/// Real/imaginary parts kept as an explicit pair of real vectors; the real
/// path never allocates imaginary storage.
struct ComplexVec {
    Eigen::VectorXd re, im;

    ComplexVec() = default;
    explicit ComplexVec(int n) : re(Eigen::VectorXd::Zero(n)), im(Eigen::VectorXd::Zero(n)) {}
    ComplexVec(Eigen::VectorXd r, Eigen::VectorXd i) : re(std::move(r)), im(std::move(i)) {}

    int size() const { return static_cast<int>(re.size()); }
    double sup_norm() const {
        double m = 0;
        for (int i = 0; i < re.size(); ++i)
            m = std::max(m, std::hypot(re[i], im[i]));
        return m;
    }
    double norm2() const { return std::sqrt(re.squaredNorm() + im.squaredNorm()); }
};

struct SparseOperator {
    ScalarField field = ScalarField::Real;
    int n = 0;
    double h = 0;
    Eigen::SparseMatrix<double> re;
    Eigen::SparseMatrix<double> im;  // 0x0 for real-field operators

    /// rhs += weight * data(node); `segment` identifies the data label.
    struct Term {
        int row;
        int node;
        double weight;
        int segment;
    };
    std::vector<Term> source_terms;     // PDE source rows (interior + reflecting)
    std::vector<Term> dirichlet_terms;  // eliminated Dirichlet neighbors
    std::vector<Term> flux_terms;       // Neumann/Robin data, one per folded ghost
};

using ComplexDataFn = std::function<std::complex<double>(const std::string& label, Vec2)>;
using RealDataFn = std::function<double(const std::string& label, Vec2)>;

namespace detail {

struct TripletList {
    std::vector<Eigen::Triplet<double>> re, im;
    void add(int r, int c, double v) { re.emplace_back(r, c, v); }
    void add_im(int r, int c, double v) { im.emplace_back(r, c, v); }
};

// Per-node description of one folded ghost: the reflecting segment it
// represents and the projection of that segment's outward normal onto the
// stair axis. Weighting the boundary data by the projection makes the
// staircase flux telescope to the true boundary measure (exact for flat
// axis-aligned segments, first-order for curved ones).
struct GhostFold {
    int direction;  // stencil direction of the missing neighbor
    int segment;    // nearest reflecting segment seen from the ghost point
    double weight;  // |normal . axis| of that segment at the closest point
};

inline std::vector<GhostFold> ghost_folds(const Grid& grid, int node_id) {
    const GridNode& nd = grid.node(node_id);
    const Domain& dom = grid.domain();
    const double h = grid.h();
    std::vector<GhostFold> folds;
    for (int d = 0; d < 4; ++d) {
        if (nd.nbr[d] >= 0) continue;
        Vec2 axis{double(kStencil[d].first), double(kStencil[d].second)};
        Vec2 ghost_pos = nd.pos + h * axis;
        // Among the reflecting segments nearest to the ghost point (ties at
        // corners), take the one whose normal best aligns with the stair
        // axis; a rectangle corner then folds each edge at full weight.
        int seg = nd.segment;
        double w = 1.0, best_d = std::numeric_limits<double>::infinity(), best_a = -1.0;
        for (std::size_t s = 0; s < dom.segments().size(); ++s) {
            if (dom.segments()[s].kind == BcKind::Dirichlet) continue;
            NearestBoundary q = segment_query(dom.segments()[s].shape, ghost_pos);
            double align = std::abs(q.normal.dot(axis));
            if (q.distance < best_d - 1e-12 ||
                (q.distance < best_d + 1e-12 && align > best_a)) {
                best_d = q.distance;
                best_a = align;
                seg = static_cast<int>(s);
                w = std::min(1.0, align);
            }
        }
        folds.push_back({d, seg, w});
    }
    return folds;
}

// Core stencil walk shared by all assemblies. `k_robin` is the wavenumber
// multiplying i*u in folded Robin rows (ignored with robin_in_matrix false,
// where the boundary data is supplied per step through the rhs instead).
inline void assemble_rows(const Grid& grid, double diag_shift, double k_robin,
                          bool robin_in_matrix, SparseOperator& op, TripletList& t) {
    const double h = grid.h();
    const double ih2 = 1.0 / (h * h);
    for (int row = 0; row < grid.n_rows(); ++row) {
        int id = grid.row_to_node()[row];
        const GridNode& nd = grid.node(id);
        double diag = -4.0 * ih2 + diag_shift;
        double diag_im = 0.0;
        for (int d = 0; d < 4; ++d) {
            int nb = nd.nbr[d];
            if (nb < 0) continue;
            const GridNode& m = grid.node(nb);
            if (m.cls == NodeClass::DirichletBoundary)
                op.dirichlet_terms.push_back({row, nb, -ih2, m.segment});
            else
                t.add(row, m.row, ih2);
        }
        for (const GhostFold& g : ghost_folds(grid, id)) {
            // Ghost value substituted from the boundary condition along the
            // stair axis; the opposite neighbor picks up the mirrored weight.
            int opp = nd.nbr[g.direction ^ 2];
            if (opp < 0)
                throw AssemblyError("discretization.assemble: opposite stencil neighbor missing "
                                    "(geometry too thin for h)");
            const GridNode& m = grid.node(opp);
            if (m.cls == NodeClass::DirichletBoundary)
                op.dirichlet_terms.push_back({row, opp, -ih2, m.segment});
            else
                t.add(row, m.row, ih2);

            const BoundarySegment& seg = grid.domain().segments()[g.segment];
            if (robin_in_matrix && seg.kind == BcKind::Robin)
                diag_im += 2.0 * seg.robin_coeff * k_robin * g.weight / h;
            op.flux_terms.push_back({row, id, -2.0 * g.weight / h, g.segment});
        }
        t.add(row, row, diag);
        if (diag_im != 0.0)
            t.add_im(row, row, diag_im);
        op.source_terms.push_back({row, id, 1.0, nd.segment});
    }
}

inline void finalize(SparseOperator& op, const Grid& grid, TripletList& t, ScalarField field) {
    op.field = field;
    op.n = grid.n_rows();
    op.h = grid.h();
    op.re.resize(op.n, op.n);
    op.re.setFromTriplets(t.re.begin(), t.re.end());
    op.re.makeCompressed();
    if (field == ScalarField::Complex) {
        op.im.resize(op.n, op.n);
        op.im.setFromTriplets(t.im.begin(), t.im.end());
        op.im.makeCompressed();
    }
}

} // namespace detail

/// Complex Helmholtz system B(k): interior rows discretize Laplacian + k^2,
/// Robin rows fold du/dn - robin_coeff*i*k*u = g through the ghost node.
inline SparseOperator assemble_helmholtz(const Grid& grid, double k, double damping = 0.0) {
    if (k < 0)
        throw AssemblyError("discretization.assemble_helmholtz: k must be nonnegative");
    SparseOperator op;
    detail::TripletList t;
    detail::assemble_rows(grid, k * k, k, true, op, t);
    if (damping != 0.0)
        for (int r = 0; r < grid.n_rows(); ++r)
            t.add_im(r, r, damping);
    detail::finalize(op, grid, t, ScalarField::Complex);
    return op;
}

/// Real operator (Laplacian - (alpha - k^2)) with per-step Neumann data on
/// reflecting rows. With alpha = k^2 this is the plain stair-stepped
/// Laplacian, entry for entry equal to the real part of B(0).
inline SparseOperator assemble_modified_poisson(const Grid& grid, double alpha, double k) {
    if (alpha < k * k)
        throw AssemblyError("discretization.assemble_modified_poisson: requires alpha >= k^2");
    SparseOperator op;
    detail::TripletList t;
    detail::assemble_rows(grid, -(alpha - k * k), 0.0, false, op, t);
    detail::finalize(op, grid, t, ScalarField::Real);
    return op;
}

/// All-Dirichlet variant: reflecting nodes are treated as Dirichlet
/// (their values prescribed per step), so rows exist for interior nodes only.
inline SparseOperator assemble_modified_poisson_all_dirichlet(const Grid& grid, double alpha,
                                                              double k,
                                                              std::vector<int>* interior_rows) {
    if (alpha < k * k)
        throw AssemblyError("discretization.assemble_modified_poisson: requires alpha >= k^2");
    const double h = grid.h();
    const double ih2 = 1.0 / (h * h);
    // Interior nodes get compact row indices.
    std::vector<int> rows(grid.n_nodes(), -1);
    int n = 0;
    for (int id = 0; id < grid.n_nodes(); ++id)
        if (grid.node(id).cls == NodeClass::Interior) rows[id] = n++;
    SparseOperator op;
    detail::TripletList t;
    for (int id = 0; id < grid.n_nodes(); ++id) {
        const GridNode& nd = grid.node(id);
        if (nd.cls != NodeClass::Interior) continue;
        int row = rows[id];
        t.add(row, row, -4.0 * ih2 - (alpha - k * k));
        for (int d = 0; d < 4; ++d) {
            const GridNode& m = grid.node(nd.nbr[d]);
            if (m.cls == NodeClass::Interior)
                t.add(row, rows[nd.nbr[d]], ih2);
            else
                op.dirichlet_terms.push_back({row, nd.nbr[d], -ih2, m.segment});
        }
        op.source_terms.push_back({row, id, 1.0, nd.segment});
    }
    op.field = ScalarField::Real;
    op.n = n;
    op.h = h;
    op.re.resize(n, n);
    op.re.setFromTriplets(t.re.begin(), t.re.end());
    op.re.makeCompressed();
    if (interior_rows) *interior_rows = std::move(rows);
    return op;
}

/// Per-row sum of robin_coeff * fold-weight over folded ghosts; zero on
/// interior rows and on pure-Neumann boundaries. This is the coupling weight
/// the cross-coupled iterations and the iteration operator's diagonal share.
inline Eigen::VectorXd robin_ghost_weights(const Grid& grid) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(grid.n_rows());
    for (int row = 0; row < grid.n_rows(); ++row) {
        int id = grid.row_to_node()[row];
        if (grid.node(id).cls != NodeClass::ReflectingBoundary) continue;
        for (const detail::GhostFold& g : detail::ghost_folds(grid, id)) {
            const BoundarySegment& seg = grid.domain().segments()[g.segment];
            if (seg.kind == BcKind::Robin)
                w[row] += seg.robin_coeff * g.weight;
        }
    }
    return w;
}

struct AssembledSystem {
    SparseOperator op;
    Eigen::VectorXd rhs;
};

/// Mean-exit-time system: Laplacian E = -1 inside, E = 0 on the absorbing
/// boundary, dE/dn = 0 on the reflecting boundary.
inline AssembledSystem assemble_exit_time(const Grid& grid) {
    if (grid.n_dirichlet() == 0)
        throw AssemblyError("discretization.assemble_exit_time: no absorbing boundary (ill-posed)");
    SparseOperator op = assemble_modified_poisson(grid, 0.0, 0.0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op.n);
    for (const auto& s : op.source_terms) rhs[s.row] += s.weight * (-1.0);
    return {std::move(op), std::move(rhs)};
}

/// Boundary-local-time system: Laplacian L = 0 inside, L = 0 on the absorbing
/// boundary, dL/dn = 1 on the reflecting boundary.
inline AssembledSystem assemble_local_time(const Grid& grid) {
    if (grid.n_dirichlet() == 0)
        throw AssemblyError("discretization.assemble_local_time: no absorbing boundary (ill-posed)");
    SparseOperator op = assemble_modified_poisson(grid, 0.0, 0.0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op.n);
    for (const auto& f : op.flux_terms) {
        const BoundarySegment& seg = grid.domain().segments()[f.segment];
        if (seg.kind != BcKind::Dirichlet)
            rhs[f.row] += f.weight * 1.0;
    }
    return {std::move(op), std::move(rhs)};
}

// --- Right-hand-side builders ----------------------------------------------

/// Label-driven rhs for a complex system: Dirichlet data, Robin/Neumann data
/// and an optional volume source, all evaluated at node positions.
inline ComplexVec build_rhs(const SparseOperator& op, const Grid& grid, const ComplexDataFn& data,
                            const std::function<std::complex<double>(Vec2)>& source = {}) {
    ComplexVec rhs(op.n);
    auto label_of = [&](int seg) -> const std::string& {
        return grid.domain().segments()[seg].data_label;
    };
    for (const auto& trm : op.dirichlet_terms) {
        std::complex<double> v = data(label_of(trm.segment), grid.node(trm.node).pos);
        rhs.re[trm.row] += trm.weight * v.real();
        rhs.im[trm.row] += trm.weight * v.imag();
    }
    for (const auto& trm : op.flux_terms) {
        std::complex<double> v = data(label_of(trm.segment), grid.node(trm.node).pos);
        rhs.re[trm.row] += trm.weight * v.real();
        rhs.im[trm.row] += trm.weight * v.imag();
    }
    if (source) {
        for (const auto& trm : op.source_terms) {
            std::complex<double> v = source(grid.node(trm.node).pos);
            rhs.re[trm.row] += trm.weight * v.real();
            rhs.im[trm.row] += trm.weight * v.imag();
        }
    }
    return rhs;
}

/// Real variant of the label-driven builder.
inline Eigen::VectorXd build_rhs_real(const SparseOperator& op, const Grid& grid,
                                      const RealDataFn& data,
                                      const std::function<double(Vec2)>& source = {}) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op.n);
    auto label_of = [&](int seg) -> const std::string& {
        return grid.domain().segments()[seg].data_label;
    };
    for (const auto& trm : op.dirichlet_terms)
        rhs[trm.row] += trm.weight * data(label_of(trm.segment), grid.node(trm.node).pos);
    for (const auto& trm : op.flux_terms)
        rhs[trm.row] += trm.weight * data(label_of(trm.segment), grid.node(trm.node).pos);
    if (source)
        for (const auto& trm : op.source_terms)
            rhs[trm.row] += trm.weight * source(grid.node(trm.node).pos);
    return rhs;
}

/// Scattering data: the hole carries -exp(-i k x1), everything else is zero.
inline ComplexDataFn plane_wave_data(double k) {
    return [k](const std::string& label, Vec2 p) -> std::complex<double> {
        if (label == "plane-wave")
            return {-std::cos(k * p.x), std::sin(k * p.x)};
        if (label == "zero")
            return {0.0, 0.0};
        throw AssemblyError("discretization.build_rhs: no data registered for label '" + label + "'");
    };
}

/// Matrix-vector product for a (real or complex) sparse operator applied to a
/// split-complex vector.
inline ComplexVec apply(const SparseOperator& op, const ComplexVec& x) {
    ComplexVec y;
    y.re = op.re * x.re;
    y.im = op.re * x.im;
    if (op.field == ScalarField::Complex && op.im.nonZeros() > 0) {
        y.re -= op.im * x.im;
        y.im += op.im * x.re;
    }
    return y;
}

/// Coordinate text export, one "row col real imag" line per entry, 0-based.
inline void export_matrix(const SparseOperator& op, std::ostream& os) {
    Eigen::SparseMatrix<double> imc = op.field == ScalarField::Complex
                                          ? op.im
                                          : Eigen::SparseMatrix<double>(op.n, op.n);
    for (int c = 0; c < op.re.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.re, c); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << it.value() << ' '
               << imc.coeff(it.row(), it.col()) << '\n';
    // imaginary-only entries (none with the current stencils, kept for safety)
    for (int c = 0; c < imc.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(imc, c); it; ++it)
            if (op.re.coeff(it.row(), it.col()) == 0.0)
                os << it.row() << ' ' << it.col() << ' ' << 0.0 << ' ' << it.value() << '\n';
}

} // namespace helmiter
