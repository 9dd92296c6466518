#pragma once

// The nested Poisson iterations. Each scheme splits the complex Helmholtz
// problem into a real and an imaginary chain of modified-Poisson solves:
//
//   cavity        chains coupled through the PDE (damping term),
//                 homogeneous Neumann walls,
//   annular       chains coupled through the radiating boundary condition,
//   waveguide     annular recursion with inlet data and per-edge coupling
//                 signs,
//   alternative   the real chain absorbed (Dirichlet) on the outer boundary,
//                 fed by a discrete normal derivative of the imaginary chain.
//
// The operator never changes across steps, so one factorization per chain is
// reused for every solve.

#include <optional>

#include "linear_solver.hpp"

namespace helmiter {

class IterationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InfeasibleMode : public IterationError {
public:
    using IterationError::IterationError;
};

class DegenerateNormalDerivative : public IterationError {
public:
    using IterationError::IterationError;
};

enum class IterationScheme { Cavity, Annular, Waveguide, AlternativeAnnular };
enum class Verdict { Converged, Decaying, Diverged };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Converged: return "converged";
    case Verdict::Decaying: return "decaying";
    case Verdict::Diverged: return "diverged";
    }
    return "?";
}

struct IterationConfig {
    IterationScheme scheme = IterationScheme::Annular;
    double k = 0.0;
    std::optional<double> alpha;  // defaults to k^2
    double damping = 0.0;         // cavity coupling rate p >= 0
    int iterations = 30;
    int mode = 1;                 // waveguide transverse mode m
    double stop_tol = 0.0;        // > 0 enables early stop on relative decay
    bool store_iterates = false;

    // Cavity data (real scalar fields); missing entries are zero.
    std::function<double(Vec2)> source_re, source_im;
    std::function<double(Vec2)> boundary_re, boundary_im;

    // Same-grid reference solution (full-node, split complex) for per-step
    // error tracking.
    const struct NodeField* reference = nullptr;

    double resolved_alpha() const { return alpha.value_or(k * k); }

    void validate() const {
        double a = resolved_alpha();
        if (a < k * k)
            throw IterationError("iteration.config: requires alpha >= k^2");
        if (damping < 0)
            throw IterationError("iteration.config: damping must be nonnegative");
        if (iterations < 1)
            throw IterationError("iteration.config: need at least one iteration");
    }
};

/// Split-complex field aligned with the full grid node list (boundary values
/// included).
struct NodeField {
    Eigen::VectorXd re, im;
};

struct IterationTrace {
    std::vector<double> sup_re, sup_im;        // per-step sup norms, n = 0..steps
    Eigen::VectorXd sum_re, sum_im;            // partial sums over all grid nodes
    std::vector<Eigen::VectorXd> iter_re, iter_im;  // stored iterates (optional)
    std::vector<double> err_re, err_im;        // per-step error vs reference
    Verdict verdict = Verdict::Decaying;
    double fitted_ratio = 0.0;
    int steps = 0;

    double sup_sum(int n) const { return sup_re[n] + sup_im[n]; }
};

/// Partial sums as one complex nodal field (boundary values reattached by
/// construction, since the per-step fields carry them).
inline NodeField reconstruct(const IterationTrace& trace) {
    return {trace.sum_re, trace.sum_im};
}

namespace detail {

// Expand a system-row vector to a full-node vector, filling Dirichlet nodes
// with the given nodal values.
inline Eigen::VectorXd expand_rows(const Grid& grid, const Eigen::VectorXd& sys,
                                   const std::function<double(int)>& dirichlet_value) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(grid.n_nodes());
    for (int id = 0; id < grid.n_nodes(); ++id) {
        const GridNode& n = grid.node(id);
        full[id] = n.row >= 0 ? sys[n.row] : dirichlet_value(id);
    }
    return full;
}

struct ChainState {
    Eigen::VectorXd v_full, w_full;  // current iterate over all nodes
};

// Shared bookkeeping: norms, sums, blow-up detection, verdict fitting.
class TraceBuilder {
public:
    TraceBuilder(const Grid& grid, const IterationConfig& cfg)
        : grid_(grid), cfg_(cfg) {
        trace_.sum_re = Eigen::VectorXd::Zero(grid.n_nodes());
        trace_.sum_im = Eigen::VectorXd::Zero(grid.n_nodes());
    }

    // Returns false when the iteration should stop (blow-up or tolerance).
    bool push(const Eigen::VectorXd& v_full, const Eigen::VectorXd& w_full) {
        double sv = v_full.size() ? v_full.cwiseAbs().maxCoeff() : 0.0;
        double sw = w_full.size() ? w_full.cwiseAbs().maxCoeff() : 0.0;
        trace_.sup_re.push_back(sv);
        trace_.sup_im.push_back(sw);
        trace_.sum_re += v_full;
        trace_.sum_im += w_full;
        if (cfg_.store_iterates) {
            trace_.iter_re.push_back(v_full);
            trace_.iter_im.push_back(w_full);
        }
        if (cfg_.reference) {
            trace_.err_re.push_back((trace_.sum_re - cfg_.reference->re).cwiseAbs().maxCoeff());
            trace_.err_im.push_back((trace_.sum_im - cfg_.reference->im).cwiseAbs().maxCoeff());
        }
        int n = static_cast<int>(trace_.sup_re.size()) - 1;
        double s0 = trace_.sup_sum(0);
        double sn = sv + sw;
        if (n > 0 && sn > 1e6 * s0) {
            blown_up_ = true;
            return false;
        }
        if (cfg_.stop_tol > 0 && n > 0 && sn < cfg_.stop_tol * s0)
            return false;
        return true;
    }

    IterationTrace finish() {
        int n = static_cast<int>(trace_.sup_re.size()) - 1;
        trace_.steps = n;
        double s0 = trace_.sup_sum(0);
        double sn = trace_.sup_sum(n);
        if (blown_up_) {
            trace_.verdict = Verdict::Diverged;
            trace_.fitted_ratio = fit_ratio();
            return std::move(trace_);
        }
        trace_.fitted_ratio = fit_ratio();
        if (s0 == 0.0 || sn < 1e-12 * s0)
            trace_.verdict = Verdict::Converged;
        else if (trace_.fitted_ratio < 1.0)
            trace_.verdict = Verdict::Decaying;
        else
            trace_.verdict = Verdict::Diverged;
        return std::move(trace_);
    }

private:
    // Geometric growth rate of the envelope: ratio of window maxima over the
    // two trailing thirds of the run. A complex dominant mode makes the
    // sup-norm sequence oscillate, so endpoint ratios are unreliable; window
    // maxima track |lambda| regardless of phase.
    double fit_ratio() const {
        int n = static_cast<int>(trace_.sup_re.size()) - 1;
        if (n < 1) return 0.0;
        int len = std::max(1, (n + 2) / 3);
        int w2_first = n - len + 1;
        int w1_first = std::max(1, w2_first - len);
        double m1 = 0.0, m2 = 0.0;
        for (int i = w1_first; i < w2_first; ++i) m1 = std::max(m1, trace_.sup_sum(i));
        for (int i = w2_first; i <= n; ++i) m2 = std::max(m2, trace_.sup_sum(i));
        if (m1 <= 0.0) return m2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        if (m2 <= 0.0) return 0.0;
        return std::pow(m2 / m1, 1.0 / (w2_first - w1_first));
    }

    const Grid& grid_;
    const IterationConfig& cfg_;
    IterationTrace trace_;
    bool blown_up_ = false;
};

// Initial annular iterates: Dirichlet scattering data on the hole,
// homogeneous Neumann outside. Shared verbatim with the spectral module so
// both consume identical data.
inline ComplexVec annular_initial(const Grid& grid, const SparseOperator& op,
                                  const Factorization& F, double k) {
    ComplexVec rhs = build_rhs(op, grid, plane_wave_data(k));
    return F.solve(rhs);
}

} // namespace detail

/// Iteration with boundary cross-coupling (annular and waveguide wiring).
/// The per-step right-hand side is the shared diagonal recursion: interior
/// rows -alpha * previous, reflecting rows additionally couple the chains
/// with weight (2 k / h) per folded ghost.
inline IterationTrace run_coupled(const Grid& grid, const IterationConfig& cfg) {
    cfg.validate();
    const double k = cfg.k;
    const double alpha = cfg.resolved_alpha();
    const double h = grid.h();

    SparseOperator op = assemble_modified_poisson(grid, alpha, k);
    Factorization F(op);

    // Diagonal recursion coefficients (split complex).
    Eigen::VectorXd rw = robin_ghost_weights(grid);
    Eigen::VectorXd d_re = Eigen::VectorXd::Constant(grid.n_rows(), -alpha);
    Eigen::VectorXd d_im = -(2.0 * k / h) * rw;

    // Step 0.
    Eigen::VectorXd v, w;
    std::function<double(int)> dir_re, dir_im;
    if (cfg.scheme == IterationScheme::Annular) {
        ComplexVec u0 = detail::annular_initial(grid, op, F, k);
        v = std::move(u0.re);
        w = std::move(u0.im);
        auto data = plane_wave_data(k);
        dir_re = [&grid, data](int id) {
            const auto& n = grid.node(id);
            return data(grid.domain().segments()[n.segment].data_label, n.pos).real();
        };
        dir_im = [&grid, data](int id) {
            const auto& n = grid.node(id);
            return data(grid.domain().segments()[n.segment].data_label, n.pos).imag();
        };
    } else if (cfg.scheme == IterationScheme::Waveguide) {
        double L_wid = grid.domain().bounding_box().ymax;
        double alpha_m = cfg.mode * M_PI / L_wid;
        if (!(k * k > alpha_m * alpha_m))
            throw InfeasibleMode("iteration.run_waveguide: k^2 <= (m*pi/L_wid)^2, "
                                 "transverse mode not propagating");
        double beta = std::sqrt(k * k - alpha_m * alpha_m);
        v = Eigen::VectorXd::Zero(grid.n_rows());
        Eigen::VectorXd rhs_w = build_rhs_real(
            op, grid, [&](const std::string& label, Vec2 p) {
                return label == "waveguide-inlet" ? 2.0 * beta * std::sin(alpha_m * p.y) : 0.0;
            });
        w = F.solve(rhs_w);
        dir_re = [](int) { return 0.0; };
        dir_im = dir_re;
    } else {
        throw IterationError("iteration.run_coupled: unsupported scheme");
    }

    detail::TraceBuilder tb(grid, cfg);
    bool go = tb.push(detail::expand_rows(grid, v, dir_re),
                      detail::expand_rows(grid, w, dir_im));

    auto zero = [](int) { return 0.0; };
    for (int n = 1; n <= cfg.iterations && go; ++n) {
        Eigen::VectorXd rhs_v = d_re.cwiseProduct(v) - d_im.cwiseProduct(w);
        Eigen::VectorXd rhs_w = d_im.cwiseProduct(v) + d_re.cwiseProduct(w);
        v = F.solve(rhs_v);
        w = F.solve(rhs_w);
        go = tb.push(detail::expand_rows(grid, v, zero), detail::expand_rows(grid, w, zero));
    }
    return tb.finish();
}

inline IterationTrace run_annular(const Grid& grid, IterationConfig cfg) {
    cfg.scheme = IterationScheme::Annular;
    if (!grid.domain().has_dirichlet() || !grid.domain().has_reflecting())
        throw IterationError("iteration.run_annular: needs both absorbing and reflecting boundary");
    return run_coupled(grid, cfg);
}

inline IterationTrace run_waveguide(const Grid& grid, IterationConfig cfg) {
    cfg.scheme = IterationScheme::Waveguide;
    return run_coupled(grid, cfg);
}

/// Cavity iteration: chains coupled through the damping term only, all
/// boundary data enters at step 0.
inline IterationTrace run_cavity(const Grid& grid, IterationConfig cfg) {
    cfg.scheme = IterationScheme::Cavity;
    cfg.validate();
    if (grid.n_dirichlet() == 0)
        throw IterationError("iteration.run_cavity: absorbing boundary required for well-posedness");
    const double alpha = cfg.resolved_alpha();
    const double p = cfg.damping;

    SparseOperator op = assemble_modified_poisson(grid, alpha, cfg.k);
    Factorization F(op);

    auto fn_or_zero = [](const std::function<double(Vec2)>& f) -> std::function<double(Vec2)> {
        if (f) return f;
        return [](Vec2) { return 0.0; };
    };
    auto f_re = fn_or_zero(cfg.source_re), f_im = fn_or_zero(cfg.source_im);
    auto g_re = fn_or_zero(cfg.boundary_re), g_im = fn_or_zero(cfg.boundary_im);

    // Step-0 data: Dirichlet g on the absorbing boundary, homogeneous Neumann
    // on any reflecting walls, volume source f.
    auto initial = [&](const std::function<double(Vec2)>& f,
                       const std::function<double(Vec2)>& g) {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op.n);
        for (const auto& trm : op.dirichlet_terms)
            rhs[trm.row] += trm.weight * g(grid.node(trm.node).pos);
        for (const auto& trm : op.source_terms)
            rhs[trm.row] += trm.weight * f(grid.node(trm.node).pos);
        return F.solve(rhs);
    };
    Eigen::VectorXd v = initial(f_re, g_re);
    Eigen::VectorXd w = initial(f_im, g_im);

    detail::TraceBuilder tb(grid, cfg);
    bool go = tb.push(
        detail::expand_rows(grid, v, [&](int id) { return g_re(grid.node(id).pos); }),
        detail::expand_rows(grid, w, [&](int id) { return g_im(grid.node(id).pos); }));

    auto zero = [](int) { return 0.0; };
    for (int n = 1; n <= cfg.iterations && go; ++n) {
        Eigen::VectorXd rhs_v = -alpha * v + p * w;
        Eigen::VectorXd rhs_w = -alpha * w - p * v;
        v = F.solve(rhs_v);
        w = F.solve(rhs_w);
        go = tb.push(detail::expand_rows(grid, v, zero), detail::expand_rows(grid, w, zero));
    }
    return tb.finish();
}

/// Discrete normal derivative at a reflecting node, recovered through the
/// same ghost stencil the assembly folds: the boundary-condition data is read
/// back from the node's own row.
inline double extract_normal_derivative(const Grid& grid, const SparseOperator& op,
                                        const Eigen::VectorXd& row_values_times_A,
                                        const Eigen::VectorXd& source_at_rows, int row,
                                        double fold_weight_sum) {
    if (fold_weight_sum < 1e-12) return 0.0;  // fold degenerate, no flux carried
    double flux = source_at_rows[row] - row_values_times_A[row];
    return flux * grid.h() / (2.0 * fold_weight_sum);
}

/// The alternative outer-absorbed iteration: the real chain is Dirichlet on
/// the whole boundary and receives -(1/k) d(imag)/dn as its outer data; the
/// imaginary chain keeps the reflecting coupling.
inline IterationTrace run_alternative(const Grid& grid, IterationConfig cfg) {
    cfg.scheme = IterationScheme::AlternativeAnnular;
    cfg.validate();
    const double k = cfg.k;
    if (k == 0.0)
        throw DegenerateNormalDerivative(
            "iteration.run_alternative: k = 0 makes the -(1/k) boundary data singular");
    const double alpha = cfg.resolved_alpha();
    const double h = grid.h();

    SparseOperator op_w = assemble_modified_poisson(grid, alpha, k);
    Factorization Fw(op_w);
    std::vector<int> interior_row_of;
    SparseOperator op_v = assemble_modified_poisson_all_dirichlet(grid, alpha, k, &interior_row_of);
    Factorization Fv(op_v);

    // Per-row fold weights of the w-system (zero on interior rows).
    Eigen::VectorXd fold_w = Eigen::VectorXd::Zero(grid.n_rows());
    for (const auto& t : op_w.flux_terms)
        fold_w[t.row] += -t.weight * h / 2.0;  // recover sum of ghost weights

    auto data = plane_wave_data(k);

    // Step 0. w: standard annular imaginary chain. v: Dirichlet everywhere,
    // zero on the reflecting boundary.
    ComplexVec rhs_w0 = build_rhs(op_w, grid, data);
    Eigen::VectorXd w = Fw.solve(rhs_w0.im);
    ComplexVec rhs_v0 = build_rhs(op_v, grid, data);
    Eigen::VectorXd v = Fv.solve(rhs_v0.re);

    // Nodal values of the v-chain (Dirichlet values prescribed per step).
    Eigen::VectorXd v_full = Eigen::VectorXd::Zero(grid.n_nodes());
    Eigen::VectorXd w_prev_source = Eigen::VectorXd::Zero(grid.n_rows());
    auto fill_v_full = [&](const Eigen::VectorXd& vi,
                           const std::function<double(int)>& dirichlet_value) {
        for (int id = 0; id < grid.n_nodes(); ++id) {
            int ir = interior_row_of[id];
            v_full[id] = ir >= 0 ? vi[ir] : dirichlet_value(id);
        }
    };
    fill_v_full(v, [&](int id) {
        const auto& n = grid.node(id);
        if (n.cls == NodeClass::ReflectingBoundary) return 0.0;
        return data(grid.domain().segments()[n.segment].data_label, n.pos).real();
    });

    detail::TraceBuilder tb(grid, cfg);
    bool go = tb.push(v_full, detail::expand_rows(grid, w, [&](int id) {
                          const auto& n = grid.node(id);
                          return data(grid.domain().segments()[n.segment].data_label, n.pos).imag();
                      }));

    for (int n = 1; n <= cfg.iterations && go; ++n) {
        // Extract d(w_{n-1})/dn on the reflecting boundary.
        Eigen::VectorXd Aw = op_w.re * w;
        Eigen::VectorXd v_dirichlet = Eigen::VectorXd::Zero(grid.n_nodes());
        for (int id = 0; id < grid.n_nodes(); ++id) {
            const GridNode& nd = grid.node(id);
            if (nd.cls != NodeClass::ReflectingBoundary) continue;
            double dwdn = extract_normal_derivative(grid, op_w, Aw, w_prev_source, nd.row,
                                                    fold_w[nd.row]);
            v_dirichlet[id] = -dwdn / k;
        }

        // w chain first (it consumes v_{n-1}).
        Eigen::VectorXd rhs_w = -alpha * w;
        for (const auto& t : op_w.flux_terms) {
            const auto& seg = grid.domain().segments()[t.segment];
            if (seg.kind != BcKind::Dirichlet)
                rhs_w[t.row] += t.weight * (k * v_full[t.node]);
        }
        w_prev_source = -alpha * w;
        Eigen::VectorXd w_next = Fw.solve(rhs_w);

        // v chain: interior source plus eliminated Dirichlet data.
        Eigen::VectorXd rhs_v(op_v.n);
        for (int id = 0; id < grid.n_nodes(); ++id) {
            int ir = interior_row_of[id];
            if (ir >= 0) rhs_v[ir] = -alpha * v_full[id];
        }
        for (const auto& t : op_v.dirichlet_terms)
            rhs_v[t.row] += t.weight * v_dirichlet[t.node];
        v = Fv.solve(rhs_v);
        w = std::move(w_next);

        fill_v_full(v, [&](int id) { return v_dirichlet[id]; });
        go = tb.push(v_full, detail::expand_rows(grid, w, [](int) { return 0.0; }));
    }
    return tb.finish();
}

/// Dispatch on the configured scheme.
inline IterationTrace run_iteration(const Grid& grid, const IterationConfig& cfg) {
    switch (cfg.scheme) {
    case IterationScheme::Cavity: return run_cavity(grid, cfg);
    case IterationScheme::Annular: return run_annular(grid, cfg);
    case IterationScheme::Waveguide: return run_waveguide(grid, cfg);
    case IterationScheme::AlternativeAnnular: return run_alternative(grid, cfg);
    }
    throw IterationError("iteration.run: unknown scheme");
}

/// Trace CSV: columns (n, sup_v, sup_w, sup_sum, error_vs_reference).
inline void export_trace_csv(const IterationTrace& t, std::ostream& os) {
    os << "n,sup_v,sup_w,sup_sum,error_vs_reference,error_im_vs_reference\n";
    for (std::size_t n = 0; n < t.sup_re.size(); ++n) {
        os << n << ',' << t.sup_re[n] << ',' << t.sup_im[n] << ','
           << t.sup_re[n] + t.sup_im[n] << ',';
        if (n < t.err_re.size())
            os << t.err_re[n] << ',' << t.err_im[n];
        else
            os << ',';
        os << '\n';
    }
}

/// Field CSV: (x, y, re, im) over all grid nodes.
inline void export_field_csv(const Grid& grid, const NodeField& f, std::ostream& os) {
    os << "x,y,re,im\n";
    for (int id = 0; id < grid.n_nodes(); ++id)
        os << grid.node(id).pos.x << ',' << grid.node(id).pos.y << ','
           << f.re[id] << ',' << f.im[id] << '\n';
}

} // namespace helmiter
