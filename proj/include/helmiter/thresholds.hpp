#pragma once

// Stochastic sufficiency thresholds. The mean-exit-time field E and the
// boundary-local-time field L are FD solves; the thresholds are
//
//   cavity   k*C = sqrt(1 / max E  -  p),
//   annular  k*A = min over nodes of
//            khat(x) = (-L + sqrt(L^2 + 4 E)) / (2 E),
//
// where khat is the largest wavenumber satisfying both alpha = khat^2 and
// khat^2 E(x) + khat L(x) < 1 at that node.

#include <map>

#include <json.hpp>

#include "linear_solver.hpp"

namespace helmiter {

class ThresholdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoPositiveThreshold : public ThresholdError {
public:
    using ThresholdError::ThresholdError;
};

/// Nodal mean exit time E (time units), over system rows.
inline Eigen::VectorXd exit_time_field(const Grid& grid) {
    AssembledSystem sys = assemble_exit_time(grid);
    Factorization F(sys.op);
    return F.solve(sys.rhs);
}

/// Nodal expected boundary local time L, over system rows. Identically zero
/// when the domain has no reflecting boundary.
inline Eigen::VectorXd local_time_field(const Grid& grid) {
    AssembledSystem sys = assemble_local_time(grid);
    Factorization F(sys.op);
    return F.solve(sys.rhs);
}

/// Cavity threshold. Throws NoPositiveThreshold when the damping alone
/// exhausts the contraction budget (p >= 1 / max E).
inline double k_star_cavity(const Eigen::VectorXd& exit_time, double damping) {
    if (damping < 0)
        throw ThresholdError("thresholds.k_star_cavity: damping must be nonnegative");
    double sup_e = exit_time.maxCoeff();
    if (!(sup_e > 0))
        throw ThresholdError("thresholds.k_star_cavity: exit-time field not positive");
    double budget = 1.0 / sup_e - damping;
    if (!(budget > 0))
        throw NoPositiveThreshold("thresholds.k_star_cavity: no positive threshold, "
                                  "damping saturates 1/sup(E)");
    return std::sqrt(budget);
}

/// Annular threshold and the nodal khat field it minimizes. Entries of khat
/// where E <= 0 (absorbing nodes) are NaN and excluded from the minimum.
inline std::pair<double, Eigen::VectorXd> k_star_annular(const Eigen::VectorXd& exit_time,
                                                         const Eigen::VectorXd& local_time) {
    if (exit_time.size() != local_time.size())
        throw ThresholdError("thresholds.k_star_annular: field size mismatch");
    Eigen::VectorXd khat(exit_time.size());
    double k_star = std::numeric_limits<double>::infinity();
    for (int i = 0; i < exit_time.size(); ++i) {
        double e = exit_time[i], l = local_time[i];
        if (!(e > 0)) {
            khat[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        khat[i] = (-l + std::sqrt(l * l + 4.0 * e)) / (2.0 * e);
        k_star = std::min(k_star, khat[i]);
    }
    if (!std::isfinite(k_star))
        throw ThresholdError("thresholds.k_star_annular: no node with positive exit time");
    return {k_star, std::move(khat)};
}

/// Hypothesis margin of the annular sufficiency condition:
/// max over nodes of alpha*E + k*L; below one certifies convergence.
inline double sufficiency_margin(const Eigen::VectorXd& exit_time,
                                 const Eigen::VectorXd& local_time, double k, double alpha) {
    if (alpha < k * k)
        throw ThresholdError("thresholds.sufficiency_margin: requires alpha >= k^2");
    return (alpha * exit_time + k * local_time).maxCoeff();
}

/// Cavity variant: (alpha + p) * max E.
inline double sufficiency_margin_cavity(const Eigen::VectorXd& exit_time, double damping,
                                        double alpha) {
    return (alpha + damping) * exit_time.maxCoeff();
}

/// Analytic feasibility certificate for the waveguide iteration. The product
/// k^2 * sup E[tau] is bounded below by (m pi / L_wid)^2 * L_wid^2 / 16 =
/// m^2 pi^2 / 16, independent of the width; for m >= 2 this exceeds one, so
/// the sufficiency condition can never hold. For m = 1 the bound alone does
/// not decide.
struct WaveguideFeasibility {
    int mode = 1;
    bool decided = false;
    bool feasible = false;
    double bound = 0.0;      // m^2 pi^2 / 16
    long coeff_num = 0;      // bound = (coeff_num / coeff_den) * pi^2, exact
    long coeff_den = 16;
    double exit_time_lower = 0.0;  // L_wid^2 / 16
    double mode_cutoff = 0.0;      // m pi / L_wid
    std::string reason;
};

inline WaveguideFeasibility waveguide_feasibility(double L_wid, int m) {
    if (!(L_wid > 0 && L_wid < 1))
        throw ThresholdError("thresholds.waveguide_feasibility: need 0 < L_wid < 1");
    if (m < 1)
        throw ThresholdError("thresholds.waveguide_feasibility: mode index must be >= 1");
    WaveguideFeasibility cert;
    cert.mode = m;
    cert.coeff_num = static_cast<long>(m) * m;
    cert.coeff_den = 16;
    cert.bound = double(cert.coeff_num) / double(cert.coeff_den) * M_PI * M_PI;
    cert.exit_time_lower = L_wid * L_wid / 16.0;
    cert.mode_cutoff = m * M_PI / L_wid;
    if (cert.bound > 1.0) {
        cert.decided = true;
        cert.feasible = false;
        cert.reason = "k^2 * sup E[tau] >= m^2 pi^2 / 16 > 1 for every propagating k";
    } else {
        cert.decided = false;
        cert.reason = "analytic bound below one; sufficiency undecided, experiment required";
    }
    return cert;
}

/// Bundle of threshold inputs and outputs for one geometry.
struct ThresholdReport {
    std::string shape;
    double h = 0.0;
    Eigen::VectorXd exit_time, local_time;  // over system rows
    Eigen::VectorXd khat;                   // annular only
    double sup_exit = 0.0, sup_local = 0.0;
    double k_star = 0.0;
    std::string scheme;  // "annular" or "cavity"
    double damping = 0.0;
};

inline ThresholdReport annular_threshold_report(const Grid& grid, const std::string& shape_name) {
    ThresholdReport r;
    r.shape = shape_name;
    r.h = grid.h();
    r.scheme = "annular";
    AssembledSystem se = assemble_exit_time(grid);
    Factorization F(se.op);
    r.exit_time = F.solve(se.rhs);
    AssembledSystem sl = assemble_local_time(grid);
    r.local_time = F.solve(sl.rhs);
    auto [ks, khat] = k_star_annular(r.exit_time, r.local_time);
    r.k_star = ks;
    r.khat = std::move(khat);
    r.sup_exit = r.exit_time.maxCoeff();
    r.sup_local = r.local_time.maxCoeff();
    return r;
}

inline ThresholdReport cavity_threshold_report(const Grid& grid, const std::string& shape_name,
                                               double damping) {
    ThresholdReport r;
    r.shape = shape_name;
    r.h = grid.h();
    r.scheme = "cavity";
    r.damping = damping;
    r.exit_time = exit_time_field(grid);
    r.sup_exit = r.exit_time.maxCoeff();
    r.local_time = Eigen::VectorXd::Zero(r.exit_time.size());
    r.k_star = k_star_cavity(r.exit_time, damping);
    return r;
}

inline nlohmann::json to_json(const ThresholdReport& r) {
    return {{"shape", r.shape},   {"h", r.h},           {"sup_E", r.sup_exit},
            {"sup_L", r.sup_local}, {"k_star", r.k_star}, {"scheme", r.scheme},
            {"damping", r.damping}};
}

/// Nodal field CSV (x, y, value) over system rows.
inline void export_threshold_fields_csv(const Grid& grid, const ThresholdReport& r,
                                        std::ostream& os) {
    os << "x,y,exit_time,local_time,khat\n";
    for (int row = 0; row < grid.n_rows(); ++row) {
        const GridNode& n = grid.node(grid.row_to_node()[row]);
        os << n.pos.x << ',' << n.pos.y << ',' << r.exit_time[row] << ',' << r.local_time[row]
           << ',' << (r.khat.size() ? r.khat[row] : std::numeric_limits<double>::quiet_NaN())
           << '\n';
    }
}

} // namespace helmiter
