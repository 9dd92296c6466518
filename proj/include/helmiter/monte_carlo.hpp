#pragma once

// Reflected-diffusion path simulator with boundary local time. Paths follow
// the Euler scheme Y' = Y + sqrt(2 dt) N(0, I); a step that crosses the
// absorbing boundary stops with a linearly interpolated hitting time, a step
// that penetrates the reflecting boundary by depth d is mirrored across it
// and d is added to the local time. Pointwise solutions of the mixed
// boundary value problem are estimated through their path-functional
// representation.
//
// Determinism contract: the random stream of a path depends only on
// (seed, path_index), and reductions run in fixed path order, so results do
// not depend on thread count or scheduling.

#include <array>
#include <cstdint>
#include <map>
#include <thread>

#include <json.hpp>

#include "geometry.hpp"

namespace helmiter {

class MonteCarloError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TooManyDiscarded : public MonteCarloError {
public:
    using MonteCarloError::MonteCarloError;
};

class ExponentOverflow : public MonteCarloError {
public:
    using MonteCarloError::MonteCarloError;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// xoshiro256++, seeded per path through splitmix64.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path_index) {
        std::uint64_t x = seed ^ (0xD1B54A32D192ED03ULL * (path_index + 1));
        for (auto& w : s_) w = splitmix64(x);
    }

    std::uint64_t next() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double uniform() { return double(next() >> 11) * 0x1.0p-53; }  // [0, 1)

    Vec2 normal_pair() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

private:
    std::array<std::uint64_t, 4> s_;
};

} // namespace detail

struct PathConfig {
    double dt = 1e-5;
    double max_time = 1.0;
    long n_paths = 10000;
    std::uint64_t seed = 0;
    int max_reflection_attempts = 8;
    bool absorb_everywhere = false;  // treat the reflecting boundary as absorbing
    int n_threads = 0;               // 0 = hardware concurrency

    void validate() const {
        if (!(dt > 0)) throw MonteCarloError("monte_carlo.config: dt must be positive");
        if (n_paths < 1) throw MonteCarloError("monte_carlo.config: need at least one path");
        if (!(max_time > 0)) throw MonteCarloError("monte_carlo.config: max_time must be positive");
        if (max_time / dt > 2.1e9)
            throw MonteCarloError("monte_carlo.config: max_time/dt too large (non-termination guard)");
    }
};

/// Coefficients and data of the mixed BVP for pointwise estimation. The
/// reaction coefficient must satisfy c <= 0 wherever paths evaluate it.
struct FkProblem {
    std::function<double(Vec2)> c;          // reaction coefficient (<= 0)
    std::function<double(Vec2)> robin_phi;  // coefficient in du/dn - phi u = g
    std::function<double(Vec2)> f;          // volume source
    std::function<double(Vec2)> dirichlet;  // absorbing boundary data
    std::function<double(Vec2)> g;          // reflecting boundary data
};

struct PathOutcome {
    double tau = 0.0;
    double xi = 0.0;
    Vec2 exit_point;
    int exit_segment = -1;
    bool capped = false;
    bool stuck = false;
    // Path-functional accumulators (zero unless a problem is supplied):
    double integral_f_pi = 0.0;  // int f(Y) Pi dt
    double terminal_score = 0.0; // dirichlet(Y_tau) Pi_tau
    double integral_g_pi = 0.0;  // int g(Y) Pi dxi
};

/// Simulate one reflected path from `start`. The random stream is derived
/// from (cfg.seed, path_index) only.
inline PathOutcome simulate_path(const Domain& domain, Vec2 start, const PathConfig& cfg,
                                 long path_index, const FkProblem* fk = nullptr) {
    cfg.validate();
    PathOutcome out;
    const double start_tol = 1e-9;
    if (!domain.contains(start)) {
        NearestBoundary nb = domain.nearest_boundary(start);
        bool absorbing = cfg.absorb_everywhere ||
                         domain.segments()[nb.segment].kind == BcKind::Dirichlet;
        if (nb.distance <= start_tol && absorbing) {
            out.exit_point = nb.closest;
            out.exit_segment = nb.segment;
            if (fk) out.terminal_score = fk->dirichlet ? fk->dirichlet(nb.closest) : 0.0;
            return out;  // tau = xi = 0
        }
        throw MonteCarloError("monte_carlo.simulate_path: start point not inside the domain");
    }

    detail::PathRng rng(cfg.seed, static_cast<std::uint64_t>(path_index));
    const double step_scale = std::sqrt(2.0 * cfg.dt);
    const long max_steps = static_cast<long>(std::ceil(cfg.max_time / cfg.dt));

    Vec2 y = start;
    double t = 0.0;
    double log_pi = 0.0;

    auto check_c = [&](double cv) {
        if (cv > 0)
            throw MonteCarloError("monte_carlo.feynman_kac: reaction coefficient positive "
                                  "(representation requires c <= 0)");
        return cv;
    };
    auto guard_exponent = [&](double lp) {
        if (lp > 700.0)
            throw ExponentOverflow("monte_carlo.feynman_kac: running exponent exceeded 700");
        return lp;
    };

    for (long step = 0; step < max_steps; ++step) {
        Vec2 g2 = rng.normal_pair();
        Vec2 proposal = y + step_scale * g2;

        if (domain.contains(proposal)) {
            if (fk) {
                double pi = std::exp(log_pi);
                if (fk->f) out.integral_f_pi += fk->f(y) * pi * cfg.dt;
                if (fk->c) log_pi = guard_exponent(log_pi + check_c(fk->c(y)) * cfg.dt);
            }
            y = proposal;
            t += cfg.dt;
            continue;
        }

        // Boundary event: absorb or reflect, retrying reflections until the
        // path re-enters (corner protection).
        bool resolved = false;
        Vec2 attempt = proposal;
        for (int r = 0; r < cfg.max_reflection_attempts && !resolved; ++r) {
            NearestBoundary nb = domain.nearest_boundary(attempt);
            const BoundarySegment& seg = domain.segments()[nb.segment];
            bool absorbing = cfg.absorb_everywhere || seg.kind == BcKind::Dirichlet;
            if (absorbing) {
                // Linear interpolation of the crossing time along the step.
                double d_in = segment_query(seg.shape, y).distance;
                double d_out = nb.distance;
                double theta = d_in + d_out > 0 ? d_in / (d_in + d_out) : 0.0;
                out.tau = t + theta * cfg.dt;
                out.exit_point = y + theta * (attempt - y);
                out.exit_segment = nb.segment;
                if (fk) {
                    double pi = std::exp(log_pi);
                    if (fk->f) out.integral_f_pi += fk->f(y) * pi * theta * cfg.dt;
                    if (fk->c)
                        log_pi = guard_exponent(log_pi + check_c(fk->c(y)) * theta * cfg.dt);
                    out.terminal_score =
                        (fk->dirichlet ? fk->dirichlet(out.exit_point) : 0.0) * std::exp(log_pi);
                }
                return out;
            }
            // Specular reflection across the nearest reflecting segment. The
            // local-time increment of the symmetrized step is twice the
            // penetration depth (half-space Tanaka normalization; checked
            // against the FD local-time field).
            double depth = nb.distance;
            double dxi = 2.0 * depth;
            attempt = attempt - 2.0 * depth * nb.normal;
            out.xi += dxi;
            if (fk) {
                if (fk->robin_phi)
                    log_pi = guard_exponent(log_pi + fk->robin_phi(nb.closest) * dxi);
                if (fk->g) out.integral_g_pi += fk->g(nb.closest) * std::exp(log_pi) * dxi;
            }
            resolved = domain.contains(attempt);
        }
        if (!resolved) {
            out.stuck = true;
            out.tau = t;
            return out;
        }
        if (fk) {
            double pi = std::exp(log_pi);
            if (fk->f) out.integral_f_pi += fk->f(y) * pi * cfg.dt;
            if (fk->c) log_pi = guard_exponent(log_pi + check_c(fk->c(y)) * cfg.dt);
        }
        y = attempt;
        t += cfg.dt;
    }

    out.capped = true;
    out.tau = t;
    return out;
}

namespace detail {

template <typename Fn>
inline void parallel_paths(long n_paths, int n_threads, const Fn& body) {
    int hw = n_threads > 0 ? n_threads : std::max(1u, std::thread::hardware_concurrency());
    if (hw <= 1 || n_paths < 256) {
        for (long i = 0; i < n_paths; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    long chunk = (n_paths + hw - 1) / hw;
    for (int tix = 0; tix < hw; ++tix) {
        long lo = tix * chunk, hi = std::min(n_paths, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (long i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Fixed-order compensated (Kahan) sum; reproducible to the last bit for a
// fixed path set.
class KahanSum {
public:
    void add(double v) {
        double y = v - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0, c_ = 0.0;
};

} // namespace detail

struct Estimate {
    double mean = 0.0;
    double ci99 = 0.0;  // normal-approximation 99% halfwidth
    long n = 0;
};

struct PathStats {
    Estimate tau, xi;
    std::map<int, double> hit_probability;  // by exit segment index
    long discarded = 0;                     // stuck + time-capped
    long n_paths = 0;
};

/// Sample means of tau and xi at a point with 99% confidence halfwidths and
/// per-segment hit probabilities. Paths that stall or hit the time cap are
/// discarded and counted; more than 1% of them is an error.
inline PathStats estimate_stats(const Domain& domain, Vec2 point, const PathConfig& cfg) {
    cfg.validate();
    std::vector<PathOutcome> outcomes(cfg.n_paths);
    detail::parallel_paths(cfg.n_paths, cfg.n_threads, [&](long i) {
        outcomes[i] = simulate_path(domain, point, cfg, i);
    });

    detail::KahanSum tau_s, tau2_s, xi_s, xi2_s;
    std::map<int, long> hits;
    long kept = 0, discarded = 0;
    for (const auto& o : outcomes) {
        if (o.stuck || o.capped) {
            ++discarded;
            continue;
        }
        ++kept;
        tau_s.add(o.tau);
        tau2_s.add(o.tau * o.tau);
        xi_s.add(o.xi);
        xi2_s.add(o.xi * o.xi);
        ++hits[o.exit_segment];
    }
    if (discarded > cfg.n_paths / 100)
        throw TooManyDiscarded("monte_carlo.estimate_stats: more than 1% of paths discarded "
                               "(stuck or time-capped)");
    if (kept == 0)
        throw MonteCarloError("monte_carlo.estimate_stats: no usable paths");

    auto finish = [kept](const detail::KahanSum& s, const detail::KahanSum& s2) {
        Estimate e;
        e.n = kept;
        e.mean = s.value() / kept;
        double var = std::max(0.0, s2.value() / kept - e.mean * e.mean);
        e.ci99 = 2.5758293 * std::sqrt(var / kept);
        return e;
    };
    PathStats st;
    st.n_paths = cfg.n_paths;
    st.tau = finish(tau_s, tau2_s);
    st.xi = finish(xi_s, xi2_s);
    st.discarded = discarded;
    for (auto [seg, cnt] : hits) st.hit_probability[seg] = double(cnt) / kept;
    return st;
}

/// Pointwise solution estimate of the mixed BVP through its path-functional
/// representation: mean of -int f Pi dt + dirichlet(Y_tau) Pi_tau +
/// int g Pi dxi.
inline Estimate feynman_kac_point(const Domain& domain, Vec2 point, const FkProblem& problem,
                                  const PathConfig& cfg) {
    cfg.validate();
    std::vector<double> scores(cfg.n_paths);
    std::vector<char> usable(cfg.n_paths, 1);
    detail::parallel_paths(cfg.n_paths, cfg.n_threads, [&](long i) {
        PathOutcome o = simulate_path(domain, point, cfg, i, &problem);
        if (o.stuck || o.capped) {
            usable[i] = 0;
            return;
        }
        scores[i] = -o.integral_f_pi + o.terminal_score + o.integral_g_pi;
    });
    detail::KahanSum s, s2;
    long kept = 0, discarded = 0;
    for (long i = 0; i < cfg.n_paths; ++i) {
        if (!usable[i]) {
            ++discarded;
            continue;
        }
        ++kept;
        s.add(scores[i]);
        s2.add(scores[i] * scores[i]);
    }
    if (discarded > cfg.n_paths / 100)
        throw TooManyDiscarded("monte_carlo.feynman_kac_point: more than 1% of paths discarded");
    if (kept == 0) throw MonteCarloError("monte_carlo.feynman_kac_point: no usable paths");
    Estimate e;
    e.n = kept;
    e.mean = s.value() / kept;
    double var = std::max(0.0, s2.value() / kept - e.mean * e.mean);
    e.ci99 = 2.5758293 * std::sqrt(var / kept);
    return e;
}

inline nlohmann::json to_json(Vec2 point, const PathConfig& cfg, const PathStats& st) {
    return {{"point", {point.x, point.y}},
            {"n_paths", cfg.n_paths},
            {"dt", cfg.dt},
            {"mean_tau", st.tau.mean},
            {"ci99_tau", st.tau.ci99},
            {"mean_xi", st.xi.mean},
            {"ci99_xi", st.xi.ci99},
            {"discarded", st.discarded}};
}

} // namespace helmiter
