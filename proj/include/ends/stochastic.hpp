#pragma once

// Stochastic completeness of an end: the Feller double integral, the 1-harmonic radial
// function u with u(0) = 1, u'(0) = 0, the superharmonicity of u on a 2D end and a Monte
// Carlo explosion estimate for the radial diffusion d^2/dr^2 + h_bar d/dr.

#include "ends/endmodel.hpp"
#include "ends/errors.hpp"
#include "ends/logmath.hpp"
#include "ends/ode.hpp"
#include "ends/parallel.hpp"
#include "ends/profile.hpp"
#include "ends/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace ends {

// ---------------------------------------------------------------------------
// Feller integral

namespace detail {

/**
 * log F(x), F(x) = int_0^x w(s)/w(x) ds, integrated in tau = x - s over windows of width
 * h0 2^j with h0 = 1/|h_bar(x)|. The exponent log w(x) - log w(x - tau) is taken as a plain
 * difference while |log w(x)| <= 1e3 and as int_0^tau h_bar(x - u) du beyond, where
 * the difference would cancel catastrophically.
 */
inline double feller_log_inner(const RadialProfile& p, double x) {
    if (!(x > 0)) return kNegInf;
    const double lx = p.log_value(x);
    const bool direct = std::abs(lx) <= 1e3;
    auto drop = [&](double tau) {
        if (direct) return lx - p.log_value(std::max(0.0, x - tau));
        // h_bar is smooth on the decaying layer, so one and two 8-point panels usually agree
        // parametrized by u = x - s so the panel widths keep full precision when tau << x
        auto gl = [&](double a, double b) {
            const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
            double acc = 0.0;
            for (std::size_t i = 0; i < 8; ++i) acc += kGl8w[i] * p.log_derivative(std::max(0.0, x - (c + hw * kGl8x[i])));
            return acc * hw;
        };
        const double one = gl(0.0, tau), two = gl(0.0, 0.5 * tau) + gl(0.5 * tau, tau);
        if (std::abs(one - two) <= 1e-13 * std::abs(two) + 1e-300) return two;
        return integrate([&](double u) { return p.log_derivative(std::max(0.0, x - u)); }, 0.0, tau, 1e-12, 1e-300);
    };
    auto g = [&](double tau) { return -drop(tau); };
    const double h = std::abs(p.log_derivative(x));
    double h0 = (std::isfinite(h) && h > 0) ? 1.0 / h : x;
    h0 = std::clamp(h0, 1e-300, x);
    QuadOptions q;
    // the direct difference carries eps |log w(x)| of noise
    q.rel_tol = direct ? std::max(1e-12, 32 * std::numeric_limits<double>::epsilon() * std::abs(lx)) : 1e-11;
    double total = kNegInf;
    double prev = kInf;
    for (int j = 0; j < 2100; ++j) {
        const double lo = h0 * (std::ldexp(1.0, j) - 1.0);
        if (lo >= x) break;
        const double hi = std::min(x, h0 * (std::ldexp(1.0, j + 1) - 1.0));
        const double piece = log_integrate_or_throw(g, lo, hi, q);
        total = log_add(total, piece);
        // once the integrand has decayed by 40 e-folds the remaining windows cannot matter
        if (piece < total - 40.0 && piece < prev) break;
        prev = piece;
    }
    return total;
}

} // namespace detail

/// int_0^inf (1/w(r)) int_0^r w(s) ds dr, with the windowed convergence rules of tail_integral.
inline TailValue feller_integral(const RadialProfile& p, const TailOptions& opt = {}) {
    if (p.r_max() < kInf) return TailValue::indeterminate();
    TailOptions o = opt;
    // only the verdict matters, and the inner values carry ~1e-12 of noise
    o.quad.rel_tol = std::max(opt.quad.rel_tol, 1e-7);
    return log_tail([&](double x) { return detail::feller_log_inner(p, x); }, 0.0, 1.0, o);
}

// ---------------------------------------------------------------------------
// The 1-harmonic radial function

struct UTraceOptions {
    double rel_tol = 1e-9;
    double overflow = 1e12;
    /// Windows [2^j - 1, 2^(j+1) - 1], j < windows, so R = 2^windows - 1.
    int windows = 6;
    /// Increment ratio at or below which growth counts as settling.
    double settle_ratio = 0.9;
    double flat_slack = 1e-8;
};

struct UTrace {
    std::vector<double> r, u, du;
    double c = 0.0;
    double R = 0.0;          ///< requested end
    double r_end = 0.0;      ///< reached end (earlier when clipped)
    bool diverging = false;  ///< clipped at the overflow guard or growing without settling
    bool settling = false;   ///< increments over the windows shrink geometrically
    bool clipped = false;
    std::vector<double> increments;
    double integral_form = 0.0;     ///< 1 + int_0^r_end (1/w_c) int_0^r u w_c
    double integral_residual = 0.0; ///< |u(r_end) - integral_form| / u(r_end)
    OdeSolution<2> solution;

    /// u and u' at r by dense output.
    OdeState<2> at(double r) const { return solution.at(r); }
};

namespace detail {

/**
 * 1 + int_0^X F_u(x) dx with F_u(x) = int_0^x u(s) w(s)/w(x) ds. Panels are the ODE steps;
 * both levels use 8-point Gauss-Legendre, and the running inner integral is carried as
 * S_j = F_u(x_j) so only differences of log w appear.
 */
inline double integral_form(const RadialProfile& pc, const OdeSolution<2>& sol) {
    double S = 0.0; // F_u at the current panel start
    CompensatedSum outer;
    for (const auto& st : sol.steps) {
        const double a = st.t0, b = st.t1;
        if (!(b > a)) continue;
        const double la = pc.log_value(a);
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        double acc = 0.0;
        for (std::size_t i = 0; i < 8; ++i) {
            const double x = c + h * kGl8x[i];
            const double lx = pc.log_value(x);
            const double ci = 0.5 * (a + x), hi = 0.5 * (x - a);
            double inner = 0.0;
            for (std::size_t k = 0; k < 8; ++k) {
                const double s = ci + hi * kGl8x[k];
                inner += kGl8w[k] * st.at(s)[0] * std::exp(pc.log_value(s) - lx);
            }
            acc += kGl8w[i] * (S * std::exp(la - lx) + inner * hi);
        }
        outer.add(acc * h);
        const double lb = pc.log_value(b);
        double inner = 0.0;
        for (std::size_t k = 0; k < 8; ++k) {
            const double s = c + h * kGl8x[k];
            inner += kGl8w[k] * st.at(s)[0] * std::exp(pc.log_value(s) - lb);
        }
        S = S * std::exp(la - lb) + inner * h;
    }
    return 1.0 + outer.value();
}

} // namespace detail

/**
 * Solves -u'' - h_c u' + u = 0, u(0) = 1, u'(0) = 0 on [0, R] for w_c = exp(c r) w, stopping
 * when u passes the overflow guard. The growth flags compare increments of u over the
 * windows [2^j - 1, 2^(j+1) - 1] inside [0, R].
 */
inline UTrace solve_completeness_ode(const RadialProfile& p, double c, double R, const UTraceOptions& opt = {}) {
    if (!(R > 0)) throw PreconditionError("ODE end R must be positive");
    if (!(c >= 0)) throw PreconditionError("perturbation c must be non-negative");
    const RadialProfile pc = c > 0 ? perturb_exponential(p, c) : p;
    if (R > pc.r_max()) throw RangeError("ODE end beyond the profile's range");
    OdeOptions oo;
    oo.rel_tol = opt.rel_tol;
    oo.abs_tol = opt.rel_tol * 1e-3;
    auto rhs = [&](double r, const OdeState<2>& y) { return OdeState<2>{y[1], y[0] - pc.log_derivative(r) * y[1]}; };
    UTrace tr;
    tr.c = c;
    tr.R = R;
    tr.solution = dopri5<2>(rhs, 0.0, OdeState<2>{1.0, 0.0}, R, oo,
                            [&](double, const OdeState<2>& y) { return y[0] > opt.overflow; });
    tr.clipped = tr.solution.stopped;
    tr.r_end = tr.solution.t_end;
    tr.r.reserve(tr.solution.steps.size() + 1);
    tr.r.push_back(0.0);
    tr.u.push_back(1.0);
    tr.du.push_back(0.0);
    for (const auto& st : tr.solution.steps) {
        const auto y = st.at(st.t1);
        tr.r.push_back(st.t1);
        tr.u.push_back(y[0]);
        tr.du.push_back(y[1]);
    }
    tr.integral_form = detail::integral_form(pc, tr.solution);
    tr.integral_residual = std::abs(tr.solution.y_end[0] - tr.integral_form) / std::abs(tr.solution.y_end[0]);

    for (int j = 0;; ++j) {
        const double lo = std::ldexp(1.0, j) - 1.0, hi = std::ldexp(1.0, j + 1) - 1.0;
        if (hi > tr.r_end) break;
        tr.increments.push_back(tr.at(hi)[0] - tr.at(lo)[0]);
    }
    if (tr.clipped) {
        tr.diverging = true;
        return tr;
    }
    const std::size_t n = tr.increments.size();
    if (n >= 5) {
        bool settle = true, grow = true;
        for (std::size_t i = n - 4; i < n; ++i) {
            const double a = tr.increments[i - 1], b = tr.increments[i];
            if (!(b <= opt.settle_ratio * a)) settle = false;
            if (!(b >= (1 - opt.flat_slack) * a)) grow = false;
        }
        tr.settling = settle;
        tr.diverging = grow;
    }
    return tr;
}

/// Window-based trace up to 2^windows - 1.
inline UTrace u_trace(const RadialProfile& p, double c = 0.0, const UTraceOptions& opt = {}) {
    return solve_completeness_ode(p, c, std::ldexp(1.0, opt.windows) - 1.0, opt);
}

enum class Completeness { complete, incomplete, inconclusive };

inline const char* to_string(Completeness c) {
    switch (c) {
    case Completeness::complete: return "complete";
    case Completeness::incomplete: return "incomplete";
    default: return "inconclusive";
    }
}

struct CompletenessVerdict {
    Completeness verdict = Completeness::inconclusive;
    TailValue feller;
    UTrace u;
    bool u_computed = false;
    /// the u trace reached a decision and it matches the Feller verdict
    bool agree = false;
    std::string diagnostic;
};

/// Feller verdict, corroborated by the growth of u.
inline CompletenessVerdict completeness_verdict(const RadialProfile& p, const TailOptions& topt = {},
                                                const UTraceOptions& uopt = {}) {
    CompletenessVerdict v;
    v.feller = feller_integral(p, topt);
    if (v.feller.is_divergent())
        v.verdict = Completeness::complete;
    else if (v.feller.is_convergent())
        v.verdict = Completeness::incomplete;
    else {
        v.verdict = Completeness::inconclusive;
        v.diagnostic = "Feller integral undecided";
    }
    try {
        v.u = u_trace(p, 0.0, uopt);
        v.u_computed = true;
    } catch (const Error& e) {
        v.diagnostic += (v.diagnostic.empty() ? "" : "; ") + std::string("u trace failed: ") + e.what();
        return v;
    }
    const bool u_div = v.u.diverging, u_bounded = v.u.settling;
    if (v.verdict == Completeness::inconclusive) return v;
    const bool feller_div = v.verdict == Completeness::complete;
    if ((feller_div && u_div) || (!feller_div && u_bounded)) {
        v.agree = true;
    } else if ((feller_div && u_bounded) || (!feller_div && u_div)) {
        v.verdict = Completeness::inconclusive;
        v.diagnostic = std::string("Feller integral ") + (feller_div ? "diverges" : "converges") + " but u " +
                       (u_div ? "diverges" : "settles");
    } else {
        v.diagnostic = "u trace undecided on [0, " + std::to_string(v.u.r_end) + "]";
    }
    return v;
}

// ---------------------------------------------------------------------------
// Superharmonicity on a 2D end

struct SuperharmonicReport {
    /// min over the grid of (-u'' - h u' + u) / u
    double min_residual = kInf;
    std::vector<double> r;
    std::vector<std::vector<double>> residual;
    bool holds = false; ///< min_residual >= -1e-8
};

/**
 * Evaluates -u'' - h(r, theta) u' + u on the end's grid where the trace covers it, with
 * u'' = u - h_bar_c u' from the equation u solves. The residual is divided by u > 0, which
 * keeps the sign and makes the 1e-8 floor independent of the growth of u.
 */
inline SuperharmonicReport superharmonic_check(const End2D& end, const UTrace& u, double c) {
    const CurvatureReport curv = curvature_deviation(end);
    if (c + 1e-12 < curv.c_estimate)
        throw PreconditionError("c = " + std::to_string(c) + " is below the curvature deviation " + std::to_string(curv.c_estimate));
    if (std::abs(u.c - c) > 1e-15 * std::max(1.0, c)) throw PreconditionError("u trace was computed for a different c");
    SuperharmonicReport rep;
    for (std::size_t i = 0; i < curv.r.size(); ++i) {
        const double r = curv.r[i];
        if (r > u.r_end) break;
        const auto y = u.at(r);
        if (y[1] < -1e-12 * std::abs(y[0])) throw PreconditionError("u' < 0 at r = " + std::to_string(r));
        const double hbar_c = curv.h_bar[i] + c;
        const double upp = y[0] - hbar_c * y[1];
        std::vector<double> row;
        for (double h : curv.h[i]) {
            const double res = (-upp - h * y[1] + y[0]) / y[0];
            row.push_back(res);
            rep.min_residual = std::min(rep.min_residual, res);
        }
        rep.r.push_back(r);
        rep.residual.push_back(std::move(row));
    }
    rep.holds = rep.min_residual >= -1e-8;
    return rep;
}

// ---------------------------------------------------------------------------
// Monte Carlo explosion

/// splitmix64 finalizer; per-path seeds are splitmix64(master + (i + 1) * golden gamma).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t path_seed(std::uint64_t master, std::uint64_t i) {
    return splitmix64(master + (i + 1) * 0x9e3779b97f4a7c15ULL);
}

struct MonteCarloOptions {
    double dt_max = 0.01;
    /// dt = min(dt_max, step_scale / (1 + |h_bar|)): the drift moves at most step_scale per step.
    double step_scale = 0.1;
    double start = 1.0;
    unsigned threads = 0; ///< 0 means worker_count()
};

struct MonteCarloResult {
    double fraction = 0.0;
    std::size_t exploded = 0;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
};

/// Euler-Maruyama for dR = h_bar(R) dt + sqrt(2 dt) xi, reflected at 0, started at `start`.
inline bool mc_path(const RadialProfile& p, double T, double r_max, std::uint64_t seed, const MonteCarloOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double r = opt.start, t = 0.0;
    while (t < T) {
        const double h = p.log_derivative(r);
        double dt = std::min(opt.dt_max, opt.step_scale / (1.0 + std::abs(h)));
        dt = std::min(dt, T - t);
        r += h * dt + std::sqrt(2.0 * dt) * normal(rng);
        if (r < 0) r = -r;
        t += dt;
        if (r >= r_max) return true;
    }
    return false;
}

inline MonteCarloResult mc_explosion(const RadialProfile& p, std::size_t n_paths, double T, double r_max, std::uint64_t seed,
                                     const MonteCarloOptions& opt = {}) {
    if (n_paths < 100) throw PreconditionError("Monte Carlo needs at least 100 paths");
    if (!(T > 0) || !(r_max > opt.start)) throw PreconditionError("Monte Carlo needs T > 0 and R_max above the start");
    if (r_max > p.r_max()) throw RangeError("R_max beyond the profile's range");
    const unsigned threads = opt.threads ? opt.threads : worker_count();
    const auto hits = parallel_map<char>(
        n_paths, [&](std::size_t i) { return static_cast<char>(mc_path(p, T, r_max, path_seed(seed, i), opt)); }, threads);
    MonteCarloResult out;
    out.paths = n_paths;
    out.seed = seed;
    for (char h : hits) out.exploded += h ? 1 : 0;
    out.fraction = static_cast<double>(out.exploded) / static_cast<double>(n_paths);
    return out;
}

} // namespace ends
