#pragma once

// Bottom of the spectrum of the radial operator -(1/w)(w u')' on truncated ends, the
// explicit variational upper bounds, capacity and Maz'ja estimates, and the
// bounded-quotient sequences that exhibit essential spectrum.

#include "ends/criteria.hpp"
#include "ends/errors.hpp"
#include "ends/logmath.hpp"
#include "ends/ode.hpp"
#include "ends/parallel.hpp"
#include "ends/profile.hpp"
#include "ends/quadrature.hpp"
#include "ends/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ends {

enum class Boundary { dirichlet, neumann };

inline const char* to_string(Boundary b) { return b == Boundary::dirichlet ? "dirichlet" : "neumann"; }

struct SpectralEstimate {
    double t = 0.0;
    double R = 0.0;
    std::size_t N = 0;
    double lambda = 0.0;
    /// (4 lambda(2N+1) - lambda(N)) / 3, the grid spacing halved.
    double richardson = 0.0;
    Boundary left = Boundary::dirichlet;
    Boundary right = Boundary::dirichlet;
    /// Richardson value differs from lambda by more than 10%.
    bool refinement_warning = false;
    /// Set by eigenvalue_curve: the last R doubling changed lambda by less than the tolerance.
    bool truncation_converged = true;
    double lower_bound = std::numeric_limits<double>::quiet_NaN();
    double upper_bound = std::numeric_limits<double>::quiet_NaN();

    /// Richardson value unless flagged, then the raw grid value.
    double best() const { return refinement_warning ? lambda : richardson; }
};

namespace detail {

/// Weighted second-difference operator, symmetrized by sqrt(mass).
struct RadialOperator {
    SymTridiagonal S;
    std::vector<double> x;      ///< abscissae of the unknowns
    std::vector<double> log_m;  ///< log lumped mass per unknown
    std::vector<double> log_we; ///< log edge weight w(mid)/delta for edges 0..N (node i to i+1)
    double delta = 0.0;
    std::size_t first = 0; ///< grid index of the first unknown
};

inline double checked_log(const RadialProfile& p, double r) {
    const double l = p.log_value(r);
    if (!std::isfinite(l))
        throw RangeError("omega_bar is not representable at r = " + std::to_string(r) + "; use a smaller truncation radius R");
    return l;
}

/**
 * Nodes r_i = t + i delta, i = 0..N+1, delta = (R - t)/(N + 1). Dirichlet ends drop the
 * boundary node; Neumann ends keep it with half mass.
 */
inline RadialOperator radial_operator(const RadialProfile& p, double t, double R, std::size_t N, Boundary left,
                                      Boundary right) {
    if (!(t >= 0 && R > t)) throw PreconditionError("spectral solve needs 0 <= t < R");
    if (N < 1) throw PreconditionError("spectral solve needs N >= 1");
    if (R > p.r_max()) throw RangeError("truncation radius beyond the profile's range");
    RadialOperator op;
    const double delta = (R - t) / static_cast<double>(N + 1);
    const double log_delta = std::log(delta);
    op.delta = delta;
    op.first = left == Boundary::dirichlet ? 1 : 0;
    const std::size_t last = right == Boundary::dirichlet ? N : N + 1;
    const std::size_t n = last - op.first + 1;
    auto node = [&](std::size_t i) { return i == N + 1 ? R : t + static_cast<double>(i) * delta; };

    op.log_we.resize(N + 1);
    for (std::size_t e = 0; e <= N; ++e) op.log_we[e] = checked_log(p, t + (static_cast<double>(e) + 0.5) * delta) - log_delta;
    op.x.resize(n);
    op.log_m.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = op.first + k;
        op.x[k] = node(i);
        double lm = checked_log(p, op.x[k]) + log_delta;
        if (i == 0 || i == N + 1) lm += std::log(0.5);
        op.log_m[k] = lm;
    }
    op.S.diag.assign(n, 0.0);
    op.S.off.assign(n ? n - 1 : 0, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = op.first + k;
        double d = 0.0;
        if (i > 0) d += std::exp(op.log_we[i - 1] - op.log_m[k]);
        if (i < N + 1) d += std::exp(op.log_we[i] - op.log_m[k]);
        op.S.diag[k] = d;
        if (k + 1 < n) op.S.off[k] = -std::exp(op.log_we[i] - 0.5 * (op.log_m[k] + op.log_m[k + 1]));
    }
    return op;
}

inline double lowest(const RadialProfile& p, double t, double R, std::size_t N, Boundary left, Boundary right) {
    const auto op = radial_operator(p, t, R, N, left, right);
    return std::max(0.0, lowest_eigenvalue(op.S).value);
}

} // namespace detail

/// Bottom eigenvalue with both boundary conditions chosen, plus the refined 2N+1 solve.
inline SpectralEstimate bottom_eigenvalue(const RadialProfile& p, double t, double R, std::size_t N, Boundary left,
                                          Boundary right) {
    if (!(R > t)) throw PreconditionError("spectral solve needs t < R");
    if (N < 64) throw PreconditionError("spectral solve needs N >= 64");
    SpectralEstimate e;
    e.t = t;
    e.R = R;
    e.N = N;
    e.left = left;
    e.right = right;
    e.lambda = detail::lowest(p, t, R, N, left, right);
    const double fine = detail::lowest(p, t, R, 2 * N + 1, left, right);
    e.richardson = (4.0 * fine - e.lambda) / 3.0;
    e.refinement_warning = std::abs(e.richardson - e.lambda) > 0.1 * std::abs(e.lambda);
    return e;
}

/// Dirichlet at both ends of (t, R).
inline SpectralEstimate dirichlet_lambda0(const RadialProfile& p, double t, double R, std::size_t N) {
    return bottom_eigenvalue(p, t, R, N, Boundary::dirichlet, Boundary::dirichlet);
}

/// Neumann at both ends of (t, R).
inline SpectralEstimate neumann_mu0(const RadialProfile& p, double t, double R, std::size_t N) {
    return bottom_eigenvalue(p, t, R, N, Boundary::neumann, Boundary::neumann);
}

struct CurveOptions {
    double initial_length = 8.0;
    double max_length = 512.0;
    double change_tol = 0.01;
    /// Grid points per unit length: max(min_density, h_density * max |h_bar|).
    double min_density = 200.0;
    double h_density = 4.0;
    std::size_t n_min = 64;
    std::size_t n_max = 2'000'000;
    /// Dirichlet on the left regardless of the volume class.
    bool force_dirichlet = false;
    TailOptions tail{};
};

/// Grid size for (t, R): resolves the length scale 1/|h_bar| everywhere on the interval.
inline std::size_t grid_size(const RadialProfile& p, double t, double R, const CurveOptions& opt = {}) {
    double hmax = 0.0;
    constexpr int kSamples = 256;
    for (int i = 0; i <= kSamples; ++i) {
        const double h = std::abs(p.log_derivative(t + (R - t) * i / kSamples));
        if (std::isfinite(h)) hmax = std::max(hmax, h);
    }
    const double want = std::ceil((R - t) * std::max(opt.min_density, opt.h_density * hmax));
    return static_cast<std::size_t>(std::clamp(want, static_cast<double>(opt.n_min), static_cast<double>(opt.n_max)));
}

/// Left boundary condition for the curve: Neumann on infinite-volume ends with a finite inverse tail.
inline Boundary curve_left_boundary(const RadialProfile& p, const CurveOptions& opt = {}) {
    if (opt.force_dirichlet) return Boundary::dirichlet;
    const TailValue vol = tail_integral(p, 0.0, opt.tail);
    if (!vol.is_divergent()) return Boundary::dirichlet;
    const TailValue inv = tail_integral(p.reciprocal(), 0.0, opt.tail);
    return inv.is_convergent() ? Boundary::neumann : Boundary::dirichlet;
}

/// R-doubling at one t.
inline SpectralEstimate truncated_estimate(const RadialProfile& p, double t, Boundary left, const CurveOptions& opt = {}) {
    double L = opt.initial_length;
    const double h = std::abs(p.log_derivative(t));
    // a steep profile confines the bottom state to a few multiples of 1/|h_bar(t)|
    if (std::isfinite(h) && h > 0 && 64.0 / h < L) L = 64.0 / h;
    const double max_length = std::max(L, opt.max_length);
    std::optional<SpectralEstimate> prev;
    for (;;) {
        double R = t + L;
        const bool at_range = R >= p.r_max();
        if (at_range) R = p.r_max();
        SpectralEstimate e = bottom_eigenvalue(p, t, R, grid_size(p, t, R, opt), left, Boundary::dirichlet);
        if (prev && std::abs(e.lambda - prev->lambda) <= opt.change_tol * std::abs(e.lambda)) {
            e.truncation_converged = true;
            return e;
        }
        if (L >= max_length || at_range) {
            e.truncation_converged = false;
            return e;
        }
        prev = e;
        L *= 2;
    }
}

/// One truncated estimate per t, R doubled until the value settles.
inline std::vector<SpectralEstimate> eigenvalue_curve(const RadialProfile& p, const std::vector<double>& t_grid,
                                                      const CurveOptions& opt = {}) {
    if (t_grid.empty()) throw PreconditionError("t grid is empty");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw PreconditionError("t grid must increase strictly");
    const Boundary left = curve_left_boundary(p, opt);
    return parallel_map<SpectralEstimate>(t_grid.size(), [&](std::size_t i) { return truncated_estimate(p, t_grid[i], left, opt); });
}

// ---------------------------------------------------------------------------
// Variational upper bounds

namespace detail {

inline double log_mass(const RadialProfile& p, double a, double b) { return log_integral(p, a, b); }

/// Value of the finite-family bound from log a = log int_t^s 1/w, log b = log int_s^s0 1/w, log m = log int_s^s0 w.
inline double finite_family_log(double la, double lb, double lm) {
    return std::log1p(std::exp(la - lb)) - la - lm;
}

} // namespace detail

/**
 * The point s1 > s0 with int_{s0}^{s1} 1/w = int_s^{s0} 1/w, or nullopt if none exists
 * below r_cap.
 */
inline std::optional<double> finite_family_s1(const RadialProfile& p, double s, double s0, double r_cap = 1e6) {
    const RadialProfile inv = p.reciprocal();
    const double lb = detail::log_mass(inv, s, s0);
    r_cap = std::min(r_cap, p.r_max());
    double w = s0 - s;
    double hi = s0 + w;
    auto g = [&](double r) { return detail::log_mass(inv, s0, r) - lb; };
    while (hi < r_cap && g(hi) < 0) {
        w *= 2;
        hi = s0 + w;
    }
    if (hi >= r_cap) {
        hi = r_cap;
        if (g(hi) < 0) return std::nullopt;
    }
    double lo = s0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/**
 * (1 + a/b) / (a m) with a = int_t^s 1/w, b = int_s^{s0} 1/w, m = int_s^{s0} w: the quotient
 * bound of the piecewise test function that rises on [t, s], is 1 on [s, s0] and falls
 * on [s0, s1]. It bounds lambda_0 of the end beyond t.
 */
inline double rayleigh_upper_finite(const RadialProfile& p, double t, double s, double s0, double r_cap = 1e6) {
    if (!(t >= 0 && t < s && s < s0)) throw PreconditionError("finite-family bound needs t < s < s0");
    if (!finite_family_s1(p, s, s0, r_cap))
        throw PreconditionError("infeasible parameters: no s1 below " + std::to_string(r_cap) +
                                " balances the inverse mass of [s, s0]");
    const RadialProfile inv = p.reciprocal();
    return std::exp(detail::finite_family_log(detail::log_mass(inv, t, s), detail::log_mass(inv, s, s0), detail::log_mass(p, s, s0)));
}

/**
 * 1 / (int_s^{s0} 1/w * int_t^s w); s0 may be +inf. Returns +inf when either integral
 * vanishes and 0 when the inverse integral diverges.
 */
inline double rayleigh_upper_infinite(const RadialProfile& p, double t, double s, double s0, const TailOptions& opt = {}) {
    if (!(t >= 0 && t < s && s < s0)) throw PreconditionError("infinite-family bound needs t < s < s0");
    const RadialProfile inv = p.reciprocal();
    double lb;
    if (std::isinf(s0)) {
        const TailValue tail = tail_integral(inv, s, opt);
        if (tail.is_divergent()) return 0.0;
        if (!tail.is_convergent()) throw NumericalError("inverse tail undecided at s = " + std::to_string(s));
        lb = tail.log_value;
    } else {
        lb = detail::log_mass(inv, s, s0);
    }
    const double lm = detail::log_mass(p, t, s);
    if (lb == kNegInf || lm == kNegInf) return kInf;
    return std::exp(-lb - lm);
}

namespace detail {

/// Running log-integral of exp(logf) over [a, b] on a fixed panel grid, invertible.
template <class LogF>
class CumulativeLog {
public:
    CumulativeLog(LogF f, double a, double b, std::size_t panels = 256) : f_(std::move(f)) {
        nodes_.resize(panels + 1);
        cum_.resize(panels + 1);
        for (std::size_t i = 0; i <= panels; ++i) nodes_[i] = i == panels ? b : a + (b - a) * i / panels;
        cum_[0] = kNegInf;
        for (std::size_t i = 1; i <= panels; ++i) cum_[i] = log_add(cum_[i - 1], piece(nodes_[i - 1], nodes_[i]));
    }

    double log_total() const { return cum_.back(); }

    double log_at(double r) const {
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
        const std::size_t i = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
        if (i + 1 >= nodes_.size()) return cum_.back();
        return log_add(cum_[i], piece(nodes_[i], r));
    }

    /// r with log_at(r) = target, by panel lookup and bisection.
    double inverse(double target) const {
        auto it = std::lower_bound(cum_.begin(), cum_.end(), target);
        if (it == cum_.end()) return nodes_.back();
        if (it == cum_.begin()) return nodes_.front();
        const std::size_t i = static_cast<std::size_t>(it - cum_.begin()) - 1;
        double lo = nodes_[i], hi = nodes_[i + 1];
        for (int k = 0; k < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++k) {
            const double mid = 0.5 * (lo + hi);
            if (log_add(cum_[i], piece(nodes_[i], mid)) < target)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }

private:
    double piece(double a, double b) const { return a >= b ? kNegInf : log_integrate_or_throw(f_, a, b); }

    LogF f_;
    std::vector<double> nodes_;
    std::vector<double> cum_;
};

} // namespace detail

/// Probe fractions for the 5 x 5 variational grid.
inline constexpr double kProbeS[] = {1.0 / 16, 1.0 / 8, 1.0 / 4, 3.0 / 8, 1.0 / 2};
inline constexpr double kProbeS0[] = {1.0 / 8, 1.0 / 4, 1.0 / 2, 3.0 / 4, 1.0};

struct VariationalProbe {
    double s, s0, bound;
};

/**
 * Best finite-family bound over a 5 x 5 grid placed in the coordinate z = int_t^r 1/w so
 * that every test function is supported in [t, R]: z(s) = Z f, z(s0) = z(s) + (Z - z(s)) g / 2,
 * Z = z(R). Each value bounds the Dirichlet bottom on (t, R).
 */
inline VariationalProbe variational_upper_bound(const RadialProfile& p, double t, double R) {
    if (!(R > t)) throw PreconditionError("variational bound needs t < R");
    auto inv_log = [&](double r) { return -p.log_value(r); };
    const detail::CumulativeLog<decltype(inv_log)> z(inv_log, t, R);
    const double lZ = z.log_total();
    VariationalProbe best{kNaN, kNaN, kInf};
    for (double f : kProbeS) {
        const double la = lZ + std::log(f);
        const double s = z.inverse(la);
        const double lrest = log_sub(lZ, la);
        for (double g : kProbeS0) {
            const double lb = lrest + std::log(0.5 * g);
            const double s0 = z.inverse(log_add(la, lb));
            if (!(s0 > s)) continue;
            const double lm = detail::log_mass(p, s, s0);
            const double v = std::exp(detail::finite_family_log(la, lb, lm));
            if (v < best.bound) best = {s, s0, v};
        }
    }
    return best;
}

/// Attaches the lower bound 1/(8B) and the probe-grid upper bound to a curve point.
inline void annotate_bounds(const RadialProfile& p, SpectralEstimate& e, const CriterionOptions& copt = {}) {
    try {
        e.lower_bound = lambda0_lower_bound(p, e.t, 0.0, copt);
    } catch (const PreconditionError&) {
        e.lower_bound = kNaN;
    }
    e.upper_bound = e.left == Boundary::dirichlet ? variational_upper_bound(p, e.t, e.R).bound : kNaN;
}

// ---------------------------------------------------------------------------
// Capacity and Maz'ja constant

/// (int_s^inf 1/w)^-1: energy of the test function that is 1 on [t, s] and falls to 0 at infinity.
inline double capacity_upper(const RadialProfile& p, double t, double s, const TailOptions& opt = {}) {
    if (!(t >= 0 && s > t)) throw PreconditionError("capacity bound needs t < s");
    const TailValue tail = tail_integral(p.reciprocal(), s, opt);
    if (tail.is_divergent()) return 0.0;
    if (!tail.is_convergent()) throw NumericalError("inverse tail undecided at s = " + std::to_string(s));
    return std::exp(-tail.log_value);
}

/// min over s > t of capacity_upper(p, t, s) / int_t^s w, at the maximizer of the infinite-case product.
inline double mazja_estimate(const RadialProfile& p, double t, const CriterionOptions& opt = {}) {
    if (volume_class(p, opt.tail) != VolumeClass::infinite_volume)
        throw CaseError("Maz'ja estimate applies to infinite-volume ends");
    const SupResult sup = sup_criterion(p, t, CriterionCase::infinite_case, opt);
    if (sup.B.is_divergent()) return 0.0;
    if (!sup.B.is_convergent()) throw NumericalError("sup search undecided at t = " + std::to_string(t));
    const TailValue tail = tail_integral(p.reciprocal(), sup.s_star, opt.tail);
    if (tail.is_divergent()) return 0.0;
    if (!tail.is_convergent()) throw NumericalError("inverse tail undecided at s = " + std::to_string(sup.s_star));
    // capacity over volume, formed in logs: both factors overflow when the supremum sits at infinity
    return std::exp(-tail.log_value - log_integral(p, t, sup.s_star, opt.quad));
}

// ---------------------------------------------------------------------------
// Bounded-quotient sequences

namespace detail {

inline double sigma(double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; }
inline double sigma_prime(double x) { return x > 0 ? std::exp(-1.0 / x) / (x * x) : 0.0; }

/// Smooth step: 0 for x <= 0, 1 for x >= 1.
inline double psi(double x) {
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    return sigma(x) / (sigma(x) + sigma(1.0 - x));
}

inline double psi_prime(double x) {
    if (x <= 0 || x >= 1) return 0.0;
    const double a = sigma(x), b = sigma(1.0 - x);
    return (sigma_prime(x) * b + a * sigma_prime(1.0 - x)) / ((a + b) * (a + b));
}

} // namespace detail

/// Bump equal to 1 on [1, 2] and supported in (4/5, 11/5).
inline double eta(double y) { return detail::psi((y - 0.8) / 0.2) * detail::psi((2.2 - y) / 0.2); }

inline double eta_prime(double y) {
    const double a = (y - 0.8) / 0.2, b = (2.2 - y) / 0.2;
    return (detail::psi_prime(a) * detail::psi(b) - detail::psi(a) * detail::psi_prime(b)) / 0.2;
}

struct CharacteristicTerm {
    int k = 0;
    double z = 0.0;         ///< z_k
    double r_lo = 0.0;      ///< r(4 z_k / 5)
    double r_hi = 0.0;      ///< r(11 z_k / 5)
    double quotient = 0.0;  ///< Rayleigh quotient of f_k
    double log_plateau = 0; ///< log of z_k^2 int_1^2 w(r(z_k y))^2 dy
    double overlap_next = 0.0; ///< int f_k f_{k+1} w dr
};

struct CharacteristicSequence {
    double c1 = 0.0; ///< int eta'^2
    double c0 = 0.0; ///< min_k of the plateau mass
    double bound = 0.0; ///< c1 / c0
    std::vector<CharacteristicTerm> terms;
};

/**
 * f_k = sqrt(z_k) eta(z(r)/z_k) with z(r) = int_0^r 1/w and z_k = z_1 ratio^(k-1). In the
 * string coordinate the quotient is int eta'^2 / (z_k^2 int eta^2 w^2 dy), so it never
 * exceeds c1/c0. r(z) comes from dr/dz = w(r).
 */
inline CharacteristicSequence characteristic_sequence(const RadialProfile& p, int K = 6, double z1 = 0.5, double ratio = 3.0,
                                                      const TailOptions& topt = {}) {
    const auto ess = essential_spectrum_test(p, topt);
    if (!ess || !*ess) throw PreconditionError("characteristic sequence needs both w and 1/w to have divergent integrals");
    if (K < 1 || !(z1 > 0) || !(ratio > 1)) throw PreconditionError("characteristic sequence needs K >= 1, z1 > 0, ratio > 1");
    if (!(p.value(0.0) > 0)) throw PositivityError("omega_bar(0) must be positive", 0.0);

    const double z_end = 2.2 * z1 * std::pow(ratio, K - 1);
    OdeOptions oo;
    oo.rel_tol = 1e-12;
    oo.abs_tol = 1e-14;
    auto rhs = [&](double, const OdeState<1>& y) { return OdeState<1>{std::exp(p.log_value(std::max(0.0, y[0])))}; };
    const auto sol = dopri5<1>(rhs, 0.0, OdeState<1>{0.0}, z_end, oo);
    auto r_of = [&](double z) { return std::max(0.0, sol.at(z)[0]); };
    auto logw = [&](double z) { return p.log_value(r_of(z)); };

    CharacteristicSequence out;
    out.c1 = integrate([](double y) { const double d = eta_prime(y); return d * d; }, 0.8, 1.0, 1e-12) +
             integrate([](double y) { const double d = eta_prime(y); return d * d; }, 2.0, 2.2, 1e-12);
    double log_c0 = kInf;
    for (int k = 1; k <= K; ++k) {
        CharacteristicTerm term;
        term.k = k;
        term.z = z1 * std::pow(ratio, k - 1);
        const double zk = term.z;
        term.r_lo = r_of(0.8 * zk);
        term.r_hi = r_of(2.2 * zk);
        auto weight = [&](double y) { return 2.0 * std::log(eta(y)) + 2.0 * logw(zk * y); };
        auto plain = [&](double y) { return 2.0 * logw(zk * y); };
        const double plateau = log_integrate_or_throw(plain, 1.0, 2.0);
        const double sides = log_add(log_integrate_or_throw(weight, 0.8, 1.0), log_integrate_or_throw(weight, 2.0, 2.2));
        const double log_den = 2.0 * std::log(zk) + log_add(plateau, sides);
        term.log_plateau = 2.0 * std::log(zk) + plateau;
        term.quotient = std::exp(std::log(out.c1) - log_den);
        log_c0 = std::min(log_c0, term.log_plateau);

        // int f_k f_{k+1} w dr = sqrt(z_k z_{k+1}) int eta(z/z_k) eta(z/z_{k+1}) w^2 dz over supp f_k
        const double zn = zk * ratio;
        auto product = [&](double z) {
            const double a = eta(z / zk), b = eta(z / zn);
            if (a <= 0 || b <= 0) return kNegInf;
            return std::log(a) + std::log(b) + 2.0 * logw(z);
        };
        const double lo = log_integrate_or_throw(product, 0.8 * zk, 2.2 * zk);
        term.overlap_next = lo == kNegInf ? 0.0 : std::exp(0.5 * (std::log(zk) + std::log(zn)) + lo);
        out.terms.push_back(term);
    }
    out.c0 = std::exp(log_c0);
    out.bound = std::exp(std::log(out.c1) - log_c0);
    return out;
}

/// Rayleigh quotient of the k-th member (1-based) of the default sequence.
inline double characteristic_rayleigh(const RadialProfile& p, int k) {
    if (k < 1) throw PreconditionError("k must be at least 1");
    return characteristic_sequence(p, k).terms.back().quotient;
}

// ---------------------------------------------------------------------------
// Exponential perturbation of a trial function

struct PerturbationCheck {
    double quotient = 0.0;      ///< quotient of exp(-c r / 2) phi under exp(c r) w
    double bound = 0.0;         ///< 2 lambda + c^2 / 2
    double lambda = 0.0;        ///< quotient of phi under w
    double norm = 0.0;          ///< ||phi|| squared under w
    double perturbed_norm = 0.0;///< ||exp(-c r / 2) phi|| squared under exp(c r) w
    bool holds = false;         ///< quotient <= bound + 1e-6
};

/**
 * phi is the lowest discrete Dirichlet eigenvector for w on (t, t + L). Both quotients use
 * the same edge-difference energy and lumped mass, so the unperturbed one is the discrete
 * eigenvalue.
 */
inline PerturbationCheck perturbation_check(const RadialProfile& p, double c, double t, double L = 10.0, std::size_t N = 4000) {
    if (!(c > 0)) throw PreconditionError("perturbation check needs c > 0");
    const double R = t + L;
    const auto op = detail::radial_operator(p, t, R, N, Boundary::dirichlet, Boundary::dirichlet);
    const auto ev = lowest_eigenvalue(op.S);
    const double shift = ev.lower - 1e-9 * std::max(1.0, ev.value);
    const std::vector<double> y = inverse_iteration(op.S, shift);
    const RadialProfile pc = perturb_exponential(p, c);
    const std::size_t n = y.size();
    const double log_delta = std::log(op.delta);

    // phi_i = y_i exp(-log_m_i / 2); psi_i = phi_i exp(-c x_i / 2)
    auto log_scale_psi = [&](std::size_t k) { return -0.5 * op.log_m[k] - 0.5 * c * op.x[k]; };
    CompensatedSum num, den, num0, den0;
    for (std::size_t k = 0; k < n; ++k) {
        den0.add(y[k] * y[k]);
        const double lmc = detail::checked_log(pc, op.x[k]) + log_delta;
        den.add(y[k] * y[k] * std::exp(2.0 * log_scale_psi(k) + lmc));
    }
    // edges: e joins grid nodes e and e+1; unknown k sits at grid node k + 1
    for (std::size_t e = 0; e <= N; ++e) {
        const double mid = t + (static_cast<double>(e) + 0.5) * op.delta;
        const double lw = p.log_value(mid) - log_delta;
        const double lwc = detail::checked_log(pc, mid) - log_delta;
        const bool has_l = e >= 1, has_r = e + 1 <= N;
        const std::size_t kl = e - 1, kr = e;
        const double a0 = has_l ? y[kl] * std::exp(0.5 * (lw - op.log_m[kl])) : 0.0;
        const double b0 = has_r ? y[kr] * std::exp(0.5 * (lw - op.log_m[kr])) : 0.0;
        num0.add((b0 - a0) * (b0 - a0));
        const double a = has_l ? y[kl] * std::exp(0.5 * lwc + log_scale_psi(kl)) : 0.0;
        const double b = has_r ? y[kr] * std::exp(0.5 * lwc + log_scale_psi(kr)) : 0.0;
        num.add((b - a) * (b - a));
    }
    PerturbationCheck out;
    out.norm = den0.value();
    out.perturbed_norm = den.value();
    out.lambda = num0.value() / den0.value();
    out.quotient = num.value() / den.value();
    out.bound = 2.0 * out.lambda + 0.5 * c * c;
    out.holds = out.quotient <= out.bound + 1e-6;
    return out;
}

} // namespace ends
