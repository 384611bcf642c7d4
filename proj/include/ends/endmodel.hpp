#pragma once

// A two-dimensional end: density omega(r, theta) over the circle, its cross-sectional
// average, the deviation of the mean curvature from its average, the radial average of
// functions and a numerical check of the coerciveness inequality.

#include "ends/errors.hpp"
#include "ends/expression.hpp"
#include "ends/logmath.hpp"
#include "ends/profile.hpp"
#include "ends/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace ends {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class End2D {
public:
    /**
     * Validates grid sizes, positivity of omega on the (N_r + 1) x N_theta grid and
     * 2 pi periodicity at every radial node.
     */
    End2D(Expr omega, double r_model, int n_r = 256, int n_theta = 64, std::string label = "")
        : omega_(std::move(omega)), r_model_(r_model), n_r_(n_r), n_theta_(n_theta), label_(std::move(label)) {
        if (!(r_model > 0) || !std::isfinite(r_model)) throw PreconditionError("R_model must be positive and finite");
        if (n_r < 16 || n_theta < 16) throw PreconditionError("grid needs N_r >= 16 and N_theta >= 16");
        if (label_.empty()) label_ = omega_.str();
        d_r_ = omega_.derivative(Var::r);
        d_theta_ = omega_.derivative(Var::theta);
        for (int i = 0; i <= n_r_; ++i) {
            const double r = radius(i);
            for (int j = 0; j < n_theta_; ++j) {
                const double v = omega_(r, theta(j));
                if (!(v > 0) || !std::isfinite(v))
                    throw PositivityError("omega not positive at r = " + std::to_string(r) + ", theta = " + std::to_string(theta(j)), r);
            }
            for (double th : {0.0, 1.0, 2.5}) {
                const double a = omega_(r, th), b = omega_(r, th + kTwoPi);
                if (std::abs(a - b) > 1e-12 * std::max(std::abs(a), std::abs(b)))
                    throw PreconditionError("omega is not 2 pi periodic in theta at r = " + std::to_string(r));
            }
        }
    }

    static End2D parse(std::string_view text, double r_model, int n_r = 256, int n_theta = 64) {
        return End2D(parse_expression(text, true), r_model, n_r, n_theta, std::string(text));
    }

    const Expr& omega() const noexcept { return omega_; }
    const Expr& omega_r() const noexcept { return d_r_; }
    const Expr& omega_theta() const noexcept { return d_theta_; }
    double r_model() const noexcept { return r_model_; }
    int n_r() const noexcept { return n_r_; }
    int n_theta() const noexcept { return n_theta_; }
    const std::string& label() const noexcept { return label_; }

    double radius(int i) const { return r_model_ * i / n_r_; }
    double theta(int j) const { return kTwoPi * j / n_theta_; }

    /// Copy on a different angular grid.
    End2D with_theta_points(int n_theta) const { return End2D(omega_, r_model_, n_r_, n_theta, label_); }

private:
    Expr omega_, d_r_, d_theta_;
    double r_model_;
    int n_r_, n_theta_;
    std::string label_;
};

/// Periodic trapezoid on the end's angular grid.
template <class F>
double angular_integral(const End2D& end, const F& f) {
    return periodic_trapezoid(f, end.n_theta());
}

/**
 * omega_bar(r_i) = int omega(r_i, theta) dtheta on the radial grid, tabulated with the
 * exact slopes int d omega/dr dtheta. Beyond R_model the table extrapolates as chosen;
 * nothing there is verified.
 */
inline RadialProfile reduce_profile(const End2D& end, Extrapolation extrapolation = Extrapolation::log_linear) {
    std::vector<double> r(static_cast<std::size_t>(end.n_r()) + 1), w(r.size()), d(r.size());
    for (int i = 0; i <= end.n_r(); ++i) {
        const double ri = end.radius(i);
        r[static_cast<std::size_t>(i)] = ri;
        w[static_cast<std::size_t>(i)] = angular_integral(end, [&](double th) { return end.omega()(ri, th); });
        d[static_cast<std::size_t>(i)] = angular_integral(end, [&](double th) { return end.omega_r()(ri, th); });
    }
    return RadialProfile::tabulated(std::move(r), std::move(w), std::move(d), extrapolation, "average of " + end.label());
}

struct CurvatureReport {
    /// max over the grid of |h - h_bar|
    double c_estimate = 0.0;
    /// the same with N_theta doubled
    double c_refined = 0.0;
    /// doubling N_theta changed c_estimate by less than 5% (or both are below 1e-12)
    bool refinement_ok = true;
    /// c_estimate < the requested bound, when one was given
    bool satisfied = true;
    /// the grid stops at R_model; the supremum over r > R_model is not certified
    bool tail_unverified = true;
    std::vector<double> r;
    std::vector<std::vector<double>> h;      ///< h[i][j] at (r_i, theta_j)
    std::vector<double> h_bar;
};

namespace detail {

inline CurvatureReport curvature_on_grid(const End2D& end) {
    CurvatureReport rep;
    const int nr = end.n_r(), nt = end.n_theta();
    rep.r.resize(static_cast<std::size_t>(nr) + 1);
    rep.h.assign(rep.r.size(), std::vector<double>(static_cast<std::size_t>(nt)));
    rep.h_bar.resize(rep.r.size());
    for (int i = 0; i <= nr; ++i) {
        const double r = end.radius(i);
        rep.r[static_cast<std::size_t>(i)] = r;
        CompensatedSum num, den;
        for (int j = 0; j < nt; ++j) {
            const double th = end.theta(j);
            const double w = end.omega()(r, th), wr = end.omega_r()(r, th);
            rep.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = wr / w;
            num.add(wr);
            den.add(w);
        }
        // (1/omega_bar) int h omega dtheta = int omega_r / int omega
        const double hb = num.value() / den.value();
        rep.h_bar[static_cast<std::size_t>(i)] = hb;
        for (double hv : rep.h[static_cast<std::size_t>(i)]) rep.c_estimate = std::max(rep.c_estimate, std::abs(hv - hb));
    }
    return rep;
}

} // namespace detail

/// Grid supremum of |h - h_bar| with a refinement check in theta.
inline CurvatureReport curvature_deviation(const End2D& end, double c_bound = kInf) {
    CurvatureReport rep = detail::curvature_on_grid(end);
    rep.c_refined = detail::curvature_on_grid(end.with_theta_points(2 * end.n_theta())).c_estimate;
    const double scale = std::max(rep.c_estimate, rep.c_refined);
    rep.refinement_ok = scale < 1e-12 || std::abs(rep.c_refined - rep.c_estimate) < 0.05 * scale;
    rep.satisfied = rep.c_estimate < c_bound;
    return rep;
}

/// A function on the end with its partial derivatives and the radial interval containing its support.
struct TestFunction {
    std::function<double(double, double)> f;
    std::function<double(double, double)> f_r;
    std::function<double(double, double)> f_theta;
    double r_lo = 0.0;
    double r_hi = kInf;
    /// radii where f loses smoothness (spline knots); radial quadrature splits there
    std::vector<double> breaks;
    std::string description;
};

/// Symbolic test function; its support is checked against the model interval when used.
inline TestFunction test_function(const Expr& e) {
    const Expr dr = e.derivative(Var::r), dth = e.derivative(Var::theta);
    return {[e](double r, double th) { return e(r, th); }, [dr](double r, double th) { return dr(r, th); },
            [dth](double r, double th) { return dth(r, th); }, 0.0, kInf, {}, e.str()};
}

namespace detail {

/// Support interval inside (0, R_model): f must vanish at its ends up to 1e-12 of its size.
inline std::pair<double, double> support_in_model(const End2D& end, const TestFunction& f) {
    const double lo = std::max(0.0, f.r_lo), hi = std::min(end.r_model(), f.r_hi);
    if (!(hi > lo)) return {0.0, 0.0};
    double scale = 0.0;
    for (int i = 0; i <= 64; ++i)
        for (int j = 0; j < end.n_theta(); ++j) scale = std::max(scale, std::abs(f.f(lo + (hi - lo) * i / 64, end.theta(j))));
    const double tol = 1e-12 * scale;
    for (int j = 0; j < end.n_theta(); ++j) {
        const double th = end.theta(j);
        if (std::abs(f.f(lo, th)) > tol || std::abs(f.f(hi, th)) > tol)
            throw DomainError("test function does not vanish at the ends of (0, R_model)");
    }
    return {lo, hi};
}

/// Q = int f^2 omega dtheta and Q' = int (2 f f_r omega + f^2 omega_r) dtheta at r.
struct AngularMoments {
    double q, dq, w, dw, grad;
};

inline AngularMoments moments(const End2D& end, const TestFunction& f, double r) {
    CompensatedSum q, dq, w, dw, grad;
    const int n = end.n_theta();
    for (int j = 0; j < n; ++j) {
        const double th = end.theta(j);
        const double om = end.omega()(r, th), omr = end.omega_r()(r, th);
        const double v = f.f(r, th), vr = f.f_r(r, th), vt = f.f_theta(r, th);
        q.add(v * v * om);
        dq.add(2 * v * vr * om + v * v * omr);
        w.add(om);
        dw.add(omr);
        // angular metric coefficient g = omega: |grad f|^2 = f_r^2 + f_theta^2 / omega^2
        grad.add(vr * vr * om + vt * vt / om);
    }
    const double h = kTwoPi / n;
    return {q.value() * h, dq.value() * h, w.value() * h, dw.value() * h, grad.value() * h};
}

} // namespace detail

/// fbar(r_i) = ((1/omega_bar) int f^2 omega dtheta)^(1/2) on the radial grid.
inline std::vector<double> average_function(const End2D& end, const TestFunction& f) {
    detail::support_in_model(end, f);
    std::vector<double> out(static_cast<std::size_t>(end.n_r()) + 1);
    for (int i = 0; i <= end.n_r(); ++i) {
        const auto m = detail::moments(end, f, end.radius(i));
        out[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, m.q / m.w));
    }
    return out;
}

inline std::vector<double> average_function(const End2D& end, const Expr& f) { return average_function(end, test_function(f)); }

struct CoercivityResult {
    double residual = 0.0;     ///< grad + c^2/4 mass - avg / 2
    double grad_energy = 0.0;  ///< ||grad f||^2
    double mass = 0.0;         ///< ||f||^2
    double avg_energy = 0.0;   ///< ||fbar'||^2 under omega_bar
};

/**
 * Residual of ||fbar'||^2 / 2 - (c^2/4) ||f||^2 <= ||grad f||^2. With Q = int f^2 omega and
 * fbar^2 = Q / omega_bar, fbar'^2 omega_bar = (Q' - Q h_bar)^2 / (4 Q). Radial integrals by
 * adaptive Simpson between the function's break points, angular ones by the periodic trapezoid.
 */
inline CoercivityResult coercivity_check(const End2D& end, const TestFunction& f, double c, double tol = 1e-10) {
    if (!(c >= 0)) throw PreconditionError("coercivity check needs c >= 0");
    const auto [lo, hi] = detail::support_in_model(end, f);
    CoercivityResult out;
    if (!(hi > lo)) return out;
    // the three radial passes mostly revisit the same nodes
    std::unordered_map<double, detail::AngularMoments> cache;
    auto moments = [&](double r) -> const detail::AngularMoments& {
        auto it = cache.find(r);
        if (it == cache.end()) it = cache.emplace(r, detail::moments(end, f, r)).first;
        return it->second;
    };
    auto avg_density = [&](double r) {
        const auto& m = moments(r);
        if (!(m.q > 0)) return 0.0;
        const double e = m.dq - m.q * m.dw / m.w;
        return e * e / (4 * m.q);
    };
    std::vector<double> cuts{lo, hi};
    for (double b : f.breaks)
        if (b > lo && b < hi) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    // tolerance relative to a coarse pass; depth bounded since the edge densities are noisy at the 1e-16 level
    auto radial = [&](const auto& g) {
        double scale = 0.0;
        for (int i = 0; i <= 32; ++i) scale = std::max(scale, std::abs(g(lo + (hi - lo) * i / 32)));
        CompensatedSum sum;
        const double t = tol * std::max(scale * (hi - lo), 1e-300) / static_cast<double>(cuts.size());
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) sum.add(adaptive_simpson(g, cuts[k], cuts[k + 1], t, 18));
        return sum.value();
    };
    out.grad_energy = radial([&](double r) { return moments(r).grad; });
    out.mass = radial([&](double r) { return moments(r).q; });
    out.avg_energy = radial(avg_density);
    out.residual = out.grad_energy + 0.25 * c * c * out.mass - 0.5 * out.avg_energy;
    return out;
}

inline CoercivityResult coercivity_check(const End2D& end, const Expr& f, double c) {
    return coercivity_check(end, test_function(f), c);
}

namespace detail {

/// Cubic B-spline on [-2, 2], C^2, peak 2/3.
inline double bspline(double x) {
    const double a = std::abs(x);
    if (a >= 2) return 0.0;
    if (a <= 1) return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
    const double b = 2 - a;
    return b * b * b / 6.0;
}

inline double bspline_prime(double x) {
    const double a = std::abs(x);
    if (a >= 2) return 0.0;
    const double s = x < 0 ? -1.0 : 1.0;
    if (a <= 1) return s * (-2 * a + 1.5 * a * a);
    const double b = 2 - a;
    return -s * 0.5 * b * b;
}

} // namespace detail

/**
 * Seeded smooth test functions: each is a sum of 1 to 3 terms
 * a B((r - m)/w) cos(k theta + phase) with the cubic B-spline B, a in [-1, 1],
 * k in {0..3}, and supports (m - 2w, m + 2w) inside (0, R_model).
 */
inline std::vector<TestFunction> random_test_functions(const End2D& end, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double R = end.r_model();
    std::vector<TestFunction> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        struct Term {
            double a, m, w, phase;
            int k;
        };
        std::vector<Term> terms(1 + static_cast<std::size_t>(rng() % 3));
        double lo = kInf, hi = 0.0;
        for (auto& t : terms) {
            t.a = 2 * unit(rng) - 1;
            t.m = R * (0.1 + 0.8 * unit(rng));
            const double room = std::min(t.m, R - t.m) / 2;
            t.w = room * (0.2 + 0.75 * unit(rng));
            t.phase = kTwoPi * unit(rng);
            t.k = static_cast<int>(rng() % 4);
            lo = std::min(lo, t.m - 2 * t.w);
            hi = std::max(hi, t.m + 2 * t.w);
        }
        TestFunction f;
        for (const auto& t : terms)
            for (int k = -2; k <= 2; ++k) f.breaks.push_back(t.m + k * t.w);
        f.r_lo = lo;
        f.r_hi = hi;
        f.description = "random #" + std::to_string(n) + " (" + std::to_string(terms.size()) + " terms)";
        f.f = [terms](double r, double th) {
            double s = 0;
            for (const auto& t : terms) s += t.a * detail::bspline((r - t.m) / t.w) * std::cos(t.k * th + t.phase);
            return s;
        };
        f.f_r = [terms](double r, double th) {
            double s = 0;
            for (const auto& t : terms) s += t.a * detail::bspline_prime((r - t.m) / t.w) / t.w * std::cos(t.k * th + t.phase);
            return s;
        };
        f.f_theta = [terms](double r, double th) {
            double s = 0;
            for (const auto& t : terms) s -= t.a * detail::bspline((r - t.m) / t.w) * t.k * std::sin(t.k * th + t.phase);
            return s;
        };
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace ends
