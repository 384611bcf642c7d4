#pragma once

/**
 * @file quadrature.hpp
 * @brief Adaptive Gauss-Kronrod (7/15) in log-magnitude form, adaptive Simpson,
 * periodic trapezoid and fixed Gauss-Legendre panels.
 *
 * The log-form integrator takes log f(x) for a non-negative integrand and keeps
 * every subinterval in its own scale, so integrands spanning hundreds of decades
 * across [a, b] (exp(r^2) on [0, 40]) integrate without overflow or underflow.
 */

#include "ends/errors.hpp"
#include "ends/logmath.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace ends {

struct QuadOptions {
    double rel_tol = 1e-10;
    /// Absolute tolerance as a log; -inf means relative only.
    double log_abs_tol = kNegInf;
    int max_intervals = 4000;
    /// Initial partition halves geometrically towards both ends this many times;
    /// endpoint layers such as exp(-(r^2 - s^2)) near r = s are resolved from the start.
    int grading = 6;
};

struct LogQuadResult {
    double log_value = kNegInf;
    double log_error = kNegInf;
    bool converged = true;
    int intervals = 0;
    /// Widest unresolved subintervals at exit, for diagnostics when not converged.
    std::vector<std::pair<double, double>> worst;

    double value() const { return std::exp(log_value); }
};

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b;
    double log_value;
    double log_error;
    double log_magnitude = 0.0; ///< largest |log f| seen on the panel
};

/// One 15-point Kronrod panel on scaled values; returns (result, abserr) as logs.
template <class LogF>
Panel kronrod_panel(const LogF& logf, double a, double b) {
    const double centr = 0.5 * (a + b);
    const double hlgth = 0.5 * (b - a);
    std::array<double, 15> lv;
    lv[0] = logf(centr);
    for (int j = 0; j < 7; ++j) {
        const double dx = hlgth * kXgk[static_cast<std::size_t>(j)];
        lv[static_cast<std::size_t>(1 + 2 * j)] = logf(centr - dx);
        lv[static_cast<std::size_t>(2 + 2 * j)] = logf(centr + dx);
    }
    double m = kNegInf;
    double lmag = 0.0;
    for (double l : lv) {
        if (std::isnan(l)) return {a, b, std::numeric_limits<double>::quiet_NaN(), kInf, 0.0};
        m = std::max(m, l);
        if (std::isfinite(l)) lmag = std::max(lmag, std::abs(l));
    }
    if (m == kNegInf) return {a, b, kNegInf, kNegInf, lmag};
    if (m == kInf) return {a, b, kInf, kInf, lmag};
    std::array<double, 15> f;
    for (std::size_t i = 0; i < 15; ++i) f[i] = std::exp(lv[i] - m);

    const double fc = f[0];
    double resg = fc * kWg[3];
    double resk = fc * kWgk[7];
    double resabs = std::abs(resk);
    for (std::size_t j = 0; j < 7; ++j) {
        const double s = f[1 + 2 * j] + f[2 + 2 * j];
        resk += kWgk[j] * s;
        resabs += kWgk[j] * s;
        if (j % 2 == 1) resg += kWg[j / 2] * s;
    }
    const double reskh = 0.5 * resk;
    double resasc = kWgk[7] * std::abs(fc - reskh);
    for (std::size_t j = 0; j < 7; ++j)
        resasc += kWgk[j] * (std::abs(f[1 + 2 * j] - reskh) + std::abs(f[2 + 2 * j] - reskh));
    const double dh = std::abs(hlgth);
    const double result = resk * hlgth;
    resabs *= dh;
    resasc *= dh;
    double abserr = std::abs((resk - resg) * hlgth);
    if (resasc != 0.0 && abserr != 0.0) abserr = resasc * std::min(1.0, std::pow(200.0 * abserr / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    abserr = std::max(abserr, 50.0 * eps * resabs);
    // log f of size L carries an absolute rounding error ~ L eps, so f itself is only
    // known to relative accuracy ~ L eps (exp(r^3) near r = 2000 gives about 1e-6)
    abserr = std::max(abserr, 8.0 * eps * lmag * resabs);
    return {a, b, result > 0 ? m + std::log(result) : kNegInf, abserr > 0 ? m + std::log(abserr) : kNegInf, lmag};
}

inline double log_sum(const std::vector<Panel>& panels, bool errors) {
    double m = kNegInf;
    for (const auto& p : panels) m = std::max(m, errors ? p.log_error : p.log_value);
    if (m == kNegInf || m == kInf) return m;
    CompensatedSum s;
    for (const auto& p : panels) s.add(std::exp((errors ? p.log_error : p.log_value) - m));
    return m + std::log(s.value());
}

} // namespace detail

/**
 * Integrates a non-negative function given as log f on [a, b], a <= b finite.
 * Never throws; check `converged`.
 */
template <class LogF>
LogQuadResult log_integrate(const LogF& logf, double a, double b, const QuadOptions& opt = {}) {
    LogQuadResult out;
    if (!(b > a)) return out;

    std::vector<double> cuts{a, b};
    const double w = b - a;
    for (int k = 1; k <= opt.grading; ++k) {
        const double d = std::ldexp(w, -k);
        cuts.push_back(a + d);
        cuts.push_back(b - d);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<detail::Panel> panels;
    panels.reserve(static_cast<std::size_t>(opt.max_intervals) + 64);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) panels.push_back(detail::kronrod_panel(logf, cuts[i], cuts[i + 1]));

    constexpr double eps = std::numeric_limits<double>::epsilon();
    double lmag = 0.0;
    for (const auto& p : panels) lmag = std::max(lmag, p.log_magnitude);
    for (;;) {
        // the requested accuracy cannot beat the rounding noise of log f itself
        const double log_rel = std::log(std::max(opt.rel_tol, 16.0 * eps * lmag));
        const double total = detail::log_sum(panels, false);
        const double err = detail::log_sum(panels, true);
        if (std::isnan(total) || std::isnan(err)) {
            out.log_value = std::numeric_limits<double>::quiet_NaN();
            out.converged = false;
            break;
        }
        const bool ok = err == kNegInf || err <= log_rel + total || err <= opt.log_abs_tol;
        if (ok || static_cast<int>(panels.size()) >= opt.max_intervals || total == kInf) {
            out.log_value = total;
            out.log_error = err;
            out.converged = ok && total != kInf;
            break;
        }
        auto worst = std::max_element(panels.begin(), panels.end(),
                                      [](const detail::Panel& x, const detail::Panel& y) { return x.log_error < y.log_error; });
        const double mid = 0.5 * (worst->a + worst->b);
        if (!(mid > worst->a && mid < worst->b)) {
            // cannot split further; accept this panel as is
            worst->log_error = kNegInf;
            continue;
        }
        const double lo = worst->a;
        const double hi = worst->b;
        *worst = detail::kronrod_panel(logf, lo, mid);
        panels.push_back(detail::kronrod_panel(logf, mid, hi));
        lmag = std::max({lmag, worst->log_magnitude, panels.back().log_magnitude});
    }
    out.intervals = static_cast<int>(panels.size());
    if (!out.converged) {
        std::sort(panels.begin(), panels.end(),
                  [](const detail::Panel& x, const detail::Panel& y) { return x.log_error > y.log_error; });
        for (std::size_t i = 0; i < std::min<std::size_t>(5, panels.size()); ++i) out.worst.emplace_back(panels[i].a, panels[i].b);
    }
    return out;
}

/// log_integrate, throwing NumericalError with the interval trace on failure.
template <class LogF>
double log_integrate_or_throw(const LogF& logf, double a, double b, const QuadOptions& opt = {}) {
    auto res = log_integrate(logf, a, b, opt);
    if (!res.converged) {
        std::ostringstream os;
        os << "quadrature on [" << a << ", " << b << "] did not converge after " << res.intervals
           << " subintervals; worst:";
        for (auto [lo, hi] : res.worst) os << " [" << lo << ", " << hi << "]";
        throw NumericalError(os.str());
    }
    return res.log_value;
}

/// Adaptive Gauss-Kronrod for signed integrands.
template <class F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 1e-300) {
    if (a == b) return 0.0;
    if (b < a) return -integrate(f, b, a, rel_tol, abs_tol);
    struct Seg {
        double a, b, val, err;
    };
    auto panel = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi);
        const double h = 0.5 * (hi - lo);
        const double fc = f(c);
        double k = fc * detail::kWgk[7];
        double g = fc * detail::kWg[3];
        for (std::size_t j = 0; j < 7; ++j) {
            const double dx = h * detail::kXgk[j];
            const double s = f(c - dx) + f(c + dx);
            k += detail::kWgk[j] * s;
            if (j % 2 == 1) g += detail::kWg[j / 2] * s;
        }
        return Seg{lo, hi, k * h, std::abs((k - g) * h)};
    };
    std::vector<Seg> segs{panel(a, b)};
    for (int it = 0; it < 2000; ++it) {
        CompensatedSum v, e;
        for (const auto& s : segs) {
            v.add(s.val);
            e.add(s.err);
        }
        if (e.value() <= std::max(rel_tol * std::abs(v.value()), abs_tol)) return v.value();
        auto worst = std::max_element(segs.begin(), segs.end(), [](const Seg& x, const Seg& y) { return x.err < y.err; });
        const double mid = 0.5 * (worst->a + worst->b);
        if (!(mid > worst->a && mid < worst->b)) {
            worst->err = 0.0;
            continue;
        }
        const Seg right = panel(mid, worst->b);
        *worst = panel(worst->a, mid);
        segs.push_back(right);
    }
    CompensatedSum v;
    for (const auto& s : segs) v.add(s.val);
    return v.value();
}

/// Adaptive Simpson with Richardson correction.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-11, int max_depth = 40) {
    struct Rec {
        static double run(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                          int depth) {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m);
            const double rm = 0.5 * (m + b);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
            return run(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
                   run(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        }
    };
    if (a == b) return 0.0;
    // split into a few panels first so narrow features are seen
    constexpr int kPanels = 8;
    CompensatedSum total;
    const double h = (b - a) / kPanels;
    for (int i = 0; i < kPanels; ++i) {
        const double lo = a + i * h;
        const double hi = i + 1 == kPanels ? b : a + (i + 1) * h;
        const double flo = f(lo), fhi = f(hi), fm = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
        total.add(Rec::run(f, lo, hi, flo, fm, fhi, whole, tol / kPanels, max_depth));
    }
    return total.value();
}

/// Trapezoid rule on [0, 2*pi) with n equispaced nodes; spectrally accurate for smooth periodic f.
template <class F>
double periodic_trapezoid(const F& f, int n) {
    CompensatedSum s;
    const double h = 2.0 * std::numbers::pi / n;
    for (int j = 0; j < n; ++j) s.add(f(j * h));
    return s.value() * h;
}

/// 8-point Gauss-Legendre nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kGl8x = {
    -0.960289856497536231683560868569473, -0.796666477413626739591553936475831,
    -0.525532409916328985817739049189254, -0.183434642495649804939476142360184,
    0.183434642495649804939476142360184,  0.525532409916328985817739049189254,
    0.796666477413626739591553936475831,  0.960289856497536231683560868569473};
inline constexpr std::array<double, 8> kGl8w = {
    0.101228536290376259152531354309962, 0.222381034453374470544355994426241,
    0.313706645877887287337962201986601, 0.362683783378361982965150449277225,
    0.362683783378361982965150449277225, 0.313706645877887287337962201986601,
    0.222381034453374470544355994426241, 0.101228536290376259152531354309962};

/// Fixed 8-point Gauss-Legendre on [a, b].
template <class F>
double gauss_legendre8(const F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < 8; ++i) s += kGl8w[i] * f(c + h * kGl8x[i]);
    return s * h;
}

} // namespace ends
