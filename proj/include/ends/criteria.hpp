#pragma once

/**
 * @file criteria.hpp
 * @brief Discreteness criteria for the Laplacian on an end with averaged density omega_bar.
 *
 * Two cases, chosen by volume:
 *  - finite_case   (finite volume):   B(t) = sup_{s>t} int_t^s 1/omega_bar * int_s^inf omega_bar
 *  - infinite_case (infinite volume): B(t) = sup_{s>t} int_s^inf 1/omega_bar * int_t^s omega_bar
 * The spectrum is discrete iff B(t) -> 0 as t -> inf. The infinite case is the
 * finite case applied to 1/omega_bar, and the code uses exactly that swap.
 */

#include "ends/errors.hpp"
#include "ends/parallel.hpp"
#include "ends/profile.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ends {

enum class CriterionCase { finite_case, infinite_case };
enum class Verdict { discrete, not_discrete, inconclusive };

inline const char* to_string(CriterionCase c) { return c == CriterionCase::finite_case ? "finite_case" : "infinite_case"; }

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::discrete: return "discrete";
    case Verdict::not_discrete: return "not_discrete";
    default: return "inconclusive";
    }
}

/// {1, 2, 4, ..., 4096}
inline std::vector<double> default_t_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 12; ++k) g.push_back(std::ldexp(1.0, k));
    return g;
}

struct CriterionOptions {
    std::vector<double> t_grid = default_t_grid();
    double eps_disc = 1e-3;
    double eps_ess = 1e-2;
    /// Relative slack for "non-decreasing" comparisons of B values.
    double flat_tol = 1e-6;
    int scan_points = 64;
    double refine_tol = 1e-6;
    double u_cap = 32.0;
    /// Relative change of the edge value below which a supremum is taken as attained at infinity.
    double limit_tol = 1e-10;
    double div_cap = 1e12;
    TailOptions tail{};
    QuadOptions quad{};
};

namespace detail {

struct MassPair {
    RadialProfile inner; ///< integrated over [t, s]
    RadialProfile tail;  ///< integrated over [s, inf)
};

inline MassPair masses(const RadialProfile& p, CriterionCase c) {
    if (c == CriterionCase::finite_case) return {p.reciprocal(), p};
    return {p, p.reciprocal()};
}

} // namespace detail

/// A(t, s): the inner mass over [t, s] times the complementary tail from s.
inline TailValue mass_product(const RadialProfile& p, double t, double s, CriterionCase c,
                              const CriterionOptions& opt = {}) {
    if (!(t >= 0 && s > t)) throw PreconditionError("mass_product needs 0 <= t < s");
    const auto m = detail::masses(p, c);
    TailValue tail = tail_integral(m.tail, s, opt.tail);
    if (!tail.is_convergent()) return tail;
    tail.log_value += log_integral(m.inner, t, s, opt.quad);
    return tail;
}

/// Corollary form S(s): the product with the inner integral started at 0.
inline TailValue simplified_criterion(const RadialProfile& p, double s, CriterionCase c, const CriterionOptions& opt = {}) {
    if (!(s > 0)) throw PreconditionError("simplified criterion needs s > 0");
    return mass_product(p, 0.0, s, c, opt);
}

struct SupResult {
    TailValue B;
    double s_star = std::numeric_limits<double>::quiet_NaN();
    /// The supremum is approached as s -> inf; s_star is the scan edge.
    bool sup_at_infinity = false;
    int evaluations = 0;
};

/**
 * B(t) = sup_{s>t} A(t, s).
 *
 * Scans s = t + sinh(u) on a uniform u grid, doubling u_max from 1 until the maximum
 * is interior (edge value well below the best, or strictly falling at the edge), the
 * edge value has settled (supremum at infinity), the edge exceeds div_cap while still
 * rising (divergent), or u_cap is reached. A golden-section search on u then refines
 * the best bracket. Inner masses accumulate forward along the grid and tails backward
 * from one improper integral at the edge.
 */
inline SupResult sup_criterion(const RadialProfile& p, double t, CriterionCase c, const CriterionOptions& opt = {}) {
    if (!(t >= 0)) throw PreconditionError("sup_criterion needs t >= 0");
    const auto m = detail::masses(p, c);
    auto log_in = [&](double r) { return m.inner.log_value(r); };
    auto log_tail_f = [&](double r) { return m.tail.log_value(r); };
    auto piece = [&](const auto& f, double a, double b) { return a == b ? kNegInf : log_integrate_or_throw(f, a, b, opt.quad); };

    SupResult out;
    std::vector<double> us;
    std::vector<double> ss, in, tl, la;
    double u_max = 1.0;
    double prev_edge = std::numeric_limits<double>::quiet_NaN();
    const double log_half = std::log(0.5);
    const double log_099 = std::log(0.99);
    const double log_cap = std::log(opt.div_cap);
    std::size_t best = 0;

    for (;;) {
        for (int i = 1; i <= opt.scan_points; ++i) us.push_back(u_max * i / opt.scan_points);
        std::sort(us.begin(), us.end());
        us.erase(std::unique(us.begin(), us.end()), us.end());
        const std::size_t n = us.size();
        ss.assign(n, 0.0);
        in.assign(n, kNegInf);
        tl.assign(n, kNegInf);
        la.assign(n, kNegInf);
        for (std::size_t k = 0; k < n; ++k) ss[k] = t + std::sinh(us[k]);
        for (std::size_t k = 0; k < n; ++k) in[k] = log_add(k ? in[k - 1] : kNegInf, piece(log_in, k ? ss[k - 1] : t, ss[k]));

        TailValue edge_tail = tail_integral(m.tail, ss[n - 1], opt.tail);
        out.evaluations += static_cast<int>(n) + 1;
        if (!edge_tail.is_convergent()) {
            out.B = std::move(edge_tail);
            out.s_star = ss[n - 1];
            out.sup_at_infinity = out.B.is_divergent();
            return out;
        }
        tl[n - 1] = edge_tail.log_value;
        for (std::size_t k = n - 1; k-- > 0;) tl[k] = log_add(tl[k + 1], piece(log_tail_f, ss[k], ss[k + 1]));
        for (std::size_t k = 0; k < n; ++k) la[k] = in[k] + tl[k];

        best = static_cast<std::size_t>(std::max_element(la.begin(), la.end()) - la.begin());
        const double edge = la[n - 1];
        const double top = la[best];
        bool falling = n >= 8;
        for (std::size_t k = n - 8; falling && k + 1 < n; ++k) falling = la[k + 1] < la[k];
        if (edge < top + log_half || (falling && edge < top + log_099)) break; // interior maximum

        const bool edge_is_best = edge >= top - 1e-9;
        if (edge_is_best && !std::isnan(prev_edge) && std::abs(edge - prev_edge) < opt.limit_tol) {
            out.B = TailValue::convergent_log(edge);
            out.s_star = ss[n - 1];
            out.sup_at_infinity = true;
            return out;
        }
        if (edge > log_cap && !std::isnan(prev_edge) && edge >= prev_edge) {
            out.B = TailValue::divergent();
            out.B.log_value = edge;
            out.s_star = ss[n - 1];
            out.sup_at_infinity = true;
            return out;
        }
        if (u_max >= opt.u_cap) {
            if (edge_is_best) {
                const bool settled = !std::isnan(prev_edge) && std::abs(edge - prev_edge) < 1e-6;
                out.B = settled ? TailValue::convergent_log(edge) : TailValue::indeterminate();
                if (!settled) out.B.log_value = edge;
                out.s_star = ss[n - 1];
                out.sup_at_infinity = true;
                return out;
            }
            break;
        }
        prev_edge = edge;
        u_max *= 2;
    }

    // golden-section on u inside the bracket around the best grid point
    const std::size_t n = us.size();
    const double ua = best ? us[best - 1] : 0.0;
    const double ub = best + 1 < n ? us[best + 1] : us[best];
    const double sa = best ? ss[best - 1] : t;
    const double in_a = best ? in[best - 1] : kNegInf;
    const double sb = best + 1 < n ? ss[best + 1] : ss[best];
    const double tl_b = best + 1 < n ? tl[best + 1] : tl[best];
    auto objective = [&](double u) {
        const double s = t + std::sinh(u);
        return log_add(in_a, piece(log_in, sa, s)) + log_add(tl_b, piece(log_tail_f, s, sb));
    };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = ua, b = ub;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = objective(x1), f2 = objective(x2);
    for (int it = 0; it < 200 && (b - a) > opt.refine_tol * std::max(0.5 * (a + b), 1e-300); ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = objective(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = objective(x1);
        }
        ++out.evaluations;
    }
    double log_b = la[best];
    double s_star = ss[best];
    const double fr = std::max(f1, f2);
    if (fr > log_b) {
        log_b = fr;
        s_star = t + std::sinh(f1 >= f2 ? x1 : x2);
    }
    out.B = TailValue::convergent_log(log_b);
    out.s_star = s_star;
    return out;
}

/// True iff both omega_bar and 1/omega_bar have divergent integrals; nullopt when undecided.
inline std::optional<bool> essential_spectrum_test(const RadialProfile& p, const TailOptions& opt = {}) {
    const TailValue v = tail_integral(p, 0.0, opt);
    if (v.is_convergent()) return false;
    const TailValue w = tail_integral(p.reciprocal(), 0.0, opt);
    if (w.is_convergent()) return false;
    if (v.is_divergent() && w.is_divergent()) return true;
    return std::nullopt;
}

/// Evaluation record of B(t) (or S(s)) over a grid.
struct CriterionTrace {
    std::vector<double> t_grid;
    std::vector<TailValue> B_values;
    std::vector<double> s_star;
    std::vector<bool> sup_at_infinity;
    std::optional<CriterionCase> criterion_case;
    Verdict verdict = Verdict::inconclusive;
    std::string rationale;
    VolumeClass volume = VolumeClass::indeterminate;
    TailValue volume_tail;
    TailValue inverse_tail;
    bool essential_spectrum = false;
    bool precondition_violation = false;
};

namespace detail {

/// Limit rule on the last three grid values.
inline Verdict decide_limit(const std::vector<TailValue>& v, const CriterionOptions& opt, std::string& why) {
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k].is_divergent()) {
            why = "B divergent at grid index " + std::to_string(k);
            return Verdict::not_discrete;
        }
    }
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k].is_indeterminate()) {
            why = "indeterminate value at grid index " + std::to_string(k);
            return Verdict::inconclusive;
        }
    }
    if (v.size() < 3) {
        why = "grid needs at least three points";
        return Verdict::inconclusive;
    }
    const std::size_t n = v.size();
    const double b0 = v[n - 3].log_value, b1 = v[n - 2].log_value, b2 = v[n - 1].log_value;
    std::ostringstream os;
    os.precision(6);
    if (b2 < std::log(opt.eps_disc) && b1 < b0 && b2 < b1) {
        os << "last value " << std::exp(b2) << " < " << opt.eps_disc << " and decreasing";
        why = os.str();
        return Verdict::discrete;
    }
    const double slack = std::log1p(-opt.flat_tol);
    const double floor = std::log(opt.eps_ess);
    if (b0 >= floor && b1 >= floor && b2 >= floor && b1 >= b0 + slack && b2 >= b1 + slack) {
        os << "last three values >= " << opt.eps_ess << " and non-decreasing (last " << std::exp(b2) << ")";
        why = os.str();
        return Verdict::not_discrete;
    }
    os << "last three values " << std::exp(b0) << ", " << std::exp(b1) << ", " << std::exp(b2)
       << " between thresholds or without trend";
    why = os.str();
    return Verdict::inconclusive;
}

/// Shared case selection; returns false (with trace filled in) when no criterion applies.
inline bool select_case(const RadialProfile& p, const CriterionOptions& opt, CriterionTrace& tr) {
    tr.volume_tail = tail_integral(p, 0.0, opt.tail);
    tr.volume = volume_class(tr.volume_tail);
    if (tr.volume == VolumeClass::indeterminate) {
        tr.rationale = "volume class indeterminate";
        return false;
    }
    tr.inverse_tail = tail_integral(p.reciprocal(), 0.0, opt.tail);
    if (tr.volume == VolumeClass::infinite_volume) {
        if (tr.inverse_tail.is_divergent()) {
            tr.essential_spectrum = true;
            tr.verdict = Verdict::not_discrete;
            tr.rationale = "essential_spectrum_test: both the volume and the reciprocal integral diverge";
            return false;
        }
        if (tr.inverse_tail.is_indeterminate()) {
            tr.rationale = "infinite volume but the reciprocal integral is indeterminate";
            return false;
        }
        tr.criterion_case = CriterionCase::infinite_case;
        return true;
    }
    if (!tr.inverse_tail.is_divergent()) {
        tr.precondition_violation = true;
        tr.rationale = std::string("precondition violation: finite volume but the reciprocal integral is ") +
                       to_string(tr.inverse_tail.kind) + ", not divergent";
        return false;
    }
    tr.criterion_case = CriterionCase::finite_case;
    return true;
}

} // namespace detail

/// Decides discreteness from B(t) on the t grid.
inline CriterionTrace classify_discreteness(const RadialProfile& p, const CriterionOptions& opt = {}) {
    CriterionTrace tr;
    tr.t_grid = opt.t_grid;
    if (!detail::select_case(p, opt, tr)) return tr;
    const CriterionCase c = *tr.criterion_case;
    auto sups = parallel_map<SupResult>(opt.t_grid.size(), [&](std::size_t i) { return sup_criterion(p, opt.t_grid[i], c, opt); });
    for (auto& s : sups) {
        tr.B_values.push_back(s.B);
        tr.s_star.push_back(s.s_star);
        tr.sup_at_infinity.push_back(s.sup_at_infinity);
    }
    tr.verdict = detail::decide_limit(tr.B_values, opt, tr.rationale);
    tr.rationale = std::string(to_string(c)) + ": " + tr.rationale;
    return tr;
}

/// Same decision rule applied to S(s) on the grid, the corollary form.
inline CriterionTrace classify_simplified(const RadialProfile& p, const CriterionOptions& opt = {}) {
    CriterionTrace tr;
    tr.t_grid = opt.t_grid;
    if (!detail::select_case(p, opt, tr)) return tr;
    const CriterionCase c = *tr.criterion_case;
    tr.B_values = parallel_map<TailValue>(opt.t_grid.size(), [&](std::size_t i) { return simplified_criterion(p, opt.t_grid[i], c, opt); });
    tr.s_star = opt.t_grid;
    tr.sup_at_infinity.assign(opt.t_grid.size(), false);
    tr.verdict = detail::decide_limit(tr.B_values, opt, tr.rationale);
    tr.rationale = std::string(to_string(c)) + " (simplified): " + tr.rationale;
    return tr;
}

struct LogDerivativeTrace {
    std::optional<CriterionCase> criterion_case;
    std::vector<double> s_grid;
    std::vector<double> L_values;
    Verdict verdict = Verdict::inconclusive;
    std::string rationale;
};

struct LogDerivativeOptions {
    std::vector<double> s_grid = {4, 8, 16, 32, 64};
    double threshold = 1e3;
    /// Minimum growth of |L| per grid step that counts as a trend towards -inf.
    double growth = 1.5;
    double stable_tol = 0.01;
    TailOptions tail{};
};

/**
 * Fast path for well-behaved profiles: L(s) = d/ds log int_s^inf w = -w(s) / int_s^inf w,
 * with w = omega_bar (finite volume) or 1/omega_bar (infinite volume). Discrete when L
 * falls monotonically and either passes -threshold or keeps growing geometrically;
 * not discrete when |L| stays within stable_tol over the last three points.
 */
inline LogDerivativeTrace log_derivative_criterion(const RadialProfile& p, const LogDerivativeOptions& opt = {}) {
    LogDerivativeTrace tr;
    tr.s_grid = opt.s_grid;
    const VolumeClass vol = volume_class(p, opt.tail);
    if (vol == VolumeClass::indeterminate) {
        tr.rationale = "volume class indeterminate";
        return tr;
    }
    tr.criterion_case = vol == VolumeClass::finite_volume ? CriterionCase::finite_case : CriterionCase::infinite_case;
    const RadialProfile w = vol == VolumeClass::finite_volume ? p : p.reciprocal();
    for (double s : opt.s_grid) {
        const TailValue tail = tail_integral(w, s, opt.tail);
        if (tail.is_divergent())
            throw CaseError("log-derivative criterion: the tail of " + w.label() + " diverges (no applicable case)");
        if (tail.is_indeterminate()) {
            tr.rationale = "tail indeterminate at s = " + std::to_string(s);
            return tr;
        }
        tr.L_values.push_back(-std::exp(w.log_value(s) - tail.log_value));
    }
    const auto& L = tr.L_values;
    const std::size_t n = L.size();
    if (n < 3) {
        tr.rationale = "grid needs at least three points";
        return tr;
    }
    std::ostringstream os;
    os.precision(6);
    const bool falling = L[n - 2] < L[n - 3] && L[n - 1] < L[n - 2];
    const bool growing = L[n - 2] / L[n - 3] >= opt.growth && L[n - 1] / L[n - 2] >= opt.growth;
    if (falling && (L[n - 1] < -opt.threshold || growing)) {
        os << "L decreasing to " << L[n - 1] << (L[n - 1] < -opt.threshold ? " below -threshold" : " with geometric growth");
        tr.verdict = Verdict::discrete;
    } else if (std::max({std::abs(L[n - 3]), std::abs(L[n - 2]), std::abs(L[n - 1])}) <=
               (1 + opt.stable_tol) * std::min({std::abs(L[n - 3]), std::abs(L[n - 2]), std::abs(L[n - 1])})) {
        os << "L stable near " << L[n - 1];
        tr.verdict = Verdict::not_discrete;
    } else {
        os << "no decisive trend (last L = " << L[n - 1] << ")";
    }
    tr.rationale = os.str();
    return tr;
}

/// max(0, 1/(8 B) - c^2/4); zero when B diverges.
inline double lambda0_lower_bound(const TailValue& B, double c) {
    if (B.is_divergent()) return 0.0;
    if (!B.is_convergent()) throw PreconditionError("lower bound needs a finite B(t)");
    if (B.log_value == kNegInf) throw PreconditionError("lower bound needs B(t) > 0");
    return std::max(0.0, 0.125 * std::exp(-B.log_value) - 0.25 * c * c);
}

/// Lower bound for the bottom of the spectrum on the end beyond t, case chosen by volume.
inline double lambda0_lower_bound(const RadialProfile& p, double t, double c, const CriterionOptions& opt = {}) {
    const VolumeClass vol = volume_class(p, opt.tail);
    if (vol == VolumeClass::indeterminate) throw PreconditionError("volume class indeterminate");
    const CriterionCase cc = vol == VolumeClass::finite_volume ? CriterionCase::finite_case : CriterionCase::infinite_case;
    return lambda0_lower_bound(sup_criterion(p, t, cc, opt).B, c);
}

} // namespace ends
