#pragma once

/**
 * @file profile.hpp
 * @brief Averaged volume densities of an end and the integrals the criteria need.
 *
 * A RadialProfile is omega_bar(r) > 0 on [0, inf), given either as an expression
 * in r or as a table of samples. Reciprocal and exponential perturbation are kept as
 * exact modifiers on a shared base, so reciprocal(reciprocal(p)) is p bit for bit and
 * perturbing by a then by b matches perturbing by a + b to rounding.
 */

#include "ends/errors.hpp"
#include "ends/expression.hpp"
#include "ends/logmath.hpp"
#include "ends/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace ends {

/// How a tabulated profile continues past its last sample.
enum class Extrapolation { none, constant, log_linear };

struct LogDerivative {
    double value;
    bool one_sided = false; ///< table profile differenced one-sidedly at a boundary
};

class RadialProfile {
public:
    /// Profile given by an expression in r. Positivity is not checked here; see parse_profile.
    static RadialProfile symbolic(Expr e, std::string label, std::optional<Expr> antiderivative = std::nullopt) {
        RadialProfile p;
        auto base = std::make_shared<Base>();
        base->source = SymbolicSource{e, e.derivative(Var::r),
                                      e.op() == Op::exp ? std::optional<Expr>(e.lhs().derivative(Var::r)) : std::nullopt};
        base->antiderivative = std::move(antiderivative);
        p.base_ = std::move(base);
        p.label_ = std::move(label);
        return p;
    }

    /**
     * Profile from samples. Abscissae must start at 0 and increase strictly; values
     * must be positive. Without `slopes` the interpolant is Fritsch-Carlson monotone
     * cubic, which stays between neighbouring samples and so stays positive.
     */
    static RadialProfile tabulated(std::vector<double> r, std::vector<double> w,
                                   std::optional<std::vector<double>> slopes = std::nullopt,
                                   Extrapolation extrapolation = Extrapolation::none, std::string label = "table") {
        if (r.size() < 2 || r.size() != w.size()) throw PreconditionError("table needs at least two (r, omega_bar) rows");
        if (r.front() != 0.0) throw PreconditionError("table must start at r = 0");
        for (std::size_t i = 1; i < r.size(); ++i)
            if (!(r[i] > r[i - 1])) throw PreconditionError("table abscissae must increase strictly");
        for (std::size_t i = 0; i < w.size(); ++i)
            if (!(w[i] > 0.0) || !std::isfinite(w[i]))
                throw PositivityError("table value not positive at r = " + std::to_string(r[i]), r[i]);
        TableSource t;
        t.exact_slopes = slopes.has_value();
        if (slopes) {
            if (slopes->size() != r.size()) throw PreconditionError("slope column length mismatch");
            t.d = std::move(*slopes);
        } else {
            t.d = monotone_slopes(r, w);
        }
        t.r = std::move(r);
        t.w = std::move(w);
        t.extrapolation = extrapolation;
        RadialProfile p;
        auto base = std::make_shared<Base>();
        base->source = std::move(t);
        p.base_ = std::move(base);
        p.label_ = std::move(label);
        return p;
    }

    const std::string& label() const noexcept { return label_; }
    bool is_symbolic() const noexcept { return std::holds_alternative<SymbolicSource>(base_->source); }
    bool is_reciprocal() const noexcept { return sign_ < 0; }
    double exponential_rate() const noexcept { return rate_; }

    /// Largest r at which the profile can be evaluated.
    double r_max() const noexcept {
        if (const auto* t = std::get_if<TableSource>(&base_->source))
            return t->extrapolation == Extrapolation::none ? t->r.back() : kInf;
        return kInf;
    }

    /// omega_bar(r). Falls back to the log form when the direct value leaves the double range.
    double value(double r) const {
        check_domain(r);
        double v = base_value(r);
        if (sign_ < 0) v = 1.0 / v;
        if (rate_ != 0.0) v *= std::exp(rate_ * r);
        if (std::isfinite(v) && v >= std::numeric_limits<double>::min()) return v;
        return std::exp(log_value(r));
    }
    double operator()(double r) const { return value(r); }

    /// log omega_bar(r); NaN if the underlying expression is not positive at r.
    double log_value(double r) const {
        check_domain(r);
        return sign_ * base_log(r) + rate_ * r;
    }

    /// Mean curvature average h_bar = omega_bar' / omega_bar.
    double log_derivative(double r) const { return log_derivative_diag(r).value; }

    LogDerivative log_derivative_diag(double r) const {
        check_domain(r);
        LogDerivative out{0.0};
        if (const auto* s = std::get_if<SymbolicSource>(&base_->source)) {
            out.value = s->dlog ? (*s->dlog)(r) : (s->d.signed_log(r) / s->e.signed_log(r)).value();
        } else {
            out = table_log_derivative(std::get<TableSource>(base_->source), r);
        }
        out.value = sign_ * out.value + rate_;
        return out;
    }

    /// The profile's expression after applying modifiers, if symbolic.
    std::optional<Expr> expression() const {
        const auto* s = std::get_if<SymbolicSource>(&base_->source);
        if (!s) return std::nullopt;
        Expr e = sign_ < 0 ? invert(s->e) : s->e;
        if (rate_ != 0.0) {
            const Expr lin = Expr::constant(rate_) * Expr::variable(Var::r);
            e = e.op() == Op::exp ? apply(Op::exp, e.lhs() + lin) : apply(Op::exp, lin) * e;
        }
        return e;
    }

    /// Closed-form antiderivative of omega_bar, if one is known or can be found by pattern.
    std::optional<Expr> antiderivative() const {
        if (sign_ > 0 && rate_ == 0.0 && base_->antiderivative) return base_->antiderivative;
        auto e = expression();
        if (!e) return std::nullopt;
        return ends::antiderivative(*e);
    }

    RadialProfile reciprocal() const {
        RadialProfile p = *this;
        p.sign_ = -sign_;
        p.rate_ = -rate_;
        p.label_ = label_.size() > 2 && label_.rfind("1/(", 0) == 0 && label_.back() == ')'
                       ? label_.substr(3, label_.size() - 4)
                       : "1/(" + label_ + ")";
        return p;
    }

    /// r -> exp(c r) omega_bar(r).
    RadialProfile perturbed(double c) const {
        RadialProfile p = *this;
        p.rate_ = rate_ + c;
        std::ostringstream os;
        os.precision(17);
        os << "exp(" << c << "*r)*(" << label_ << ")";
        p.label_ = os.str();
        return p;
    }

    RadialProfile with_label(std::string label) const {
        RadialProfile p = *this;
        p.label_ = std::move(label);
        return p;
    }

private:
    struct SymbolicSource {
        Expr e;
        Expr d;
        /// g' when e = exp(g): exact where d / e would lose eps |g| to the log-domain quotient
        std::optional<Expr> dlog;
    };
    struct TableSource {
        std::vector<double> r, w, d;
        bool exact_slopes = false;
        Extrapolation extrapolation = Extrapolation::none;
    };
    struct Base {
        std::variant<SymbolicSource, TableSource> source;
        std::optional<Expr> antiderivative;
    };

    RadialProfile() = default;

    static Expr invert(const Expr& e) {
        switch (e.op()) {
        case Op::exp: return apply(Op::exp, -e.lhs());
        case Op::pow: return pow(e.lhs(), -e.rhs());
        case Op::div:
            if (e.lhs().is_constant() && e.lhs().constant_value() == 1.0) return e.rhs();
            return e.rhs() / e.lhs();
        case Op::constant: return Expr::constant(1.0 / e.constant_value());
        default: return Expr::constant(1.0) / e;
        }
    }

    void check_domain(double r) const {
        if (r < 0.0 || std::isnan(r)) throw RangeError("profile evaluated at negative r = " + std::to_string(r));
        if (r > r_max())
            throw RangeError("r = " + std::to_string(r) + " beyond last table sample " + std::to_string(r_max()) +
                             " (enable extrapolation explicitly)");
    }

    double base_value(double r) const {
        if (const auto* s = std::get_if<SymbolicSource>(&base_->source)) return s->e(r);
        return table_value(std::get<TableSource>(base_->source), r);
    }

    double base_log(double r) const {
        if (const auto* s = std::get_if<SymbolicSource>(&base_->source)) {
            const SignedLog v = s->e.signed_log(r);
            if (v.sign <= 0) return std::numeric_limits<double>::quiet_NaN();
            return v.log_abs;
        }
        const auto& t = std::get<TableSource>(base_->source);
        if (r > t.r.back() && t.extrapolation == Extrapolation::log_linear) {
            const std::size_t n = t.r.size();
            const double k = (std::log(t.w[n - 1]) - std::log(t.w[n - 2])) / (t.r[n - 1] - t.r[n - 2]);
            return std::log(t.w[n - 1]) + k * (r - t.r[n - 1]);
        }
        return std::log(table_value(t, r));
    }

    static std::vector<double> monotone_slopes(const std::vector<double>& x, const std::vector<double>& y) {
        const std::size_t n = x.size();
        std::vector<double> delta(n - 1), d(n);
        for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) d[i] = delta[i - 1] * delta[i] <= 0 ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (delta[i] == 0.0) {
                d[i] = d[i + 1] = 0.0;
                continue;
            }
            const double a = d[i] / delta[i];
            const double b = d[i + 1] / delta[i];
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double tau = 3.0 / std::sqrt(s);
                d[i] = tau * a * delta[i];
                d[i + 1] = tau * b * delta[i];
            }
        }
        return d;
    }

    static std::size_t segment(const TableSource& t, double r) {
        auto it = std::upper_bound(t.r.begin(), t.r.end(), r);
        std::size_t i = it == t.r.begin() ? 0 : static_cast<std::size_t>(it - t.r.begin()) - 1;
        return std::min(i, t.r.size() - 2);
    }

    static double table_value(const TableSource& t, double r) {
        if (r > t.r.back()) {
            if (t.extrapolation == Extrapolation::constant) return t.w.back();
            const std::size_t n = t.r.size();
            const double k = (std::log(t.w[n - 1]) - std::log(t.w[n - 2])) / (t.r[n - 1] - t.r[n - 2]);
            return t.w[n - 1] * std::exp(k * (r - t.r[n - 1]));
        }
        const std::size_t i = segment(t, r);
        const double h = t.r[i + 1] - t.r[i];
        const double s = (r - t.r[i]) / h;
        if (s == 0.0) return t.w[i];
        if (s == 1.0) return t.w[i + 1];
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * t.w[i] + (s3 - 2 * s2 + s) * h * t.d[i] + (-2 * s3 + 3 * s2) * t.w[i + 1] +
               (s3 - s2) * h * t.d[i + 1];
    }

    static double table_slope(const TableSource& t, double r) {
        const std::size_t i = segment(t, r);
        const double h = t.r[i + 1] - t.r[i];
        const double s = (r - t.r[i]) / h;
        const double s2 = s * s;
        return (6 * s2 - 6 * s) / h * t.w[i] + (3 * s2 - 4 * s + 1) * t.d[i] + (-6 * s2 + 6 * s) / h * t.w[i + 1] +
               (3 * s2 - 2 * s) * t.d[i + 1];
    }

    static LogDerivative table_log_derivative(const TableSource& t, double r) {
        if (r > t.r.back()) {
            if (t.extrapolation == Extrapolation::constant) return {0.0};
            const std::size_t n = t.r.size();
            return {(std::log(t.w[n - 1]) - std::log(t.w[n - 2])) / (t.r[n - 1] - t.r[n - 2])};
        }
        if (t.exact_slopes) return {table_slope(t, r) / table_value(t, r)};
        const double step = 1e-5 * std::max(1.0, r);
        const double hi_limit = t.extrapolation == Extrapolation::none ? t.r.back() : kInf;
        if (r - step < 0.0) {
            const double f0 = std::log(table_value(t, r));
            return {(std::log(table_value(t, r + step)) - f0) / step, true};
        }
        if (r + step > hi_limit) {
            const double f0 = std::log(table_value(t, r));
            return {(f0 - std::log(table_value(t, r - step))) / step, true};
        }
        return {(std::log(table_value(t, r + step)) - std::log(table_value(t, r - step))) / (2 * step)};
    }

    std::shared_ptr<const Base> base_;
    std::string label_;
    int sign_ = 1;
    double rate_ = 0.0;
};

inline RadialProfile reciprocal(const RadialProfile& p) { return p.reciprocal(); }

/// omega_bar_c = exp(c r) omega_bar, the density of the exponentially perturbed metric.
inline RadialProfile perturb_exponential(const RadialProfile& p, double c) {
    if (!(c > 0.0)) throw PreconditionError("exponential perturbation needs c > 0");
    return p.perturbed(c);
}

inline constexpr double kPositivityProbes[] = {0.0, 0.1, 1.0, 10.0, 100.0};

/// Parses the profile DSL and rejects profiles that are not positive at the probe radii.
inline RadialProfile parse_profile(std::string_view text) {
    Expr e = parse_expression(text, false);
    for (double r : kPositivityProbes) {
        const SignedLog v = e.signed_log(r);
        if (v.sign <= 0 || v.is_nan())
            throw PositivityError("profile '" + std::string(text) + "' is not positive at r = " + std::to_string(r), r);
    }
    return RadialProfile::symbolic(e, std::string(text), antiderivative(e));
}

/// Reads a CSV with header "r,omega_bar".
inline RadialProfile load_profile_csv(const std::string& path, Extrapolation extrapolation = Extrapolation::none) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open profile table '" + path + "'", 0);
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) break;
    }
    std::string header = trim(line);
    header.erase(std::remove(header.begin(), header.end(), ' '), header.end());
    if (header != "r,omega_bar") throw ConfigError(path + ": expected header 'r,omega_bar'", lineno);
    std::vector<double> r, w;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError(path + ": expected two columns", lineno);
        try {
            std::size_t u1 = 0, u2 = 0;
            const std::string a = trim(line.substr(0, comma));
            const std::string b = trim(line.substr(comma + 1));
            r.push_back(std::stod(a, &u1));
            w.push_back(std::stod(b, &u2));
            if (u1 != a.size() || u2 != b.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ConfigError(path + ": malformed number", lineno);
        }
    }
    try {
        return RadialProfile::tabulated(std::move(r), std::move(w), std::nullopt, extrapolation, path);
    } catch (const Error& e) {
        throw ConfigError(path + ": " + e.what(), 0);
    }
}

/// log of the integral of omega_bar over [a, b]. Throws NumericalError on non-convergence.
inline double log_integral(const RadialProfile& p, double a, double b, const QuadOptions& opt = {}) {
    if (a < 0 || b < a) throw PreconditionError("integral needs 0 <= a <= b");
    if (a == b) return kNegInf;
    return log_integrate_or_throw([&](double r) { return p.log_value(r); }, a, b, opt);
}

/// Integral of omega_bar over [a, b]; uses the closed-form antiderivative when one is known.
inline double integral(const RadialProfile& p, double a, double b, const QuadOptions& opt = {}) {
    if (a < 0 || b < a || !std::isfinite(b)) throw PreconditionError("integral needs 0 <= a <= b < inf");
    if (a == b) return 0.0;
    if (auto F = p.antiderivative()) {
        const double fa = (*F)(a), fb = (*F)(b);
        const double v = fb - fa;
        if (std::isfinite(v) && v > 0 && std::abs(v) > 1e-6 * (std::abs(fa) + std::abs(fb))) return v;
    }
    return std::exp(log_integral(p, a, b, opt));
}

/// Numerical route only, ignoring any antiderivative.
inline double numeric_integral(const RadialProfile& p, double a, double b, const QuadOptions& opt = {}) {
    return std::exp(log_integral(p, a, b, opt));
}

// ---------------------------------------------------------------------------
// Improper integrals

struct TailWindow {
    double lo, hi;
    double log_contribution;
};

/// Result of integrating to infinity.
struct TailValue {
    enum class Kind { convergent, divergent, indeterminate };
    Kind kind = Kind::indeterminate;
    /// log of the value (convergent) or of the partial sum reached (otherwise).
    double log_value = kNegInf;
    std::vector<TailWindow> windows;

    static TailValue convergent_log(double l) { return {Kind::convergent, l, {}}; }
    static TailValue divergent() { return {Kind::divergent, kInf, {}}; }
    static TailValue indeterminate() { return {Kind::indeterminate, std::numeric_limits<double>::quiet_NaN(), {}}; }

    bool is_convergent() const noexcept { return kind == Kind::convergent; }
    bool is_divergent() const noexcept { return kind == Kind::divergent; }
    bool is_indeterminate() const noexcept { return kind == Kind::indeterminate; }

    /// Numeric value: +inf when divergent, NaN when indeterminate.
    double value() const noexcept {
        if (kind == Kind::divergent) return kInf;
        if (kind == Kind::indeterminate) return std::numeric_limits<double>::quiet_NaN();
        return std::exp(log_value);
    }
};

inline const char* to_string(TailValue::Kind k) {
    switch (k) {
    case TailValue::Kind::convergent: return "convergent";
    case TailValue::Kind::divergent: return "divergent";
    default: return "indeterminate";
    }
}

struct TailOptions {
    int max_windows = 60;
    int decision_windows = 5;
    /// A window is negligible when its contribution is below tol times the partial sum.
    double tol = 1e-12;
    double div_cap = 1e12;
    /// Relative slack when testing that window contributions do not decrease.
    double flat_slack = 1e-8;
    QuadOptions quad{};
};

/**
 * Integral of exp(logf) over [s, inf) by doubling windows
 * [s + h0 (2^j - 1), s + h0 (2^(j+1) - 1)], j = 0 .. max_windows-1.
 *
 * Convergent once the last `decision_windows` contributions decrease and each is below
 * tol times the partial sum. Divergent once they are non-decreasing and either the
 * partial sum exceeds div_cap or the window budget is spent (terms that do not shrink
 * cannot sum to a finite value). Anything else is indeterminate.
 */
template <class LogF>
TailValue log_tail(const LogF& logf, double s, double h0, const TailOptions& opt = {}) {
    TailValue out;
    double partial = kNegInf;
    const int m = opt.decision_windows;
    const double log_tol = std::log(opt.tol);
    const double log_cap = std::log(opt.div_cap);
    const double flat = std::log1p(-opt.flat_slack);
    for (int j = 0; j < opt.max_windows; ++j) {
        const double lo = s + h0 * (std::ldexp(1.0, j) - 1.0);
        const double hi = s + h0 * (std::ldexp(1.0, j + 1) - 1.0);
        const auto q = log_integrate(logf, lo, hi, opt.quad);
        if (std::isnan(q.log_value)) {
            out.kind = TailValue::Kind::indeterminate;
            out.log_value = partial;
            return out;
        }
        out.windows.push_back({lo, hi, q.log_value});
        partial = log_add(partial, q.log_value);
        if (q.log_value == kInf) {
            out.kind = TailValue::Kind::divergent;
            out.log_value = kInf;
            return out;
        }
        const int n = static_cast<int>(out.windows.size());
        if (n < m) continue;
        bool decreasing = true, small = true, nondecreasing = true;
        for (int i = n - m; i < n; ++i) {
            const double c = out.windows[static_cast<std::size_t>(i)].log_contribution;
            if (c != kNegInf && c > log_tol + partial) small = false;
            if (i > n - m) {
                const double prev = out.windows[static_cast<std::size_t>(i - 1)].log_contribution;
                if (!(c < prev || (c == kNegInf && prev == kNegInf))) decreasing = false;
                if (!(c >= prev + flat) || c == kNegInf) nondecreasing = false;
            }
        }
        if (small && decreasing) {
            out.kind = TailValue::Kind::convergent;
            out.log_value = partial;
            return out;
        }
        if (nondecreasing && (partial > log_cap || j + 1 == opt.max_windows)) {
            out.kind = TailValue::Kind::divergent;
            out.log_value = partial;
            return out;
        }
    }
    out.kind = TailValue::Kind::indeterminate;
    out.log_value = partial;
    return out;
}

/// First window width: the local length scale 1/|h_bar(s)|, clamped to [1e-9, 1] * max(1, s).
inline double tail_initial_width(const RadialProfile& p, double s) {
    const double scale = std::max(1.0, s);
    const double h = std::abs(p.log_derivative(s));
    if (!std::isfinite(h) || h * scale <= 1.0) return scale;
    return std::max(1.0 / h, 1e-9 * scale);
}

/// Integral of omega_bar over [s, inf).
inline TailValue tail_integral(const RadialProfile& p, double s, const TailOptions& opt = {}) {
    if (s < 0) throw PreconditionError("tail integral needs s >= 0");
    if (p.r_max() < kInf) {
        // a table without extrapolation cannot decide a tail
        return TailValue::indeterminate();
    }
    return log_tail([&](double r) { return p.log_value(r); }, s, tail_initial_width(p, s), opt);
}

enum class VolumeClass { finite_volume, infinite_volume, indeterminate };

inline const char* to_string(VolumeClass v) {
    switch (v) {
    case VolumeClass::finite_volume: return "finite_volume";
    case VolumeClass::infinite_volume: return "infinite_volume";
    default: return "indeterminate";
    }
}

inline VolumeClass volume_class(const TailValue& total_volume) {
    if (total_volume.is_convergent()) return VolumeClass::finite_volume;
    if (total_volume.is_divergent()) return VolumeClass::infinite_volume;
    return VolumeClass::indeterminate;
}

inline VolumeClass volume_class(const RadialProfile& p, const TailOptions& opt = {}) {
    return volume_class(tail_integral(p, 0.0, opt));
}

} // namespace ends
