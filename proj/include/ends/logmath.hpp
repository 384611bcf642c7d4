#pragma once

// Arithmetic on magnitudes stored as natural logarithms. Volume densities such as
// exp(r^3) or exp(-r^2) leave the double range long before the criteria stop being
// meaningful, so products of huge and tiny integrals are formed in log space.

#include <algorithm>
#include <cmath>
#include <limits>

namespace ends {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// log(exp(a) + exp(b)).
inline double log_add(double a, double b) noexcept {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    if (a == kInf) return kInf;
    return a + std::log1p(std::exp(b - a));
}

/// log(exp(a) - exp(b)) for a >= b; -inf when equal.
inline double log_sub(double a, double b) noexcept {
    if (b == kNegInf) return a;
    if (b >= a) return kNegInf;
    return a + std::log1p(-std::exp(b - a));
}

/// A real number as sign and log-magnitude. sign == 0 encodes zero.
struct SignedLog {
    double log_abs = kNegInf;
    int sign = 0;

    static SignedLog from_value(double v) noexcept {
        if (v > 0) return {std::log(v), 1};
        if (v < 0) return {std::log(-v), -1};
        if (std::isnan(v)) return {std::numeric_limits<double>::quiet_NaN(), 1};
        return {};
    }
    static SignedLog from_log(double l) noexcept { return l == kNegInf ? SignedLog{} : SignedLog{l, 1}; }

    double value() const noexcept { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
    bool is_nan() const noexcept { return std::isnan(log_abs); }
};

inline SignedLog operator-(SignedLog a) noexcept {
    a.sign = -a.sign;
    return a;
}

inline SignedLog operator+(SignedLog a, SignedLog b) noexcept {
    if (a.sign == 0) return b;
    if (b.sign == 0) return a;
    if (a.sign == b.sign) return {log_add(a.log_abs, b.log_abs), a.sign};
    if (a.log_abs == b.log_abs) return {};
    if (a.log_abs > b.log_abs) return {log_sub(a.log_abs, b.log_abs), a.sign};
    return {log_sub(b.log_abs, a.log_abs), b.sign};
}

inline SignedLog operator-(SignedLog a, SignedLog b) noexcept { return a + (-b); }

inline SignedLog operator*(SignedLog a, SignedLog b) noexcept {
    if (a.sign == 0 || b.sign == 0) return {};
    return {a.log_abs + b.log_abs, a.sign * b.sign};
}

inline SignedLog operator/(SignedLog a, SignedLog b) noexcept {
    if (b.sign == 0) return {std::numeric_limits<double>::quiet_NaN(), 1};
    if (a.sign == 0) return {};
    return {a.log_abs - b.log_abs, a.sign * b.sign};
}

/// Neumaier-compensated running sum; order of additions still matters but the
/// rounding error stays O(eps) instead of O(n eps).
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace ends
