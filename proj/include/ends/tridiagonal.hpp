#pragma once

// Symmetric tridiagonal eigenproblems: lowest eigenvalue by Sturm-count bisection and
// the matching eigenvector by inverse iteration.

#include "ends/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ends {

/// diag[i] on the diagonal, off[i] couples i and i+1 (off.size() == diag.size() - 1).
struct SymTridiagonal {
    std::vector<double> diag;
    std::vector<double> off;

    std::size_t size() const noexcept { return diag.size(); }
};

/// Number of eigenvalues strictly below x (LDL^T pivot signs).
inline std::size_t sturm_count(const SymTridiagonal& m, double x) {
    const std::size_t n = m.size();
    std::size_t count = 0;
    double d = m.diag[0] - x;
    const double tiny = std::numeric_limits<double>::min();
    for (std::size_t i = 0;; ++i) {
        if (d == 0.0) d = -tiny;
        if (d < 0.0) ++count;
        if (i + 1 == n) break;
        d = m.diag[i + 1] - x - m.off[i] * m.off[i] / d;
    }
    return count;
}

struct LowestEigen {
    double value;
    double lower; ///< certified lower end of the final bracket
    int iterations;
};

/**
 * Smallest eigenvalue of a positive semidefinite symmetric tridiagonal matrix by
 * bisection on [0, min diag]; any diagonal entry bounds the minimum from above.
 */
inline LowestEigen lowest_eigenvalue(const SymTridiagonal& m, double abs_tol = 1e-10) {
    if (m.size() == 0) throw PreconditionError("empty matrix");
    double hi = *std::min_element(m.diag.begin(), m.diag.end());
    double lo = 0.0;
    if (sturm_count(m, lo) > 0) {
        // not semidefinite after rounding; widen with the Gershgorin bound
        double g = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            double radius = 0.0;
            if (i > 0) radius += std::abs(m.off[i - 1]);
            if (i + 1 < m.size()) radius += std::abs(m.off[i]);
            g = std::min(g, m.diag[i] - radius);
        }
        lo = g;
    }
    int it = 0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    while (hi - lo > std::max(abs_tol, 4 * eps * std::abs(hi)) && it < 400) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (sturm_count(m, mid) >= 1)
            hi = mid;
        else
            lo = mid;
        ++it;
    }
    return {0.5 * (lo + hi), lo, it};
}

/// Solves (M - shift I) x = rhs by the Thomas algorithm; M - shift I must be definite.
inline std::vector<double> solve_shifted(const SymTridiagonal& m, double shift, std::vector<double> rhs) {
    const std::size_t n = m.size();
    std::vector<double> c(n, 0.0);
    double denom = m.diag[0] - shift;
    if (denom == 0.0) denom = std::numeric_limits<double>::min();
    if (n > 1) c[0] = m.off[0] / denom;
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = m.diag[i] - shift - m.off[i - 1] * c[i - 1];
        if (denom == 0.0) denom = std::numeric_limits<double>::min();
        if (i + 1 < n) c[i] = m.off[i] / denom;
        rhs[i] = (rhs[i] - m.off[i - 1] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
    return rhs;
}

/// Unit eigenvector for the eigenvalue just above `shift`, positive in the first entry with large magnitude.
inline std::vector<double> inverse_iteration(const SymTridiagonal& m, double shift, int iterations = 4) {
    std::vector<double> x(m.size(), 1.0);
    for (int k = 0; k < iterations; ++k) {
        x = solve_shifted(m, shift, std::move(x));
        double norm = 0.0;
        for (double v : x) norm = std::max(norm, std::abs(v));
        if (!(norm > 0) || !std::isfinite(norm)) throw NumericalError("inverse iteration broke down");
        for (double& v : x) v /= norm;
    }
    double s2 = 0.0;
    for (double v : x) s2 += v * v;
    const double scale = 1.0 / std::sqrt(s2);
    const auto big = std::max_element(x.begin(), x.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    const double sign = *big < 0 ? -1.0 : 1.0;
    for (double& v : x) v *= sign * scale;
    return x;
}

} // namespace ends
