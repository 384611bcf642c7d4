#pragma once

// Dormand-Prince 5(4) with step-size control and the standard continuous extension.

#include "ends/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

namespace ends {

template <std::size_t N>
using OdeState = std::array<double, N>;

struct OdeOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    /// Initial step; 0 picks one from the tolerance.
    double h_init = 0.0;
    /// Steps below h_min * max(1, |t|) abort with NumericalError.
    double h_min = 1e-14;
    std::size_t max_steps = 5'000'000;
};

/// One accepted step with its dense-output coefficients.
template <std::size_t N>
struct OdeStep {
    double t0 = 0.0, t1 = 0.0;
    std::array<OdeState<N>, 5> rc{};

    OdeState<N> at(double t) const {
        const double h = t1 - t0;
        const double th = h == 0.0 ? 0.0 : (t - t0) / h;
        const double th1 = 1.0 - th;
        OdeState<N> y;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = rc[0][i] + th * (rc[1][i] + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])));
        return y;
    }
};

template <std::size_t N>
struct OdeSolution {
    std::vector<OdeStep<N>> steps;
    double t_begin = 0.0, t_end = 0.0;
    OdeState<N> y_end{};
    /// The stop predicate fired before the requested end.
    bool stopped = false;
    std::size_t rejected = 0;

    /// Dense output on [t_begin, t_end].
    OdeState<N> at(double t) const {
        if (steps.empty()) return y_end;
        if (t <= steps.front().t0) return steps.front().rc[0];
        auto it = std::upper_bound(steps.begin(), steps.end(), t, [](double x, const OdeStep<N>& s) { return x < s.t1; });
        if (it == steps.end()) return y_end;
        return it->at(t);
    }
};

/**
 * Integrates y' = f(t, y) from t0 to t1 (t1 > t0). `stop(t, y)` is consulted after every
 * accepted step; returning true ends the integration there.
 */
template <std::size_t N, class F, class Stop>
OdeSolution<N> dopri5(const F& f, double t0, OdeState<N> y0, double t1, const OdeOptions& opt, const Stop& stop) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    if (!(t1 > t0)) throw PreconditionError("ODE interval must have t1 > t0");
    OdeSolution<N> sol;
    sol.t_begin = t0;
    OdeState<N> y = y0, k1 = f(t0, y0), k2, k3, k4, k5, k6, k7, tmp, ynew, err;

    auto norm = [&](const OdeState<N>& a, const OdeState<N>& b, const OdeState<N>& e) {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
            const double q = e[i] / sc;
            s += q * q;
        }
        return std::sqrt(s / N);
    };

    double h = opt.h_init;
    if (h <= 0.0) {
        // Hairer's starting-step heuristic
        const double d0 = norm(y, y, y), dd1 = norm(y, y, k1);
        double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
        h0 = std::min(h0, t1 - t0);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h0 * k1[i];
        const OdeState<N> f1 = f(t0 + h0, tmp);
        OdeState<N> df;
        for (std::size_t i = 0; i < N; ++i) df[i] = (f1[i] - k1[i]) / h0;
        const double d2 = norm(y, y, df);
        const double m = std::max(dd1, d2);
        const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
        h = std::min(100 * h0, h1);
    }

    double t = t0;
    std::size_t count = 0;
    while (t < t1) {
        if (++count > opt.max_steps) throw NumericalError("ODE step budget exhausted at t = " + std::to_string(t));
        const double hmin = opt.h_min * std::max(1.0, std::abs(t));
        if (h < hmin) {
            std::ostringstream os;
            os << "ODE step size fell below the floor " << hmin << " at t = " << t << " (y0 = " << y[0] << ")";
            throw NumericalError(os.str());
        }
        bool last = false;
        if (t + h >= t1) {
            h = t1 - t;
            last = true;
        }
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        k2 = f(t + c2 * h, tmp);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = f(t + c3 * h, tmp);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = f(t + c4 * h, tmp);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = f(t + c5 * h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        k6 = f(t + h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        k7 = f(t + h, ynew);
        for (std::size_t i = 0; i < N; ++i)
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        double en = norm(y, ynew, err);
        bool finite = std::isfinite(en);
        for (std::size_t i = 0; i < N && finite; ++i) finite = std::isfinite(ynew[i]);
        if (!finite) {
            h *= 0.25;
            ++sol.rejected;
            continue;
        }
        if (en <= 1.0) {
            OdeStep<N> st;
            st.t0 = t;
            st.t1 = last ? t1 : t + h;
            for (std::size_t i = 0; i < N; ++i) {
                const double ydiff = ynew[i] - y[i];
                const double bspl = h * k1[i] - ydiff;
                st.rc[0][i] = y[i];
                st.rc[1][i] = ydiff;
                st.rc[2][i] = bspl;
                st.rc[3][i] = ydiff - h * k7[i] - bspl;
                st.rc[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            }
            sol.steps.push_back(st);
            t = st.t1;
            y = ynew;
            k1 = k7;
            if (stop(t, y)) {
                sol.stopped = true;
                break;
            }
            if (last) break;
            const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            h *= fac;
        } else {
            ++sol.rejected;
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
        }
    }
    sol.t_end = t;
    sol.y_end = y;
    return sol;
}

template <std::size_t N, class F>
OdeSolution<N> dopri5(const F& f, double t0, OdeState<N> y0, double t1, const OdeOptions& opt = {}) {
    return dopri5<N>(f, t0, y0, t1, opt, [](double, const OdeState<N>&) { return false; });
}

} // namespace ends
