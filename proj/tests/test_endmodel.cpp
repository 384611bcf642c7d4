#include "ends/endmodel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace ends;

namespace {

constexpr double kPi = std::numbers::pi;
const char* const kPerturbed = "exp(-r + 0.3*sin(theta)*exp(-r))";

template <class F>
double simpson(const F& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3;
}

template <class F>
double trapezoid_2pi(const F& f, int n) {
    double s = 0;
    for (int j = 0; j < n; ++j) s += f(2 * kPi * j / n);
    return s * 2 * kPi / n;
}

// smooth bump supported in (a, b)
double bump(double r, double a, double b) {
    if (r <= a || r >= b) return 0.0;
    const double x = (2 * r - a - b) / (b - a);
    return std::exp(-1.0 / (1 - x * x));
}

double bump_prime(double r, double a, double b) {
    if (r <= a || r >= b) return 0.0;
    const double x = (2 * r - a - b) / (b - a);
    const double q = 1 - x * x;
    return std::exp(-1.0 / q) * (-2 * x / (q * q)) * 2 / (b - a);
}

TestFunction radial_bump(double a, double b) {
    TestFunction f;
    f.f = [=](double r, double) { return bump(r, a, b); };
    f.f_r = [=](double r, double) { return bump_prime(r, a, b); };
    f.f_theta = [](double, double) { return 0.0; };
    f.r_lo = a;
    f.r_hi = b;
    return f;
}

} // namespace

TEST(End2D, ValidatesGridPositivityAndPeriodicity) {
    EXPECT_THROW(End2D::parse("exp(-r)", 10, 8, 64), PreconditionError);
    EXPECT_THROW(End2D::parse("exp(-r)", 10, 64, 15), PreconditionError);
    EXPECT_THROW(End2D::parse("exp(-r)", 0, 64, 64), PreconditionError);
    EXPECT_THROW(End2D::parse("1 - r", 10, 64, 64), PositivityError);
    EXPECT_THROW(End2D::parse("2 + sin(theta/2)", 10, 64, 64), PreconditionError);
    EXPECT_NO_THROW(End2D::parse("2 + sin(3*theta)", 10, 64, 64));
}

TEST(ReduceProfile, ThetaIndependent) {
    const auto p = reduce_profile(End2D::parse("exp(-r)", 10));
    EXPECT_NEAR(std::exp(p.log_value(0)), 2 * kPi, 1e-12);
    EXPECT_NEAR(std::exp(p.log_value(2.5)), 2 * kPi * std::exp(-2.5), 1e-12);
}

TEST(ReduceProfile, SineIntegratesToZero) {
    const auto end = End2D::parse("exp(-r)*(1 + 0.5*sin(theta))", 10);
    const auto p = reduce_profile(end);
    for (int i = 0; i <= end.n_r(); i += 16) {
        const double r = end.radius(i);
        EXPECT_NEAR(std::exp(p.log_value(r)) / (2 * kPi * std::exp(-r)), 1.0, 1e-13) << r;
    }
}

TEST(ReduceProfile, MatchesRefinedTrapezoidOracle) {
    const auto p = reduce_profile(End2D::parse(kPerturbed, 10));
    const double oracle = trapezoid_2pi([](double th) { return std::exp(0.3 * std::sin(th)); }, 2048);
    EXPECT_NEAR(std::exp(p.log_value(0)), oracle, 1e-12 * oracle);
    // I_0(0.3) series: 2 pi sum (0.15)^(2k) / (k!)^2
    double series = 0, term = 1;
    for (int k = 0; k < 12; ++k) {
        series += term;
        term *= 0.0225 / ((k + 1.0) * (k + 1.0));
    }
    EXPECT_NEAR(oracle, 2 * kPi * series, 1e-13);
}

TEST(CurvatureDeviation, WarpedProductsVanish) {
    for (const char* text : {"exp(-r)*(2 + cos(theta))", "(1+r)^2*exp(sin(theta))", "exp(r^2)*(1.5 + sin(2*theta))"}) {
        const auto rep = curvature_deviation(End2D::parse(text, 3));
        EXPECT_LE(rep.c_estimate, 1e-10) << text;
        EXPECT_TRUE(rep.refinement_ok) << text;
    }
    const auto rep = curvature_deviation(End2D::parse("exp(-r)*(1 + 0.5*sin(theta))", 10));
    EXPECT_LE(rep.c_estimate, 1e-10);
    for (const auto& row : rep.h)
        for (double h : row) EXPECT_NEAR(h, -1.0, 1e-12);
}

TEST(CurvatureDeviation, MatchesRefinedOracle) {
    const auto rep = curvature_deviation(End2D::parse(kPerturbed, 10), 1.0);
    // h = -1 - 0.3 sin(theta) e^{-r}; h_bar from a 4096-point trapezoid, max over the coarse grid
    double oracle = 0;
    for (int i = 0; i <= 256; ++i) {
        const double r = 10.0 * i / 256, a = 0.3 * std::exp(-r);
        const double num = trapezoid_2pi([&](double th) { return (-1 - a * std::sin(th)) * std::exp(a * std::sin(th)); }, 4096);
        const double den = trapezoid_2pi([&](double th) { return std::exp(a * std::sin(th)); }, 4096);
        for (int j = 0; j < 64; ++j) {
            const double th = 2 * kPi * j / 64;
            oracle = std::max(oracle, std::abs(-1 - a * std::sin(th) - num / den));
        }
    }
    EXPECT_NEAR(rep.c_estimate, oracle, 1e-12);
    EXPECT_GT(rep.c_estimate, 0.29);
    EXPECT_LT(rep.c_estimate, 1.0);
    EXPECT_TRUE(rep.satisfied);
    EXPECT_TRUE(rep.refinement_ok);
    EXPECT_TRUE(rep.tail_unverified);
    EXPECT_FALSE(curvature_deviation(End2D::parse(kPerturbed, 10), 0.1).satisfied);
}

TEST(EndModelProperty, HBarIsLogDerivativeOfReducedProfile) {
    for (const char* text : {kPerturbed, "exp(r^2/4 + 0.5*cos(theta)*r)", "(1+r)*(2+sin(theta+r))"}) {
        const auto end = End2D::parse(text, 4);
        const auto rep = curvature_deviation(end);
        const auto p = reduce_profile(end);
        for (std::size_t i = 0; i < rep.r.size(); ++i) EXPECT_NEAR(rep.h_bar[i], p.log_derivative(rep.r[i]), 1e-6) << text << " r=" << rep.r[i];
        for (std::size_t i = 0; i < rep.r.size(); ++i) {
            CompensatedSum num;
            for (std::size_t j = 0; j < rep.h[i].size(); ++j) num.add(rep.h[i][j] * end.omega()(rep.r[i], end.theta(static_cast<int>(j))));
            const double weighted = num.value() * 2 * kPi / end.n_theta() / std::exp(p.log_value(rep.r[i]));
            EXPECT_NEAR(rep.h_bar[i], weighted, 1e-10 * (1 + std::abs(weighted)));
        }
    }
}

TEST(EndModelProperty, ReductionCommutesWithPerturbation) {
    for (double c : {0.25, 1.0, 3.0}) {
        const std::string text = std::string(kPerturbed) + "*exp(" + std::to_string(c) + "*r)";
        const auto end = End2D::parse(kPerturbed, 10);
        const auto direct = reduce_profile(End2D::parse(text, 10));
        const auto perturbed = perturb_exponential(reduce_profile(end), c);
        for (int i = 0; i <= end.n_r(); ++i) {
            const double r = end.radius(i);
            EXPECT_NEAR(std::exp(direct.log_value(r) - perturbed.log_value(r)), 1.0, 1e-10) << "c=" << c << " r=" << r;
        }
    }
}

TEST(AverageFunction, ThetaIndependentIsAbsoluteValue) {
    const auto end = End2D::parse(kPerturbed, 10);
    const auto f = radial_bump(2, 7);
    TestFunction neg = f;
    neg.f = [](double r, double) { return -bump(r, 2, 7); };
    const auto avg = average_function(end, f);
    const auto avg_neg = average_function(end, neg);
    for (int i = 0; i <= end.n_r(); ++i) {
        EXPECT_NEAR(avg[static_cast<std::size_t>(i)], bump(end.radius(i), 2, 7), 1e-10);
        EXPECT_EQ(avg[static_cast<std::size_t>(i)], avg_neg[static_cast<std::size_t>(i)]);
    }
}

TEST(AverageFunction, SineModeGivesInverseRootTwo) {
    const auto end = End2D::parse("exp(-r)", 10);
    TestFunction f = radial_bump(1, 9);
    f.f = [](double r, double th) { return std::sin(th) * bump(r, 1, 9); };
    const auto avg = average_function(end, f);
    for (int i = 0; i <= end.n_r(); ++i) {
        const double r = end.radius(i);
        const double oracle = std::sqrt(trapezoid_2pi([&](double th) { return std::pow(std::sin(th) * bump(r, 1, 9), 2); }, 1024) / (2 * kPi));
        EXPECT_NEAR(avg[static_cast<std::size_t>(i)], oracle, 1e-12);
        EXPECT_NEAR(avg[static_cast<std::size_t>(i)], bump(r, 1, 9) / std::sqrt(2.0), 1e-12);
    }
}

TEST(AverageFunction, ZeroAndSupportErrors) {
    const auto end = End2D::parse(kPerturbed, 10);
    for (double v : average_function(end, parse_expression("0", true))) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(average_function(end, parse_expression("r", true)), DomainError);
    EXPECT_THROW(average_function(end, radial_bump(5, 12)), DomainError);
    EXPECT_NO_THROW(average_function(end, parse_expression("sin(pi*r/10)^2*cos(theta)", true)));
}

TEST(Coercivity, WarpedBumpIsHalfDerivativeEnergy) {
    const auto end = End2D::parse("exp(-r)", 10);
    const auto res = coercivity_check(end, radial_bump(1, 6), 0.0);
    const double oracle = 2 * kPi * simpson([](double r) { return std::pow(bump_prime(r, 1, 6), 2) * std::exp(-r); }, 1, 6, 20000);
    EXPECT_NEAR(res.grad_energy, oracle, 1e-9 * oracle);
    EXPECT_NEAR(res.avg_energy, oracle, 1e-9 * oracle);
    EXPECT_NEAR(res.residual, 0.5 * oracle, 1e-9 * oracle);
    EXPECT_GT(res.residual, 0);
}

TEST(Coercivity, ZeroFunctionAndErrors) {
    const auto end = End2D::parse(kPerturbed, 10);
    const auto res = coercivity_check(end, parse_expression("0", true), 0.5);
    EXPECT_EQ(res.residual, 0.0);
    EXPECT_THROW(coercivity_check(end, parse_expression("r", true), 0.5), DomainError);
    EXPECT_THROW(coercivity_check(end, radial_bump(1, 6), -1.0), PreconditionError);
}

TEST(Coercivity, AngularModeUsesMetricCoefficient) {
    // omega = 2: |grad f|^2 = f_r^2 + f_theta^2 / 4 with f = bump(r) cos(theta)
    const auto end = End2D::parse("2", 10);
    TestFunction f = radial_bump(2, 8);
    f.f = [](double r, double th) { return bump(r, 2, 8) * std::cos(th); };
    f.f_r = [](double r, double th) { return bump_prime(r, 2, 8) * std::cos(th); };
    f.f_theta = [](double r, double th) { return -bump(r, 2, 8) * std::sin(th); };
    const auto res = coercivity_check(end, f, 0.0);
    const double radial = simpson([](double r) { return std::pow(bump_prime(r, 2, 8), 2); }, 2, 8, 20000);
    const double mass = simpson([](double r) { return std::pow(bump(r, 2, 8), 2); }, 2, 8, 20000);
    EXPECT_NEAR(res.grad_energy, kPi * (2 * radial + mass / 2), 1e-9);
    EXPECT_NEAR(res.mass, 2 * kPi * mass, 1e-9);
}

TEST(CoercivityProperty, RandomSuiteOnPerturbedEnd) {
    const auto end = End2D::parse(kPerturbed, 10);
    const double c = curvature_deviation(end).c_estimate;
    const auto fs = random_test_functions(end, 100, 20240611);
    ASSERT_EQ(fs.size(), 100u);
    double worst = kInf;
    for (const auto& f : fs) {
        const auto res = coercivity_check(end, f, c);
        EXPECT_GE(res.residual, -1e-9) << f.description;
        worst = std::min(worst, res.residual);
    }
    EXPECT_TRUE(std::isfinite(worst));
}

TEST(CoercivityProperty, RandomFunctionsAreSeededAndSupported) {
    const auto end = End2D::parse(kPerturbed, 10);
    const auto a = random_test_functions(end, 20, 7), b = random_test_functions(end, 20, 7);
    for (std::size_t n = 0; n < a.size(); ++n) {
        EXPECT_GT(a[n].r_lo, 0);
        EXPECT_LT(a[n].r_hi, 10);
        EXPECT_EQ(a[n].f(3.3, 1.1), b[n].f(3.3, 1.1));
        // derivatives agree with central differences
        const double r = 0.5 * (a[n].r_lo + a[n].r_hi), th = 0.7, e = 1e-6;
        EXPECT_NEAR(a[n].f_r(r, th), (a[n].f(r + e, th) - a[n].f(r - e, th)) / (2 * e), 1e-6);
        EXPECT_NEAR(a[n].f_theta(r, th), (a[n].f(r, th + e) - a[n].f(r, th - e)) / (2 * e), 1e-6);
    }
}
