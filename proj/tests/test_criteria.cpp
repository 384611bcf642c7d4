#include "ends/criteria.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>

using namespace ends;

namespace {

const char* const kCorpus[] = {"1", "r+1", "exp(-r)", "exp(r)", "exp(-r^2)", "exp(r^2)", "exp(r^3)", "(1+r)^(-2)"};

template <class F>
double simpson(const F& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3;
}

} // namespace

TEST(MassProduct, ClosedForms) {
    const auto a = mass_product(parse_profile("exp(-r)"), 0, 2, CriterionCase::finite_case);
    ASSERT_TRUE(a.is_convergent());
    EXPECT_NEAR(a.value(), 1 - std::exp(-2.0), 1e-10);
    const auto b = mass_product(parse_profile("exp(r)"), 0, 2, CriterionCase::infinite_case);
    ASSERT_TRUE(b.is_convergent());
    EXPECT_NEAR(b.value(), 0.8646647167633873, 1e-10);
    EXPECT_TRUE(mass_product(parse_profile("1"), 1, 3, CriterionCase::finite_case).is_divergent());
    EXPECT_THROW(mass_product(parse_profile("1"), 3, 3, CriterionCase::finite_case), PreconditionError);
}

TEST(SupCriterion, ExponentialSupAtInfinity) {
    const auto r = sup_criterion(parse_profile("exp(-r)"), 0, CriterionCase::finite_case);
    ASSERT_TRUE(r.B.is_convergent());
    EXPECT_NEAR(r.B.value(), 1.0, 1e-9);
    EXPECT_TRUE(r.sup_at_infinity);
    const auto q = sup_criterion(parse_profile("exp(r)"), 5, CriterionCase::infinite_case);
    ASSERT_TRUE(q.B.is_convergent());
    EXPECT_NEAR(q.B.value(), 1.0, 1e-9);
    EXPECT_TRUE(q.sup_at_infinity);
}

TEST(SupCriterion, GaussianMatchesBruteForceScan) {
    // A(3, s) = int_3^s e^{r^2} dr * (sqrt(pi)/2) erfc(s), scanned on 10^4 points
    const double t = 3.0;
    double best = 0.0, arg = 0.0;
    for (int i = 1; i <= 10000; ++i) {
        const double s = t + 3.0 * i / 10000;
        const double inner = simpson([s](double r) { return std::exp(r * r - s * s); }, t, s, 2000);
        const double a = inner * std::exp(s * s) * std::sqrt(std::numbers::pi) / 2 * std::erfc(s);
        if (a > best) best = a, arg = s;
    }
    const auto r = sup_criterion(parse_profile("exp(-r^2)"), t, CriterionCase::finite_case);
    ASSERT_TRUE(r.B.is_convergent());
    EXPECT_FALSE(r.sup_at_infinity);
    EXPECT_LE(r.B.value(), 0.06);
    EXPECT_GE(r.B.value(), best * (1 - 1e-8));
    EXPECT_NEAR(r.B.value(), best, 1e-6 * best);
    EXPECT_NEAR(r.s_star, arg, 1e-2);
}

TEST(SupCriterion, PowerDecayDiverges) {
    const auto r = sup_criterion(parse_profile("(1+r)^(-2)"), 1, CriterionCase::finite_case);
    EXPECT_TRUE(r.B.is_divergent());
    EXPECT_TRUE(sup_criterion(parse_profile("1"), 1, CriterionCase::finite_case).B.is_divergent());
}

TEST(Simplified, ClosedForms) {
    const auto p = parse_profile("exp(-r)");
    EXPECT_NEAR(simplified_criterion(p, 1, CriterionCase::finite_case).value(), 1 - std::exp(-1.0), 1e-10);
    EXPECT_NEAR(simplified_criterion(p, 5, CriterionCase::finite_case).value(), 1 - std::exp(-5.0), 1e-10);
    EXPECT_NEAR(simplified_criterion(p, 1, CriterionCase::finite_case).value(), 0.6321, 1e-4);
    EXPECT_NEAR(simplified_criterion(p, 5, CriterionCase::finite_case).value(), 0.9933, 1e-4);
    EXPECT_TRUE(simplified_criterion(parse_profile("1"), 2, CriterionCase::finite_case).is_divergent());
    EXPECT_TRUE(simplified_criterion(parse_profile("1"), 2, CriterionCase::infinite_case).is_divergent());
}

TEST(Simplified, CubicExponentAgainstQuadrature) {
    const double tail = simpson([](double r) { return std::exp(-r * r * r); }, 2.0, 4.0, 200000);
    const double inner = simpson([](double r) { return std::exp(r * r * r); }, 0.0, 2.0, 200000);
    const auto v = simplified_criterion(parse_profile("exp(r^3)"), 2, CriterionCase::infinite_case);
    ASSERT_TRUE(v.is_convergent());
    EXPECT_NEAR(v.value(), tail * inner, 1e-8 * tail * inner);
    EXPECT_LT(v.value(), 0.1);
}

TEST(Classify, Corpus) {
    const auto start = std::chrono::steady_clock::now();
    const std::pair<const char*, Verdict> expected[] = {
        {"exp(-r^2)", Verdict::discrete},   {"exp(r^2)", Verdict::discrete},  {"exp(r^3)", Verdict::discrete},
        {"exp(-r)", Verdict::not_discrete}, {"exp(r)", Verdict::not_discrete}, {"1", Verdict::not_discrete},
        {"r+1", Verdict::not_discrete},     {"(1+r)^(-2)", Verdict::not_discrete}};
    for (auto [text, verdict] : expected) {
        const auto tr = classify_discreteness(parse_profile(text));
        EXPECT_EQ(tr.verdict, verdict) << text << ": " << tr.rationale;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(secs, 30.0);
}

TEST(Classify, EssentialSpectrumPath) {
    const auto tr = classify_discreteness(parse_profile("1"));
    EXPECT_TRUE(tr.essential_spectrum);
    EXPECT_NE(tr.rationale.find("essential_spectrum_test"), std::string::npos);
    EXPECT_EQ(essential_spectrum_test(parse_profile("1")), std::optional<bool>(true));
    EXPECT_EQ(essential_spectrum_test(parse_profile("r+1")), std::optional<bool>(true));
    EXPECT_EQ(essential_spectrum_test(parse_profile("exp(-r)")), std::optional<bool>(false));
}

TEST(Classify, SelectsCaseByVolume) {
    EXPECT_EQ(classify_discreteness(parse_profile("exp(-r^2)")).criterion_case, CriterionCase::finite_case);
    EXPECT_EQ(classify_discreteness(parse_profile("exp(r^2)")).criterion_case, CriterionCase::infinite_case);
}

TEST(LogDerivative, Examples) {
    const auto g = log_derivative_criterion(parse_profile("exp(-r^2)"));
    EXPECT_EQ(g.verdict, Verdict::discrete) << g.rationale;
    // Mills ratio: e^{-s^2} / ((sqrt(pi)/2) erfc(s))
    for (std::size_t i = 0; i < 2; ++i) {
        const double s = g.s_grid[i];
        const double mills = std::exp(-s * s) / (std::sqrt(std::numbers::pi) / 2 * std::erfc(s));
        EXPECT_NEAR(g.L_values[i], -mills, 1e-8 * mills);
    }
    EXPECT_NEAR(g.L_values.back(), -2 * 64.0, 0.1);
    const auto e = log_derivative_criterion(parse_profile("exp(-r)"));
    EXPECT_EQ(e.verdict, Verdict::not_discrete);
    for (double L : e.L_values) EXPECT_NEAR(L, -1.0, 1e-9);
    const auto x = log_derivative_criterion(parse_profile("exp(r)"));
    EXPECT_EQ(x.criterion_case, CriterionCase::infinite_case);
    EXPECT_EQ(x.verdict, Verdict::not_discrete);
    EXPECT_THROW(log_derivative_criterion(parse_profile("1")), CaseError);
}

TEST(LowerBound, Examples) {
    EXPECT_NEAR(lambda0_lower_bound(TailValue::convergent_log(std::log(0.0125)), 0.0), 10.0, 1e-12);
    EXPECT_EQ(lambda0_lower_bound(TailValue::convergent_log(std::log(0.0125)), std::sqrt(1 / (2 * 0.0125))), 0.0);
    EXPECT_EQ(lambda0_lower_bound(TailValue::divergent(), 0.0), 0.0);
    EXPECT_NEAR(lambda0_lower_bound(parse_profile("exp(-r)"), 0, 0), 0.125, 1e-9);
}

TEST(CriteriaProperty, Duality) {
    for (const char* text : kCorpus) {
        const auto p = parse_profile(text);
        for (double t : {1.0, 2.0, 4.0, 8.0}) {
            const auto a = sup_criterion(p, t, CriterionCase::infinite_case);
            const auto b = sup_criterion(reciprocal(p), t, CriterionCase::finite_case);
            ASSERT_EQ(a.B.kind, b.B.kind) << text;
            if (a.B.is_convergent()) {
                EXPECT_NEAR(a.B.log_value, b.B.log_value, 1e-8) << text;
            }
        }
    }
}

TEST(CriteriaProperty, MonotoneInT) {
    for (const char* text : kCorpus) {
        const auto tr = classify_discreteness(parse_profile(text));
        for (std::size_t k = 1; k < tr.B_values.size(); ++k) {
            if (!tr.B_values[k].is_convergent() || !tr.B_values[k - 1].is_convergent()) continue;
            EXPECT_LE(tr.B_values[k].log_value, tr.B_values[k - 1].log_value + 1e-6) << text << " k=" << k;
        }
    }
}

TEST(CriteriaProperty, TheoremAndCorollaryAgree) {
    for (const char* text : kCorpus) {
        const auto p = parse_profile(text);
        const auto full = classify_discreteness(p);
        const auto simple = classify_simplified(p);
        EXPECT_EQ(full.verdict, simple.verdict) << text << ": " << full.rationale << " / " << simple.rationale;
        if (essential_spectrum_test(p).value_or(false)) {
            EXPECT_EQ(full.verdict, Verdict::not_discrete);
        }
    }
}
