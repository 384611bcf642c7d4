// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "ends/criteria.hpp"
#include "ends/endmodel.hpp"
#include "ends/profile.hpp"
#include "ends/spectrum.hpp"
#include "ends/stochastic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace ends;

namespace {

const std::vector<std::string> kCorpus = {"1", "r+1", "exp(-r)", "exp(r)", "exp(-r^2)", "exp(r^2)", "exp(r^3)", "(1+r)^(-2)"};
const std::vector<double> kGrid = {1, 2, 4, 8};

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [" << what << "]";
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool relative_close(const TailValue& a, const TailValue& b, double tol) {
    if (a.kind != b.kind) return false;
    if (!a.is_convergent()) return true;
    if (a.log_value == b.log_value) return true;
    return std::abs(std::expm1(a.log_value - b.log_value)) <= tol;
}

Outcome classification() {
    Outcome o;
    const std::map<std::string, Verdict> oracle = {
        {"exp(-r^2)", Verdict::discrete},     {"exp(r^2)", Verdict::discrete},      {"exp(r^3)", Verdict::discrete},
        {"exp(-r)", Verdict::not_discrete},   {"exp(r)", Verdict::not_discrete},    {"1", Verdict::not_discrete},
        {"r+1", Verdict::not_discrete},       {"(1+r)^(-2)", Verdict::not_discrete}};
    const auto t0 = Clock::now();
    for (const auto& text : kCorpus) {
        const auto v = classify_discreteness(parse_profile(text)).verdict;
        o.require(v != Verdict::inconclusive, text + " inconclusive");
        o.require(v == oracle.at(text), text + " -> " + to_string(v));
    }
    const double s = seconds_since(t0);
    o.require(s < 30, "runtime");
    o.detail << " runtime " << s << " s";
    return o;
}

Outcome calibration() {
    Outcome o;
    const auto p = parse_profile("1");
    const double exact = std::numbers::pi * std::numbers::pi;
    const auto t0 = Clock::now();
    const double l1 = dirichlet_lambda0(p, 0, 1, 2000).lambda;
    const double l2 = dirichlet_lambda0(p, 0, 1, 4000).lambda;
    const double s = seconds_since(t0);
    const double rel = std::abs(l1 - exact) / exact;
    const double ratio = std::abs(l1 - exact) / std::abs(l2 - exact);
    o.require(rel <= 1e-3, "relative error");
    o.require(ratio >= 3.5 && ratio <= 4.5, "error ratio");
    o.require(s < 2, "runtime");
    o.detail << " lambda " << l1 << " rel " << rel << " ratio " << ratio << " runtime " << s << " s";
    return o;
}

Outcome cusp() {
    Outcome o;
    const auto t0 = Clock::now();
    const double l = dirichlet_lambda0(parse_profile("exp(-r)"), 0, 40, 8000).lambda;
    const double s = seconds_since(t0);
    o.require(std::abs(l - 0.25) <= 0.01, "lambda");
    o.require(s < 5, "runtime");
    o.detail << " lambda " << l << " runtime " << s << " s";
    return o;
}

Outcome sandwich() {
    Outcome o;
    CurveOptions co;
    co.force_dirichlet = true;
    int checked = 0;
    for (const auto& text : kCorpus) {
        const auto p = parse_profile(text);
        auto curve = eigenvalue_curve(p, kGrid, co);
        for (auto& e : curve) {
            annotate_bounds(p, e);
            const double est = e.best();
            const double lower = lambda0_lower_bound(p, e.t, 0.0);
            o.require(lower <= 1.05 * est, text + " lower at t=" + std::to_string(e.t));
            if (std::isfinite(e.upper_bound)) o.require(est <= 1.05 * e.upper_bound, text + " upper at t=" + std::to_string(e.t));
            ++checked;
        }
    }
    o.detail << " " << checked << " (profile, t) pairs";
    return o;
}

Outcome identities() {
    Outcome o;
    double worst_dual = 0, worst_mazja = 0;
    for (const auto& text : kCorpus) {
        const auto p = parse_profile(text);
        const bool infinite = volume_class(p) == VolumeClass::infinite_volume;
        for (double t : kGrid) {
            const auto a = sup_criterion(p, t, CriterionCase::infinite_case).B;
            const auto b = sup_criterion(reciprocal(p), t, CriterionCase::finite_case).B;
            o.require(relative_close(a, b, 1e-8), text + " duality at t=" + std::to_string(t));
            if (a.is_convergent() && b.is_convergent()) worst_dual = std::max(worst_dual, std::abs(std::expm1(a.log_value - b.log_value)));
            if (infinite && a.is_convergent()) {
                const double dev = std::abs(mazja_estimate(p, t) * a.value() - 1);
                o.require(dev <= 1e-6, text + " Maz'ja at t=" + std::to_string(t));
                worst_mazja = std::max(worst_mazja, dev);
            }
        }
    }
    o.detail << " worst duality " << worst_dual << " worst Maz'ja " << worst_mazja;
    return o;
}

Outcome equivalence() {
    Outcome o;
    for (const auto& text : kCorpus) {
        const auto p = parse_profile(text);
        const auto a = classify_discreteness(p).verdict, b = classify_simplified(p).verdict;
        o.require(a == b, text + " " + to_string(a) + " vs " + to_string(b));
    }
    return o;
}

std::map<std::string, CompletenessVerdict>& completeness_cache() {
    static std::map<std::string, CompletenessVerdict> cache;
    return cache;
}

const CompletenessVerdict& completeness_of(const std::string& text) {
    auto& cache = completeness_cache();
    auto it = cache.find(text);
    if (it == cache.end()) it = cache.emplace(text, completeness_verdict(parse_profile(text))).first;
    return it->second;
}

Outcome consistency() {
    Outcome o;
    for (const auto& text : kCorpus) {
        const auto d = classify_discreteness(parse_profile(text)).verdict;
        const auto c = completeness_of(text).verdict;
        o.require(!(d == Verdict::not_discrete && c == Completeness::incomplete), text + " not_discrete and incomplete");
        if (text == "exp(r^3)") o.require(d == Verdict::discrete && c == Completeness::incomplete, text);
        if (text == "exp(r)" || text == "1") o.require(d == Verdict::not_discrete && c == Completeness::complete, text);
    }
    return o;
}

Outcome ode() {
    Outcome o;
    for (const auto& text : kCorpus) {
        const auto& v = completeness_of(text);
        o.require(v.u_computed && v.u.diverging == v.feller.is_divergent(), text);
    }
    const auto sol = solve_completeness_ode(parse_profile("1"), 0.0, 2.0);
    const double u2 = sol.at(2.0)[0];
    o.require(std::abs(u2 - std::cosh(2.0)) <= 1e-7, "u(2)");
    o.detail << " u(2) - cosh(2) = " << u2 - std::cosh(2.0);
    return o;
}

Outcome monte_carlo() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto cubic = mc_explosion(parse_profile("exp(r^3)"), 1000, 10, 50, 42);
    const auto expo = mc_explosion(parse_profile("exp(r)"), 1000, 10, 50, 42);
    const auto flat = mc_explosion(parse_profile("1"), 1000, 10, 50, 42);
    const double s = seconds_since(t0);
    o.require(cubic.fraction >= 0.99, "exp(r^3)");
    o.require(expo.fraction <= 0.01, "exp(r)");
    o.require(flat.fraction <= 0.01, "1");
    o.require(s < 20, "runtime");
    o.detail << " fractions " << cubic.fraction << ", " << expo.fraction << ", " << flat.fraction << " runtime " << s << " s";
    return o;
}

Outcome coercivity() {
    Outcome o;
    const auto end = End2D::parse("exp(-r + 0.3*sin(theta)*exp(-r))", 10);
    const double c = curvature_deviation(end).c_estimate;
    double worst = kInf;
    for (const auto& f : random_test_functions(end, 100, 20240611)) {
        const double res = coercivity_check(end, f, c).residual;
        o.require(res >= -1e-9, f.description);
        worst = std::min(worst, res);
    }
    const double warped = curvature_deviation(End2D::parse("exp(-r)*(2 + cos(theta))", 10)).c_estimate;
    o.require(warped <= 1e-10, "warped-product deviation");
    o.detail << " worst residual " << worst << " warped deviation " << warped;
    return o;
}

Outcome perturbation() {
    Outcome o;
    const std::vector<std::pair<std::string, double>> probes = {{"1", 0.5}, {"exp(-r)", 1.0}, {"exp(-r^2)", 2.0}};
    for (const auto& [text, c] : probes) {
        const auto pc = perturbation_check(parse_profile(text), c, 1.0);
        o.require(pc.quotient <= pc.bound + 1e-6, text + " quotient");
        o.require(std::abs(pc.perturbed_norm / pc.norm - 1) <= 1e-10, text + " norm");
        o.detail << " " << text << ": " << pc.quotient << " <= " << pc.bound;
    }
    return o;
}

Outcome characteristic() {
    Outcome o;
    for (const std::string text : {"1", "r+1"}) {
        const auto seq = characteristic_sequence(parse_profile(text), 6);
        o.require(seq.terms.size() == 6, text + " length");
        for (const auto& term : seq.terms) {
            o.require(term.quotient <= seq.bound, text + " quotient k=" + std::to_string(term.k));
            o.require(std::abs(term.overlap_next) <= 1e-12, text + " overlap k=" + std::to_string(term.k));
        }
        o.detail << " " << text << " bound " << seq.bound;
    }
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"classification corpus", classification},
        {"eigensolver calibration", calibration},
        {"cusp limit", cusp},
        {"sandwich suite", sandwich},
        {"duality and Maz'ja identities", identities},
        {"criterion equivalence", equivalence},
        {"discreteness/completeness consistency", consistency},
        {"ODE corroboration", ode},
        {"Monte Carlo oracle", monte_carlo},
        {"coercivity property suite", coercivity},
        {"perturbation check", perturbation},
        {"characteristic sequence", characteristic},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " exception: " << e.what();
        }
        if (!o.pass) ++failed;
        std::printf("%s %2zu %s:%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed ? 1 : 0;
}
