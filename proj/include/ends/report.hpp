#pragma once

// End-wise analysis pipeline, consistency flags recomputed from the stored traces, and
// the JSON / CSV renderings of a run.

#include "ends/config.hpp"
#include "ends/criteria.hpp"
#include "ends/endmodel.hpp"
#include "ends/parallel.hpp"
#include "ends/spectrum.hpp"
#include "ends/stochastic.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ends {

inline constexpr const char* kVersion = "1.0.0";

struct AnalysisOptions {
    CriterionOptions criteria{};
    /// t values for eigenvalue curves, bounds and Maz'ja estimates
    std::vector<double> curve_grid = {1, 2, 4, 8};
    std::uint64_t seed = 42;
    std::size_t mc_paths = 1000;
    double mc_T = 10.0;
    double mc_r_max = 50.0;
    bool classify = true;
    bool spectrum = true;
    bool stochastic = true;
};

inline AnalysisOptions analysis_options(const RunConfig& cfg) {
    AnalysisOptions o;
    if (cfg.t_grid) {
        o.criteria.t_grid = *cfg.t_grid;
        o.curve_grid = *cfg.t_grid;
    }
    o.criteria.eps_disc = cfg.tol_disc;
    o.criteria.eps_ess = cfg.tol_ess;
    o.seed = cfg.seed;
    o.mc_paths = cfg.mc_paths;
    o.mc_T = cfg.mc_T;
    o.mc_r_max = cfg.mc_r_max;
    return o;
}

struct MazjaPoint {
    double t;
    double estimate;
    TailValue B; ///< infinite-case criterion value at t
};

struct EndReport {
    std::string label;
    std::string profile;
    VolumeClass volume = VolumeClass::indeterminate;
    std::optional<CriterionTrace> theorem;
    std::optional<CriterionTrace> corollary;
    std::optional<LogDerivativeTrace> fast_path;
    std::optional<bool> essential_spectrum;
    std::vector<SpectralEstimate> curve;
    std::vector<VariationalProbe> probes;
    std::optional<SpectralEstimate> fixed_interval;
    std::vector<MazjaPoint> mazja;
    std::optional<CompletenessVerdict> completeness;
    std::optional<MonteCarloResult> monte_carlo;
    std::optional<CurvatureReport> curvature;
    std::optional<SuperharmonicReport> superharmonic;
    std::vector<std::string> notes;

    Verdict verdict() const { return theorem ? theorem->verdict : Verdict::inconclusive; }
};

struct ConsistencyFlags {
    std::optional<bool> theorem_corollary;
    std::optional<bool> sandwich;
    /// not (not_discrete and stochastically incomplete)
    std::optional<bool> discreteness_completeness;
    std::optional<bool> mazja_identity;
    std::optional<bool> ode_feller;

    bool all_pass() const {
        for (const auto& f : {theorem_corollary, sandwich, discreteness_completeness, mazja_identity, ode_feller})
            if (f && !*f) return false;
        return true;
    }
};

/// Recomputed from the traces in the report each time.
inline ConsistencyFlags consistency(const EndReport& e) {
    ConsistencyFlags f;
    if (e.theorem && e.corollary) f.theorem_corollary = e.theorem->verdict == e.corollary->verdict;
    if (!e.curve.empty()) {
        bool ok = true;
        for (const auto& s : e.curve) {
            const double est = s.best();
            if (std::isfinite(s.lower_bound) && !(s.lower_bound <= 1.05 * est)) ok = false;
            if (std::isfinite(s.upper_bound) && !(est <= 1.05 * s.upper_bound)) ok = false;
        }
        f.sandwich = ok;
    }
    if (e.theorem && e.completeness)
        f.discreteness_completeness =
            !(e.theorem->verdict == Verdict::not_discrete && e.completeness->verdict == Completeness::incomplete);
    if (!e.mazja.empty()) {
        bool ok = true;
        for (const auto& m : e.mazja)
            if (m.B.is_convergent() && !(std::abs(m.estimate * m.B.value() - 1) <= 1e-6)) ok = false;
        f.mazja_identity = ok;
    }
    if (e.completeness && e.completeness->u_computed && !e.completeness->feller.is_indeterminate())
        f.ode_feller = e.completeness->u.diverging == e.completeness->feller.is_divergent();
    return f;
}

/// Runs the requested stages on one end.
inline EndReport analyze_end(const EndConfig& cfg, const AnalysisOptions& opt) {
    if (!cfg.profile) throw PreconditionError("end '" + cfg.label + "' has no profile");
    const RadialProfile& p = *cfg.profile;
    EndReport r;
    r.label = cfg.label;
    r.profile = p.label();
    r.volume = volume_class(p, opt.criteria.tail);
    if (opt.classify) {
        r.theorem = classify_discreteness(p, opt.criteria);
        r.corollary = classify_simplified(p, opt.criteria);
        if (p.is_symbolic()) {
            try {
                r.fast_path = log_derivative_criterion(p);
            } catch (const CaseError& err) {
                r.notes.push_back(std::string("log-derivative criterion not applicable: ") + err.what());
            }
        }
        r.essential_spectrum = essential_spectrum_test(p, opt.criteria.tail);
    }
    if (opt.spectrum) {
        if (cfg.spectrum_interval) {
            const auto [a, b] = *cfg.spectrum_interval;
            r.fixed_interval = dirichlet_lambda0(p, a, b, static_cast<std::size_t>(cfg.spectrum_n));
        } else if (p.r_max() == kInf) {
            CurveOptions co;
            co.force_dirichlet = true;
            co.tail = opt.criteria.tail;
            r.curve = eigenvalue_curve(p, opt.curve_grid, co);
            for (auto& s : r.curve) {
                annotate_bounds(p, s, opt.criteria);
                r.probes.push_back(variational_upper_bound(p, s.t, s.R));
            }
        } else {
            r.notes.push_back("eigenvalue curve skipped: profile has a finite range");
        }
        if (r.volume == VolumeClass::infinite_volume) {
            for (double t : opt.curve_grid) {
                const auto sup = sup_criterion(p, t, CriterionCase::infinite_case, opt.criteria);
                r.mazja.push_back({t, mazja_estimate(p, t, opt.criteria), sup.B});
            }
        }
    }
    if (opt.stochastic) {
        if (p.r_max() == kInf) {
            r.completeness = completeness_verdict(p, opt.criteria.tail);
            r.monte_carlo = mc_explosion(p, opt.mc_paths, opt.mc_T, opt.mc_r_max, opt.seed);
        } else {
            r.notes.push_back("stochastic analysis skipped: profile has a finite range");
        }
    }
    if (cfg.end2d) {
        const double bound = cfg.c.value_or(kInf);
        r.curvature = curvature_deviation(*cfg.end2d, bound);
        if (opt.stochastic && cfg.c && r.curvature->satisfied) {
            const auto u = solve_completeness_ode(p, *cfg.c, cfg.end2d->r_model());
            r.superharmonic = superharmonic_check(*cfg.end2d, u, *cfg.c);
        }
    }
    return r;
}

struct ManifoldReport {
    std::string config_digest;
    std::vector<EndReport> ends;
    Verdict overall = Verdict::inconclusive;
};

/// not_discrete if any end is; otherwise inconclusive if any end is; otherwise discrete.
inline Verdict overall_verdict(const std::vector<EndReport>& ends) {
    bool unknown = ends.empty();
    for (const auto& e : ends) {
        if (e.verdict() == Verdict::not_discrete) return Verdict::not_discrete;
        if (e.verdict() == Verdict::inconclusive) unknown = true;
    }
    return unknown ? Verdict::inconclusive : Verdict::discrete;
}

/// Ends run in parallel; the report keeps config order.
inline ManifoldReport analyze(const RunConfig& cfg, const AnalysisOptions& opt) {
    ManifoldReport m;
    m.config_digest = cfg.digest;
    m.ends = parallel_map<EndReport>(cfg.ends.size(), [&](std::size_t i) { return analyze_end(cfg.ends[i], opt); });
    m.overall = overall_verdict(m.ends);
    return m;
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

/// Finite numbers as JSON numbers (shortest round-trip); non-finite ones as strings.
inline json num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline json to_json(const TailValue& v) {
    const char* kind = v.is_convergent() ? "convergent" : v.is_divergent() ? "divergent" : "indeterminate";
    return {{"kind", kind}, {"log_value", num(v.log_value)}, {"windows", v.windows.size()}};
}

inline json to_json(const CriterionTrace& t) {
    json j;
    j["verdict"] = to_string(t.verdict);
    j["case"] = t.criterion_case ? json(to_string(*t.criterion_case)) : json(nullptr);
    j["rationale"] = t.rationale;
    j["essential_spectrum"] = t.essential_spectrum;
    j["precondition_violation"] = t.precondition_violation;
    j["volume_tail"] = to_json(t.volume_tail);
    j["inverse_tail"] = to_json(t.inverse_tail);
    json rows = json::array();
    for (std::size_t i = 0; i < t.B_values.size(); ++i) {
        rows.push_back({{"t", num(t.t_grid[i])},
                        {"B", to_json(t.B_values[i])},
                        {"s_star", i < t.s_star.size() ? num(t.s_star[i]) : json(nullptr)},
                        {"sup_at_infinity", i < t.sup_at_infinity.size() ? json(bool(t.sup_at_infinity[i])) : json(nullptr)}});
    }
    j["trace"] = rows;
    return j;
}

inline json to_json(const LogDerivativeTrace& t) {
    json rows = json::array();
    for (std::size_t i = 0; i < t.s_grid.size(); ++i) rows.push_back({{"s", num(t.s_grid[i])}, {"L", num(t.L_values[i])}});
    return {{"verdict", to_string(t.verdict)},
            {"case", t.criterion_case ? json(to_string(*t.criterion_case)) : json(nullptr)},
            {"rationale", t.rationale},
            {"trace", rows}};
}

inline json to_json(const SpectralEstimate& s) {
    return {{"t", num(s.t)},
            {"R", num(s.R)},
            {"N", s.N},
            {"lambda", num(s.lambda)},
            {"richardson", num(s.richardson)},
            {"left", to_string(s.left)},
            {"right", to_string(s.right)},
            {"refinement_warning", s.refinement_warning},
            {"truncation_converged", s.truncation_converged},
            {"lower_bound", num(s.lower_bound)},
            {"upper_bound", num(s.upper_bound)}};
}

inline json to_json(const CompletenessVerdict& v) {
    json inc = json::array();
    for (double d : v.u.increments) inc.push_back(num(d));
    return {{"verdict", to_string(v.verdict)},
            {"feller", to_json(v.feller)},
            {"agree", v.agree},
            {"diagnostic", v.diagnostic},
            {"u_trace",
             {{"computed", v.u_computed},
              {"r_end", num(v.u.r_end)},
              {"u_end", num(v.u.solution.y_end[0])},
              {"clipped", v.u.clipped},
              {"diverging", v.u.diverging},
              {"settling", v.u.settling},
              {"window_increments", inc},
              {"integral_form_residual", num(v.u.integral_residual)}}}};
}

inline json flag(const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); }

inline json to_json(const EndReport& e) {
    json j;
    j["label"] = e.label;
    j["profile"] = e.profile;
    j["volume_class"] = to_string(e.volume);
    j["verdict"] = to_string(e.verdict());
    if (e.theorem) j["criterion"] = to_json(*e.theorem);
    if (e.corollary) j["simplified_criterion"] = to_json(*e.corollary);
    if (e.fast_path) j["log_derivative_criterion"] = to_json(*e.fast_path);
    if (e.essential_spectrum) j["essential_spectrum_test"] = *e.essential_spectrum;
    if (!e.curve.empty()) {
        json c = json::array(), b = json::array();
        for (const auto& s : e.curve) c.push_back(to_json(s));
        for (const auto& pr : e.probes) b.push_back({{"s", num(pr.s)}, {"s0", num(pr.s0)}, {"bound", num(pr.bound)}});
        j["eigenvalue_curve"] = c;
        j["variational_bounds"] = b;
    }
    if (e.fixed_interval) j["fixed_interval"] = to_json(*e.fixed_interval);
    if (!e.mazja.empty()) {
        json m = json::array();
        for (const auto& x : e.mazja) m.push_back({{"t", num(x.t)}, {"estimate", num(x.estimate)}, {"B", to_json(x.B)}});
        j["mazja"] = m;
    }
    if (e.completeness) j["completeness"] = to_json(*e.completeness);
    if (e.monte_carlo)
        j["monte_carlo"] = {{"paths", e.monte_carlo->paths},
                            {"exploded", e.monte_carlo->exploded},
                            {"fraction", num(e.monte_carlo->fraction)},
                            {"seed", e.monte_carlo->seed}};
    if (e.curvature)
        j["curvature"] = {{"c_estimate", num(e.curvature->c_estimate)},
                          {"c_refined", num(e.curvature->c_refined)},
                          {"refinement_ok", e.curvature->refinement_ok},
                          {"satisfied", e.curvature->satisfied},
                          {"tail_unverified", e.curvature->tail_unverified}};
    if (e.superharmonic) j["superharmonic"] = {{"min_residual", num(e.superharmonic->min_residual)}, {"holds", e.superharmonic->holds}};
    const ConsistencyFlags f = consistency(e);
    j["consistency"] = {{"theorem_corollary", flag(f.theorem_corollary)},
                        {"sandwich", flag(f.sandwich)},
                        {"discreteness_completeness", flag(f.discreteness_completeness)},
                        {"mazja_identity", flag(f.mazja_identity)},
                        {"ode_feller", flag(f.ode_feller)}};
    j["notes"] = e.notes;
    return j;
}

inline json to_json(const ManifoldReport& m) {
    json ends = json::array();
    for (const auto& e : m.ends) ends.push_back(to_json(e));
    return {{"version", kVersion}, {"config_digest", m.config_digest}, {"ends", ends}, {"overall", to_string(m.overall)}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_curve_csv(std::ostream& os, const EndReport& e) {
    os << "t,R,N,lambda,richardson,lower_bound,upper_bound\n";
    auto row = [&](const SpectralEstimate& s) {
        os << fmt17(s.t) << ',' << fmt17(s.R) << ',' << s.N << ',' << fmt17(s.lambda) << ',' << fmt17(s.richardson) << ','
           << fmt17(s.lower_bound) << ',' << fmt17(s.upper_bound) << '\n';
    };
    if (e.fixed_interval) row(*e.fixed_interval);
    for (const auto& s : e.curve) row(s);
}

inline void write_criterion_csv(std::ostream& os, const EndReport& e) {
    os << "t,log_B,B_kind,s_star\n";
    if (!e.theorem) return;
    const auto& t = *e.theorem;
    for (std::size_t i = 0; i < t.B_values.size(); ++i) {
        const auto& b = t.B_values[i];
        os << fmt17(t.t_grid[i]) << ',' << fmt17(b.log_value) << ','
           << (b.is_convergent() ? "convergent" : b.is_divergent() ? "divergent" : "indeterminate") << ','
           << fmt17(i < t.s_star.size() ? t.s_star[i] : kNaN) << '\n';
    }
}

inline void write_u_trace_csv(std::ostream& os, const EndReport& e) {
    os << "r,u,du\n";
    if (!e.completeness || !e.completeness->u_computed) return;
    const auto& u = e.completeness->u;
    for (std::size_t i = 0; i < u.r.size(); ++i) os << fmt17(u.r[i]) << ',' << fmt17(u.u[i]) << ',' << fmt17(u.du[i]) << '\n';
}

} // namespace ends
