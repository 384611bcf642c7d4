// ends: classify manifold ends by the discreteness of the Laplacian spectrum and
// cross-check the verdicts spectrally and stochastically.
//
// Exit codes: 0 decisive, 3 some end inconclusive (or a verify check failed), 1 error.

#include "ends/report.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ends;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInconclusive = 3;

struct Flags {
    std::string config;
    std::string out;
    std::string csv;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> t_grid;
    std::optional<double> tol_disc;
    std::optional<double> tol_ess;
    std::optional<double> tol_tail;
    bool quiet = false;
};

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> g;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = ends::detail::trim(item);
        if (t.empty()) continue;
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(t, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != t.size()) throw PreconditionError("--t-grid: '" + t + "' is not a number");
        g.push_back(v);
    }
    if (g.empty()) throw PreconditionError("--t-grid is empty");
    for (std::size_t i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1])) throw PreconditionError("--t-grid must increase strictly");
    if (g.front() < 0) throw PreconditionError("--t-grid values must be non-negative");
    return g;
}

RunConfig load(const Flags& f) {
    RunConfig cfg = f.config.empty() ? builtin_corpus() : load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.t_grid) cfg.t_grid = parse_grid(*f.t_grid);
    if (f.tol_disc) cfg.tol_disc = *f.tol_disc;
    if (f.tol_ess) cfg.tol_ess = *f.tol_ess;
    return cfg;
}

AnalysisOptions options(const Flags& f, const RunConfig& cfg) {
    AnalysisOptions o = analysis_options(cfg);
    if (f.tol_tail) o.criteria.tail.tol = *f.tol_tail;
    return o;
}

std::string safe_name(const std::string& label) {
    std::string s = label;
    for (char& ch : s)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
    return s;
}

template <class Writer>
void write_csv(const Flags& f, const std::string& stem, const EndReport& e, Writer w) {
    if (f.csv.empty()) return;
    fs::create_directories(f.csv);
    const fs::path path = fs::path(f.csv) / (stem + "_" + safe_name(e.label) + ".csv");
    std::ofstream os(path);
    if (!os) throw PreconditionError("cannot write " + path.string());
    w(os, e);
}

void write_report(const Flags& f, const ManifoldReport& m) {
    if (f.out.empty()) return;
    std::ofstream os(f.out);
    if (!os) throw PreconditionError("cannot write " + f.out);
    os << to_json(m).dump(2) << '\n';
}

bool any_inconclusive(const ManifoldReport& m) {
    for (const auto& e : m.ends)
        if (e.verdict() == Verdict::inconclusive) return true;
    return false;
}

std::string g6(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

int run_classify(const Flags& f) {
    const RunConfig cfg = load(f);
    AnalysisOptions o = options(f, cfg);
    o.spectrum = o.stochastic = false;
    const ManifoldReport m = analyze(cfg, o);
    for (const auto& e : m.ends) write_csv(f, "criterion", e, write_criterion_csv);
    write_report(f, m);
    if (!f.quiet) {
        for (const auto& e : m.ends) {
            std::cout << e.label << " [" << e.profile << "]: " << to_string(e.verdict()) << " (" << to_string(e.volume) << ")\n";
            if (e.theorem) std::cout << "  " << e.theorem->rationale << '\n';
        }
        std::cout << "overall: " << to_string(m.overall) << '\n';
    }
    return any_inconclusive(m) ? kExitInconclusive : kExitOk;
}

int run_spectrum(const Flags& f) {
    const RunConfig cfg = load(f);
    AnalysisOptions o = options(f, cfg);
    o.classify = o.stochastic = false;
    const ManifoldReport m = analyze(cfg, o);
    for (const auto& e : m.ends) write_csv(f, "spectrum", e, write_curve_csv);
    write_report(f, m);
    if (!f.quiet) {
        for (const auto& e : m.ends) {
            std::cout << e.label << " [" << e.profile << "]\n";
            write_curve_csv(std::cout, e);
            for (const auto& s : e.curve)
                if (s.refinement_warning) std::cout << "  warning: Richardson correction above 10% at t = " << g6(s.t) << '\n';
            for (const auto& n : e.notes) std::cout << "  note: " << n << '\n';
        }
    }
    return kExitOk;
}

int run_stochastic(const Flags& f) {
    const RunConfig cfg = load(f);
    AnalysisOptions o = options(f, cfg);
    o.classify = o.spectrum = false;
    const ManifoldReport m = analyze(cfg, o);
    bool unknown = false;
    for (const auto& e : m.ends) {
        write_csv(f, "u_trace", e, write_u_trace_csv);
        if (!e.completeness || e.completeness->verdict == Completeness::inconclusive) unknown = true;
    }
    write_report(f, m);
    if (!f.quiet) {
        for (const auto& e : m.ends) {
            std::cout << e.label << " [" << e.profile << "]: ";
            if (!e.completeness) {
                std::cout << "skipped\n";
                continue;
            }
            const auto& c = *e.completeness;
            std::cout << to_string(c.verdict) << " (Feller " << (c.feller.is_divergent() ? "divergent" : c.feller.is_convergent() ? "convergent" : "indeterminate")
                      << ", u " << (c.u.diverging ? "diverging" : c.u.settling ? "settling" : "undecided") << ", explosion fraction "
                      << g6(e.monte_carlo ? e.monte_carlo->fraction : kNaN) << ")\n";
            if (!c.diagnostic.empty()) std::cout << "  " << c.diagnostic << '\n';
        }
    }
    return unknown ? kExitInconclusive : kExitOk;
}

struct Check {
    std::string end, name;
    bool pass;
    std::string margin;
};

std::vector<Check> verify_end(const EndConfig& ec, const EndReport& e, const AnalysisOptions& o) {
    std::vector<Check> out;
    const ConsistencyFlags fl = consistency(e);
    if (fl.theorem_corollary)
        out.push_back({e.label, "theorem/corollary", *fl.theorem_corollary,
                       std::string(to_string(e.theorem->verdict)) + " / " + to_string(e.corollary->verdict)});
    if (fl.sandwich) {
        double worst = kInf;
        for (const auto& s : e.curve) {
            const double est = s.best();
            if (std::isfinite(s.lower_bound)) worst = std::min(worst, (1.05 * est - s.lower_bound) / std::max(est, 1e-300));
            if (std::isfinite(s.upper_bound)) worst = std::min(worst, (1.05 * s.upper_bound - est) / std::max(est, 1e-300));
        }
        out.push_back({e.label, "sandwich", *fl.sandwich, "min relative slack " + g6(worst)});
    }
    if (fl.discreteness_completeness)
        out.push_back({e.label, "discrete/complete", *fl.discreteness_completeness,
                       std::string(to_string(e.theorem->verdict)) + " & " + to_string(e.completeness->verdict)});
    if (fl.mazja_identity) {
        double worst = 0;
        for (const auto& m : e.mazja)
            if (m.B.is_convergent()) worst = std::max(worst, std::abs(m.estimate * m.B.value() - 1));
        out.push_back({e.label, "mazja identity", *fl.mazja_identity, "max |m B - 1| " + g6(worst)});
    }
    if (fl.ode_feller)
        out.push_back({e.label, "ode/feller", *fl.ode_feller,
                       std::string("u ") + (e.completeness->u.diverging ? "diverging" : "not diverging")});
    // duality between the two cases under w -> 1/w
    const RadialProfile& p = *ec.profile;
    if (p.r_max() == kInf) {
        bool ok = true;
        double worst = 0;
        for (double t : o.curve_grid) {
            const auto a = sup_criterion(p, t, CriterionCase::infinite_case, o.criteria);
            const auto b = sup_criterion(reciprocal(p), t, CriterionCase::finite_case, o.criteria);
            if (a.B.kind != b.B.kind) {
                ok = false;
                worst = kInf;
            } else if (a.B.is_convergent()) {
                const double rel = std::abs(std::expm1(a.B.log_value - b.B.log_value));
                worst = std::max(worst, rel);
                if (rel > 1e-8) ok = false;
            }
        }
        out.push_back({e.label, "duality", ok, "max relative gap " + g6(worst)});
    }
    if (e.monte_carlo && e.completeness && !e.completeness->feller.is_indeterminate()) {
        const bool explode = e.monte_carlo->fraction > 0.5;
        out.push_back({e.label, "monte carlo sign", explode == e.completeness->feller.is_convergent(),
                       "fraction " + g6(e.monte_carlo->fraction)});
    }
    if (e.superharmonic)
        out.push_back({e.label, "superharmonic", e.superharmonic->holds, "min residual " + g6(e.superharmonic->min_residual)});
    return out;
}

int run_verify(const Flags& f) {
    const RunConfig cfg = load(f);
    AnalysisOptions o = options(f, cfg);
    // the sign check needs a horizon short enough that fast non-explosive drifts stay below R_max
    o.mc_T = 1.0;
    o.mc_r_max = 50.0;
    const ManifoldReport m = analyze(cfg, o);
    write_report(f, m);
    std::vector<Check> checks;
    for (std::size_t i = 0; i < m.ends.size(); ++i) {
        auto c = verify_end(cfg.ends[i], m.ends[i], o);
        checks.insert(checks.end(), c.begin(), c.end());
    }
    bool all = true;
    for (const auto& c : checks) all = all && c.pass;
    if (!f.quiet) {
        for (const auto& c : checks)
            std::cout << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(18) << c.end << std::setw(20) << c.name << c.margin << '\n';
        std::cout << (all ? "all checks passed" : "some checks failed") << " (" << checks.size() << " checks)\n";
    }
    return all ? kExitOk : kExitInconclusive;
}

int run_report(const Flags& f) {
    const RunConfig cfg = load(f);
    const ManifoldReport m = analyze(cfg, options(f, cfg));
    for (const auto& e : m.ends) {
        write_csv(f, "criterion", e, write_criterion_csv);
        write_csv(f, "spectrum", e, write_curve_csv);
        write_csv(f, "u_trace", e, write_u_trace_csv);
    }
    if (f.out.empty()) {
        if (!f.quiet) std::cout << to_json(m).dump(2) << '\n';
    } else {
        write_report(f, m);
    }
    return any_inconclusive(m) ? kExitInconclusive : kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discreteness of the Laplacian spectrum on manifold ends"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "run configuration (INI); the built-in corpus when omitted");
    app.add_option("--out", f.out, "write the JSON report here");
    app.add_option("--csv", f.csv, "directory for CSV plot data");
    app.add_option("--seed", f.seed, "Monte Carlo master seed");
    app.add_option("--t-grid", f.t_grid, "comma-separated increasing t values");
    app.add_option("--tol-disc", f.tol_disc, "limit threshold for a discrete verdict");
    app.add_option("--tol-ess", f.tol_ess, "limit threshold for an essential-spectrum verdict");
    app.add_option("--tol-tail", f.tol_tail, "relative window tolerance of tail integrals");
    app.add_flag("--quiet", f.quiet, "no console output");

    int code = kExitOk;
    auto sub = [&](const char* name, const char* help, int (*fn)(const Flags&)) {
        app.add_subcommand(name, help)->callback([&, fn] { code = fn(f); });
    };
    sub("classify", "discreteness verdict per end and overall", run_classify);
    sub("spectrum", "eigenvalue curves with lower and upper bounds", run_spectrum);
    sub("stochastic", "stochastic completeness: Feller integral, u trace, Monte Carlo", run_stochastic);
    sub("verify", "cross-module consistency checks", run_verify);
    sub("report", "full pipeline as a JSON report", run_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return code;
}
