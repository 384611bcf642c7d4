#include "ends/config.hpp"
#include "ends/report.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

using namespace ends;
namespace fs = std::filesystem;

namespace {

const std::string kCli = ENDS_CLI_PATH;
const std::string kSamples = ENDS_SAMPLES_DIR;

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, ""};
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string sample(const char* name) { return kSamples + "/" + name; }

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ends_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

} // namespace

TEST(Config, ParsesSectionsAndOverrides) {
    const auto cfg = parse_config("[run]\nseed = 9\nt_grid = 1, 3\n\n[end a]\nprofile = exp(-r^2) # comment\n[end b]\nprofile = 1\n");
    EXPECT_EQ(cfg.seed, 9u);
    ASSERT_TRUE(cfg.t_grid);
    EXPECT_EQ(*cfg.t_grid, (std::vector<double>{1, 3}));
    ASSERT_EQ(cfg.ends.size(), 2u);
    EXPECT_EQ(cfg.ends[0].label, "a");
    EXPECT_NEAR(cfg.ends[0].profile->log_value(2.0), -4.0, 1e-12);
}

TEST(Config, ErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("[end a]\nprofile = 1\nbogus = 3\n"), 3u);
    EXPECT_EQ(line_of("[end a]\n\nprofile = exp(-r\n"), 3u);
    EXPECT_EQ(line_of("[run]\nseed = x\n[end a]\nprofile = 1\n"), 2u);
    EXPECT_EQ(line_of("[ends]\n"), 1u);
    EXPECT_EQ(line_of("[end a]\nprofile = 1\n[end a]\nprofile = 1\n"), 3u);
    EXPECT_EQ(line_of("[end a]\nr_model = 3\n"), 1u);
    EXPECT_EQ(line_of("[end a]\nprofile = 1 - r\n"), 2u);
    EXPECT_THROW(parse_config("# nothing\n"), ConfigError);
    try {
        parse_config("[end a]\nprofile = 1\nbogus = 3\n");
    } catch (const ConfigError& e) {
        EXPECT_EQ(std::string(e.what()).rfind("line 3: ", 0), 0u);
    }
}

TEST(Config, DigestIsFnv1a) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
    EXPECT_NE(parse_config("[end a]\nprofile = 1\n").digest, parse_config("[end a]\nprofile = 1 \n").digest);
}

TEST(Config, TableAndTwoDimensionalEnds) {
    const auto cfg = load_config(sample("table.ini"));
    EXPECT_FALSE(cfg.ends[0].profile->is_symbolic());
    EXPECT_NEAR(cfg.ends[0].profile->log_value(1.0), -1.0, 1e-9);
    const auto w = load_config(sample("warped.ini"));
    ASSERT_TRUE(w.ends[0].end2d);
    EXPECT_NEAR(std::exp(w.ends[0].profile->log_value(0)),
                periodic_trapezoid([](double th) { return std::exp(0.3 * std::sin(th)); }, 64), 1e-12);
}

TEST(Report, OverallIsConjunction) {
    auto end = [](Verdict v) {
        EndReport e;
        e.theorem = CriterionTrace{};
        e.theorem->verdict = v;
        return e;
    };
    using V = Verdict;
    EXPECT_EQ(overall_verdict({end(V::discrete), end(V::discrete)}), V::discrete);
    EXPECT_EQ(overall_verdict({end(V::discrete), end(V::not_discrete)}), V::not_discrete);
    EXPECT_EQ(overall_verdict({end(V::discrete), end(V::inconclusive)}), V::inconclusive);
    EXPECT_EQ(overall_verdict({end(V::inconclusive), end(V::not_discrete)}), V::not_discrete);
}

TEST(Report, ConsistencyRecomputedFromTraces) {
    EndReport e;
    e.theorem = CriterionTrace{};
    e.corollary = CriterionTrace{};
    e.theorem->verdict = Verdict::discrete;
    e.corollary->verdict = Verdict::discrete;
    EXPECT_TRUE(*consistency(e).theorem_corollary);
    e.corollary->verdict = Verdict::not_discrete;
    EXPECT_FALSE(*consistency(e).theorem_corollary);
    SpectralEstimate s;
    s.lambda = s.richardson = 1.0;
    s.lower_bound = 1.04;
    s.upper_bound = 0.96;
    e.curve = {s};
    EXPECT_TRUE(*consistency(e).sandwich);
    e.curve[0].lower_bound = 1.06;
    EXPECT_FALSE(*consistency(e).sandwich);
}

TEST(Report, JsonNumbersRoundTrip) {
    const double x = 0.1 + 0.2;
    const json j = num(x);
    EXPECT_EQ(j.dump(), "0.30000000000000004");
    EXPECT_EQ(num(kInf).dump(), "\"inf\"");
    EXPECT_EQ(num(kNaN).dump(), "\"nan\"");
    EXPECT_EQ(fmt17(x), "0.30000000000000004");
}

TEST(Cli, ClassifySingleDiscreteEnd) {
    const auto r = run("classify --config " + sample("gaussian.ini"));
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("overall: discrete"), std::string::npos) << r.out;
}

TEST(Cli, ClassifyConjunctionOfEnds) {
    const auto r = run("classify --config " + sample("two_ends.ini"));
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("overall: not_discrete"), std::string::npos) << r.out;
}

TEST(Cli, ClassifyCylinderCitesEssentialSpectrumTest) {
    const auto r = run("classify --config " + sample("cylinder.ini"));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("not_discrete"), std::string::npos);
    EXPECT_NE(r.out.find("essential_spectrum_test"), std::string::npos) << r.out;
}

TEST(Cli, InconclusiveExitsThree) {
    const auto r = run("classify --config " + sample("table.ini"));
    EXPECT_EQ(r.code, 3) << r.out;
    EXPECT_NE(r.out.find("inconclusive"), std::string::npos);
}

TEST(Cli, SpectrumCuspCurve) {
    const fs::path dir = scratch("cusp");
    const auto r = run("spectrum --quiet --config " + sample("cusp.ini") + " --csv " + dir.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = csv_rows(dir / "spectrum_cusp.csv");
    ASSERT_GE(rows.size(), 2u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "R", "N", "lambda", "richardson", "lower_bound", "upper_bound"}));
    const double lambda = std::stod(rows.back()[3]);
    EXPECT_GE(lambda, 0.24);
    EXPECT_LE(lambda, 0.26);
}

TEST(Cli, SpectrumIntervalCalibration) {
    const fs::path dir = scratch("interval");
    const auto r = run("spectrum --quiet --config " + sample("interval.ini") + " --csv " + dir.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = csv_rows(dir / "spectrum_interval.csv");
    ASSERT_EQ(rows.size(), 2u);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    EXPECT_NEAR(std::stod(rows[1][3]), pi2, 1e-3 * pi2);
}

TEST(Cli, EmptyTGridIsUsageError) {
    const auto r = run("spectrum --config " + sample("cusp.ini") + " --t-grid \"\"");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("t-grid"), std::string::npos) << r.out;
}

TEST(Cli, CorruptProfileExitsOne) {
    const auto r = run("verify --config " + sample("corrupt.ini"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("line 3"), std::string::npos) << r.out;
    EXPECT_EQ(run("classify --config /nonexistent.ini").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("").code, 1);
}

TEST(Cli, ReportIsByteIdentical) {
    const fs::path a = scratch("a.json"), b = scratch("b.json"), c = scratch("c.json");
    ASSERT_EQ(run("report --config " + sample("warped.ini") + " --out " + a.string()).code, 0);
    ASSERT_EQ(run("report --config " + sample("warped.ini") + " --out " + b.string()).code, 0);
    const std::string ja = slurp(a);
    EXPECT_EQ(ja, slurp(b));
    ASSERT_EQ(::setenv("ENDS_NUM_THREADS", "1", 1), 0);
    ASSERT_EQ(run("report --config " + sample("warped.ini") + " --out " + c.string()).code, 0);
    ::unsetenv("ENDS_NUM_THREADS");
    EXPECT_EQ(ja, slurp(c));
    const json j = json::parse(ja);
    EXPECT_EQ(j["version"], kVersion);
    EXPECT_EQ(j["config_digest"], load_config(sample("warped.ini")).digest);
    EXPECT_EQ(j["overall"], "not_discrete");
    const auto& e = j["ends"][0];
    EXPECT_EQ(e["superharmonic"]["holds"], true);
    EXPECT_EQ(e["curvature"]["satisfied"], true);
    for (const char* key : {"criterion", "simplified_criterion", "eigenvalue_curve", "variational_bounds", "completeness", "monte_carlo",
                            "consistency"})
        EXPECT_TRUE(e.contains(key)) << key;
}

TEST(Cli, SeedChangesDetailsNotOutcomes) {
    const std::string cfg = scratch("mc.ini").string();
    {
        std::ofstream os(cfg);
        os << "[end cubic]\nprofile = exp(r^3)\n[end cusp]\nprofile = exp(-r)\n";
    }
    const fs::path a = scratch("seed1.json"), b = scratch("seed2.json");
    const auto r1 = run("verify --config " + cfg + " --seed 1 --out " + a.string());
    const auto r2 = run("verify --config " + cfg + " --seed 2 --out " + b.string());
    EXPECT_EQ(r1.code, 0) << r1.out;
    EXPECT_EQ(r2.code, 0) << r2.out;
    const json ja = json::parse(slurp(a)), jb = json::parse(slurp(b));
    EXPECT_NE(ja["ends"][0]["monte_carlo"]["exploded"], jb["ends"][0]["monte_carlo"]["exploded"]);
    EXPECT_EQ(ja["ends"][0]["monte_carlo"]["seed"], 1);
}
