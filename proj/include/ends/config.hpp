#pragma once

// Run configuration: an INI-style file with one [run] section and one [end NAME] section
// per end. Every error names the line it came from.
//
//   [run]
//   seed = 42
//   t_grid = 1, 2, 4, 8
//
//   [end gaussian]
//   profile = exp(-r^2)          # expression in r, or csv:PATH with rows r,omega_bar
//
//   [end warped]
//   omega = exp(-r + 0.3*sin(theta)*exp(-r))
//   r_model = 10
//   c = 0.5

#include "ends/endmodel.hpp"
#include "ends/errors.hpp"
#include "ends/profile.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ends {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

struct EndConfig {
    std::string label;
    std::size_t line = 0;       ///< line of the section header
    std::size_t value_line = 0; ///< line of the profile or omega key
    std::string profile_text;   ///< expression, csv:PATH, or empty when omega is given
    std::optional<std::string> omega;
    double r_model = 10.0;
    int n_r = 256;
    int n_theta = 64;
    std::optional<double> c;
    /// fixed interval for the spectrum command instead of the eigenvalue curve
    std::optional<std::pair<double, double>> spectrum_interval;
    int spectrum_n = 2000;
    std::optional<RadialProfile> profile;
    std::optional<End2D> end2d;
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::optional<std::vector<double>> t_grid;
    double tol_disc = 1e-3;
    double tol_ess = 1e-2;
    std::size_t mc_paths = 1000;
    double mc_T = 10.0;
    double mc_r_max = 50.0;
    std::vector<EndConfig> ends;
    std::string digest; ///< FNV-1a of the file bytes, hex
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& v, const std::string& key, std::size_t line) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + v + "'", line);
}

inline long long parse_int(const std::string& v, const std::string& key, std::size_t line) {
    try {
        std::size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected an integer, got '" + v + "'", line);
}

inline std::vector<double> parse_list(const std::string& v, const std::string& key, std::size_t line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) throw ConfigError(key + ": empty list item", line);
        out.push_back(parse_double(t, key, line));
    }
    return out;
}

/// Two-column table r, omega_bar; a non-numeric first row is a header.
inline RadialProfile load_csv_profile(const std::filesystem::path& path, const std::string& label) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open profile table " + path.string(), 0);
    std::vector<double> r, w;
    std::string row;
    std::size_t n = 0;
    while (std::getline(in, row)) {
        ++n;
        const std::string t = trim(row);
        if (t.empty() || t[0] == '#') continue;
        const auto comma = t.find(',');
        if (comma == std::string::npos) throw ConfigError(path.string() + ": expected 'r,omega_bar' on row " + std::to_string(n), 0);
        try {
            r.push_back(std::stod(t.substr(0, comma)));
            w.push_back(std::stod(t.substr(comma + 1)));
        } catch (const std::exception&) {
            if (r.empty() && n == 1) continue;
            throw ConfigError(path.string() + ": non-numeric row " + std::to_string(n), 0);
        }
    }
    return RadialProfile::tabulated(std::move(r), std::move(w), std::nullopt, Extrapolation::log_linear, label);
}

} // namespace detail

/// Builds the profile (and 2D end) of a section; errors point at the profile or omega line.
inline void materialize(EndConfig& e, const std::filesystem::path& base_dir) {
    try {
        if (e.omega) {
            e.end2d = End2D(parse_expression(*e.omega, true), e.r_model, e.n_r, e.n_theta, e.label);
            if (e.profile_text.empty()) e.profile = reduce_profile(*e.end2d);
        }
        if (!e.profile_text.empty()) {
            if (e.profile_text.rfind("csv:", 0) == 0)
                e.profile = detail::load_csv_profile(base_dir / detail::trim(e.profile_text.substr(4)), e.label);
            else
                e.profile = parse_profile(e.profile_text);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& err) {
        throw ConfigError("end '" + e.label + "': " + err.what(), e.value_line ? e.value_line : e.line);
    }
}

inline RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".") {
    RunConfig cfg;
    cfg.digest = hex64(fnv1a64(text));
    enum class Section { none, run, end } section = Section::none;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string t = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("unterminated section header", line);
            const std::string head = detail::trim(t.substr(1, t.size() - 2));
            if (head == "run") {
                section = Section::run;
            } else if (head.rfind("end", 0) == 0 && (head.size() == 3 || head[3] == ' ')) {
                section = Section::end;
                EndConfig e;
                e.label = detail::trim(head.substr(3));
                e.line = line;
                if (e.label.empty()) e.label = "end" + std::to_string(cfg.ends.size() + 1);
                for (const auto& other : cfg.ends)
                    if (other.label == e.label) throw ConfigError("duplicate end '" + e.label + "'", line);
                cfg.ends.push_back(std::move(e));
            } else {
                throw ConfigError("unknown section [" + head + "]", line);
            }
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
        const std::string key = detail::trim(t.substr(0, eq)), value = detail::trim(t.substr(eq + 1));
        if (value.empty()) throw ConfigError(key + ": missing value", line);
        if (section == Section::none) throw ConfigError("'" + key + "' outside a section", line);
        if (section == Section::run) {
            if (key == "seed") {
                const long long s = detail::parse_int(value, key, line);
                if (s < 0) throw ConfigError("seed must be non-negative", line);
                cfg.seed = static_cast<std::uint64_t>(s);
            } else if (key == "t_grid") {
                cfg.t_grid = detail::parse_list(value, key, line);
            } else if (key == "tol_disc") {
                cfg.tol_disc = detail::parse_double(value, key, line);
            } else if (key == "tol_ess") {
                cfg.tol_ess = detail::parse_double(value, key, line);
            } else if (key == "mc_paths") {
                const long long n = detail::parse_int(value, key, line);
                if (n < 100) throw ConfigError("mc_paths must be at least 100", line);
                cfg.mc_paths = static_cast<std::size_t>(n);
            } else if (key == "mc_T") {
                cfg.mc_T = detail::parse_double(value, key, line);
            } else if (key == "mc_r_max") {
                cfg.mc_r_max = detail::parse_double(value, key, line);
            } else {
                throw ConfigError("unknown key '" + key + "' in [run]", line);
            }
            continue;
        }
        EndConfig& e = cfg.ends.back();
        if (key == "profile") {
            e.profile_text = value;
            e.value_line = line;
        } else if (key == "omega") {
            e.omega = value;
            e.value_line = line;
        } else if (key == "r_model") {
            e.r_model = detail::parse_double(value, key, line);
        } else if (key == "n_r") {
            e.n_r = static_cast<int>(detail::parse_int(value, key, line));
        } else if (key == "n_theta") {
            e.n_theta = static_cast<int>(detail::parse_int(value, key, line));
        } else if (key == "c") {
            e.c = detail::parse_double(value, key, line);
        } else if (key == "spectrum_interval") {
            const auto v = detail::parse_list(value, key, line);
            if (v.size() != 2 || !(v[1] > v[0]) || v[0] < 0) throw ConfigError("spectrum_interval needs 0 <= a < b", line);
            e.spectrum_interval = std::make_pair(v[0], v[1]);
        } else if (key == "spectrum_n") {
            e.spectrum_n = static_cast<int>(detail::parse_int(value, key, line));
        } else {
            throw ConfigError("unknown key '" + key + "' in [end " + e.label + "]", line);
        }
    }
    if (cfg.ends.empty()) throw ConfigError("no [end] sections", 0);
    for (auto& e : cfg.ends) {
        if (e.profile_text.empty() && !e.omega) throw ConfigError("end '" + e.label + "' needs a profile or an omega", e.line);
        materialize(e, base_dir);
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string(), 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

/// The eight-profile reference corpus as a config.
inline RunConfig builtin_corpus() {
    static const char* const text = "[end const]\nprofile = 1\n"
                                    "[end linear]\nprofile = r+1\n"
                                    "[end cusp]\nprofile = exp(-r)\n"
                                    "[end funnel]\nprofile = exp(r)\n"
                                    "[end gaussian]\nprofile = exp(-r^2)\n"
                                    "[end gaussian_funnel]\nprofile = exp(r^2)\n"
                                    "[end cubic_funnel]\nprofile = exp(r^3)\n"
                                    "[end inverse_square]\nprofile = (1+r)^(-2)\n";
    return parse_config(text);
}

} // namespace ends
