// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psdg/error.hpp"
#include "psdg/scenario.hpp"
#include "psdg/solver.hpp"

namespace psdg {

// ---------------------------------------------------------------------------
// Strict INI reader: `[section]` headers and `key = value` lines, full-line
// comments starting with '#' or ';'.  Every key must be consumed by the
// typed configuration below — unknown keys are errors, with line numbers.
// ---------------------------------------------------------------------------
class IniFile {
public:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };

    static IniFile parse(const std::string& path) {
        std::ifstream in(path);
        if (!in.good()) throw ConfigError(detail::concat("cannot open config '", path, "'"));
        return parse_stream(in, path);
    }

    static IniFile parse_stream(std::istream& in, const std::string& path) {
        IniFile ini;
        ini.path_ = path;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string_view body = trim(line);
            if (body.empty() || body[0] == '#' || body[0] == ';') continue;
            if (body[0] == '[') {
                if (body.back() != ']' || body.size() < 3)
                    throw ConfigError(detail::concat(path, ":", lineno,
                                                     ": malformed section header '", body, "'"));
                section = std::string(trim(body.substr(1, body.size() - 2)));
                if (section.empty())
                    throw ConfigError(detail::concat(path, ":", lineno, ": empty section name"));
                continue;
            }
            const std::size_t eq = body.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(detail::concat(path, ":", lineno,
                                                 ": expected 'key = value', got '", body, "'"));
            const std::string key(trim(body.substr(0, eq)));
            const std::string value(trim(body.substr(eq + 1)));
            if (key.empty())
                throw ConfigError(detail::concat(path, ":", lineno, ": empty key"));
            if (value.empty())
                throw ConfigError(
                    detail::concat(path, ":", lineno, ": empty value for key '", key, "'"));
            auto [it, inserted] =
                ini.entries_[section].insert({key, Entry{value, lineno, false}});
            if (!inserted)
                throw ConfigError(detail::concat(path, ":", lineno, ": duplicate key '", key,
                                                 "' in section [", section,
                                                 "] (first set at line ", it->second.line, ")"));
        }
        return ini;
    }

    const Entry* find(const std::string& section, const std::string& key) const {
        auto s = entries_.find(section);
        if (s == entries_.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    // Every key must have been consumed; report all leftovers at once.
    void reject_unused() const {
        std::ostringstream msg;
        bool any = false;
        for (const auto& [section, keys] : entries_)
            for (const auto& [key, entry] : keys)
                if (!entry.used) {
                    if (any) msg << "\n";
                    msg << path_ << ":" << entry.line << ": unknown key '" << key
                        << "' in section [" << section << "]";
                    any = true;
                }
        if (any) throw ConfigError(msg.str());
    }

    const std::string& path() const { return path_; }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        return s;
    }

    std::string path_;
    std::map<std::string, std::map<std::string, Entry>> entries_;
};

namespace detail {

[[noreturn]] inline void config_fail_at(const IniFile& ini, const std::string& section,
                                        const std::string& key, int line,
                                        const std::string& what) {
    throw ConfigError(
        concat(ini.path(), ":", line, ": [", section, "] ", key, ": ", what));
}

inline const IniFile::Entry& require_entry(const IniFile& ini, const std::string& section,
                                           const std::string& key) {
    const IniFile::Entry* e = ini.find(section, key);
    if (!e)
        throw ConfigError(concat(ini.path(), ": missing required key '", key, "' in section [",
                                 section, "]"));
    return *e;
}

inline double parse_double_tok(const IniFile& ini, const std::string& section,
                               const std::string& key, int line, const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        config_fail_at(ini, section, key, line, concat("expected a number, got '", tok, "'"));
    }
    if (used != tok.size())
        config_fail_at(ini, section, key, line, concat("expected a number, got '", tok, "'"));
    return v;
}

inline long long parse_int_tok(const IniFile& ini, const std::string& section,
                               const std::string& key, int line, const std::string& tok) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(tok, &used);
    } catch (const std::exception&) {
        config_fail_at(ini, section, key, line, concat("expected an integer, got '", tok, "'"));
    }
    if (used != tok.size())
        config_fail_at(ini, section, key, line, concat("expected an integer, got '", tok, "'"));
    return v;
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> tok;
    std::string t;
    while (is >> t) tok.push_back(t);
    return tok;
}

} // namespace detail

// Typed accessors over an IniFile.  Optional getters return the default when
// the key is absent; all parses and range checks raise ConfigError with the
// file, line, section, and key.
class ConfigReader {
public:
    explicit ConfigReader(IniFile ini) : ini_(std::move(ini)) {}

    bool has(const std::string& section, const std::string& key) const {
        return ini_.find(section, key) != nullptr;
    }

    std::string require_string(const std::string& section, const std::string& key) const {
        return detail::require_entry(ini_, section, key).value;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& def) const {
        const IniFile::Entry* e = ini_.find(section, key);
        return e ? e->value : def;
    }

    double require_double(const std::string& section, const std::string& key) const {
        const IniFile::Entry& e = detail::require_entry(ini_, section, key);
        return detail::parse_double_tok(ini_, section, key, e.line, e.value);
    }

    double get_double(const std::string& section, const std::string& key, double def) const {
        const IniFile::Entry* e = ini_.find(section, key);
        return e ? detail::parse_double_tok(ini_, section, key, e->line, e->value) : def;
    }

    long long require_int(const std::string& section, const std::string& key) const {
        const IniFile::Entry& e = detail::require_entry(ini_, section, key);
        return detail::parse_int_tok(ini_, section, key, e.line, e.value);
    }

    long long get_int(const std::string& section, const std::string& key, long long def) const {
        const IniFile::Entry* e = ini_.find(section, key);
        return e ? detail::parse_int_tok(ini_, section, key, e->line, e->value) : def;
    }

    bool get_bool(const std::string& section, const std::string& key, bool def) const {
        const IniFile::Entry* e = ini_.find(section, key);
        if (!e) return def;
        const std::string& v = e->value;
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        detail::config_fail_at(ini_, section, key, e->line,
                               detail::concat("expected a boolean (true/false), got '", v, "'"));
    }

    std::vector<double> get_doubles(const std::string& section, const std::string& key) const {
        const IniFile::Entry* e = ini_.find(section, key);
        std::vector<double> out;
        if (!e) return out;
        for (const std::string& tok : detail::split_ws(e->value))
            out.push_back(detail::parse_double_tok(ini_, section, key, e->line, tok));
        return out;
    }

    std::vector<int> get_ints(const std::string& section, const std::string& key) const {
        const IniFile::Entry* e = ini_.find(section, key);
        std::vector<int> out;
        if (!e) return out;
        for (const std::string& tok : detail::split_ws(e->value))
            out.push_back(static_cast<int>(detail::parse_int_tok(ini_, section, key, e->line, tok)));
        return out;
    }

    // Range guard attributed to the key's source line.
    template <class T>
    void check(const std::string& section, const std::string& key, bool ok,
               const T& value, const std::string& what) const {
        if (ok) return;
        const IniFile::Entry* e = ini_.find(section, key);
        const int line = e ? e->line : 0;
        detail::config_fail_at(ini_, section, key, line,
                               detail::concat(what, ", got ", value));
    }

    int line_of(const std::string& section, const std::string& key) const {
        const IniFile::Entry* e = ini_.find(section, key);
        return e ? e->line : 0;
    }

    const IniFile& ini() const { return ini_; }

private:
    IniFile ini_;
};

// ---------------------------------------------------------------------------
// Run configuration.
// ---------------------------------------------------------------------------
enum class MeshSource { Generate, File };

struct MeshConfig {
    MeshSource source = MeshSource::Generate;
    int n = 400;               // target element count (generate)
    int iters = 50;            // Lloyd iterations (generate)
    std::uint64_t seed = 1;    // RNG seed (generate)
    std::string path;          // input mesh (file)
    std::string output;        // destination for the mesh-gen command
};

struct ScenarioConfig {
    std::string name = "manufactured_sine";
    double mu = 1.0;
    CustomScenarioSpec custom; // populated when name == "custom"
};

struct OutputConfig {
    std::string directory = "out";
    bool errors = false;    // energy-error report (needs an exact solution)
    bool recovery = false;  // pressure/velocity recovery + VTK export
    bool stability = false; // discrete stability functional in the metadata
    int vtk_every = 0;      // extra snapshots every k steps (0 = final only)
};

struct SweepConfig {
    std::vector<int> degrees;  // spatial mode: polynomial degrees
    std::vector<int> cells;    // spatial mode: target element counts
    std::vector<double> dts;   // temporal mode: time steps
};

struct RunConfig {
    ScenarioConfig scenario;
    MeshConfig mesh;
    int degree = 1;
    PenaltyParams penalty;
    double theta = 0.5;
    double dt = 1e-3;
    double T = 0.25;
    SolveOptions solver;
    OutputConfig output;
    SweepConfig sweep;
};

namespace detail {

inline MonoPoly parse_mono_poly(const ConfigReader& cfg, const std::string& section,
                                const std::string& key) {
    MonoPoly poly;
    if (!cfg.has(section, key)) return poly;
    const std::string text = cfg.require_string(section, key);
    const int line = cfg.line_of(section, key);
    std::istringstream terms(text);
    std::string term;
    while (std::getline(terms, term, ';')) {
        const std::vector<std::string> tok = split_ws(term);
        if (tok.empty()) continue;
        if (tok.size() != 4)
            config_fail_at(cfg.ini(), section, key, line,
                           concat("each term must be 'coeff i j k' (coeff * x^i y^j t^k), got '",
                                  term, "'"));
        MonoTerm m;
        m.c = parse_double_tok(cfg.ini(), section, key, line, tok[0]);
        m.i = static_cast<int>(parse_int_tok(cfg.ini(), section, key, line, tok[1]));
        m.j = static_cast<int>(parse_int_tok(cfg.ini(), section, key, line, tok[2]));
        m.k = static_cast<int>(parse_int_tok(cfg.ini(), section, key, line, tok[3]));
        if (m.i < 0 || m.j < 0 || m.k < 0)
            config_fail_at(cfg.ini(), section, key, line,
                           concat("monomial exponents must be non-negative, got '", term, "'"));
        poly.push_back(m);
    }
    return poly;
}

inline FaceKind parse_side(const ConfigReader& cfg, const std::string& section,
                           const std::string& key) {
    const std::string v = cfg.get_string(section, key, "dirichlet");
    if (v == "dirichlet") return FaceKind::Dirichlet;
    if (v == "neumann") return FaceKind::Neumann;
    config_fail_at(cfg.ini(), section, key, cfg.line_of(section, key),
                   concat("expected 'dirichlet' or 'neumann', got '", v, "'"));
}

inline SolveMethod parse_method(const ConfigReader& cfg, const std::string& v) {
    if (v == "cg") return SolveMethod::Cg;
    if (v == "dense_cholesky") return SolveMethod::DenseCholesky;
    if (v == "sparse_cholesky") return SolveMethod::SparseCholesky;
    config_fail_at(cfg.ini(), "solver", "method", cfg.line_of("solver", "method"),
                   concat("expected cg, dense_cholesky, or sparse_cholesky, got '", v, "'"));
}

} // namespace detail

inline RunConfig parse_config_reader(const ConfigReader& cfg) {
    RunConfig rc;

    // [scenario]
    rc.scenario.name = cfg.get_string("scenario", "name", "manufactured_sine");
    rc.scenario.mu = cfg.get_double("scenario", "mu",
                                    rc.scenario.name == "cylinder" ? 2.0 : 1.0);
    cfg.check("scenario", "mu", rc.scenario.mu > 0.0, rc.scenario.mu,
              "viscosity mu must be positive");
    if (rc.scenario.name == "custom") {
        CustomScenarioSpec& cs = rc.scenario.custom;
        cs.mu = rc.scenario.mu;
        cs.x0 = cfg.get_double("scenario", "x0", 0.0);
        cs.y0 = cfg.get_double("scenario", "y0", 0.0);
        cs.x1 = cfg.get_double("scenario", "x1", 1.0);
        cs.y1 = cfg.get_double("scenario", "y1", 1.0);
        cfg.check("scenario", "x1", cs.x1 > cs.x0, cs.x1, "x1 must exceed x0");
        cfg.check("scenario", "y1", cs.y1 > cs.y0, cs.y1, "y1 must exceed y0");
        cs.sigma[0] = detail::parse_mono_poly(cfg, "scenario", "sigma_xx");
        cs.sigma[1] = detail::parse_mono_poly(cfg, "scenario", "sigma_xy");
        cs.sigma[2] = detail::parse_mono_poly(cfg, "scenario", "sigma_yx");
        cs.sigma[3] = detail::parse_mono_poly(cfg, "scenario", "sigma_yy");
        cs.sides[0] = detail::parse_side(cfg, "scenario", "side_bottom");
        cs.sides[1] = detail::parse_side(cfg, "scenario", "side_right");
        cs.sides[2] = detail::parse_side(cfg, "scenario", "side_top");
        cs.sides[3] = detail::parse_side(cfg, "scenario", "side_left");
    } else if (rc.scenario.name != "manufactured_sine" && rc.scenario.name != "recovery_poly" &&
               rc.scenario.name != "cylinder") {
        cfg.check("scenario", "name", false, "'" + rc.scenario.name + "'",
                  "scenario must be manufactured_sine, recovery_poly, cylinder, or custom");
    }

    // [mesh]
    const std::string src = cfg.get_string("mesh", "source", "generate");
    if (src == "generate") {
        rc.mesh.source = MeshSource::Generate;
    } else if (src == "file") {
        rc.mesh.source = MeshSource::File;
    } else {
        cfg.check("mesh", "source", false, "'" + src + "'",
                  "mesh source must be generate or file");
    }
    rc.mesh.n = static_cast<int>(cfg.get_int("mesh", "n", 400));
    cfg.check("mesh", "n", rc.mesh.n >= 4, rc.mesh.n, "element count must be at least 4");
    rc.mesh.iters = static_cast<int>(cfg.get_int("mesh", "iters", 50));
    cfg.check("mesh", "iters", rc.mesh.iters >= 0, rc.mesh.iters,
              "Lloyd iteration count must be non-negative");
    const long long seed = cfg.get_int("mesh", "seed", 1);
    cfg.check("mesh", "seed", seed >= 0, seed, "seed must be non-negative");
    rc.mesh.seed = static_cast<std::uint64_t>(seed);
    if (rc.mesh.source == MeshSource::File)
        rc.mesh.path = cfg.require_string("mesh", "path");
    else if (cfg.has("mesh", "path"))
        rc.mesh.path = cfg.require_string("mesh", "path"); // consumed, ignored by generate
    rc.mesh.output = cfg.get_string("mesh", "output", "");

    // [space] / [penalty]
    rc.degree = static_cast<int>(cfg.get_int("space", "degree", 1));
    cfg.check("space", "degree", rc.degree >= 1, rc.degree,
              "polynomial degree must be at least 1");
    rc.penalty.alpha = cfg.get_double("penalty", "alpha", 10.0);
    cfg.check("penalty", "alpha", rc.penalty.alpha > 0.0, rc.penalty.alpha,
              "penalty coefficient alpha must be positive");

    // [time]
    rc.theta = cfg.get_double("time", "theta", 0.5);
    cfg.check("time", "theta", rc.theta >= 0.0 && rc.theta <= 1.0, rc.theta,
              "theta must lie in [0, 1]");
    rc.dt = cfg.get_double("time", "dt", 1e-3);
    cfg.check("time", "dt", rc.dt > 0.0, rc.dt, "dt must be positive");
    rc.T = cfg.get_double("time", "T", 0.25);
    cfg.check("time", "T", rc.T > 0.0, rc.T, "T must be positive");
    {
        const double ratio = rc.T / rc.dt;
        const double rounded = std::llround(ratio);
        cfg.check("time", "dt", rounded >= 1.0 && std::abs(ratio - rounded) <= 1e-12 * ratio,
                  rc.dt, detail::concat("T not an integer multiple of dt (T = ", rc.T,
                                        ", T/dt = ", ratio, ")"));
    }

    // [solver]
    rc.solver.method = detail::parse_method(cfg, cfg.get_string("solver", "method", "cg"));
    rc.solver.tol = cfg.get_double("solver", "tol", rc.solver.tol);
    cfg.check("solver", "tol", rc.solver.tol > 0.0 && rc.solver.tol < 1.0, rc.solver.tol,
              "solver tolerance must lie in (0, 1)");
    rc.solver.max_iters = static_cast<int>(cfg.get_int("solver", "max_iters", rc.solver.max_iters));
    cfg.check("solver", "max_iters", rc.solver.max_iters >= 1, rc.solver.max_iters,
              "max_iters must be at least 1");

    // [output]
    rc.output.directory = cfg.get_string("output", "directory", "out");
    cfg.check("output", "directory", !rc.output.directory.empty(), "''",
              "output directory must be non-empty");
    rc.output.errors = cfg.get_bool("output", "errors", false);
    rc.output.recovery = cfg.get_bool("output", "recovery", false);
    rc.output.stability = cfg.get_bool("output", "stability", false);
    rc.output.vtk_every = static_cast<int>(cfg.get_int("output", "vtk_every", 0));
    cfg.check("output", "vtk_every", rc.output.vtk_every >= 0, rc.output.vtk_every,
              "vtk_every must be non-negative");
    if (rc.output.vtk_every > 0)
        cfg.check("output", "vtk_every", rc.output.recovery, rc.output.vtk_every,
                  "vtk_every requires recovery = true (snapshots carry recovered fields)");

    // [sweep]
    rc.sweep.degrees = cfg.get_ints("sweep", "degrees");
    for (int p : rc.sweep.degrees)
        cfg.check("sweep", "degrees", p >= 1, p, "sweep degrees must be at least 1");
    rc.sweep.cells = cfg.get_ints("sweep", "cells");
    for (int n : rc.sweep.cells)
        cfg.check("sweep", "cells", n >= 4, n, "sweep element counts must be at least 4");
    rc.sweep.dts = cfg.get_doubles("sweep", "dts");
    for (double dt : rc.sweep.dts)
        cfg.check("sweep", "dts", dt > 0.0, dt, "sweep time steps must be positive");

    cfg.ini().reject_unused();
    return rc;
}

inline RunConfig parse_config(const std::string& path) {
    return parse_config_reader(ConfigReader(IniFile::parse(path)));
}

} // namespace psdg
