// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "psdg/config.hpp"
#include "psdg/postproc.hpp"
#include "psdg/voronoi.hpp"

namespace psdg {

inline Scenario make_scenario(const ScenarioConfig& sc) {
    if (sc.name == "manufactured_sine") return make_manufactured_sine(sc.mu);
    if (sc.name == "recovery_poly") return make_recovery_poly(sc.mu);
    if (sc.name == "cylinder") return make_cylinder(sc.mu);
    if (sc.name == "custom") return make_custom(sc.custom);
    throw ConfigError(detail::concat("unknown scenario '", sc.name, "'"));
}

// Generate or load the mesh, then classify its boundary for the scenario.
inline std::shared_ptr<const PolyMesh> acquire_mesh(const MeshConfig& mc, const Scenario& scn) {
    PolyMesh mesh = mc.source == MeshSource::Generate
                        ? generate_voronoi_mesh(scn.domain, mc.n, mc.iters, mc.seed)
                        : load_mesh(mc.path);
    classify_boundary(mesh, scn.classifier);
    return std::make_shared<PolyMesh>(std::move(mesh));
}

// Worker cap from the environment; execution is sequential (one worker), so
// any positive cap is honored.  A non-positive or malformed value is a
// configuration error.
inline int worker_cap() {
    const char* env = std::getenv("PSDG_THREADS");
    if (!env) return 1;
    const std::string v(env);
    std::size_t used = 0;
    long cap = 0;
    try {
        cap = std::stol(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || cap < 1)
        throw ConfigError(detail::concat("PSDG_THREADS must be a positive integer, got '", v, "'"));
    return static_cast<int>(cap);
}

// ---------------------------------------------------------------------------
// Minimal JSON writer for the run metadata (flat objects, comma tracking).
// Non-finite numbers are emitted as strings to stay parseable.
// ---------------------------------------------------------------------------
class JsonWriter {
public:
    JsonWriter() { os_.precision(17); }

    void begin_object() {
        comma();
        os_ << "{";
        first_.push_back(true);
        after_key_ = false;
    }
    void end_object() {
        first_.pop_back();
        os_ << "\n" << pad() << "}";
    }
    void begin_array() {
        comma();
        os_ << "[";
        first_.push_back(true);
        after_key_ = false;
    }
    void end_array() {
        first_.pop_back();
        os_ << "\n" << pad() << "]";
    }
    void key(const std::string& k) {
        comma();
        os_ << "\"" << escaped(k) << "\": ";
        after_key_ = true;
    }
    void value_str(const std::string& v) {
        comma();
        os_ << "\"" << escaped(v) << "\"";
    }
    void value_num(double v) {
        comma();
        if (std::isfinite(v))
            os_ << v;
        else
            os_ << "\"" << (std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf")) << "\"";
    }
    void value_int(long long v) {
        comma();
        os_ << v;
    }
    void value_bool(bool v) {
        comma();
        os_ << (v ? "true" : "false");
    }

    void field(const std::string& k, const std::string& v) { key(k), value_str(v); }
    void field(const std::string& k, const char* v) { key(k), value_str(v); }
    void field(const std::string& k, double v) { key(k), value_num(v); }
    void field(const std::string& k, int v) { key(k), value_int(v); }
    void field(const std::string& k, long long v) { key(k), value_int(v); }
    void field(const std::string& k, std::size_t v) {
        key(k), value_int(static_cast<long long>(v));
    }
    void field(const std::string& k, bool v) { key(k), value_bool(v); }
    void object(const std::string& k) { key(k), begin_object(); }

    std::string str() const { return os_.str() + "\n"; }

private:
    void comma() {
        if (after_key_) {
            after_key_ = false;
            return;
        }
        if (first_.empty()) return;
        if (!first_.back()) os_ << ",";
        first_.back() = false;
        os_ << "\n" << pad();
    }
    // Two spaces per open container; closers pop their level before padding.
    std::string pad() const { return std::string(2 * first_.size(), ' '); }
    static std::string escaped(const std::string& s) {
        std::string r;
        for (char c : s) {
            if (c == '\n') {
                r += "\\n";
                continue;
            }
            if (c == '"' || c == '\\') r.push_back('\\');
            r.push_back(c);
        }
        return r;
    }

    std::ostringstream os_;
    std::vector<bool> first_;
    bool after_key_ = false;
};

namespace detail {

inline void create_output_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, "cannot create output directory '", dir, "': ", ec.message());
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    require(out.good(), "failed to open '", path, "' for writing");
    out << text;
    require(out.good(), "failed while writing '", path, "'");
}

inline std::string method_name(SolveMethod m) { return to_string(m); }

struct FieldRange {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    bool finite = true;

    void absorb(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        finite = finite && std::isfinite(v);
    }
};

} // namespace detail

// Outcome of one complete simulation (one sweep point or one `run` command).
struct PointOutcome {
    std::size_t dofs = 0;
    int mesh_elements = 0;
    double mesh_h = 0.0;
    RunStats stats;
    bool has_errors = false;
    ErrorReport errors;
    bool has_stability = false;
    StabilityReport stability;
    double wall_seconds = 0.0;
};

namespace detail {

inline void write_metadata(const std::string& path, const Scenario& scn, const RunConfig& rc,
                           const PointOutcome& out, const std::vector<FieldRange>* ranges) {
    JsonWriter j;
    j.begin_object();
    j.object("scenario");
    j.field("name", scn.name);
    j.field("mu", scn.mu);
    j.end_object();
    j.object("mesh");
    j.field("source", rc.mesh.source == MeshSource::Generate ? "generate" : "file");
    if (rc.mesh.source == MeshSource::Generate) {
        j.field("n", rc.mesh.n);
        j.field("iters", rc.mesh.iters);
        j.field("seed", static_cast<long long>(rc.mesh.seed));
    } else {
        j.field("path", rc.mesh.path);
    }
    j.field("elements", out.mesh_elements);
    j.field("h", out.mesh_h);
    j.end_object();
    j.object("discretization");
    j.field("degree", rc.degree);
    j.field("alpha", rc.penalty.alpha);
    j.field("dofs", out.dofs);
    j.end_object();
    j.object("time");
    j.field("theta", rc.theta);
    j.field("theta_validated", rc.theta == 1.0 || rc.theta == 0.5);
    j.field("dt", rc.dt);
    j.field("T", rc.T);
    j.field("steps", out.stats.n_steps);
    j.end_object();
    j.object("solver");
    j.field("method", method_name(rc.solver.method));
    j.field("tol", rc.solver.tol);
    j.field("max_iters", rc.solver.max_iters);
    j.field("solves", out.stats.linear.solves);
    j.field("factorizations", out.stats.linear.factorizations);
    j.field("total_iterations", static_cast<long long>(out.stats.linear.total_iterations));
    j.field("max_iterations", static_cast<long long>(out.stats.linear.max_iterations));
    j.field("last_residual", out.stats.linear.last_residual);
    j.end_object();
    j.object("output");
    j.field("directory", rc.output.directory);
    j.field("errors", rc.output.errors);
    j.field("recovery", rc.output.recovery);
    j.field("stability", rc.output.stability);
    j.field("vtk_every", rc.output.vtk_every);
    j.end_object();
    j.object("timing");
    j.field("assemble_seconds", out.stats.assemble_seconds);
    j.field("solve_seconds", out.stats.solve_seconds);
    j.field("wall_seconds", out.wall_seconds);
    j.field("worker_cap", worker_cap());
    j.field("workers", 1);
    j.end_object();
    if (out.has_errors) {
        j.object("errors");
        j.field("err_energy", out.errors.err_energy);
        j.field("err_dev_max", out.errors.err_dev_max);
        j.field("err_div", out.errors.err_div);
        j.end_object();
    }
    if (out.has_stability) {
        j.object("stability");
        j.field("lhs", out.stability.lhs);
        j.field("rhs", out.stability.rhs);
        j.field("constant", out.stability.constant);
        j.end_object();
    }
    if (ranges) {
        const char* names[7] = {"sigma_xx", "sigma_xy", "sigma_yx", "sigma_yy",
                                "pressure", "velocity_x", "velocity_y"};
        j.object("fields");
        bool all_finite = true;
        for (int c = 0; c < 7; ++c) {
            j.object(names[c]);
            j.field("min", (*ranges)[static_cast<std::size_t>(c)].lo);
            j.field("max", (*ranges)[static_cast<std::size_t>(c)].hi);
            all_finite = all_finite && (*ranges)[static_cast<std::size_t>(c)].finite;
            j.end_object();
        }
        j.field("all_finite", all_finite);
        j.end_object();
    }
    j.end_object();
    write_text_file(path, j.str());
}

} // namespace detail

// Run one configured simulation into rc.output.directory (which is created):
// time loop, optional error report (errors.csv), optional recovery with VTK
// snapshots, and metadata.json.  The caller pre-builds scenario and mesh so
// sweeps can share them.
inline PointOutcome execute_run(const Scenario& scn, const std::shared_ptr<const PolyMesh>& mesh,
                                const RunConfig& rc) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::create_output_dir(rc.output.directory);
    if (rc.output.errors)
        require(static_cast<bool>(scn.exact_sigma) && static_cast<bool>(scn.exact_div_sigma),
                "scenario '", scn.name,
                "' provides no exact solution; disable [output] errors for it");

    DgSpace space(mesh, rc.degree);
    const TimeIntegrator ti(rc.theta, rc.dt, rc.T);
    const History hist = run(space, scn, ti, rc.solver, rc.penalty);

    PointOutcome out;
    out.dofs = space.total_dofs();
    out.mesh_elements = mesh->n_elements();
    for (const Element& el : mesh->elements) out.mesh_h = std::max(out.mesh_h, el.h);
    out.stats = hist.stats;

    if (rc.output.errors) {
        out.errors = energy_error(space, hist, scn, rc.penalty);
        out.has_errors = true;
        RateTable table;
        table.rows.push_back(rate_point(out.errors));
        export_csv(table, rc.output.directory + "/errors.csv");
    }
    if (rc.output.stability) {
        out.stability = stability_report(space, scn, hist, rc.penalty);
        out.has_stability = true;
    }

    std::vector<detail::FieldRange> ranges(7);
    if (rc.output.recovery) {
        const SampleCloud cloud = build_sample_cloud(*mesh);
        VelocityAccumulator acc(space, scn, cloud);
        const int last = static_cast<int>(hist.states.size()) - 1;
        for (int n = 0; n <= last; ++n) {
            acc.accept(n, hist.times[static_cast<std::size_t>(n)],
                       hist.states[static_cast<std::size_t>(n)]);
            const bool snapshot = rc.output.vtk_every > 0 && n % rc.output.vtk_every == 0;
            if (snapshot && n != last) {
                RecoveredFields f;
                f.pressure =
                    recover_pressure(space, hist.states[static_cast<std::size_t>(n)], cloud);
                f.velocity = acc.velocity();
                char name[40];
                std::snprintf(name, sizeof name, "/fields_%06d.vtk", n);
                export_vtk(space, cloud, hist.states[static_cast<std::size_t>(n)], f,
                           rc.output.directory + name);
            }
        }
        RecoveredFields f;
        f.pressure = recover_pressure(space, hist.final_state(), cloud);
        f.velocity = acc.velocity();
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Mat2 s = space.evaluate(hist.final_state(), cloud.owner[i], cloud.points[i]);
            for (int c = 0; c < 4; ++c) ranges[static_cast<std::size_t>(c)].absorb(s(c / 2, c % 2));
            ranges[4].absorb(f.pressure[i]);
            ranges[5].absorb(f.velocity[i].x);
            ranges[6].absorb(f.velocity[i].y);
        }
        export_vtk(space, cloud, hist.final_state(), f, rc.output.directory + "/fields_final.vtk");
    }

    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::write_metadata(rc.output.directory + "/metadata.json", scn, rc, out,
                           rc.output.recovery ? &ranges : nullptr);
    return out;
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------
inline void cmd_mesh_gen(const RunConfig& rc) {
    if (rc.mesh.source != MeshSource::Generate)
        throw ConfigError("mesh-gen requires [mesh] source = generate");
    if (rc.mesh.output.empty())
        throw ConfigError("mesh-gen requires [mesh] output = <path>");
    const Scenario scn = make_scenario(rc.scenario);
    const auto mesh = acquire_mesh(rc.mesh, scn);
    save_mesh(*mesh, rc.mesh.output);
    std::cout << "mesh-gen: wrote " << mesh->n_elements() << " elements (target " << rc.mesh.n
              << ") to '" << rc.mesh.output << "'\n";
}

inline PointOutcome cmd_run(const RunConfig& rc) {
    const Scenario scn = make_scenario(rc.scenario);
    const auto mesh = acquire_mesh(rc.mesh, scn);
    const PointOutcome out = execute_run(scn, mesh, rc);
    std::cout << "run: scenario=" << scn.name << " elements=" << out.mesh_elements
              << " degree=" << rc.degree << " dofs=" << out.dofs << " steps=" << out.stats.n_steps
              << " wall=" << out.wall_seconds << "s\n";
    if (out.has_errors)
        std::cout << "run: err_energy=" << out.errors.err_energy
                  << " err_dev_max=" << out.errors.err_dev_max
                  << " err_div=" << out.errors.err_div << "\n";
    std::cout << "run: wrote '" << rc.output.directory << "/metadata.json'\n";
    return out;
}

namespace detail {

inline std::string dir_name_spatial(int p, int n) {
    return detail::concat("p", p, "_n", n);
}

inline std::string dir_name_temporal(double dt) {
    return detail::concat("dt", format_g12(dt));
}

// Gnuplot-ready blocks: one per degree (spatial) or one total (temporal),
// separated by blank lines, log-log axes left to the plot script.
inline std::string gnuplot_blocks(const std::vector<std::pair<std::string, RateTable>>& blocks,
                                  const std::string& axis) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [label, table] : blocks) {
        if (!first) os << "\n\n";
        first = false;
        os << "# " << label << "\n";
        os << "# " << axis << " err_energy err_dev_max err_div\n";
        for (const RatePoint& r : table.rows) {
            const double x = axis == "h" ? r.h : r.dt;
            os << format_g12(x) << ' ' << format_g12(r.err_energy) << ' '
               << format_g12(r.err_dev_max) << ' ' << format_g12(r.err_div) << "\n";
        }
    }
    return os.str();
}

} // namespace detail

// Convergence sweep.  Per-point failures are recorded and the sweep carries
// on; the rate table covers the successful points and an Error summarizing
// the failures is thrown at the end (nonzero exit).
inline void cmd_convergence(const RunConfig& rc, const std::string& mode) {
    if (mode != "spatial" && mode != "temporal")
        throw ConfigError(detail::concat("mode must be spatial or temporal, got '", mode, "'"));
    const Scenario scn = make_scenario(rc.scenario);
    require(static_cast<bool>(scn.exact_sigma) && static_cast<bool>(scn.exact_div_sigma),
            "scenario '", scn.name, "' provides no exact solution; convergence needs one");
    detail::create_output_dir(rc.output.directory);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> failures;
    std::vector<std::pair<std::string, RateTable>> blocks;
    RateTable all;

    auto run_point = [&](const std::string& sub, int degree, double dt,
                         const std::shared_ptr<const PolyMesh>& mesh,
                         std::vector<RatePoint>& pts) {
        RunConfig point = rc;
        point.degree = degree;
        point.dt = dt;
        point.output.directory = rc.output.directory + "/" + sub;
        point.output.errors = true;
        point.output.recovery = false;
        point.output.stability = false;
        point.output.vtk_every = 0;
        try {
            const PointOutcome out = execute_run(scn, mesh, point);
            pts.push_back(rate_point(out.errors));
            std::cout << "convergence: " << sub << " err_energy=" << out.errors.err_energy
                      << " (" << out.wall_seconds << "s)\n";
        } catch (const std::exception& e) {
            failures.push_back(sub + ": " + e.what());
            std::cerr << "convergence: point " << sub << " failed: " << e.what() << "\n";
        }
    };

    if (mode == "spatial") {
        if (rc.mesh.source != MeshSource::Generate)
            throw ConfigError("spatial sweeps vary the element count; [mesh] source must be "
                              "generate");
        if (rc.sweep.degrees.empty())
            throw ConfigError("spatial sweep needs [sweep] degrees");
        if (rc.sweep.cells.size() < 2)
            throw ConfigError("spatial sweep needs at least 2 entries in [sweep] cells");
        // One mesh per target size, shared across degrees.
        std::vector<std::shared_ptr<const PolyMesh>> meshes;
        for (int n : rc.sweep.cells) {
            MeshConfig mc = rc.mesh;
            mc.n = n;
            meshes.push_back(acquire_mesh(mc, scn));
        }
        for (int p : rc.sweep.degrees) {
            std::vector<RatePoint> pts;
            for (std::size_t i = 0; i < rc.sweep.cells.size(); ++i)
                run_point(detail::dir_name_spatial(p, rc.sweep.cells[i]), p, rc.dt, meshes[i],
                          pts);
            RateTable table = convergence_rates(std::move(pts), RateAxis::MeshSize);
            blocks.push_back({detail::concat("degree p = ", p), table});
            all.rows.insert(all.rows.end(), table.rows.begin(), table.rows.end());
        }
        detail::write_text_file(rc.output.directory + "/rates.dat",
                                detail::gnuplot_blocks(blocks, "h"));
    } else {
        if (rc.sweep.dts.size() < 2)
            throw ConfigError("temporal sweep needs at least 2 entries in [sweep] dts");
        const auto mesh = acquire_mesh(rc.mesh, scn);
        std::vector<RatePoint> pts;
        for (double dt : rc.sweep.dts)
            run_point(detail::dir_name_temporal(dt), rc.degree, dt, mesh, pts);
        RateTable table = convergence_rates(std::move(pts), RateAxis::TimeStep);
        blocks.push_back(
            {detail::concat("degree p = ", rc.degree, ", theta = ", rc.theta), table});
        all.rows = table.rows;
        detail::write_text_file(rc.output.directory + "/rates.dat",
                                detail::gnuplot_blocks(blocks, "dt"));
    }

    export_csv(all, rc.output.directory + "/rates.csv");

    JsonWriter j;
    j.begin_object();
    j.field("mode", mode);
    j.field("scenario", scn.name);
    j.field("points_total",
            static_cast<long long>(all.rows.size() + failures.size()));
    j.field("points_failed", static_cast<long long>(failures.size()));
    j.key("failures");
    j.begin_array();
    for (const std::string& f : failures) j.value_str(f);
    j.end_array();
    j.field("wall_seconds",
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    j.field("worker_cap", worker_cap());
    j.field("workers", 1);
    j.end_object();
    detail::write_text_file(rc.output.directory + "/sweep.json", j.str());

    std::cout << "convergence: wrote '" << rc.output.directory << "/rates.csv' ("
              << all.rows.size() << " points, " << failures.size() << " failed)\n";
    if (!failures.empty()) {
        std::ostringstream msg;
        msg << failures.size() << " sweep point(s) failed:";
        for (const std::string& f : failures) msg << "\n  " << f;
        throw Error(msg.str());
    }
}

// ---------------------------------------------------------------------------
// Command-line entry point: psdg <command> --config <path> [--mode m]
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.
// ---------------------------------------------------------------------------
inline const char* cli_usage() {
    return "usage: psdg <command> --config <path> [--mode spatial|temporal]\n"
           "\n"
           "commands:\n"
           "  mesh-gen     generate a polygonal mesh and write it to [mesh] output\n"
           "  run          run one simulation and write reports to [output] directory\n"
           "  convergence  run a mesh/time-step sweep (--mode required)\n"
           "\n"
           "exit codes: 0 success, 1 configuration error, 2 runtime failure\n";
}

inline int cli_main(int argc, const char* const* argv) {
    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        for (const std::string& a : args)
            if (a == "--help" || a == "-h") {
                std::cout << cli_usage();
                return 0;
            }
        if (args.empty()) throw ConfigError(detail::concat("missing command\n", cli_usage()));
        const std::string command = args[0];
        if (command != "mesh-gen" && command != "run" && command != "convergence")
            throw ConfigError(
                detail::concat("unknown command '", command, "'\n", cli_usage()));
        std::string config_path, mode;
        for (std::size_t i = 1; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) {
                config_path = args[++i];
            } else if (args[i] == "--mode" && i + 1 < args.size()) {
                mode = args[++i];
            } else {
                throw ConfigError(
                    detail::concat("unexpected argument '", args[i], "'\n", cli_usage()));
            }
        }
        if (config_path.empty()) throw ConfigError("missing --config <path>");
        const RunConfig rc = parse_config(config_path);
        if (command == "mesh-gen") {
            cmd_mesh_gen(rc);
        } else if (command == "run") {
            cmd_run(rc);
        } else {
            if (mode.empty())
                throw ConfigError("convergence requires --mode spatial or --mode temporal");
            cmd_convergence(rc, mode);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace psdg
