// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "psdg/assembly.hpp"
#include "psdg/error.hpp"
#include "psdg/scenario.hpp"
#include "psdg/solver.hpp"
#include "psdg/space.hpp"

namespace psdg {

// ---------------------------------------------------------------------------
// Sample cloud: the sub-triangulation vertices of every element (its polygon
// vertices plus the centroid), stored element-major.  Points shared by two
// elements are duplicated on purpose: each copy is evaluated with its owner
// element's polynomial, which is what a discontinuous field calls for, and
// the duplication gives the VTK cells a consistent per-element connectivity.
// ---------------------------------------------------------------------------
struct SampleCloud {
    std::vector<Vec2> points;
    std::vector<int> owner;            // element index per point
    std::vector<std::size_t> base;     // first point of each element

    std::size_t size() const { return points.size(); }
};

inline SampleCloud build_sample_cloud(const PolyMesh& mesh) {
    SampleCloud cloud;
    cloud.base.reserve(static_cast<std::size_t>(mesh.n_elements()));
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const Element& el = mesh.elements[static_cast<std::size_t>(e)];
        cloud.base.push_back(cloud.points.size());
        for (int v : el.verts) {
            cloud.points.push_back(mesh.vertices[static_cast<std::size_t>(v)]);
            cloud.owner.push_back(e);
        }
        cloud.points.push_back(el.centroid);
        cloud.owner.push_back(e);
    }
    return cloud;
}

// ---------------------------------------------------------------------------
// Pressure recovery: p_h = -(1/2) tr(sigma_h) pointwise.
// ---------------------------------------------------------------------------
inline std::vector<double> recover_pressure(const DgSpace& space, const DofVector& sigma,
                                            const SampleCloud& cloud) {
    space.check_size(sigma);
    std::vector<double> p(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Mat2 s = space.evaluate(sigma, cloud.owner[i], cloud.points[i]);
        p[i] = -0.5 * (s(0, 0) + s(1, 1));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Velocity recovery: u(t_n) = u_0 + composite trapezoid of g = div_h sigma + f
// at the sample points, fed one accepted time level at a time, in order.
// ---------------------------------------------------------------------------
class VelocityAccumulator {
public:
    VelocityAccumulator(const DgSpace& space, const Scenario& scn, const SampleCloud& cloud)
        : space_(space), scn_(scn), cloud_(cloud) {
        velocity_.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
            velocity_[i] = scn.exact_velocity ? scn.exact_velocity(cloud.points[i], 0.0)
                                              : Vec2{0.0, 0.0};
    }

    // Accept time level `step` (0 = initial state).  Levels must arrive in
    // order; anything else is a contract violation.
    void accept(int step, double t, const DofVector& sigma) {
        require(step == next_step_, "accumulate_velocity: time levels must be accepted in order",
                " starting at 0: expected step ", next_step_, ", got ", step);
        space_.check_size(sigma);
        std::vector<Vec2> g(cloud_.size());
        for (std::size_t i = 0; i < cloud_.size(); ++i) {
            Vec2 v = space_.evaluate_div(sigma, cloud_.owner[i], cloud_.points[i]);
            if (scn_.primal_source) {
                const Vec2 f = scn_.primal_source(cloud_.points[i], t);
                v.x += f.x;
                v.y += f.y;
            }
            g[i] = v;
        }
        if (step > 0) {
            const double w = 0.5 * (t - prev_t_);
            for (std::size_t i = 0; i < cloud_.size(); ++i) {
                velocity_[i].x += w * (g[i].x + prev_g_[i].x);
                velocity_[i].y += w * (g[i].y + prev_g_[i].y);
            }
        }
        prev_g_ = std::move(g);
        prev_t_ = t;
        ++next_step_;
    }

    const std::vector<Vec2>& velocity() const { return velocity_; }
    int accepted_steps() const { return next_step_; }

private:
    const DgSpace& space_;
    const Scenario& scn_;
    const SampleCloud& cloud_;
    std::vector<Vec2> velocity_;
    std::vector<Vec2> prev_g_;
    double prev_t_ = 0.0;
    int next_step_ = 0;
};

// Recovered fields at the sample cloud, ready for export.
struct RecoveredFields {
    std::vector<double> pressure;
    std::vector<Vec2> velocity;
};

// ---------------------------------------------------------------------------
// Energy error of a trajectory against the exact solution:
//   ||e||_E^2 = max_n ||mu^{-1/2} dev e^n||^2 + dt * sum_{n>=1} |e^n|_dG^2,
// the max running over every stored level including t_0.  Interior jumps come
// from sigma_h alone (the exact field is continuous); Neumann faces keep the
// full boundary trace (sigma_ex - sigma_h) n.
// ---------------------------------------------------------------------------
struct ErrorReport {
    std::vector<double> times;
    std::vector<double> dev_err;   // per level: ||mu^{-1/2} dev e^n||
    std::vector<double> dg_err;    // per level: |e^n|_dG
    double err_energy = 0.0;       // ||e||_E
    double err_dev_max = 0.0;      // max_n of dev_err
    double err_div = 0.0;          // sqrt(dt * sum_{n>=1} dg_err^2)
    double h = 0.0;
    int p = 0;
    double dt = 0.0;
};

namespace detail {

// ||mu^{-1/2} dev(sigma_ex(t) - sigma_h)||_L2 by volume quadrature.
inline double dev_error_sq(const DgSpace& space, const DofVector& u,
                           const std::function<Mat2(Vec2)>& exact, double mu) {
    double s = 0.0;
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        const std::vector<double>& val = space.volume_values(e);
        const int N = space.n_scalar_modes(e);
        const std::size_t off = space.elem_offset(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double* phi = val.data() + q * static_cast<std::size_t>(N);
            Mat2 uh;
            for (int c = 0; c < 4; ++c) {
                double v = 0.0;
                for (int m = 0; m < N; ++m)
                    v += u[off + static_cast<std::size_t>(c * N + m)] * phi[m];
                uh(c / 2, c % 2) = v;
            }
            const Mat2 d = exact(rule.pts[q]) - uh;
            const double tr2 = 0.5 * (d(0, 0) + d(1, 1));
            const double dxx = d(0, 0) - tr2;
            const double dyy = d(1, 1) - tr2;
            s += rule.wts[q] * (dxx * dxx + dyy * dyy + d(0, 1) * d(0, 1) + d(1, 0) * d(1, 0));
        }
    }
    return s / mu;
}

// |e|_dG^2 with e = sigma_ex - sigma_h: exact divergence minus the discrete
// one in the volume, sigma_h jumps on interior faces, (sigma_ex - sigma_h) n
// on Neumann faces.
inline double dg_error_sq(const DgSpace& space, const DofVector& u,
                          const std::function<Mat2(Vec2)>& exact,
                          const std::function<Vec2(Vec2)>& exact_div, const PenaltyParams& pen) {
    const PolyMesh& mesh = space.mesh();
    double s = 0.0;
    std::vector<double> val, gx, gy, vm;
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        space.eval_basis(e, rule.pts.data(), rule.pts.size(), val, &gx, &gy);
        const int N = space.n_scalar_modes(e);
        const double* ue = u.data() + space.elem_offset(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Vec2 dh = combine_div(ue, gx.data() + q * static_cast<std::size_t>(N),
                                        gy.data() + q * static_cast<std::size_t>(N), N);
            const Vec2 dx = exact_div(rule.pts[q]);
            const double ex = dx.x - dh.x;
            const double ey = dx.y - dh.y;
            s += rule.wts[q] * (ex * ex + ey * ey);
        }
    }
    for (int f = 0; f < mesh.n_faces(); ++f) {
        const Face& face = mesh.faces[static_cast<std::size_t>(f)];
        if (face.kind == FaceKind::Dirichlet) continue;
        const QuadRule& rule = space.face_rule(f);
        const double gamma = penalty_gamma(space, f, pen);
        space.eval_basis(face.plus, rule.pts.data(), rule.pts.size(), val);
        const int Np = space.n_scalar_modes(face.plus);
        const double* up = u.data() + space.elem_offset(face.plus);
        const bool interior = face.kind == FaceKind::Interior;
        int Nm = 0;
        const double* um = nullptr;
        if (interior) {
            space.eval_basis(face.minus, rule.pts.data(), rule.pts.size(), vm);
            Nm = space.n_scalar_modes(face.minus);
            um = u.data() + space.elem_offset(face.minus);
        }
        for (std::size_t q = 0; q < rule.size(); ++q) {
            Mat2 jump = combine_tensor(up, val.data() + q * static_cast<std::size_t>(Np), Np);
            if (interior) {
                // e's interior jump is -[[sigma_h]]; the square drops the sign.
                jump = jump - combine_tensor(um, vm.data() + q * static_cast<std::size_t>(Nm), Nm);
            } else {
                jump = exact(rule.pts[q]) - jump;
            }
            const Vec2 jn{jump(0, 0) * face.normal.x + jump(0, 1) * face.normal.y,
                          jump(1, 0) * face.normal.x + jump(1, 1) * face.normal.y};
            s += rule.wts[q] * gamma * (jn.x * jn.x + jn.y * jn.y);
        }
    }
    return s;
}

} // namespace detail

inline ErrorReport energy_error(const DgSpace& space, const History& history, const Scenario& scn,
                                const PenaltyParams& pen) {
    require(static_cast<bool>(scn.exact_sigma) && static_cast<bool>(scn.exact_div_sigma),
            "energy_error requires the scenario's exact solution "
            "(exact_sigma and exact_div_sigma)");
    require(!history.states.empty() && history.states.size() == history.times.size(),
            "energy_error: history must hold one state per time");
    ErrorReport rep;
    rep.times = history.times;
    const std::size_t n_levels = history.states.size();
    rep.dev_err.resize(n_levels);
    rep.dg_err.resize(n_levels);
    rep.dt = n_levels >= 2 ? history.times[1] - history.times[0] : 0.0;
    const PolyMesh& mesh = space.mesh();
    for (const Element& el : mesh.elements) rep.h = std::max(rep.h, el.h);
    for (int e = 0; e < space.n_elements(); ++e) rep.p = std::max(rep.p, space.degree(e));

    double max_dev_sq = 0.0;
    double sum_dg_sq = 0.0;
    for (std::size_t n = 0; n < n_levels; ++n) {
        const double t = history.times[n];
        const auto ex = [&](Vec2 x) { return scn.exact_sigma(x, t); };
        const auto exd = [&](Vec2 x) { return scn.exact_div_sigma(x, t); };
        const double dev_sq = detail::dev_error_sq(space, history.states[n], ex, scn.mu);
        const double dg_sq = detail::dg_error_sq(space, history.states[n], ex, exd, pen);
        rep.dev_err[n] = std::sqrt(dev_sq);
        rep.dg_err[n] = std::sqrt(dg_sq);
        max_dev_sq = std::max(max_dev_sq, dev_sq);
        if (n >= 1) sum_dg_sq += dg_sq;
    }
    rep.err_dev_max = std::sqrt(max_dev_sq);
    rep.err_div = std::sqrt(rep.dt * sum_dg_sq);
    rep.err_energy = std::sqrt(max_dev_sq + rep.dt * sum_dg_sq);
    return rep;
}

// ---------------------------------------------------------------------------
// Discrete stability functional: the ratio of the two sides of the a-priori
// bound, measurable on any run.
//   lhs = max_{n>=1} ||mu^{-1/2} dev sigma_h^n||^2 + dt * sum_{l>=1} |sigma_h^l|_dG^2
//   rhs = ||mu^{-1/2} dev sigma_{0,h}||^2 + dt * sum_{l>=1} ||F^l||^2
// ---------------------------------------------------------------------------
struct StabilityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double constant = 0.0; // lhs / rhs, 0 when rhs == 0
};

inline StabilityReport stability_report(const DgSpace& space, const Scenario& scn,
                                        const History& history, const PenaltyParams& pen) {
    require(!history.states.empty() && history.states.size() == history.times.size(),
            "stability_report: history must hold one state per time");
    StabilityReport rep;
    const std::size_t n_levels = history.states.size();
    const double dt = n_levels >= 2 ? history.times[1] - history.times[0] : 0.0;
    double max_dev_sq = 0.0;
    double sum_dg_sq = 0.0;
    double sum_src_sq = 0.0;
    for (std::size_t n = 1; n < n_levels; ++n) {
        const double dev = dev_energy_norm(space, history.states[n], scn.mu);
        max_dev_sq = std::max(max_dev_sq, dev * dev);
        sum_dg_sq += dg_seminorm_sq(space, history.states[n], pen);
        const double t = history.times[n];
        const double f = l2_norm_of_field(space, [&](Vec2 x) { return scn.source(x, t); });
        sum_src_sq += f * f;
    }
    const double dev0 = dev_energy_norm(space, history.states[0], scn.mu);
    rep.lhs = max_dev_sq + dt * sum_dg_sq;
    rep.rhs = dev0 * dev0 + dt * sum_src_sq;
    rep.constant = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Rate tables and CSV round-trip.
// ---------------------------------------------------------------------------
struct RatePoint {
    double h = 0.0;
    int p = 0;
    double dt = 0.0;
    double err_energy = 0.0;
    double err_dev_max = 0.0;
    double err_div = 0.0;
    double rate = std::numeric_limits<double>::quiet_NaN();
};

struct RateTable {
    std::vector<RatePoint> rows;
};

enum class RateAxis { MeshSize, TimeStep };

inline RatePoint rate_point(const ErrorReport& rep) {
    RatePoint pt;
    pt.h = rep.h;
    pt.p = rep.p;
    pt.dt = rep.dt;
    pt.err_energy = rep.err_energy;
    pt.err_dev_max = rep.err_dev_max;
    pt.err_div = rep.err_div;
    return pt;
}

// Fitted rate between consecutive entries, attached to the later row:
// rate_i = log(err_{i-1}/err_i) / log(x_{i-1}/x_i).  A single entry keeps
// its NaN rate (printed as "nan").
inline RateTable convergence_rates(std::vector<RatePoint> points, RateAxis axis) {
    RateTable table;
    table.rows = std::move(points);
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        const RatePoint& a = table.rows[i - 1];
        RatePoint& b = table.rows[i];
        const double xa = axis == RateAxis::MeshSize ? a.h : a.dt;
        const double xb = axis == RateAxis::MeshSize ? b.h : b.dt;
        require(xa > 0.0 && xb > 0.0, "convergence_rates: abscissae must be positive");
        require(xa != xb, "convergence_rates: repeated abscissa ", xa);
        // A vanishing error (solution representable exactly) has no rate.
        if (a.err_energy > 0.0 && b.err_energy > 0.0)
            b.rate = std::log(a.err_energy / b.err_energy) / std::log(xa / xb);
    }
    return table;
}

namespace detail {

// %.12g survives a print -> parse -> print round trip bitwise: 12 significant
// decimal digits parse back to a double that prints the same 12 digits.
inline std::string format_g12(double v) {
    if (std::isnan(v)) return "nan";
    if (v == 0.0) return "0"; // avoid "-0"
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline double parse_csv_double(const std::string& tok, const std::string& path, int line) {
    if (tok == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        fail(path, ":", line, ": invalid number '", tok, "'");
    }
    require(used == tok.size(), path, ":", line, ": invalid number '", tok, "'");
    return v;
}

} // namespace detail

inline constexpr const char* kCsvHeader = "h,p,dt,err_energy,err_dev_max,err_div,rate";

inline void export_csv(const RateTable& table, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "failed to open '", path, "' for writing");
    out << kCsvHeader << "\n";
    for (const RatePoint& r : table.rows) {
        out << detail::format_g12(r.h) << ',' << r.p << ',' << detail::format_g12(r.dt) << ','
            << detail::format_g12(r.err_energy) << ',' << detail::format_g12(r.err_dev_max) << ','
            << detail::format_g12(r.err_div) << ',' << detail::format_g12(r.rate) << "\n";
    }
    require(out.good(), "failed while writing '", path, "'");
}

inline RateTable import_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "failed to open '", path, "' for reading");
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "'", path, "' is empty");
    require(line == kCsvHeader, path, ":1: expected header '", kCsvHeader, "', got '", line, "'");
    RateTable table;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> tok;
        std::string cur;
        std::istringstream ls(line);
        while (std::getline(ls, cur, ',')) tok.push_back(cur);
        require(tok.size() == 7, path, ":", lineno, ": expected 7 columns, got ", tok.size());
        RatePoint r;
        r.h = detail::parse_csv_double(tok[0], path, lineno);
        r.p = static_cast<int>(detail::parse_csv_double(tok[1], path, lineno));
        r.dt = detail::parse_csv_double(tok[2], path, lineno);
        r.err_energy = detail::parse_csv_double(tok[3], path, lineno);
        r.err_dev_max = detail::parse_csv_double(tok[4], path, lineno);
        r.err_div = detail::parse_csv_double(tok[5], path, lineno);
        r.rate = detail::parse_csv_double(tok[6], path, lineno);
        table.rows.push_back(r);
    }
    return table;
}

// ---------------------------------------------------------------------------
// VTK export: legacy ASCII 2.0 unstructured grid over the sub-triangulation,
// with the stress components, recovered pressure, and recovered velocity as
// point data.
// ---------------------------------------------------------------------------
inline void export_vtk(const DgSpace& space, const SampleCloud& cloud, const DofVector& sigma,
                       const RecoveredFields& fields, const std::string& path) {
    space.check_size(sigma);
    require(fields.pressure.size() == cloud.size(),
            "export_vtk: pressure samples (", fields.pressure.size(),
            ") do not match the sample cloud (", cloud.size(), ")");
    require(fields.velocity.size() == cloud.size(),
            "export_vtk: velocity samples (", fields.velocity.size(),
            ") do not match the sample cloud (", cloud.size(), ")");
    const PolyMesh& mesh = space.mesh();
    std::size_t n_cells = 0;
    for (const Element& el : mesh.elements) n_cells += el.subtris.size();

    std::ofstream out(path);
    require(out.good(), "failed to open '", path, "' for writing");
    out << "# vtk DataFile Version 2.0\n";
    out << "pseudo-stress fields\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << cloud.size() << " double\n";
    for (const Vec2& pt : cloud.points)
        out << detail::format_g12(pt.x) << ' ' << detail::format_g12(pt.y) << " 0\n";
    out << "CELLS " << n_cells << ' ' << 4 * n_cells << "\n";
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const Element& el = mesh.elements[static_cast<std::size_t>(e)];
        const std::size_t base = cloud.base[static_cast<std::size_t>(e)];
        for (const Triangle& tri : el.subtris)
            out << "3 " << base + static_cast<std::size_t>(tri[0]) << ' '
                << base + static_cast<std::size_t>(tri[1]) << ' '
                << base + static_cast<std::size_t>(tri[2]) << "\n";
    }
    out << "CELL_TYPES " << n_cells << "\n";
    for (std::size_t c = 0; c < n_cells; ++c) out << "5\n";

    std::vector<Mat2> sig(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        sig[i] = space.evaluate(sigma, cloud.owner[i], cloud.points[i]);

    out << "POINT_DATA " << cloud.size() << "\n";
    const char* names[4] = {"sigma_xx", "sigma_xy", "sigma_yx", "sigma_yy"};
    for (int c = 0; c < 4; ++c) {
        out << "SCALARS " << names[c] << " double 1\n";
        out << "LOOKUP_TABLE default\n";
        for (std::size_t i = 0; i < cloud.size(); ++i)
            out << detail::format_g12(sig[i](c / 2, c % 2)) << "\n";
    }
    out << "SCALARS pressure double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < cloud.size(); ++i)
        out << detail::format_g12(fields.pressure[i]) << "\n";
    out << "VECTORS velocity double\n";
    for (std::size_t i = 0; i < cloud.size(); ++i)
        out << detail::format_g12(fields.velocity[i].x) << ' '
            << detail::format_g12(fields.velocity[i].y) << " 0\n";
    require(out.good(), "failed while writing '", path, "'");
}

} // namespace psdg
