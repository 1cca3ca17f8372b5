// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "psdg/error.hpp"
#include "psdg/geometry.hpp"
#include "psdg/mesh.hpp"

namespace psdg {

// Problem data for the unsteady pseudo-stress system
//   mu^{ -1} d/dt dev(sigma) - grad(div sigma) = F   in Omega x (0,T],
//   div sigma = g_D on the Dirichlet part, sigma n = g_N on the Neumann part,
// plus optional exact-solution hooks used by the verification harness.
struct Scenario {
    std::string name;
    double mu = 1.0;
    DomainSpec domain;
    BoundaryClassifier classifier;

    std::function<Mat2(Vec2, double)> source;            // F(x, t)
    std::function<Mat2(Vec2)> initial;                   // sigma_0(x)
    std::function<Vec2(Vec2, double)> dirichlet;         // g_D(x, t)
    std::function<Vec2(Vec2, Vec2, double)> neumann;     // g_N(x, n, t)

    std::function<Mat2(Vec2, double)> exact_sigma;       // optional below here
    std::function<Mat2(Vec2, double)> exact_dsigma_dt;
    std::function<Vec2(Vec2, double)> exact_div_sigma;
    std::function<double(Vec2, double)> exact_pressure;
    std::function<Vec2(Vec2, double)> exact_velocity;
    std::function<Vec2(Vec2, double)> primal_source;     // f in u_t - div(mu grad u) + grad p = f

    bool has_exact() const { return static_cast<bool>(exact_sigma); }
};

namespace detail {

inline void check_scenario(const Scenario& s) {
    require(s.mu > 0.0, "scenario '", s.name, "': viscosity must be positive, got ", s.mu);
    require(static_cast<bool>(s.source) && static_cast<bool>(s.initial) &&
                static_cast<bool>(s.dirichlet) && static_cast<bool>(s.neumann),
            "scenario '", s.name, "': incomplete data closures");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Polynomial (monomial) calculus: c * x^i * y^j * t^k terms.  Powerful enough
// to express the built-in polynomial solution and user-defined custom data,
// with exact differentiation so all derived data stay consistent.

struct MonoTerm {
    double c = 0.0;
    int i = 0, j = 0, k = 0;
};
using MonoPoly = std::vector<MonoTerm>;

inline double mono_eval(const MonoPoly& p, Vec2 x, double t) {
    auto ipow = [](double b, int e) {
        double r = 1.0;
        for (int q = 0; q < e; ++q) r *= b;
        return r;
    };
    double s = 0.0;
    for (const MonoTerm& m : p) s += m.c * ipow(x.x, m.i) * ipow(x.y, m.j) * ipow(t, m.k);
    return s;
}

inline MonoPoly mono_dx(const MonoPoly& p) {
    MonoPoly r;
    for (const MonoTerm& m : p)
        if (m.i > 0) r.push_back({m.c * m.i, m.i - 1, m.j, m.k});
    return r;
}

inline MonoPoly mono_dy(const MonoPoly& p) {
    MonoPoly r;
    for (const MonoTerm& m : p)
        if (m.j > 0) r.push_back({m.c * m.j, m.i, m.j - 1, m.k});
    return r;
}

inline MonoPoly mono_dt(const MonoPoly& p) {
    MonoPoly r;
    for (const MonoTerm& m : p)
        if (m.k > 0) r.push_back({m.c * m.k, m.i, m.j, m.k - 1});
    return r;
}

inline MonoPoly mono_add(MonoPoly a, const MonoPoly& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline MonoPoly mono_scale(MonoPoly a, double s) {
    for (MonoTerm& m : a) m.c *= s;
    return a;
}

inline int mono_space_degree(const MonoPoly& p) {
    int d = 0;
    for (const MonoTerm& m : p) d = std::max(d, m.i + m.j);
    return d;
}

// ---------------------------------------------------------------------------
// Built-in scenarios.

// Smooth manufactured solution on the unit square:
//   sigma_ex = sin(2t) * diag(s, -s),  s = sin(pi x) sin(pi y),
// traceless, so the recovered pressure vanishes.  Dirichlet on the top and
// right sides, Neumann on the bottom and left.  The pseudo-stress field is
// manufactured directly (it is not the gradient of any velocity), so no
// velocity/pressure recovery data are attached.
inline Scenario make_manufactured_sine(double mu = 1.0) {
    Scenario s;
    s.name = "manufactured_sine";
    s.mu = mu;
    s.domain = DomainSpec{0.0, 0.0, 1.0, 1.0};
    s.classifier.regions = {
        BoundaryRegion{AxisSegment{1, 1.0, 0.0, 1.0}, FaceKind::Dirichlet}, // top
        BoundaryRegion{AxisSegment{0, 1.0, 0.0, 1.0}, FaceKind::Dirichlet}, // right
        BoundaryRegion{AxisSegment{1, 0.0, 0.0, 1.0}, FaceKind::Neumann},   // bottom
        BoundaryRegion{AxisSegment{0, 0.0, 0.0, 1.0}, FaceKind::Neumann},   // left
    };

    auto sig = [](Vec2 x, double t) {
        const double v = std::sin(2.0 * t) * std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
        Mat2 m;
        m(0, 0) = v;
        m(0, 1) = 0.0;
        m(1, 0) = 0.0;
        m(1, 1) = -v;
        return m;
    };
    auto dsig = [](Vec2 x, double t) {
        const double v = 2.0 * std::cos(2.0 * t) * std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
        Mat2 m;
        m(0, 0) = v;
        m(0, 1) = 0.0;
        m(1, 0) = 0.0;
        m(1, 1) = -v;
        return m;
    };
    auto divsig = [](Vec2 x, double t) {
        const double a = std::sin(2.0 * t) * M_PI;
        return Vec2{a * std::cos(M_PI * x.x) * std::sin(M_PI * x.y),
                    -a * std::sin(M_PI * x.x) * std::cos(M_PI * x.y)};
    };

    s.source = [mu, dsig](Vec2 x, double t) {
        // F = mu^{-1} d/dt dev(sigma) - grad(div sigma); sigma is traceless.
        const double ss = std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
        const double cc = std::cos(M_PI * x.x) * std::cos(M_PI * x.y);
        const double pp = M_PI * M_PI * std::sin(2.0 * t);
        Mat2 m = dsig(x, t);
        m(0, 0) = m(0, 0) / mu + pp * ss;
        m(0, 1) = m(0, 1) / mu - pp * cc;
        m(1, 0) = m(1, 0) / mu + pp * cc;
        m(1, 1) = m(1, 1) / mu - pp * ss;
        return m;
    };
    s.initial = [sig](Vec2 x) { return sig(x, 0.0); };
    s.dirichlet = [divsig](Vec2 x, double t) { return divsig(x, t); };
    s.neumann = [sig](Vec2 x, Vec2 n, double t) {
        const Mat2 m = sig(x, t);
        return Vec2{m(0, 0) * n.x + m(0, 1) * n.y, m(1, 0) * n.x + m(1, 1) * n.y};
    };
    s.exact_sigma = sig;
    s.exact_dsigma_dt = dsig;
    s.exact_div_sigma = divsig;
    s.exact_pressure = [](Vec2, double) { return 0.0; };
    detail::check_scenario(s);
    return s;
}

// Polynomial solution on the unit square, quadratic in time and linear in
// space, used as the Crank-Nicolson exactness and recovery oracle:
//   sigma_ex = mu t^2 [[1-y, 1-x], [0, 1+y]],  p = -mu t^2,
//   u = t^2 ((1-x) y, y^2 / 2).
// Neumann on the right side (x = 1), Dirichlet elsewhere.
inline Scenario make_recovery_poly(double mu = 1.0) {
    Scenario s;
    s.name = "recovery_poly";
    s.mu = mu;
    s.domain = DomainSpec{0.0, 0.0, 1.0, 1.0};
    s.classifier.regions = {
        BoundaryRegion{AxisSegment{0, 1.0, 0.0, 1.0}, FaceKind::Neumann},   // right
        BoundaryRegion{AxisSegment{1, 0.0, 0.0, 1.0}, FaceKind::Dirichlet}, // bottom
        BoundaryRegion{AxisSegment{1, 1.0, 0.0, 1.0}, FaceKind::Dirichlet}, // top
        BoundaryRegion{AxisSegment{0, 0.0, 0.0, 1.0}, FaceKind::Dirichlet}, // left
    };

    auto sig = [mu](Vec2 x, double t) {
        Mat2 m;
        m(0, 0) = mu * t * t * (1.0 - x.y);
        m(0, 1) = mu * t * t * (1.0 - x.x);
        m(1, 0) = 0.0;
        m(1, 1) = mu * t * t * (1.0 + x.y);
        return m;
    };

    s.source = [](Vec2 x, double t) {
        // F = mu^{-1} d/dt dev(sigma) - grad(div sigma) = 2t [[-y, 1-x], [0, y]].
        Mat2 m;
        m(0, 0) = -2.0 * t * x.y;
        m(0, 1) = 2.0 * t * (1.0 - x.x);
        m(1, 0) = 0.0;
        m(1, 1) = 2.0 * t * x.y;
        return m;
    };
    s.initial = [sig](Vec2 x) { return sig(x, 0.0); };
    s.dirichlet = [mu](Vec2, double t) { return Vec2{0.0, mu * t * t}; };
    s.neumann = [sig](Vec2 x, Vec2 n, double t) {
        const Mat2 m = sig(x, t);
        return Vec2{m(0, 0) * n.x + m(0, 1) * n.y, m(1, 0) * n.x + m(1, 1) * n.y};
    };
    s.exact_sigma = sig;
    s.exact_dsigma_dt = [mu](Vec2 x, double t) {
        Mat2 m;
        m(0, 0) = 2.0 * mu * t * (1.0 - x.y);
        m(0, 1) = 2.0 * mu * t * (1.0 - x.x);
        m(1, 0) = 0.0;
        m(1, 1) = 2.0 * mu * t * (1.0 + x.y);
        return m;
    };
    s.exact_div_sigma = [mu](Vec2, double t) { return Vec2{0.0, mu * t * t}; };
    s.exact_pressure = [mu](Vec2, double t) { return -mu * t * t; };
    s.exact_velocity = [](Vec2 x, double t) {
        return Vec2{t * t * (1.0 - x.x) * x.y, 0.5 * t * t * x.y * x.y};
    };
    s.primal_source = [mu](Vec2 x, double t) {
        return Vec2{2.0 * t * (1.0 - x.x) * x.y, t * x.y * x.y - mu * t * t};
    };
    detail::check_scenario(s);
    return s;
}

// Flow past a cylinder: rectangular channel (-1,4) x (-1,1) with a disk of
// radius 0.2 at the origin removed.  Inflow profile on x = -1, outflow
// (traction-free) on x = 4, no-slip walls and cylinder.  Starts at rest.
inline Scenario make_cylinder(double mu = 2.0) {
    Scenario s;
    s.name = "cylinder";
    s.mu = mu;
    s.domain = DomainSpec{-1.0, -1.0, 4.0, 1.0};
    s.domain.hole_center = Vec2{0.0, 0.0};
    s.domain.hole_radius = 0.2;
    s.classifier.regions = {
        BoundaryRegion{AxisSegment{0, 4.0, -1.0, 1.0}, FaceKind::Neumann},    // outflow
        BoundaryRegion{AxisSegment{0, -1.0, -1.0, 1.0}, FaceKind::Dirichlet}, // inflow
        BoundaryRegion{AxisSegment{1, -1.0, -1.0, 4.0}, FaceKind::Dirichlet}, // lower wall
        BoundaryRegion{AxisSegment{1, 1.0, -1.0, 4.0}, FaceKind::Dirichlet},  // upper wall
        BoundaryRegion{CircleRegion{Vec2{0.0, 0.0}, 0.2, 1e-3}, FaceKind::Dirichlet},
    };

    s.source = [](Vec2, double) { return Mat2{}; };
    s.initial = [](Vec2) { return Mat2{}; };
    s.dirichlet = [](Vec2 x, double) {
        // div sigma = ((1 - y^2), 0) on the inflow, zero on the other walls.
        if (std::abs(x.x + 1.0) < 1e-8) return Vec2{1.0 - x.y * x.y, 0.0};
        return Vec2{0.0, 0.0};
    };
    s.neumann = [](Vec2, Vec2, double) { return Vec2{0.0, 0.0}; };
    s.primal_source = [](Vec2, double) { return Vec2{0.0, 0.0}; };
    detail::check_scenario(s);
    return s;
}

// ---------------------------------------------------------------------------
// Custom scenario: exact pseudo-stress prescribed componentwise as polynomials
// in (x, y, t) on an axis-aligned rectangle; all problem data are derived by
// exact monomial calculus.  Sides are ordered bottom, right, top, left.

struct CustomScenarioSpec {
    double mu = 1.0;
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
    std::array<MonoPoly, 4> sigma; // components (1,1), (1,2), (2,1), (2,2)
    std::array<FaceKind, 4> sides = {FaceKind::Dirichlet, FaceKind::Dirichlet, FaceKind::Dirichlet,
                                     FaceKind::Dirichlet};
};

inline Scenario make_custom(const CustomScenarioSpec& spec) {
    Scenario s;
    s.name = "custom";
    s.mu = spec.mu;
    require(spec.x1 > spec.x0 && spec.y1 > spec.y0,
            "custom scenario: rectangle bounds are empty or inverted");
    s.domain = DomainSpec{spec.x0, spec.y0, spec.x1, spec.y1};
    for (FaceKind k : spec.sides)
        require(k == FaceKind::Dirichlet || k == FaceKind::Neumann,
                "custom scenario: each side must be dirichlet or neumann");
    s.classifier.regions = {
        BoundaryRegion{AxisSegment{1, spec.y0, spec.x0, spec.x1}, spec.sides[0]},
        BoundaryRegion{AxisSegment{0, spec.x1, spec.y0, spec.y1}, spec.sides[1]},
        BoundaryRegion{AxisSegment{1, spec.y1, spec.x0, spec.x1}, spec.sides[2]},
        BoundaryRegion{AxisSegment{0, spec.x0, spec.y0, spec.y1}, spec.sides[3]},
    };

    const std::array<MonoPoly, 4>& S = spec.sigma;
    // dev(sigma): half-difference on the diagonal, off-diagonal untouched.
    std::array<MonoPoly, 4> dev;
    dev[0] = mono_add(mono_scale(S[0], 0.5), mono_scale(S[3], -0.5));
    dev[1] = S[1];
    dev[2] = S[2];
    dev[3] = mono_add(mono_scale(S[3], 0.5), mono_scale(S[0], -0.5));

    // div sigma and grad(div sigma).
    const MonoPoly d0 = mono_add(mono_dx(S[0]), mono_dy(S[1]));
    const MonoPoly d1 = mono_add(mono_dx(S[2]), mono_dy(S[3]));
    const std::array<MonoPoly, 4> graddiv = {mono_dx(d0), mono_dy(d0), mono_dx(d1), mono_dy(d1)};

    std::array<MonoPoly, 4> F;
    for (int c = 0; c < 4; ++c)
        F[static_cast<std::size_t>(c)] =
            mono_add(mono_scale(mono_dt(dev[static_cast<std::size_t>(c)]), 1.0 / spec.mu),
                     mono_scale(graddiv[static_cast<std::size_t>(c)], -1.0));

    auto eval4 = [](const std::array<MonoPoly, 4>& P, Vec2 x, double t) {
        Mat2 m;
        for (int c = 0; c < 4; ++c) m(c / 2, c % 2) = mono_eval(P[static_cast<std::size_t>(c)], x, t);
        return m;
    };

    s.source = [F, eval4](Vec2 x, double t) { return eval4(F, x, t); };
    s.initial = [S, eval4](Vec2 x) { return eval4(S, x, 0.0); };
    s.dirichlet = [d0, d1](Vec2 x, double t) {
        return Vec2{mono_eval(d0, x, t), mono_eval(d1, x, t)};
    };
    s.neumann = [S, eval4](Vec2 x, Vec2 n, double t) {
        const Mat2 m = eval4(S, x, t);
        return Vec2{m(0, 0) * n.x + m(0, 1) * n.y, m(1, 0) * n.x + m(1, 1) * n.y};
    };
    s.exact_sigma = [S, eval4](Vec2 x, double t) { return eval4(S, x, t); };
    std::array<MonoPoly, 4> St;
    for (int c = 0; c < 4; ++c) St[static_cast<std::size_t>(c)] = mono_dt(S[static_cast<std::size_t>(c)]);
    s.exact_dsigma_dt = [St, eval4](Vec2 x, double t) { return eval4(St, x, t); };
    s.exact_div_sigma = [d0, d1](Vec2 x, double t) {
        return Vec2{mono_eval(d0, x, t), mono_eval(d1, x, t)};
    };
    const MonoPoly trace = mono_add(S[0], S[3]);
    s.exact_pressure = [trace](Vec2 x, double t) { return -0.5 * mono_eval(trace, x, t); };
    detail::check_scenario(s);
    return s;
}

} // namespace psdg
