// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "psdg/error.hpp"
#include "psdg/geometry.hpp"

namespace psdg {

// Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree 2m-1.
struct Quad1D {
    std::vector<double> x;
    std::vector<double> w;
};

inline Quad1D gauss_legendre(int m) {
    require(m >= 1, "gauss_legendre: need at least one point");
    Quad1D q;
    q.x.resize(static_cast<std::size_t>(m));
    q.w.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        // Newton iteration from the Chebyshev initial guess.
        double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(m) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= m; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(m) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        q.x[static_cast<std::size_t>(i)] = x;
        q.w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return q;
}

inline const Quad1D& gauss_legendre_cached(int m) {
    static std::map<int, Quad1D> cache;
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, gauss_legendre(m)).first;
    return it->second;
}

// Rule on the reference triangle (0,0)-(1,0)-(0,1); weights sum to 1/2.
struct TriRule {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> w;
};

// Collapsed (Duffy) tensor rule, exact for total degree <= order.  With the
// map (u, v) -> (u, v (1 - u)) a monomial of total degree q becomes degree
// q + 1 in u (Jacobian included) and q in v.
inline TriRule triangle_rule(int order) {
    require(order >= 0, "triangle_rule: negative order");
    const int mu = (order + 3) / 2; // 2 mu - 1 >= order + 1
    const int mv = (order + 2) / 2; // 2 mv - 1 >= order
    const Quad1D& qu = gauss_legendre_cached(mu);
    const Quad1D& qv = gauss_legendre_cached(mv);
    TriRule r;
    r.x.reserve(static_cast<std::size_t>(mu * mv));
    r.y.reserve(static_cast<std::size_t>(mu * mv));
    r.w.reserve(static_cast<std::size_t>(mu * mv));
    for (int i = 0; i < mu; ++i) {
        const double u = 0.5 * (qu.x[static_cast<std::size_t>(i)] + 1.0);
        const double wu = 0.5 * qu.w[static_cast<std::size_t>(i)];
        for (int j = 0; j < mv; ++j) {
            const double v = 0.5 * (qv.x[static_cast<std::size_t>(j)] + 1.0);
            const double wv = 0.5 * qv.w[static_cast<std::size_t>(j)];
            r.x.push_back(u);
            r.y.push_back(v * (1.0 - u));
            r.w.push_back(wu * wv * (1.0 - u));
        }
    }
    return r;
}

inline const TriRule& triangle_rule_cached(int order) {
    static std::map<int, TriRule> cache;
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, triangle_rule(order)).first;
    return it->second;
}

// Physical quadrature points and weights.
struct QuadRule {
    std::vector<Vec2> pts;
    std::vector<double> wts;

    std::size_t size() const { return pts.size(); }
};

// Quadrature over a triangle given by physical corners.
inline void append_triangle_quadrature(QuadRule& out, Vec2 a, Vec2 b, Vec2 c, int order) {
    const TriRule& ref = triangle_rule_cached(order);
    const double jac = cross(b - a, c - a); // = 2 * signed area
    for (std::size_t q = 0; q < ref.w.size(); ++q) {
        const double u = ref.x[q];
        const double v = ref.y[q];
        out.pts.push_back(a + u * (b - a) + v * (c - a));
        out.wts.push_back(ref.w[q] * jac);
    }
}

// Quadrature along the segment a-b, exact for degree <= order on the segment.
inline QuadRule segment_quadrature(Vec2 a, Vec2 b, int order) {
    const int m = order / 2 + 1; // 2m - 1 >= order
    const Quad1D& q1 = gauss_legendre_cached(m);
    QuadRule r;
    const double half_len = 0.5 * dist(a, b);
    const Vec2 mid = 0.5 * (a + b);
    const Vec2 dir = 0.5 * (b - a);
    for (int i = 0; i < m; ++i) {
        r.pts.push_back(mid + q1.x[static_cast<std::size_t>(i)] * dir);
        r.wts.push_back(q1.w[static_cast<std::size_t>(i)] * half_len);
    }
    return r;
}

} // namespace psdg
