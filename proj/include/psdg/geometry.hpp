// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "psdg/error.hpp"

namespace psdg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

// 2x2 tensor, row-major.  Component index c in 0..3 maps to entry
// (row, col) = (c/2, c%2), i.e. the order (1,1), (1,2), (2,1), (2,2).
struct Mat2 {
    double m[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

    double& operator()(int r, int c) { return m[r][c]; }
    double operator()(int r, int c) const { return m[r][c]; }
};

inline Mat2 operator+(const Mat2& a, const Mat2& b) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][j] + b.m[i][j];
    return r;
}

inline Mat2 operator-(const Mat2& a, const Mat2& b) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][j] - b.m[i][j];
    return r;
}

inline Mat2 operator*(double s, const Mat2& a) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r.m[i][j] = s * a.m[i][j];
    return r;
}

inline Vec2 operator*(const Mat2& a, Vec2 v) {
    return {a.m[0][0] * v.x + a.m[0][1] * v.y, a.m[1][0] * v.x + a.m[1][1] * v.y};
}

inline double tr(const Mat2& a) { return a.m[0][0] + a.m[1][1]; }

// Deviatoric part: dev(tau) = tau - (1/2) tr(tau) I.
inline Mat2 dev(const Mat2& a) {
    const double t = 0.5 * tr(a);
    Mat2 r = a;
    r.m[0][0] -= t;
    r.m[1][1] -= t;
    return r;
}

inline double frob_dot(const Mat2& a, const Mat2& b) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) s += a.m[i][j] * b.m[i][j];
    return s;
}

inline double frob_norm(const Mat2& a) { return std::sqrt(frob_dot(a, a)); }

// ---------------------------------------------------------------------------
// Polygon utilities.  Polygons are simple, stored as CCW vertex loops.
// ---------------------------------------------------------------------------

using Polygon = std::vector<Vec2>;

inline double polygon_signed_area(const Polygon& p) {
    double a = 0.0;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& u = p[i];
        const Vec2& v = p[(i + 1) % n];
        a += cross(u, v);
    }
    return 0.5 * a;
}

inline double polygon_area(const Polygon& p) { return std::abs(polygon_signed_area(p)); }

inline Vec2 polygon_centroid(const Polygon& p) {
    double a = 0.0, cx = 0.0, cy = 0.0;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& u = p[i];
        const Vec2& v = p[(i + 1) % n];
        const double w = cross(u, v);
        a += w;
        cx += (u.x + v.x) * w;
        cy += (u.y + v.y) * w;
    }
    require(std::abs(a) > 0.0, "polygon_centroid: degenerate polygon");
    return {cx / (3.0 * a), cy / (3.0 * a)};
}

inline double polygon_diameter(const Polygon& p) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j) {
            const Vec2 d = p[i] - p[j];
            d2 = std::max(d2, dot(d, d));
        }
    return std::sqrt(d2);
}

struct BBox {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
};

inline BBox polygon_bbox(const Polygon& p) {
    BBox b{p[0].x, p[0].x, p[0].y, p[0].y};
    for (const Vec2& v : p) {
        b.x0 = std::min(b.x0, v.x);
        b.x1 = std::max(b.x1, v.x);
        b.y0 = std::min(b.y0, v.y);
        b.y1 = std::max(b.y1, v.y);
    }
    return b;
}

// Crossing-number point-in-polygon test (boundary points are unspecified).
inline bool point_in_polygon(const Polygon& p, Vec2 q) {
    bool inside = false;
    const std::size_t n = p.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const bool straddles = (p[i].y > q.y) != (p[j].y > q.y);
        if (straddles) {
            const double xc = p[j].x + (q.y - p[j].y) / (p[i].y - p[j].y) * (p[i].x - p[j].x);
            if (q.x < xc) inside = !inside;
        }
    }
    return inside;
}

// Clip a convex CCW polygon against the half-plane { x : dot(nrm, x) <= c }.
// Intersection points are taken on the existing edges, which keeps vertex
// coordinates on any axis-aligned boundary exact.
inline Polygon clip_halfplane(const Polygon& poly, Vec2 nrm, double c) {
    Polygon out;
    const std::size_t n = poly.size();
    if (n == 0) return out;
    out.reserve(n + 2);
    double f_prev = dot(nrm, poly[n - 1]) - c;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = dot(nrm, poly[i]) - c;
        const Vec2& prev = poly[(i + n - 1) % n];
        if (f_prev <= 0.0 && f <= 0.0) {
            out.push_back(poly[i]);
        } else if (f_prev <= 0.0 && f > 0.0) {
            const double t = f_prev / (f_prev - f);
            out.push_back(prev + t * (poly[i] - prev));
        } else if (f_prev > 0.0 && f <= 0.0) {
            const double t = f_prev / (f_prev - f);
            out.push_back(prev + t * (poly[i] - prev));
            out.push_back(poly[i]);
        }
        f_prev = f;
    }
    return out;
}

inline Polygon make_rect(double x0, double y0, double x1, double y1) {
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

inline Polygon make_regular_polygon(Vec2 center, double radius, int sides) {
    Polygon p;
    p.reserve(static_cast<std::size_t>(sides));
    for (int k = 0; k < sides; ++k) {
        const double a = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(sides);
        p.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
    }
    return p;
}

// ---------------------------------------------------------------------------
// Convex polygon difference, cell \ hole, via boundary splicing.
// ---------------------------------------------------------------------------

enum class SubtractStatus {
    Unchanged, // cell and hole are disjoint
    Clipped,   // a single-polygon difference was produced
    Swallowed, // cell lies entirely inside the hole
    Failed     // split/tangent configuration; caller should treat as degenerate
};

struct SubtractResult {
    SubtractStatus status = SubtractStatus::Unchanged;
    Polygon poly;
};

namespace detail {

struct HalfPlanes {
    std::vector<Vec2> n; // outward unit normals
    std::vector<double> b;
};

inline HalfPlanes halfplanes_of(const Polygon& hole) {
    HalfPlanes h;
    const std::size_t m = hole.size();
    h.n.resize(m);
    h.b.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        const Vec2 a = hole[k];
        const Vec2 c = hole[(k + 1) % m];
        Vec2 t = c - a;
        const double len = norm(t);
        require(len > 0.0, "degenerate hole edge");
        const Vec2 nrm{t.y / len, -t.x / len}; // outward for a CCW polygon
        h.n[k] = nrm;
        h.b[k] = dot(nrm, a);
    }
    return h;
}

// Signed distance proxy to the hole: max over edge half-planes.
inline double hole_side(const HalfPlanes& h, Vec2 q) {
    double s = -1e300;
    for (std::size_t k = 0; k < h.n.size(); ++k) s = std::max(s, dot(h.n[k], q) - h.b[k]);
    return s;
}

} // namespace detail

// Computes cell \ hole where both are convex CCW polygons and the hole is a
// "bite" on the cell boundary (the generic situation when the hole is a
// domain cut-out much larger than a mesh cell).  Any other configuration --
// tangency, a vertex on the other boundary, the difference splitting in two,
// the hole nested strictly inside the cell -- yields Failed and the caller
// regenerates with perturbed seeds.
inline SubtractResult subtract_convex(const Polygon& cell, const Polygon& hole, double tol) {
    SubtractResult res;
    const detail::HalfPlanes hp = detail::halfplanes_of(hole);
    const std::size_t n = cell.size();
    const std::size_t m = hole.size();

    std::vector<int> side(n); // +1 outside hole, -1 inside, 0 ambiguous
    bool any_inside = false, all_inside = true;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = detail::hole_side(hp, cell[i]);
        if (s > tol) {
            side[i] = +1;
            all_inside = false;
        } else if (s < -tol) {
            side[i] = -1;
            any_inside = true;
        } else {
            res.status = SubtractStatus::Failed;
            return res;
        }
    }
    if (all_inside) {
        res.status = SubtractStatus::Swallowed;
        return res;
    }

    // Entry/exit crossings of each cell edge with the hole (Cyrus-Beck).
    struct Crossing {
        std::size_t edge = 0;
        double t = 0.0;
        std::size_t hole_edge = 0;
        Vec2 point;
    };
    std::vector<Crossing> entries, exits;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 q0 = cell[i];
        const Vec2 q1 = cell[(i + 1) % n];
        double t_in = 0.0, t_out = 1.0;
        std::size_t k_in = m, k_out = m;
        bool empty = false;
        for (std::size_t k = 0; k < m; ++k) {
            const double f0 = dot(hp.n[k], q0) - hp.b[k];
            const double f1 = dot(hp.n[k], q1) - hp.b[k];
            if (f0 > 0.0 && f1 > 0.0) {
                empty = true;
                break;
            }
            if (f0 > 0.0) { // entering this half-plane's inside
                const double t = f0 / (f0 - f1);
                if (t > t_in) {
                    t_in = t;
                    k_in = k;
                }
            } else if (f1 > 0.0) { // leaving
                const double t = f0 / (f0 - f1);
                if (t < t_out) {
                    t_out = t;
                    k_out = k;
                }
            }
        }
        if (empty || t_in >= t_out) continue;
        const Vec2 d = q1 - q0;
        if (k_in != m) {
            if (side[i] != +1) {
                res.status = SubtractStatus::Failed; // entry not from a clean outside vertex
                return res;
            }
            entries.push_back({i, t_in, k_in, q0 + t_in * d});
        }
        if (k_out != m) {
            if (side[(i + 1) % n] != +1) {
                res.status = SubtractStatus::Failed;
                return res;
            }
            exits.push_back({i, t_out, k_out, q0 + t_out * d});
        }
    }

    if (entries.empty() && exits.empty()) {
        if (!any_inside) {
            // Disjoint unless the hole is nested inside the cell.
            if (point_in_polygon(cell, hole[0])) {
                res.status = SubtractStatus::Failed;
                return res;
            }
            res.status = SubtractStatus::Unchanged;
            res.poly = cell;
            return res;
        }
        res.status = SubtractStatus::Failed;
        return res;
    }
    if (entries.size() != 1 || exits.size() != 1) {
        res.status = SubtractStatus::Failed; // split difference or tangency
        return res;
    }
    const Crossing E = entries[0];
    const Crossing X = exits[0];

    Polygon out;
    out.reserve(n + m);
    out.push_back(X.point);

    // Walk the cell boundary CCW from the exit point to the entry point.
    bool closed = false;
    for (std::size_t step = 0; step <= n; ++step) {
        const std::size_t e = (X.edge + step) % n;
        if (e == E.edge && (step > 0 || E.t > X.t)) {
            out.push_back(E.point);
            closed = true;
            break;
        }
        const Vec2 next_vertex = cell[(e + 1) % n];
        if (side[(e + 1) % n] != +1) {
            res.status = SubtractStatus::Failed;
            return res;
        }
        out.push_back(next_vertex);
    }
    if (!closed) {
        res.status = SubtractStatus::Failed;
        return res;
    }

    // Splice in the hole boundary from E to X, traversed clockwise, keeping
    // hole vertices that lie strictly inside the cell.
    if (E.hole_edge != X.hole_edge) {
        std::size_t k = E.hole_edge;
        for (std::size_t guard = 0; guard <= m; ++guard) {
            if (!point_in_polygon(cell, hole[k])) {
                res.status = SubtractStatus::Failed;
                return res;
            }
            out.push_back(hole[k]);
            if (k == (X.hole_edge + 1) % m) break;
            k = (k + m - 1) % m;
            if (guard == m) {
                res.status = SubtractStatus::Failed;
                return res;
            }
        }
    }

    // Drop numerically duplicate consecutive vertices.
    Polygon clean;
    clean.reserve(out.size());
    for (const Vec2& v : out) {
        if (clean.empty() || dist(clean.back(), v) > tol) clean.push_back(v);
    }
    while (clean.size() > 2 && dist(clean.front(), clean.back()) <= tol) clean.pop_back();
    if (clean.size() < 3) {
        res.status = SubtractStatus::Failed;
        return res;
    }

    // Area consistency: |cell \ hole| must equal |cell| - |cell ∩ hole|.
    Polygon inter = cell;
    for (std::size_t k = 0; k < m && !inter.empty(); ++k)
        inter = clip_halfplane(inter, hp.n[k], hp.b[k]);
    const double a_cell = polygon_area(cell);
    const double a_int = inter.size() >= 3 ? polygon_area(inter) : 0.0;
    const double a_diff = polygon_signed_area(clean);
    if (a_diff <= 0.0 || std::abs(a_diff - (a_cell - a_int)) > 1e-9 * a_cell) {
        res.status = SubtractStatus::Failed;
        return res;
    }

    res.status = SubtractStatus::Clipped;
    res.poly = std::move(clean);
    return res;
}

// ---------------------------------------------------------------------------
// Triangulation of a simple CCW polygon.  Indices 0..n-1 refer to polygon
// vertices; index n refers to the centroid (used by the fan).
// ---------------------------------------------------------------------------

using Triangle = std::array<int, 3>;

inline bool point_in_triangle(Vec2 a, Vec2 b, Vec2 c, Vec2 q) {
    const double d1 = cross(b - a, q - a);
    const double d2 = cross(c - b, q - b);
    const double d3 = cross(a - c, q - c);
    return d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0;
}

// Centroid fan when valid (always for convex cells); ear clipping otherwise.
inline std::vector<Triangle> triangulate_polygon(const Polygon& poly) {
    const int n = static_cast<int>(poly.size());
    require(n >= 3, "triangulate_polygon: fewer than 3 vertices");
    const double area = polygon_signed_area(poly);
    require(area > 0.0, "triangulate_polygon: polygon must be CCW with positive area");

    // Try the centroid fan first.
    const Vec2 c = polygon_centroid(poly);
    std::vector<Triangle> fan;
    fan.reserve(static_cast<std::size_t>(n));
    double fan_area = 0.0;
    bool fan_ok = true;
    for (int i = 0; i < n; ++i) {
        const Vec2 a = poly[static_cast<std::size_t>(i)];
        const Vec2 b = poly[static_cast<std::size_t>((i + 1) % n)];
        const double sa = 0.5 * cross(b - a, c - a);
        if (sa <= 0.0) {
            fan_ok = false;
            break;
        }
        fan_area += sa;
        fan.push_back({i, (i + 1) % n, n});
    }
    if (fan_ok && std::abs(fan_area - area) <= 1e-12 * area) return fan;

    // Ear clipping on vertex indices.
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::vector<Triangle> tris;
    tris.reserve(static_cast<std::size_t>(n) - 2);
    int guard = 0;
    while (idx.size() > 3) {
        require(guard++ < 10 * n * n, "triangulate_polygon: ear clipping failed to converge");
        bool clipped = false;
        const std::size_t k = idx.size();
        for (std::size_t i = 0; i < k; ++i) {
            const int ia = idx[(i + k - 1) % k];
            const int ib = idx[i];
            const int ic = idx[(i + 1) % k];
            const Vec2 a = poly[static_cast<std::size_t>(ia)];
            const Vec2 b = poly[static_cast<std::size_t>(ib)];
            const Vec2 cc = poly[static_cast<std::size_t>(ic)];
            if (cross(b - a, cc - a) <= 0.0) continue; // reflex corner
            bool contains_other = false;
            for (std::size_t j = 0; j < k; ++j) {
                const int iq = idx[j];
                if (iq == ia || iq == ib || iq == ic) continue;
                if (point_in_triangle(a, b, cc, poly[static_cast<std::size_t>(iq)])) {
                    contains_other = true;
                    break;
                }
            }
            if (contains_other) continue;
            tris.push_back({ia, ib, ic});
            idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(i));
            clipped = true;
            break;
        }
        require(clipped, "triangulate_polygon: no ear found (polygon not simple?)");
    }
    tris.push_back({idx[0], idx[1], idx[2]});

    double sum = 0.0;
    for (const Triangle& t : tris) {
        const Vec2 a = poly[static_cast<std::size_t>(t[0])];
        const Vec2 b = poly[static_cast<std::size_t>(t[1])];
        const Vec2 cc = poly[static_cast<std::size_t>(t[2])];
        sum += 0.5 * cross(b - a, cc - a);
    }
    require(std::abs(sum - area) <= 1e-12 * area,
            "triangulate_polygon: triangle areas do not sum to the polygon area");
    return tris;
}

} // namespace psdg
