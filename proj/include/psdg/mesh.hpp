// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "psdg/error.hpp"
#include "psdg/geometry.hpp"

namespace psdg {

enum class FaceKind { Unset, Interior, Dirichlet, Neumann };

struct Face {
    int a = -1, b = -1;       // vertex indices, in the plus element's CCW order
    int plus = -1, minus = -1; // adjacent elements; minus = -1 on the boundary
    Vec2 normal;               // unit, outward from plus (so plus -> minus)
    double length = 0.0;
    Vec2 midpoint;
    FaceKind kind = FaceKind::Unset;
};

struct Element {
    std::vector<int> verts;           // CCW vertex loop
    std::vector<int> faces;           // face ids, one per edge, in loop order
    std::vector<Triangle> subtris;    // local indices; index verts.size() = centroid
    double area = 0.0;
    double h = 0.0;                   // diameter
    Vec2 centroid;
    BBox bbox;
};

// Optional description of the generated domain, used for exact-area checks.
struct DomainSpec {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
    std::optional<Vec2> hole_center;
    double hole_radius = 0.0;
    int hole_sides = 64;

    bool has_hole() const { return hole_center.has_value(); }

    Polygon hole_polygon() const {
        require(has_hole(), "domain has no hole");
        return make_regular_polygon(*hole_center, hole_radius, hole_sides);
    }

    double area() const {
        double a = (x1 - x0) * (y1 - y0);
        if (has_hole()) a -= polygon_area(hole_polygon());
        return a;
    }

    double diameter() const { return std::hypot(x1 - x0, y1 - y0); }
};

struct PolyMesh {
    std::vector<Vec2> vertices;
    std::vector<Element> elements;
    std::vector<Face> faces;
    std::optional<DomainSpec> domain; // present on generated meshes

    int n_elements() const { return static_cast<int>(elements.size()); }
    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_faces() const { return static_cast<int>(faces.size()); }

    Polygon element_polygon(int e) const {
        const Element& el = elements[static_cast<std::size_t>(e)];
        Polygon p;
        p.reserve(el.verts.size());
        for (int v : el.verts) p.push_back(vertices[static_cast<std::size_t>(v)]);
        return p;
    }

    // Physical corners of local sub-triangle t of element e.
    std::array<Vec2, 3> subtri_corners(int e, std::size_t t) const {
        const Element& el = elements[static_cast<std::size_t>(e)];
        const int nv = static_cast<int>(el.verts.size());
        std::array<Vec2, 3> c;
        for (int k = 0; k < 3; ++k) {
            const int li = el.subtris[t][static_cast<std::size_t>(k)];
            c[static_cast<std::size_t>(k)] =
                li == nv ? el.centroid : vertices[static_cast<std::size_t>(el.verts[static_cast<std::size_t>(li)])];
        }
        return c;
    }

    double total_area() const {
        double a = 0.0;
        for (const Element& el : elements) a += el.area;
        return a;
    }

    double max_h() const {
        double h = 0.0;
        for (const Element& el : elements) h = std::max(h, el.h);
        return h;
    }
};

// ---------------------------------------------------------------------------
// Element geometry caches and face extraction.
// ---------------------------------------------------------------------------

inline void compute_element_geometry(PolyMesh& mesh) {
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        Element& el = mesh.elements[e];
        const Polygon poly = mesh.element_polygon(static_cast<int>(e));
        require(poly.size() >= 3, "element ", e, " has fewer than 3 vertices");
        const double sa = polygon_signed_area(poly);
        require(sa > 0.0, "element ", e, " is not counter-clockwise");
        el.area = sa;
        el.centroid = polygon_centroid(poly);
        el.h = polygon_diameter(poly);
        el.bbox = polygon_bbox(poly);
        el.subtris = triangulate_polygon(poly);
    }
}

// Builds the face list from element vertex loops.  Every edge must be shared
// by exactly two elements (interior) or one (boundary).
inline void extract_faces(PolyMesh& mesh) {
    mesh.faces.clear();
    std::map<std::pair<int, int>, int> edge_to_face;
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        Element& el = mesh.elements[e];
        const std::size_t nv = el.verts.size();
        el.faces.assign(nv, -1);
        for (std::size_t i = 0; i < nv; ++i) {
            const int a = el.verts[i];
            const int b = el.verts[(i + 1) % nv];
            require(a != b, "element ", e, " has a zero-length edge");
            const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
            auto it = edge_to_face.find(key);
            if (it == edge_to_face.end()) {
                Face f;
                f.a = a;
                f.b = b;
                f.plus = static_cast<int>(e);
                const Vec2 pa = mesh.vertices[static_cast<std::size_t>(a)];
                const Vec2 pb = mesh.vertices[static_cast<std::size_t>(b)];
                const Vec2 t = pb - pa;
                f.length = norm(t);
                require(f.length > 0.0, "zero-length face in element ", e);
                f.normal = {t.y / f.length, -t.x / f.length}; // outward for CCW loops
                f.midpoint = 0.5 * (pa + pb);
                edge_to_face.emplace(key, static_cast<int>(mesh.faces.size()));
                el.faces[i] = static_cast<int>(mesh.faces.size());
                mesh.faces.push_back(f);
            } else {
                Face& f = mesh.faces[static_cast<std::size_t>(it->second)];
                require(f.minus == -1, "edge (", key.first, ",", key.second,
                        ") is shared by more than two elements");
                require(f.a == b && f.b == a, "elements ", f.plus, " and ", e,
                        " traverse a shared edge in the same direction");
                f.minus = static_cast<int>(e);
                f.kind = FaceKind::Interior;
                el.faces[i] = it->second;
            }
        }
    }
}

// Rebuild all derived data after vertices/element loops change.
inline void finalize_mesh(PolyMesh& mesh) {
    compute_element_geometry(mesh);
    extract_faces(mesh);
}

// ---------------------------------------------------------------------------
// Boundary classification.
// ---------------------------------------------------------------------------

struct AxisSegment {
    int axis = 0;      // 0: the line x = value, 1: the line y = value
    double value = 0.0;
    double lo = -1e300, hi = 1e300; // extent along the other coordinate
    double tol = -1.0;              // <0: use the classifier default
};

struct CircleRegion {
    Vec2 center;
    double radius = 0.0;
    double tol = -1.0;
};

struct BoundaryRegion {
    std::variant<AxisSegment, CircleRegion> shape;
    FaceKind kind = FaceKind::Dirichlet;
};

// Ordered region list; the first matching region wins.
struct BoundaryClassifier {
    std::vector<BoundaryRegion> regions;
    double default_tol_scale = 1e-9; // default tol = scale * domain diameter

    bool matches(const BoundaryRegion& r, Vec2 p, double default_tol) const {
        if (const AxisSegment* s = std::get_if<AxisSegment>(&r.shape)) {
            const double tol = s->tol >= 0.0 ? s->tol : default_tol;
            const double along = s->axis == 0 ? p.y : p.x;
            const double off = s->axis == 0 ? p.x : p.y;
            return std::abs(off - s->value) <= tol && along >= s->lo - tol && along <= s->hi + tol;
        }
        const CircleRegion& c = std::get<CircleRegion>(r.shape);
        const double tol = c.tol >= 0.0 ? c.tol : default_tol;
        return std::abs(dist(p, c.center) - c.radius) <= tol;
    }
};

inline void classify_boundary(PolyMesh& mesh, const BoundaryClassifier& classifier) {
    double diam = 0.0;
    if (mesh.domain) {
        diam = mesh.domain->diameter();
    } else {
        BBox bb{mesh.vertices[0].x, mesh.vertices[0].x, mesh.vertices[0].y, mesh.vertices[0].y};
        for (const Vec2& v : mesh.vertices) {
            bb.x0 = std::min(bb.x0, v.x);
            bb.x1 = std::max(bb.x1, v.x);
            bb.y0 = std::min(bb.y0, v.y);
            bb.y1 = std::max(bb.y1, v.y);
        }
        diam = std::hypot(bb.x1 - bb.x0, bb.y1 - bb.y0);
    }
    const double default_tol = classifier.default_tol_scale * diam;
    for (Face& f : mesh.faces) {
        if (f.minus >= 0) continue; // interior
        bool matched = false;
        for (const BoundaryRegion& r : classifier.regions) {
            if (classifier.matches(r, f.midpoint, default_tol)) {
                f.kind = r.kind;
                matched = true;
                break;
            }
        }
        require(matched, "boundary face midpoint (", f.midpoint.x, ", ", f.midpoint.y,
                ") matches no boundary region");
    }
}

// ---------------------------------------------------------------------------
// Polytopic regularity report.
// ---------------------------------------------------------------------------

struct RegularityReport {
    std::vector<double> per_element; // min over faces of d |S_F| / (h |F|), d = 2
    double min_ratio = 0.0;
};

inline RegularityReport regularity_report(const PolyMesh& mesh, double warn_below = 0.05,
                                          std::ostream* log = &std::clog) {
    RegularityReport rep;
    rep.per_element.resize(mesh.elements.size());
    rep.min_ratio = 1e300;
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const Element& el = mesh.elements[e];
        double worst = 1e300;
        const std::size_t nv = el.verts.size();
        for (std::size_t i = 0; i < nv; ++i) {
            const Vec2 a = mesh.vertices[static_cast<std::size_t>(el.verts[i])];
            const Vec2 b = mesh.vertices[static_cast<std::size_t>(el.verts[(i + 1) % nv])];
            const double face_len = dist(a, b);
            const double tri_area = 0.5 * std::abs(cross(b - a, el.centroid - a));
            worst = std::min(worst, 2.0 * tri_area / (el.h * face_len));
        }
        rep.per_element[e] = worst;
        rep.min_ratio = std::min(rep.min_ratio, worst);
        if (worst < warn_below && log != nullptr)
            *log << "warning: element " << e << " has regularity ratio " << worst << "\n";
    }
    return rep;
}

// ---------------------------------------------------------------------------
// polymesh v1 text format.
//
//   line 1:           polymesh 1 <n_vertices> <n_elements>
//   next n_vertices:  x y
//   next n_elements:  k v_1 ... v_k     (0-based CCW loop)
// ---------------------------------------------------------------------------

inline void save_mesh(const PolyMesh& mesh, std::ostream& os) {
    os << "polymesh 1 " << mesh.n_vertices() << " " << mesh.n_elements() << "\n";
    char buf[80];
    for (const Vec2& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x, v.y);
        os << buf;
    }
    for (const Element& el : mesh.elements) {
        os << el.verts.size();
        for (int v : el.verts) os << " " << v;
        os << "\n";
    }
}

inline void save_mesh(const PolyMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    require(os.good(), "cannot open '", path, "' for writing");
    save_mesh(mesh, os);
    require(os.good(), "error while writing '", path, "'");
}

inline PolyMesh load_mesh(std::istream& is) {
    PolyMesh mesh;
    std::string line;
    int lineno = 0;

    auto next_line = [&]() -> std::string& {
        require(static_cast<bool>(std::getline(is, line)), "unexpected end of file, line ", lineno + 1);
        ++lineno;
        return line;
    };

    {
        std::istringstream hs(next_line());
        std::string tag;
        int version = 0;
        int nv = 0, ne = 0;
        require(static_cast<bool>(hs >> tag >> version >> nv >> ne) && tag == "polymesh",
                "malformed header, line 1 (expected 'polymesh 1 <nv> <ne>')");
        require(version == 1, "unsupported polymesh version ", version, ", line 1");
        require(nv >= 3, "vertex count must be at least 3, line 1");
        require(ne >= 1, "element count must be at least 1, line 1");
        mesh.vertices.resize(static_cast<std::size_t>(nv));
        mesh.elements.resize(static_cast<std::size_t>(ne));
    }

    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        std::istringstream vs(next_line());
        double x = 0.0, y = 0.0;
        require(static_cast<bool>(vs >> x >> y), "malformed vertex, line ", lineno);
        std::string extra;
        require(!(vs >> extra), "trailing data after vertex, line ", lineno);
        mesh.vertices[i] = {x, y};
    }

    const int nv_total = mesh.n_vertices();
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        std::istringstream es(next_line());
        int k = 0;
        require(static_cast<bool>(es >> k), "malformed element, line ", lineno);
        require(k >= 3, "element with fewer than 3 vertices, line ", lineno);
        Element& el = mesh.elements[e];
        el.verts.resize(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            int v = -1;
            require(static_cast<bool>(es >> v), "malformed element, line ", lineno);
            require(v >= 0 && v < nv_total, "vertex index out of range, line ", lineno);
            el.verts[static_cast<std::size_t>(j)] = v;
        }
        std::string extra;
        require(!(es >> extra), "trailing data after element, line ", lineno);
        const Polygon poly = mesh.element_polygon(static_cast<int>(e));
        require(polygon_signed_area(poly) > 0.0, "element is not counter-clockwise, line ", lineno);
    }

    finalize_mesh(mesh);
    return mesh;
}

inline PolyMesh load_mesh(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "cannot open mesh file '", path, "'");
    return load_mesh(is);
}

} // namespace psdg
