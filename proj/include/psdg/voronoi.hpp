// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "psdg/error.hpp"
#include "psdg/geometry.hpp"
#include "psdg/mesh.hpp"
#include "psdg/rng.hpp"

namespace psdg {

struct VoronoiDiagnostics {
    std::vector<double> lloyd_energy; // sum of squared seed-to-centroid distances
    int retries = 0;
};

namespace detail {

// Uniform bucket grid for neighbour lookups during cell clipping.
struct SeedGrid {
    int nx = 1, ny = 1;
    double x0 = 0.0, y0 = 0.0, bw = 1.0, bh = 1.0;
    std::vector<std::vector<int>> buckets;

    SeedGrid(const DomainSpec& dom, const std::vector<Vec2>& seeds) {
        const double w = dom.x1 - dom.x0, h = dom.y1 - dom.y0;
        const double target = std::sqrt(w * h / static_cast<double>(std::max<std::size_t>(seeds.size(), 1)));
        nx = std::max(1, static_cast<int>(std::floor(w / target)));
        ny = std::max(1, static_cast<int>(std::floor(h / target)));
        x0 = dom.x0;
        y0 = dom.y0;
        bw = w / nx;
        bh = h / ny;
        buckets.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), {});
        for (std::size_t i = 0; i < seeds.size(); ++i)
            buckets[index_of(seeds[i])].push_back(static_cast<int>(i));
    }

    std::size_t index_of(Vec2 p) const {
        int ix = static_cast<int>((p.x - x0) / bw);
        int iy = static_cast<int>((p.y - y0) / bh);
        ix = std::clamp(ix, 0, nx - 1);
        iy = std::clamp(iy, 0, ny - 1);
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix);
    }

    double min_bucket_dim() const { return std::min(bw, bh); }
};

inline double max_dist_to_vertices(Vec2 s, const Polygon& p) {
    double d2 = 0.0;
    for (const Vec2& v : p) {
        const Vec2 d = v - s;
        d2 = std::max(d2, dot(d, d));
    }
    return std::sqrt(d2);
}

// Clipped Voronoi cell of seed i: rectangle clipped by neighbour bisectors,
// visiting candidates ring by ring until no further bisector can cut.
inline Polygon voronoi_cell(int i, const std::vector<Vec2>& seeds, const DomainSpec& dom,
                            const SeedGrid& grid) {
    const Vec2 s = seeds[static_cast<std::size_t>(i)];
    Polygon poly = make_rect(dom.x0, dom.y0, dom.x1, dom.y1);
    const int cx = std::clamp(static_cast<int>((s.x - grid.x0) / grid.bw), 0, grid.nx - 1);
    const int cy = std::clamp(static_cast<int>((s.y - grid.y0) / grid.bh), 0, grid.ny - 1);
    const int max_ring = std::max(grid.nx, grid.ny);
    double r_max = max_dist_to_vertices(s, poly);
    for (int ring = 0; ring <= max_ring; ++ring) {
        if (ring >= 2 && static_cast<double>(ring - 1) * grid.min_bucket_dim() >= 2.0 * r_max) break;
        for (int iy = cy - ring; iy <= cy + ring; ++iy) {
            if (iy < 0 || iy >= grid.ny) continue;
            for (int ix = cx - ring; ix <= cx + ring; ++ix) {
                if (ix < 0 || ix >= grid.nx) continue;
                if (std::max(std::abs(ix - cx), std::abs(iy - cy)) != ring) continue;
                const auto& bucket =
                    grid.buckets[static_cast<std::size_t>(iy) * static_cast<std::size_t>(grid.nx) +
                                 static_cast<std::size_t>(ix)];
                for (int j : bucket) {
                    if (j == i) continue;
                    const Vec2 sj = seeds[static_cast<std::size_t>(j)];
                    const Vec2 nrm = sj - s;
                    const double c = dot(nrm, 0.5 * (s + sj));
                    poly = clip_halfplane(poly, nrm, c);
                    if (poly.size() < 3) return {};
                }
            }
        }
        if (poly.size() < 3) return {};
        r_max = max_dist_to_vertices(s, poly);
    }
    return poly;
}

struct CellSet {
    bool ok = false;
    std::string why;
    std::vector<Polygon> cells;
};

// Cells for the current seed set; `strict` controls whether hole-clipping
// failures abort (final cells) or fall back to the unclipped cell (Lloyd
// iterations, where a transient overlap only perturbs one centroid).
inline CellSet compute_cells(const std::vector<Vec2>& seeds, const DomainSpec& dom,
                             const Polygon* hole, double geom_tol, bool strict) {
    CellSet out;
    out.cells.resize(seeds.size());
    const SeedGrid grid(dom, seeds);
    const double min_area = 1e-12 * (dom.x1 - dom.x0) * (dom.y1 - dom.y0);
    BBox hole_bb;
    double hole_reach = 0.0;
    if (hole != nullptr) {
        hole_bb = polygon_bbox(*hole);
        hole_reach = 0.5 * std::hypot(hole_bb.x1 - hole_bb.x0, hole_bb.y1 - hole_bb.y0);
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        Polygon cell = voronoi_cell(static_cast<int>(i), seeds, dom, grid);
        if (cell.size() < 3) {
            out.why = detail::concat("degenerate cell for seed ", i);
            return out;
        }
        if (hole != nullptr) {
            const Vec2 hc{0.5 * (hole_bb.x0 + hole_bb.x1), 0.5 * (hole_bb.y0 + hole_bb.y1)};
            const double reach = hole_reach + polygon_diameter(cell);
            if (dist(polygon_centroid(cell), hc) <= reach) {
                const SubtractResult sub = subtract_convex(cell, *hole, geom_tol);
                switch (sub.status) {
                    case SubtractStatus::Unchanged:
                        break;
                    case SubtractStatus::Clipped:
                        cell = sub.poly;
                        break;
                    case SubtractStatus::Swallowed:
                    case SubtractStatus::Failed:
                        if (strict) {
                            out.why = detail::concat("hole clipping failed for cell ", i);
                            return out;
                        }
                        break; // keep the unclipped cell during Lloyd smoothing
                }
            }
        }
        if (polygon_area(cell) < min_area) {
            out.why = detail::concat("degenerate cell (area below threshold) for seed ", i);
            return out;
        }
        out.cells[i] = std::move(cell);
    }
    out.ok = true;
    return out;
}

// Union-find over near-coincident cell corners.
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};

// Weld near-coincident corners into shared mesh vertices and build element
// loops.  Coordinates on the exact rectangle lines and at exact hole-polygon
// corners are snapped so that areas telescope exactly.
inline PolyMesh weld_cells(const std::vector<Polygon>& cells, const DomainSpec& dom,
                           const Polygon* hole, double weld_tol) {
    std::vector<Vec2> pts;
    std::vector<std::pair<int, int>> owner; // (element, local position)
    for (std::size_t e = 0; e < cells.size(); ++e)
        for (std::size_t k = 0; k < cells[e].size(); ++k) {
            pts.push_back(cells[e][k]);
            owner.emplace_back(static_cast<int>(e), static_cast<int>(k));
        }

    // Bucket by a grid of pitch 2*tol and unite all pairs within tol.
    const double gs = std::max(weld_tol * 2.0, 1e-300);
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<int>> buckets;
    auto key_of = [&](Vec2 p) {
        return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x / gs)),
                                                     static_cast<std::int64_t>(std::floor(p.y / gs))};
    };
    for (std::size_t i = 0; i < pts.size(); ++i) buckets[key_of(pts[i])].push_back(static_cast<int>(i));
    UnionFind uf(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto k = key_of(pts[i]);
        for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const auto it = buckets.find({k.first + dx, k.second + dy});
                if (it == buckets.end()) continue;
                for (int j : it->second)
                    if (j > static_cast<int>(i) && dist(pts[i], pts[static_cast<std::size_t>(j)]) <= weld_tol)
                        uf.unite(static_cast<int>(i), j);
            }
    }

    // Representative coordinates: group average, then snapping.
    std::map<int, int> root_to_vertex;
    std::vector<Vec2> sums;
    std::vector<int> counts;
    std::vector<int> vertex_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const int r = uf.find(static_cast<int>(i));
        auto it = root_to_vertex.find(r);
        if (it == root_to_vertex.end()) {
            it = root_to_vertex.emplace(r, static_cast<int>(sums.size())).first;
            sums.push_back({0.0, 0.0});
            counts.push_back(0);
        }
        const int v = it->second;
        sums[static_cast<std::size_t>(v)] = sums[static_cast<std::size_t>(v)] + pts[i];
        counts[static_cast<std::size_t>(v)] += 1;
        vertex_of[i] = v;
    }
    PolyMesh mesh;
    mesh.vertices.resize(sums.size());
    const double snap = 2.0 * weld_tol;
    for (std::size_t v = 0; v < sums.size(); ++v) {
        Vec2 p{sums[v].x / counts[v], sums[v].y / counts[v]};
        if (std::abs(p.x - dom.x0) <= snap) p.x = dom.x0;
        if (std::abs(p.x - dom.x1) <= snap) p.x = dom.x1;
        if (std::abs(p.y - dom.y0) <= snap) p.y = dom.y0;
        if (std::abs(p.y - dom.y1) <= snap) p.y = dom.y1;
        if (hole != nullptr)
            for (const Vec2& hv : *hole)
                if (dist(p, hv) <= snap) p = hv;
        mesh.vertices[v] = p;
    }

    mesh.elements.resize(cells.size());
    std::size_t base = 0;
    for (std::size_t e = 0; e < cells.size(); ++e) {
        Element& el = mesh.elements[e];
        for (std::size_t k = 0; k < cells[e].size(); ++k) {
            const int v = vertex_of[base + k];
            if (el.verts.empty() || el.verts.back() != v) el.verts.push_back(v);
        }
        base += cells[e].size();
        while (el.verts.size() > 2 && el.verts.front() == el.verts.back()) el.verts.pop_back();
        require(el.verts.size() >= 3, "element ", e, " collapsed during welding");
        for (std::size_t a = 0; a < el.verts.size(); ++a)
            for (std::size_t b = a + 1; b < el.verts.size(); ++b)
                require(el.verts[a] != el.verts[b], "element ", e, " pinched during welding");
    }
    mesh.domain = dom;
    return mesh;
}

} // namespace detail

// Clipped Voronoi tessellation of the domain with Lloyd smoothing.
// Deterministic: identical (domain, n, iters, seed) inputs produce
// bit-identical meshes.  Degenerate configurations trigger regeneration with
// perturbed seeds, up to 10 retries.
inline PolyMesh generate_voronoi_mesh(const DomainSpec& domain, int n_elements, int lloyd_iters,
                                      std::uint64_t seed, VoronoiDiagnostics* diag = nullptr) {
    require(n_elements >= 4, "n_elements must be at least 4, got ", n_elements);
    require(lloyd_iters >= 0, "lloyd_iters must be non-negative");
    require(domain.x1 > domain.x0 && domain.y1 > domain.y0, "empty domain rectangle");

    Polygon hole_poly;
    const Polygon* hole = nullptr;
    if (domain.has_hole()) {
        require(domain.hole_radius > 0.0, "hole radius must be positive");
        hole_poly = domain.hole_polygon();
        hole = &hole_poly;
    }
    const double diam = domain.diameter();
    const double geom_tol = 1e-12 * diam;
    const double weld_tol = 1e-9 * diam;

    std::string last_error = "unknown";
    for (int attempt = 0; attempt < 10; ++attempt) {
        Rng rng(seed);
        std::vector<Vec2> seeds;
        seeds.reserve(static_cast<std::size_t>(n_elements));
        int guard = 0;
        while (static_cast<int>(seeds.size()) < n_elements) {
            require(guard++ < 1000 * n_elements, "seed sampling failed (hole covers the domain?)");
            Vec2 p{rng.uniform(domain.x0, domain.x1), rng.uniform(domain.y0, domain.y1)};
            if (hole != nullptr && detail::hole_side(detail::halfplanes_of(*hole), p) < 1e-6 * diam)
                continue;
            seeds.push_back(p);
        }
        if (attempt > 0) {
            // Deterministic perturbation, growing with the attempt number.
            Rng jitter(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(attempt));
            const double scale = 1e-3 * attempt * diam / std::sqrt(static_cast<double>(n_elements));
            for (Vec2& s : seeds) {
                Vec2 p{s.x + scale * (jitter.uniform01() - 0.5), s.y + scale * (jitter.uniform01() - 0.5)};
                p.x = std::clamp(p.x, domain.x0, domain.x1);
                p.y = std::clamp(p.y, domain.y0, domain.y1);
                if (hole == nullptr || detail::hole_side(detail::halfplanes_of(*hole), p) >= 1e-6 * diam)
                    s = p;
            }
        }

        bool failed = false;
        std::vector<double> energy;
        for (int it = 0; it < lloyd_iters && !failed; ++it) {
            const detail::CellSet cs = detail::compute_cells(seeds, domain, hole, geom_tol, false);
            if (!cs.ok) {
                last_error = cs.why;
                failed = true;
                break;
            }
            double m = 0.0;
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                Vec2 c = polygon_centroid(cs.cells[i]);
                const Vec2 d = c - seeds[i];
                m += dot(d, d);
                if (hole != nullptr && point_in_polygon(*hole, c)) {
                    // Push the centroid radially out of the hole.
                    const Vec2 hc = *domain.hole_center;
                    Vec2 dir = c - hc;
                    const double r = norm(dir);
                    dir = r > 0.0 ? (1.0 / r) * dir : Vec2{1.0, 0.0};
                    c = hc + (domain.hole_radius * 1.001) * dir;
                }
                seeds[i] = c;
            }
            energy.push_back(m);
        }
        if (failed) continue;

        const detail::CellSet cs = detail::compute_cells(seeds, domain, hole, geom_tol, true);
        if (!cs.ok) {
            last_error = cs.why;
            continue;
        }
        double m = 0.0;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const Vec2 d = polygon_centroid(cs.cells[i]) - seeds[i];
            m += dot(d, d);
        }
        energy.push_back(m);

        try {
            PolyMesh mesh = detail::weld_cells(cs.cells, domain, hole, weld_tol);
            finalize_mesh(mesh);
            const double area = mesh.total_area();
            const double target = domain.area();
            require(std::abs(area - target) <= 1e-10 * target,
                    "element areas sum to ", area, " but the domain area is ", target);
            if (diag != nullptr) {
                diag->lloyd_energy = std::move(energy);
                diag->retries = attempt;
            }
            return mesh;
        } catch (const Error& err) {
            last_error = err.what();
            continue;
        }
    }
    fail("mesh generation failed after 10 retries: ", last_error);
}

} // namespace psdg
