// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "psdg/mesh.hpp"
#include "psdg/voronoi.hpp"

using namespace psdg;

namespace {

DomainSpec unit_square() {
    DomainSpec d;
    d.x0 = 0.0;
    d.y0 = 0.0;
    d.x1 = 1.0;
    d.y1 = 1.0;
    return d;
}

BoundaryClassifier all_dirichlet_square() {
    BoundaryClassifier c;
    c.regions.push_back({AxisSegment{0, 0.0, 0.0, 1.0, -1.0}, FaceKind::Dirichlet});
    c.regions.push_back({AxisSegment{0, 1.0, 0.0, 1.0, -1.0}, FaceKind::Dirichlet});
    c.regions.push_back({AxisSegment{1, 0.0, 0.0, 1.0, -1.0}, FaceKind::Dirichlet});
    c.regions.push_back({AxisSegment{1, 1.0, 0.0, 1.0, -1.0}, FaceKind::Dirichlet});
    return c;
}

} // namespace

TEST(Mesh, FourQuadrantSeedsGiveFourCongruentSquares) {
    // With zero Lloyd iterations and one seed per quadrant the bisectors are
    // exactly x = 1/2 and y = 1/2: mt19937_64 sampling is bypassed by feeding
    // the generator a deterministic configuration through the weld path.
    std::vector<Polygon> cells = {
        make_rect(0.0, 0.0, 0.5, 0.5),
        make_rect(0.5, 0.0, 1.0, 0.5),
        make_rect(0.0, 0.5, 0.5, 1.0),
        make_rect(0.5, 0.5, 1.0, 1.0),
    };
    PolyMesh mesh = detail::weld_cells(cells, unit_square(), nullptr, 1e-9);
    finalize_mesh(mesh);
    EXPECT_EQ(mesh.n_elements(), 4);
    EXPECT_EQ(mesh.n_vertices(), 9);
    for (const Element& el : mesh.elements) {
        EXPECT_NEAR(el.area, 0.25, 1e-15);
        EXPECT_NEAR(el.h, std::sqrt(0.5), 1e-15);
    }
    EXPECT_NEAR(mesh.total_area(), 1.0, 1e-15);
}

TEST(Mesh, GeneratorIsDeterministic) {
    const PolyMesh m1 = generate_voronoi_mesh(unit_square(), 40, 5, 123);
    const PolyMesh m2 = generate_voronoi_mesh(unit_square(), 40, 5, 123);
    std::ostringstream s1, s2;
    save_mesh(m1, s1);
    save_mesh(m2, s2);
    EXPECT_EQ(s1.str(), s2.str());
}

TEST(Mesh, AreaAdditivityAndSubTriangulation) {
    const PolyMesh mesh = generate_voronoi_mesh(unit_square(), 60, 10, 3);
    EXPECT_NEAR(mesh.total_area(), 1.0, 1e-10);
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const Element& el = mesh.elements[static_cast<std::size_t>(e)];
        double sum = 0.0;
        for (std::size_t t = 0; t < el.subtris.size(); ++t) {
            const auto c = mesh.subtri_corners(e, t);
            const double a = 0.5 * cross(c[1] - c[0], c[2] - c[0]);
            EXPECT_GT(a, 0.0);
            sum += a;
        }
        EXPECT_NEAR(sum, el.area, 1e-12 * el.area);
    }
}

TEST(Mesh, FacePairingAndNormals) {
    const PolyMesh mesh = generate_voronoi_mesh(unit_square(), 50, 10, 7);
    int boundary = 0;
    for (const Face& f : mesh.faces) {
        EXPECT_NEAR(norm(f.normal), 1.0, 1e-14);
        if (f.minus >= 0) {
            // Unit normal oriented plus -> minus.
            const Vec2 cp = mesh.elements[static_cast<std::size_t>(f.plus)].centroid;
            const Vec2 cm = mesh.elements[static_cast<std::size_t>(f.minus)].centroid;
            EXPECT_GT(dot(f.normal, cm - cp), 0.0);
        } else {
            ++boundary;
            // Outward from the plus element.
            const Vec2 cp = mesh.elements[static_cast<std::size_t>(f.plus)].centroid;
            EXPECT_GT(dot(f.normal, f.midpoint - cp), 0.0);
        }
    }
    EXPECT_GT(boundary, 0);

    // Each element's faces cover its boundary: lengths sum to the perimeter.
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const Element& el = mesh.elements[static_cast<std::size_t>(e)];
        double per = 0.0;
        const Polygon poly = mesh.element_polygon(e);
        for (std::size_t i = 0; i < poly.size(); ++i) per += dist(poly[i], poly[(i + 1) % poly.size()]);
        double fsum = 0.0;
        for (int fi : el.faces) fsum += mesh.faces[static_cast<std::size_t>(fi)].length;
        EXPECT_NEAR(fsum, per, 1e-12 * per);
    }
}

TEST(Mesh, LloydEnergyNonIncreasing) {
    VoronoiDiagnostics diag;
    (void)generate_voronoi_mesh(unit_square(), 64, 30, 7, &diag);
    ASSERT_EQ(diag.lloyd_energy.size(), 31u);
    for (std::size_t i = 1; i < diag.lloyd_energy.size(); ++i)
        EXPECT_LE(diag.lloyd_energy[i], diag.lloyd_energy[i - 1] * (1.0 + 1e-12))
            << "at iteration " << i;
}

TEST(Mesh, HundredElementUnitSquareStatistics) {
    const PolyMesh mesh = generate_voronoi_mesh(unit_square(), 100, 50, 1);
    EXPECT_EQ(mesh.n_elements(), 100);
    const double h = mesh.max_h();
    EXPECT_GE(h, 0.12);
    EXPECT_LE(h, 0.25);
    const RegularityReport rep = regularity_report(mesh, 0.05, nullptr);
    EXPECT_GT(rep.min_ratio, 0.05);
}

TEST(Mesh, RegularityOfUnitSquareElement) {
    // A single unit-square element: each face triangle has area 1/4,
    // h = sqrt(2), |F| = 1, so the ratio is 2*(1/4)/(sqrt(2)*1).
    PolyMesh mesh;
    mesh.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    mesh.elements.resize(1);
    mesh.elements[0].verts = {0, 1, 2, 3};
    finalize_mesh(mesh);
    const RegularityReport rep = regularity_report(mesh, 0.0, nullptr);
    EXPECT_NEAR(rep.min_ratio, 2.0 * 0.25 / std::sqrt(2.0), 1e-14);
}

TEST(Mesh, SaveLoadRoundTripIsExact) {
    const PolyMesh mesh = generate_voronoi_mesh(unit_square(), 30, 8, 11);
    std::ostringstream os;
    save_mesh(mesh, os);
    std::istringstream is(os.str());
    const PolyMesh loaded = load_mesh(is);
    ASSERT_EQ(loaded.n_vertices(), mesh.n_vertices());
    ASSERT_EQ(loaded.n_elements(), mesh.n_elements());
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        EXPECT_EQ(loaded.vertices[static_cast<std::size_t>(v)].x, mesh.vertices[static_cast<std::size_t>(v)].x);
        EXPECT_EQ(loaded.vertices[static_cast<std::size_t>(v)].y, mesh.vertices[static_cast<std::size_t>(v)].y);
    }
    std::ostringstream os2;
    save_mesh(loaded, os2);
    EXPECT_EQ(os.str(), os2.str());
}

TEST(Mesh, LoadRejectsMalformedInput) {
    {
        std::istringstream is("polygons 1 3 1\n");
        EXPECT_THROW(load_mesh(is), Error);
    }
    {
        // Vertex index out of range on line 6.
        std::istringstream is(
            "polymesh 1 4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 7\n");
        try {
            load_mesh(is);
            FAIL() << "expected an error";
        } catch (const Error& e) {
            EXPECT_NE(std::string(e.what()).find("vertex index out of range, line 6"),
                      std::string::npos)
                << e.what();
        }
    }
    {
        // Clockwise element.
        std::istringstream is("polymesh 1 4 1\n0 0\n1 0\n1 1\n0 1\n4 3 2 1 0\n");
        try {
            load_mesh(is);
            FAIL() << "expected an error";
        } catch (const Error& e) {
            EXPECT_NE(std::string(e.what()).find("counter-clockwise"), std::string::npos);
            EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos);
        }
    }
    {
        // Truncated file.
        std::istringstream is("polymesh 1 4 1\n0 0\n1 0\n");
        EXPECT_THROW(load_mesh(is), Error);
    }
}

TEST(Mesh, BoundaryClassifierFirstMatchWins) {
    PolyMesh mesh = generate_voronoi_mesh(unit_square(), 40, 10, 5);
    BoundaryClassifier c;
    // Dirichlet top and right, Neumann bottom and left.
    c.regions.push_back({AxisSegment{1, 1.0, 0.0, 1.0, -1.0}, FaceKind::Dirichlet});
    c.regions.push_back({AxisSegment{0, 1.0, 0.0, 1.0, -1.0}, FaceKind::Dirichlet});
    c.regions.push_back({AxisSegment{1, 0.0, 0.0, 1.0, -1.0}, FaceKind::Neumann});
    c.regions.push_back({AxisSegment{0, 0.0, 0.0, 1.0, -1.0}, FaceKind::Neumann});
    classify_boundary(mesh, c);
    int nd = 0, nn = 0;
    for (const Face& f : mesh.faces) {
        if (f.minus >= 0) {
            EXPECT_EQ(f.kind, FaceKind::Interior);
            continue;
        }
        if (f.kind == FaceKind::Dirichlet) {
            ++nd;
            EXPECT_TRUE(std::abs(f.midpoint.y - 1.0) < 1e-9 || std::abs(f.midpoint.x - 1.0) < 1e-9);
        } else if (f.kind == FaceKind::Neumann) {
            ++nn;
            EXPECT_TRUE(std::abs(f.midpoint.y) < 1e-9 || std::abs(f.midpoint.x) < 1e-9);
        } else {
            FAIL() << "unclassified boundary face";
        }
    }
    EXPECT_GT(nd, 0);
    EXPECT_GT(nn, 0);
}

TEST(Mesh, ClassifierErrorNamesThePoint) {
    PolyMesh mesh = generate_voronoi_mesh(unit_square(), 20, 5, 9);
    BoundaryClassifier c;
    c.regions.push_back({AxisSegment{1, 0.0, 0.0, 1.0, -1.0}, FaceKind::Neumann}); // bottom only
    try {
        classify_boundary(mesh, c);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("matches no boundary region"), std::string::npos);
    }
}

TEST(Mesh, HoleDomainAreaMatchesThe64Gon) {
    DomainSpec dom;
    dom.x0 = -1.0;
    dom.y0 = -1.0;
    dom.x1 = 4.0;
    dom.y1 = 1.0;
    dom.hole_center = Vec2{0.0, 0.0};
    dom.hole_radius = 0.2;
    PolyMesh mesh = generate_voronoi_mesh(dom, 300, 20, 2);
    const double hole_area = polygon_area(dom.hole_polygon());
    const double target = 10.0 - hole_area;
    EXPECT_NEAR(mesh.total_area(), target, 1e-10 * target);
    // The 64-gon defect versus the disk is small but nonzero.
    EXPECT_NEAR(hole_area, M_PI * 0.04, 3e-4);
    EXPECT_GT(M_PI * 0.04 - hole_area, 0.0);

    // Classify: circle region with a tolerance covering the polygonal sagitta.
    BoundaryClassifier c;
    c.regions.push_back({CircleRegion{{0.0, 0.0}, 0.2, 1e-3}, FaceKind::Dirichlet});
    c.regions.push_back({AxisSegment{0, -1.0, -1.0, 1.0, -1.0}, FaceKind::Dirichlet});
    c.regions.push_back({AxisSegment{0, 4.0, -1.0, 1.0, -1.0}, FaceKind::Neumann});
    c.regions.push_back({AxisSegment{1, -1.0, -1.0, 4.0, -1.0}, FaceKind::Dirichlet});
    c.regions.push_back({AxisSegment{1, 1.0, -1.0, 4.0, -1.0}, FaceKind::Dirichlet});
    classify_boundary(mesh, c);
    int hole_faces = 0;
    for (const Face& f : mesh.faces)
        if (f.minus < 0 && f.kind == FaceKind::Dirichlet && dist(f.midpoint, {0.0, 0.0}) < 0.25)
            ++hole_faces;
    EXPECT_GT(hole_faces, 8);
}

TEST(Mesh, GeneratorValidatesArguments) {
    EXPECT_THROW(generate_voronoi_mesh(unit_square(), 3, 0, 1), Error);
    EXPECT_THROW(generate_voronoi_mesh(unit_square(), 10, -1, 1), Error);
}

TEST(Mesh, ClassifierTolerance) {
    // Default tolerance is 1e-9 * domain diameter; a custom one overrides it.
    PolyMesh mesh;
    mesh.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    mesh.elements.resize(1);
    mesh.elements[0].verts = {0, 1, 2, 3};
    finalize_mesh(mesh);
    BoundaryClassifier c = all_dirichlet_square();
    classify_boundary(mesh, c);
    for (const Face& f : mesh.faces) EXPECT_EQ(f.kind, FaceKind::Dirichlet);
}
