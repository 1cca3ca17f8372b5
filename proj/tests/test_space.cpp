// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "psdg/mesh.hpp"
#include "psdg/rng.hpp"
#include "psdg/space.hpp"
#include "psdg/voronoi.hpp"

namespace {

using namespace psdg;

std::shared_ptr<const PolyMesh> unit_square_mesh() {
    PolyMesh m;
    m.vertices = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    m.elements.resize(1);
    m.elements[0].verts = {0, 1, 2, 3};
    finalize_mesh(m);
    return std::make_shared<PolyMesh>(std::move(m));
}

std::shared_ptr<const PolyMesh> cvt_mesh(int n, unsigned long long seed) {
    DomainSpec dom;
    dom.x0 = 0.0; dom.y0 = 0.0; dom.x1 = 1.0; dom.y1 = 1.0;
    PolyMesh m = generate_voronoi_mesh(dom, n, 50, seed);
    return std::make_shared<PolyMesh>(std::move(m));
}

TEST(DgSpace, ConstantModeIsInverseSqrtArea) {
    auto mesh = cvt_mesh(24, 3);
    DgSpace space(mesh, 2);
    Rng rng(11);
    for (int e = 0; e < space.n_elements(); ++e) {
        const double expect = 1.0 / std::sqrt(mesh->elements[static_cast<std::size_t>(e)].area);
        // Constant mode: sample anywhere, including off-centroid points.
        const Vec2 c = mesh->elements[static_cast<std::size_t>(e)].centroid;
        Vec2 pts[2] = {c, {c.x + 0.01 * rng.uniform(-1.0, 1.0), c.y + 0.01 * rng.uniform(-1.0, 1.0)}};
        std::vector<double> val;
        space.eval_basis(e, pts, 2, val);
        const int N = space.n_scalar_modes(e);
        EXPECT_NEAR(val[0], expect, 1e-12 * expect);
        EXPECT_NEAR(val[static_cast<std::size_t>(N)], expect, 1e-12 * expect);
    }
}

TEST(DgSpace, GramMatrixIsIdentity) {
    auto mesh = cvt_mesh(16, 5);
    for (int p = 1; p <= 4; ++p) {
        DgSpace space(mesh, p);
        for (int e = 0; e < space.n_elements(); ++e) {
            const QuadRule& rule = space.volume_rule(e);
            const std::vector<double>& val = space.volume_values(e);
            const int N = space.n_scalar_modes(e);
            for (int a = 0; a < N; ++a) {
                for (int b = a; b < N; ++b) {
                    double s = 0.0;
                    for (std::size_t q = 0; q < rule.size(); ++q)
                        s += rule.wts[q] * val[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(a)] *
                             val[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(b)];
                    EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-10)
                        << "p=" << p << " e=" << e << " (" << a << "," << b << ")";
                }
            }
        }
    }
}

TEST(DgSpace, CachedVolumeValuesMatchEvalBasis) {
    auto mesh = cvt_mesh(9, 2);
    DgSpace space(mesh, 3);
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        std::vector<double> val;
        space.eval_basis(e, rule.pts.data(), rule.pts.size(), val);
        const std::vector<double>& cached = space.volume_values(e);
        ASSERT_EQ(val.size(), cached.size());
        for (std::size_t i = 0; i < val.size(); ++i) EXPECT_DOUBLE_EQ(val[i], cached[i]);
    }
}

TEST(DgSpace, GradientsMatchCentralDifferences) {
    auto mesh = cvt_mesh(12, 7);
    DgSpace space(mesh, 3);
    Rng rng(99);
    const double step = 1e-6;
    for (int e = 0; e < space.n_elements(); ++e) {
        const Vec2 c = mesh->elements[static_cast<std::size_t>(e)].centroid;
        const double h = mesh->elements[static_cast<std::size_t>(e)].h;
        for (int trial = 0; trial < 3; ++trial) {
            const Vec2 x{c.x + 0.1 * h * rng.uniform(-1.0, 1.0), c.y + 0.1 * h * rng.uniform(-1.0, 1.0)};
            std::vector<double> val, gx, gy, vp, vm;
            space.eval_basis(e, &x, 1, val, &gx, &gy);
            const int N = space.n_scalar_modes(e);
            Vec2 xp{x.x + step, x.y}, xm{x.x - step, x.y};
            space.eval_basis(e, &xp, 1, vp);
            space.eval_basis(e, &xm, 1, vm);
            for (int m = 0; m < N; ++m)
                EXPECT_NEAR(gx[static_cast<std::size_t>(m)],
                            (vp[static_cast<std::size_t>(m)] - vm[static_cast<std::size_t>(m)]) / (2 * step), 1e-6);
            xp = {x.x, x.y + step};
            xm = {x.x, x.y - step};
            space.eval_basis(e, &xp, 1, vp);
            space.eval_basis(e, &xm, 1, vm);
            for (int m = 0; m < N; ++m)
                EXPECT_NEAR(gy[static_cast<std::size_t>(m)],
                            (vp[static_cast<std::size_t>(m)] - vm[static_cast<std::size_t>(m)]) / (2 * step), 1e-6);
        }
    }
}

TEST(DgSpace, ProjectionReproducesLinears) {
    auto mesh = cvt_mesh(20, 13);
    DgSpace space(mesh, 1);
    auto f = [](Vec2 x) {
        Mat2 m;
        m(0, 0) = 2.0 + 3.0 * x.x - x.y;
        m(0, 1) = -1.0 + 0.5 * x.x + 2.0 * x.y;
        m(1, 0) = 4.0 * x.y;
        m(1, 1) = -7.0 + x.x;
        return m;
    };
    DofVector u = l2_project(space, f);
    Rng rng(4);
    for (int e = 0; e < space.n_elements(); ++e) {
        const Vec2 c = mesh->elements[static_cast<std::size_t>(e)].centroid;
        const double h = mesh->elements[static_cast<std::size_t>(e)].h;
        for (int trial = 0; trial < 4; ++trial) {
            const Vec2 x{c.x + 0.2 * h * rng.uniform(-1.0, 1.0), c.y + 0.2 * h * rng.uniform(-1.0, 1.0)};
            const Mat2 got = space.evaluate(u, e, x);
            const Mat2 want = f(x);
            for (int c2 = 0; c2 < 4; ++c2)
                EXPECT_NEAR(got(c2 / 2, c2 % 2), want(c2 / 2, c2 % 2), 1e-12);
        }
    }
}

TEST(DgSpace, ProjectionIsIdempotent) {
    auto mesh = cvt_mesh(10, 21);
    DgSpace space(mesh, 3);
    auto f = [](Vec2 x) {
        Mat2 m;
        m(0, 0) = std::sin(x.x) * std::cos(x.y);
        m(0, 1) = std::exp(0.3 * x.x - 0.2 * x.y);
        m(1, 0) = x.x * x.x * x.y;
        m(1, 1) = std::cos(2.0 * x.x + x.y);
        return m;
    };
    DofVector u = l2_project(space, f);
    auto uh = [&](Vec2 x) {
        // locate: brute force over elements
        for (int e = 0; e < space.n_elements(); ++e)
            if (point_in_polygon(space.mesh().element_polygon(e), x)) return space.evaluate(u, e, x);
        return space.evaluate(u, 0, x);
    };
    DofVector u2 = l2_project(space, uh);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        num = std::max(num, std::abs(u2[i] - u[i]));
        den = std::max(den, std::abs(u[i]));
    }
    EXPECT_LE(num, 1e-12 * den)
        << "projection changed coefficients by " << num << " (scale " << den << ")";
}

TEST(DgSpace, BasisLocality) {
    auto mesh = cvt_mesh(8, 17);
    DgSpace space(mesh, 2);
    // A vector supported on element 0 evaluates to zero data-wise in element 1:
    // the layout gives element 1 its own coefficient block.
    DofVector u(space.total_dofs(), 0.0);
    for (std::size_t i = 0; i < space.elem_dofs(0); ++i) u[space.elem_offset(0) + i] = 1.0;
    const Vec2 c1 = mesh->elements[1].centroid;
    const Mat2 v = space.evaluate(u, 1, c1);
    EXPECT_EQ(v(0, 0), 0.0);
    EXPECT_EQ(v(0, 1), 0.0);
    EXPECT_EQ(v(1, 0), 0.0);
    EXPECT_EQ(v(1, 1), 0.0);
}

TEST(DgSpace, CoefficientNormEqualsL2Norm) {
    auto mesh = cvt_mesh(14, 29);
    DgSpace space(mesh, 2);
    Rng rng(55);
    DofVector u(space.total_dofs());
    for (double& x : u) x = rng.uniform(-1.0, 1.0);
    // ||u_h||_{L2}^2 via quadrature should equal the Euclidean coefficient norm
    // squared, because the basis is orthonormal per element and component.
    double quad = 0.0;
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        const std::vector<double>& val = space.volume_values(e);
        const int N = space.n_scalar_modes(e);
        const std::size_t off = space.elem_offset(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            for (int c = 0; c < 4; ++c) {
                double v = 0.0;
                for (int m = 0; m < N; ++m)
                    v += u[off + static_cast<std::size_t>(c * N + m)] *
                         val[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(m)];
                quad += rule.wts[q] * v * v;
            }
        }
    }
    double coef = 0.0;
    for (double x : u) coef += x * x;
    EXPECT_NEAR(quad, coef, 1e-10 * coef);
}

TEST(DgSpace, VolumeRulesIntegrateX2Y2) {
    auto mesh = cvt_mesh(30, 41);
    DgSpace space(mesh, 2); // order 2p+2 = 6 >= 4
    double s = 0.0;
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        for (std::size_t q = 0; q < rule.size(); ++q)
            s += rule.wts[q] * rule.pts[q].x * rule.pts[q].x * rule.pts[q].y * rule.pts[q].y;
    }
    EXPECT_NEAR(s, 1.0 / 9.0, 1e-12 / 9.0);
}

TEST(DgSpace, BoundaryTraceCachesExist) {
    auto mesh = cvt_mesh(10, 31);
    DgSpace space(mesh, 2);
    int n_boundary = 0;
    for (int f = 0; f < mesh->n_faces(); ++f) {
        if (mesh->faces[static_cast<std::size_t>(f)].minus < 0) {
            ++n_boundary;
            const QuadRule& rule = space.face_rule(f);
            const auto& val = space.boundary_values(f);
            const int N = space.n_scalar_modes(mesh->faces[static_cast<std::size_t>(f)].plus);
            EXPECT_EQ(val.size(), rule.size() * static_cast<std::size_t>(N));
            // Face rule integrates 1 to the face length.
            double len = 0.0;
            for (double w : rule.wts) len += w;
            EXPECT_NEAR(len, mesh->faces[static_cast<std::size_t>(f)].length, 1e-13);
        } else {
            EXPECT_THROW(space.boundary_values(f), Error);
        }
    }
    EXPECT_GT(n_boundary, 0);
}

TEST(DgSpace, BestApproximationDecay) {
    auto coarse = cvt_mesh(100, 1);
    auto fine = cvt_mesh(400, 1);
    auto f = [](Vec2 x) {
        const double s = std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
        Mat2 m;
        m(0, 0) = s;
        m(0, 1) = 0.0;
        m(1, 0) = 0.0;
        m(1, 1) = -s;
        return m;
    };
    for (int p = 1; p <= 3; ++p) {
        DgSpace sc(coarse, p), sf(fine, p);
        const double ec = l2_error(sc, l2_project(sc, f), f);
        const double ef = l2_error(sf, l2_project(sf, f), f);
        const double rate = std::log(ec / ef) / std::log(coarse->max_h() / fine->max_h());
        EXPECT_GE(rate, p + 0.5) << "p=" << p << " ec=" << ec << " ef=" << ef;
        EXPECT_LE(rate, p + 2.5) << "p=" << p;
    }
}

TEST(DgSpace, MixedDegreeLayout) {
    auto mesh = cvt_mesh(6, 47);
    std::vector<int> degs(static_cast<std::size_t>(mesh->n_elements()), 1);
    degs[0] = 3;
    degs[1] = 2;
    DgSpace space(mesh, degs, 0);
    EXPECT_EQ(space.n_scalar_modes(0), 10);
    EXPECT_EQ(space.n_scalar_modes(1), 6);
    EXPECT_EQ(space.n_scalar_modes(2), 3);
    std::size_t total = 0;
    for (int e = 0; e < space.n_elements(); ++e) {
        EXPECT_EQ(space.elem_offset(e), total);
        total += space.elem_dofs(e);
    }
    EXPECT_EQ(space.total_dofs(), total);
}

TEST(DgSpace, RejectsBadArguments) {
    auto mesh = unit_square_mesh();
    EXPECT_THROW(DgSpace(mesh, 0), Error);
    EXPECT_THROW(DgSpace(mesh, -1), Error);
    DgSpace space(mesh, 1);
    DofVector wrong(3, 0.0);
    EXPECT_THROW(space.evaluate(wrong, 0, {0.5, 0.5}), Error);
}

} // namespace
