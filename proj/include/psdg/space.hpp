// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "psdg/error.hpp"
#include "psdg/geometry.hpp"
#include "psdg/mesh.hpp"
#include "psdg/quadrature.hpp"

namespace psdg {

// Global coefficient vector over V_h = [P_p(T_h)]^{2x2}.  Per-element layout:
// component-major, components ordered (1,1), (1,2), (2,1), (2,2), each with
// the element's scalar modes.
using DofVector = std::vector<double>;

inline int scalar_modes_for_degree(int p) { return (p + 1) * (p + 2) / 2; }

namespace detail {

// Legendre values P_0..P_n (and derivatives) at t in [-1, 1].
inline void legendre_all(int n, double t, double* P, double* dP) {
    P[0] = 1.0;
    if (dP != nullptr) dP[0] = 0.0;
    if (n == 0) return;
    P[1] = t;
    if (dP != nullptr) dP[1] = 1.0;
    for (int k = 2; k <= n; ++k) {
        P[k] = ((2.0 * k - 1.0) * t * P[k - 1] - (k - 1.0) * P[k - 2]) / static_cast<double>(k);
        if (dP != nullptr)
            dP[k] = ((2.0 * k - 1.0) * (P[k - 1] + t * dP[k - 1]) - (k - 1.0) * dP[k - 2]) /
                    static_cast<double>(k);
    }
}

} // namespace detail

// Discontinuous tensor-valued polynomial space on a polytopal mesh.  Scalar
// modes are tensor-product Legendre polynomials on the element bounding box,
// restricted to total degree <= p and L2-orthonormalized element by element
// with the element's own quadrature (modified Gram-Schmidt, two passes).
class DgSpace {
public:
    DgSpace(std::shared_ptr<const PolyMesh> mesh, int degree, int quad_boost = 0)
        : DgSpace(std::move(mesh), std::vector<int>{}, degree, quad_boost) {}

    DgSpace(std::shared_ptr<const PolyMesh> mesh, std::vector<int> degrees, int uniform_degree,
            int quad_boost = 0)
        : mesh_(std::move(mesh)), quad_boost_(quad_boost) {
        require(mesh_ != nullptr && mesh_->n_elements() > 0, "DgSpace: empty mesh");
        const std::size_t ne = static_cast<std::size_t>(mesh_->n_elements());
        if (degrees.empty()) degrees.assign(ne, uniform_degree);
        require(degrees.size() == ne, "DgSpace: degree map size mismatch");
        for (int p : degrees) require(p >= 1, "DgSpace: polynomial degree must be >= 1, got ", p);
        require(quad_boost >= 0, "DgSpace: quadrature boost must be non-negative");
        degree_ = std::move(degrees);
        build();
    }

    const PolyMesh& mesh() const { return *mesh_; }
    std::shared_ptr<const PolyMesh> mesh_ptr() const { return mesh_; }

    int n_elements() const { return mesh_->n_elements(); }
    int degree(int e) const { return degree_[static_cast<std::size_t>(e)]; }
    int max_degree() const {
        int p = 1;
        for (int d : degree_) p = std::max(p, d);
        return p;
    }
    int n_scalar_modes(int e) const { return elems_[static_cast<std::size_t>(e)].N; }
    std::size_t elem_offset(int e) const { return elems_[static_cast<std::size_t>(e)].offset; }
    std::size_t elem_dofs(int e) const { return 4u * static_cast<std::size_t>(n_scalar_modes(e)); }
    std::size_t total_dofs() const { return total_dofs_; }

    const QuadRule& volume_rule(int e) const { return elems_[static_cast<std::size_t>(e)].vol; }
    // Orthonormal basis values at the cached volume points, nq x N row-major.
    const std::vector<double>& volume_values(int e) const {
        return elems_[static_cast<std::size_t>(e)].vol_val;
    }

    const QuadRule& face_rule(int f) const { return faces_[static_cast<std::size_t>(f)].rule; }
    int face_order(int f) const { return faces_[static_cast<std::size_t>(f)].order; }

    // Cached plus-side traces on boundary faces (used every time step).
    const std::vector<double>& boundary_values(int f) const {
        const FaceData& fd = faces_[static_cast<std::size_t>(f)];
        require(!fd.val_plus.empty(), "face ", f, " has no cached boundary traces");
        return fd.val_plus;
    }
    const std::vector<double>& boundary_gx(int f) const { return faces_[static_cast<std::size_t>(f)].gx_plus; }
    const std::vector<double>& boundary_gy(int f) const { return faces_[static_cast<std::size_t>(f)].gy_plus; }

    // Basis evaluation at arbitrary points; outputs are n x N row-major.
    void eval_basis(int e, const Vec2* pts, std::size_t n, std::vector<double>& val,
                    std::vector<double>* gx = nullptr, std::vector<double>* gy = nullptr) const {
        const ElemBasis& eb = elems_[static_cast<std::size_t>(e)];
        const int p = degree_[static_cast<std::size_t>(e)];
        const int N = eb.N;
        val.resize(n * static_cast<std::size_t>(N));
        if (gx != nullptr) gx->resize(n * static_cast<std::size_t>(N));
        if (gy != nullptr) gy->resize(n * static_cast<std::size_t>(N));
        std::vector<double> Px(static_cast<std::size_t>(p) + 1), Py(static_cast<std::size_t>(p) + 1);
        std::vector<double> dPx(static_cast<std::size_t>(p) + 1), dPy(static_cast<std::size_t>(p) + 1);
        std::vector<double> raw(static_cast<std::size_t>(N)), rawx, rawy;
        const bool grads = gx != nullptr || gy != nullptr;
        if (grads) {
            rawx.resize(static_cast<std::size_t>(N));
            rawy.resize(static_cast<std::size_t>(N));
        }
        const double sx = 2.0 / (eb.bbox.x1 - eb.bbox.x0);
        const double sy = 2.0 / (eb.bbox.y1 - eb.bbox.y0);
        const auto& modes = mode_table(p);
        for (std::size_t q = 0; q < n; ++q) {
            const double xi = sx * (pts[q].x - 0.5 * (eb.bbox.x0 + eb.bbox.x1));
            const double eta = sy * (pts[q].y - 0.5 * (eb.bbox.y0 + eb.bbox.y1));
            detail::legendre_all(p, xi, Px.data(), grads ? dPx.data() : nullptr);
            detail::legendre_all(p, eta, Py.data(), grads ? dPy.data() : nullptr);
            for (int m = 0; m < N; ++m) {
                const auto [i, j] = modes[static_cast<std::size_t>(m)];
                raw[static_cast<std::size_t>(m)] = Px[static_cast<std::size_t>(i)] * Py[static_cast<std::size_t>(j)];
                if (grads) {
                    rawx[static_cast<std::size_t>(m)] =
                        sx * dPx[static_cast<std::size_t>(i)] * Py[static_cast<std::size_t>(j)];
                    rawy[static_cast<std::size_t>(m)] =
                        sy * Px[static_cast<std::size_t>(i)] * dPy[static_cast<std::size_t>(j)];
                }
            }
            // Apply the lower-triangular orthonormalization transform.
            for (int k = 0; k < N; ++k) {
                const double* Tk = eb.T.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(N);
                double v = 0.0, vx = 0.0, vy = 0.0;
                for (int m = 0; m <= k; ++m) {
                    v += Tk[m] * raw[static_cast<std::size_t>(m)];
                    if (grads) {
                        vx += Tk[m] * rawx[static_cast<std::size_t>(m)];
                        vy += Tk[m] * rawy[static_cast<std::size_t>(m)];
                    }
                }
                val[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(k)] = v;
                if (gx != nullptr) (*gx)[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(k)] = vx;
                if (gy != nullptr) (*gy)[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(k)] = vy;
            }
        }
    }

    Mat2 evaluate(const DofVector& u, int e, Vec2 x) const {
        check_size(u);
        std::vector<double> val;
        eval_basis(e, &x, 1, val);
        const int N = n_scalar_modes(e);
        const std::size_t off = elem_offset(e);
        Mat2 r;
        for (int c = 0; c < 4; ++c) {
            double s = 0.0;
            for (int m = 0; m < N; ++m)
                s += u[off + static_cast<std::size_t>(c * N + m)] * val[static_cast<std::size_t>(m)];
            r(c / 2, c % 2) = s;
        }
        return r;
    }

    Vec2 evaluate_div(const DofVector& u, int e, Vec2 x) const {
        check_size(u);
        std::vector<double> val, gx, gy;
        eval_basis(e, &x, 1, val, &gx, &gy);
        const int N = n_scalar_modes(e);
        const std::size_t off = elem_offset(e);
        Vec2 d{0.0, 0.0};
        for (int m = 0; m < N; ++m) {
            d.x += u[off + static_cast<std::size_t>(m)] * gx[static_cast<std::size_t>(m)] +
                   u[off + static_cast<std::size_t>(N + m)] * gy[static_cast<std::size_t>(m)];
            d.y += u[off + static_cast<std::size_t>(2 * N + m)] * gx[static_cast<std::size_t>(m)] +
                   u[off + static_cast<std::size_t>(3 * N + m)] * gy[static_cast<std::size_t>(m)];
        }
        return d;
    }

    void check_size(const DofVector& u) const {
        require(u.size() == total_dofs_, "DofVector has length ", u.size(), ", expected ", total_dofs_);
    }

    const std::vector<std::pair<int, int>>& mode_table(int p) const {
        return mode_tables_[static_cast<std::size_t>(p)];
    }

private:
    struct ElemBasis {
        int N = 0;
        std::size_t offset = 0;
        BBox bbox;
        std::vector<double> T;       // N x N lower-triangular, row-major
        QuadRule vol;
        std::vector<double> vol_val; // nq x N
    };
    struct FaceData {
        QuadRule rule;
        int order = 0;
        std::vector<double> val_plus, gx_plus, gy_plus; // boundary faces only
    };

    void build() {
        const PolyMesh& mesh = *mesh_;
        const int pmax_all = max_degree();
        mode_tables_.resize(static_cast<std::size_t>(pmax_all) + 1);
        for (int p = 0; p <= pmax_all; ++p) {
            auto& tab = mode_tables_[static_cast<std::size_t>(p)];
            for (int d = 0; d <= p; ++d)
                for (int i = d; i >= 0; --i) tab.emplace_back(i, d - i);
        }

        const std::size_t ne = static_cast<std::size_t>(mesh.n_elements());
        elems_.resize(ne);
        total_dofs_ = 0;
        for (std::size_t e = 0; e < ne; ++e) {
            ElemBasis& eb = elems_[e];
            const int p = degree_[e];
            eb.N = scalar_modes_for_degree(p);
            eb.offset = total_dofs_;
            total_dofs_ += 4u * static_cast<std::size_t>(eb.N);
            eb.bbox = mesh.elements[e].bbox;
            require(eb.bbox.x1 > eb.bbox.x0 && eb.bbox.y1 > eb.bbox.y0,
                    "element ", e, " has a degenerate bounding box");

            const int order = 2 * p + 2 + quad_boost_;
            for (std::size_t t = 0; t < mesh.elements[e].subtris.size(); ++t) {
                const auto c = mesh.subtri_corners(static_cast<int>(e), t);
                append_triangle_quadrature(eb.vol, c[0], c[1], c[2], order);
            }
            orthonormalize(static_cast<int>(e));
            // Re-evaluate through the public path so cached values agree
            // bit-for-bit with eval_basis.
            eval_basis(static_cast<int>(e), eb.vol.pts.data(), eb.vol.pts.size(), eb.vol_val);
        }

        faces_.resize(static_cast<std::size_t>(mesh.n_faces()));
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            const Face& face = mesh.faces[f];
            FaceData& fd = faces_[f];
            int p = degree_[static_cast<std::size_t>(face.plus)];
            if (face.minus >= 0) p = std::max(p, degree_[static_cast<std::size_t>(face.minus)]);
            fd.order = 2 * p + 2 + quad_boost_;
            const Vec2 a = mesh.vertices[static_cast<std::size_t>(face.a)];
            const Vec2 b = mesh.vertices[static_cast<std::size_t>(face.b)];
            fd.rule = segment_quadrature(a, b, fd.order);
            if (face.minus < 0)
                eval_basis(face.plus, fd.rule.pts.data(), fd.rule.pts.size(), fd.val_plus,
                           &fd.gx_plus, &fd.gy_plus);
        }
    }

    // Two-pass modified Gram-Schmidt in the element's quadrature inner product.
    void orthonormalize(int e) {
        ElemBasis& eb = elems_[static_cast<std::size_t>(e)];
        const int N = eb.N;
        const std::size_t nq = eb.vol.size();
        require(nq >= static_cast<std::size_t>(N),
                "element ", e, " has fewer quadrature points than basis modes");
        // Raw values, transform initialized to identity, then MGS columns.
        eb.T.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(N), 0.0);
        std::vector<double> V(nq * static_cast<std::size_t>(N));
        {
            // Temporarily set T = I so eval path can't be used; build raw directly.
            const int p = degree_[static_cast<std::size_t>(e)];
            std::vector<double> Px(static_cast<std::size_t>(p) + 1), Py(static_cast<std::size_t>(p) + 1);
            const double sx = 2.0 / (eb.bbox.x1 - eb.bbox.x0);
            const double sy = 2.0 / (eb.bbox.y1 - eb.bbox.y0);
            const auto& modes = mode_table(p);
            for (std::size_t q = 0; q < nq; ++q) {
                const Vec2 pt = eb.vol.pts[q];
                const double xi = sx * (pt.x - 0.5 * (eb.bbox.x0 + eb.bbox.x1));
                const double eta = sy * (pt.y - 0.5 * (eb.bbox.y0 + eb.bbox.y1));
                detail::legendre_all(p, xi, Px.data(), nullptr);
                detail::legendre_all(p, eta, Py.data(), nullptr);
                for (int m = 0; m < N; ++m) {
                    const auto [i, j] = modes[static_cast<std::size_t>(m)];
                    V[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(m)] =
                        Px[static_cast<std::size_t>(i)] * Py[static_cast<std::size_t>(j)];
                }
            }
        }
        auto col_dot = [&](int a, int b) {
            double s = 0.0;
            for (std::size_t q = 0; q < nq; ++q)
                s += eb.vol.wts[q] * V[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(a)] *
                     V[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(b)];
            return s;
        };
        for (int k = 0; k < N; ++k)
            eb.T[static_cast<std::size_t>(k) * static_cast<std::size_t>(N) + static_cast<std::size_t>(k)] = 1.0;
        const double area = mesh_->elements[static_cast<std::size_t>(e)].area;
        for (int k = 0; k < N; ++k) {
            double* Tk = eb.T.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(N);
            for (int pass = 0; pass < 2; ++pass) {
                for (int j = 0; j < k; ++j) {
                    const double r = col_dot(k, j);
                    const double* Tj = eb.T.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(N);
                    for (std::size_t q = 0; q < nq; ++q)
                        V[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(k)] -=
                            r * V[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(j)];
                    for (int m = 0; m <= j; ++m) Tk[m] -= r * Tj[m];
                }
            }
            const double nrm2 = col_dot(k, k);
            require(nrm2 > 1e-28 * area, "basis orthonormalization failed on element ", e,
                    " (degenerate geometry?)");
            const double inv = 1.0 / std::sqrt(nrm2);
            for (std::size_t q = 0; q < nq; ++q)
                V[q * static_cast<std::size_t>(N) + static_cast<std::size_t>(k)] *= inv;
            for (int m = 0; m <= k; ++m) Tk[m] *= inv;
        }
        eb.vol_val = std::move(V);
    }

    std::shared_ptr<const PolyMesh> mesh_;
    std::vector<int> degree_;
    int quad_boost_ = 0;
    std::size_t total_dofs_ = 0;
    std::vector<ElemBasis> elems_;
    std::vector<FaceData> faces_;
    std::vector<std::vector<std::pair<int, int>>> mode_tables_;
};

// L2 projection onto V_h: with an orthonormal basis the coefficients are the
// quadrature inner products against the basis.
inline DofVector l2_project(const DgSpace& space, const std::function<Mat2(Vec2)>& f) {
    DofVector u(space.total_dofs(), 0.0);
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        const std::vector<double>& val = space.volume_values(e);
        const int N = space.n_scalar_modes(e);
        const std::size_t off = space.elem_offset(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Mat2 fx = f(rule.pts[q]);
            const double w = rule.wts[q];
            const double* phi = val.data() + q * static_cast<std::size_t>(N);
            for (int c = 0; c < 4; ++c) {
                const double fc = w * fx(c / 2, c % 2);
                double* uc = u.data() + off + static_cast<std::size_t>(c * N);
                for (int m = 0; m < N; ++m) uc[m] += fc * phi[m];
            }
        }
    }
    return u;
}

// Discrete L2 norm of the difference between a tensor field and a discrete
// function, via the space's volume quadrature.
inline double l2_error(const DgSpace& space, const DofVector& u, const std::function<Mat2(Vec2)>& f) {
    space.check_size(u);
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
            const Mat2 d = f(rule.pts[q]) - uh;
            s += rule.wts[q] * frob_dot(d, d);
        }
    }
    return std::sqrt(s);
}

inline double l2_norm_of_field(const DgSpace& space, const std::function<Mat2(Vec2)>& f) {
    double s = 0.0;
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Mat2 fx = f(rule.pts[q]);
            s += rule.wts[q] * frob_dot(fx, fx);
        }
    }
    return std::sqrt(s);
}

} // namespace psdg
