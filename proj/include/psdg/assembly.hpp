// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "psdg/error.hpp"
#include "psdg/scenario.hpp"
#include "psdg/space.hpp"
#include "psdg/sparse.hpp"

namespace psdg {

struct PenaltyParams {
    double alpha = 10.0; // dimensionless interior-penalty coefficient
};

// Face penalty gamma_e = alpha * max over adjacent elements of p^2 / h.
// Dirichlet faces carry no penalty; asking for one is a contract violation.
inline double penalty_gamma(const DgSpace& space, int f, const PenaltyParams& pen) {
    require(pen.alpha > 0.0, "penalty coefficient alpha must be positive, got ", pen.alpha);
    const Face& face = space.mesh().faces[static_cast<std::size_t>(f)];
    auto term = [&](int e) {
        const double p = static_cast<double>(space.degree(e));
        return p * p / space.mesh().elements[static_cast<std::size_t>(e)].h;
    };
    switch (face.kind) {
    case FaceKind::Interior:
        return pen.alpha * std::max(term(face.plus), term(face.minus));
    case FaceKind::Neumann:
        return pen.alpha * term(face.plus);
    case FaceKind::Dirichlet:
        fail("penalty coefficient requested on a Dirichlet face (face ", f, ")");
    default:
        fail("face ", f, " has not been classified");
    }
}

namespace detail {

inline void require_classified(const PolyMesh& mesh) {
    for (int f = 0; f < mesh.n_faces(); ++f)
        require(mesh.faces[static_cast<std::size_t>(f)].kind != FaceKind::Unset,
                "boundary face ", f, " has not been classified");
}

// Side data for face assembly: which element, its traces at the face
// quadrature points, and the sign it carries inside the jump.
struct FaceSide {
    int elem = -1;
    int N = 0;
    std::size_t off = 0;
    double sign = 1.0;
    const std::vector<double>* val = nullptr;
    const std::vector<double>* gx = nullptr;
    const std::vector<double>* gy = nullptr;
};

} // namespace detail

// Mass form M(sigma, tau) = (mu^{-1} dev sigma, dev tau).  With the
// per-element orthonormal scalar basis this is exactly mu^{-1} * (D4 x I) per
// element, where D4 couples only the two diagonal tensor components:
// dev(e11 phi) = (phi/2, 0, 0, -phi/2) and off-diagonal components are left
// untouched.  Assembling the analytic form keeps the isotropic kernel exact
// in floating point: rows carry the same product with opposite signs.
inline CsrMatrix assemble_mass(const DgSpace& space, double mu) {
    require(mu > 0.0, "viscosity must be positive, got ", mu);
    const double invmu = 1.0 / mu;
    const double half = 0.5 * invmu;

    CsrMatrix M;
    M.n = static_cast<std::int32_t>(space.total_dofs());
    M.row_ptr.reserve(static_cast<std::size_t>(M.n) + 1);
    M.row_ptr.push_back(0);
    for (int e = 0; e < space.n_elements(); ++e) {
        const int N = space.n_scalar_modes(e);
        const std::size_t off = space.elem_offset(e);
        for (int c = 0; c < 4; ++c) {
            const bool diag_comp = c == 0 || c == 3;
            for (int m = 0; m < N; ++m) {
                if (diag_comp) {
                    M.col.push_back(static_cast<std::int32_t>(off + static_cast<std::size_t>(m)));
                    M.col.push_back(static_cast<std::int32_t>(off + static_cast<std::size_t>(3 * N + m)));
                    M.val.push_back(c == 0 ? half : -half);
                    M.val.push_back(c == 0 ? -half : half);
                } else {
                    M.col.push_back(static_cast<std::int32_t>(off + static_cast<std::size_t>(c * N + m)));
                    M.val.push_back(invmu);
                }
                M.row_ptr.push_back(static_cast<std::int32_t>(M.col.size()));
            }
        }
    }
    return M;
}

// Stiffness form over interior and Neumann faces:
//   A(sigma, tau) = (div_h sigma, div_h tau)
//                 - <{{div_h sigma}}, [[tau n]]> - <{{div_h tau}}, [[sigma n]]>
//                 + <gamma_e [[sigma n]], [[tau n]]>.
// Dirichlet faces contribute nothing.
inline CsrMatrix assemble_stiffness(const DgSpace& space, const PenaltyParams& pen) {
    detail::require_classified(space.mesh());
    const PolyMesh& mesh = space.mesh();
    CsrMatrix A = make_block_csr(space, true);

    // Volume div-div term: block (c, c') couples modes when the tensor rows
    // match; the entry is the gradient Gram over the component axes.
    std::vector<double> val, gx, gy, G[2][2], B;
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        space.eval_basis(e, rule.pts.data(), rule.pts.size(), val, &gx, &gy);
        const int N = space.n_scalar_modes(e);
        const std::size_t off = space.elem_offset(e);
        const std::vector<double>* g[2] = {&gx, &gy};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                G[a][b].assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(N), 0.0);
                for (std::size_t q = 0; q < rule.size(); ++q) {
                    const double* ga = g[a]->data() + q * static_cast<std::size_t>(N);
                    const double* gb = g[b]->data() + q * static_cast<std::size_t>(N);
                    const double w = rule.wts[q];
                    for (int m = 0; m < N; ++m) {
                        const double wg = w * ga[m];
                        double* row = G[a][b].data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(N);
                        for (int mm = 0; mm < N; ++mm) row[mm] += wg * gb[mm];
                    }
                }
            }
        const std::size_t bn = 4u * static_cast<std::size_t>(N);
        B.assign(bn * bn, 0.0);
        for (int c = 0; c < 4; ++c)
            for (int cc = 0; cc < 4; ++cc) {
                if ((c >> 1) != (cc >> 1)) continue;
                const std::vector<double>& Gab = G[c & 1][cc & 1];
                for (int m = 0; m < N; ++m)
                    for (int mm = 0; mm < N; ++mm)
                        B[(static_cast<std::size_t>(c * N + m)) * bn + static_cast<std::size_t>(cc * N + mm)] =
                            Gab[static_cast<std::size_t>(m) * static_cast<std::size_t>(N) + static_cast<std::size_t>(mm)];
            }
        add_block(A, off, off, B.data(), static_cast<int>(bn), static_cast<int>(bn));
    }

    // Face terms.
    std::vector<double> vp, gxp, gyp, vm, gxm, gym, P, Qvg[2], Qgv[2], E;
    for (int f = 0; f < mesh.n_faces(); ++f) {
        const Face& face = mesh.faces[static_cast<std::size_t>(f)];
        if (face.kind == FaceKind::Dirichlet) continue;
        const QuadRule& rule = space.face_rule(f);
        const double gamma = penalty_gamma(space, f, pen);
        const double nrm[2] = {face.normal.x, face.normal.y};

        std::array<detail::FaceSide, 2> sides;
        int nsides = 1;
        double half = 1.0;
        space.eval_basis(face.plus, rule.pts.data(), rule.pts.size(), vp, &gxp, &gyp);
        sides[0] = {face.plus, space.n_scalar_modes(face.plus), space.elem_offset(face.plus), 1.0,
                    &vp, &gxp, &gyp};
        if (face.kind == FaceKind::Interior) {
            space.eval_basis(face.minus, rule.pts.data(), rule.pts.size(), vm, &gxm, &gym);
            sides[1] = {face.minus, space.n_scalar_modes(face.minus), space.elem_offset(face.minus),
                        -1.0, &vm, &gxm, &gym};
            nsides = 2;
            half = 0.5;
        }

        for (int sa = 0; sa < nsides; ++sa)
            for (int sb = 0; sb < nsides; ++sb) {
                const detail::FaceSide& A_ = sides[static_cast<std::size_t>(sa)];
                const detail::FaceSide& B_ = sides[static_cast<std::size_t>(sb)];
                const int NA = A_.N, NB = B_.N;
                const std::size_t nab = static_cast<std::size_t>(NA) * static_cast<std::size_t>(NB);
                P.assign(nab, 0.0);
                const std::vector<double>* gB[2] = {B_.gx, B_.gy};
                const std::vector<double>* gA[2] = {A_.gx, A_.gy};
                for (int a = 0; a < 2; ++a) {
                    Qvg[a].assign(nab, 0.0);
                    Qgv[a].assign(nab, 0.0);
                }
                for (std::size_t q = 0; q < rule.size(); ++q) {
                    const double w = rule.wts[q];
                    const double* va = A_.val->data() + q * static_cast<std::size_t>(NA);
                    const double* vb = B_.val->data() + q * static_cast<std::size_t>(NB);
                    for (int m = 0; m < NA; ++m) {
                        const double wv = w * va[m];
                        double* Pr = P.data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(NB);
                        for (int mm = 0; mm < NB; ++mm) Pr[mm] += wv * vb[mm];
                    }
                    for (int a = 0; a < 2; ++a) {
                        const double* gb = gB[a]->data() + q * static_cast<std::size_t>(NB);
                        const double* ga = gA[a]->data() + q * static_cast<std::size_t>(NA);
                        for (int m = 0; m < NA; ++m) {
                            const double wv = w * va[m];
                            const double wg = w * ga[m];
                            double* qr = Qvg[a].data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(NB);
                            double* ql = Qgv[a].data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(NB);
                            for (int mm = 0; mm < NB; ++mm) {
                                qr[mm] += wv * gb[mm];
                                ql[mm] += wg * vb[mm];
                            }
                        }
                    }
                }
                // Assemble the (c, c') blocks with matching tensor rows.
                for (int r = 0; r < 2; ++r)
                    for (int aa = 0; aa < 2; ++aa)
                        for (int ab = 0; ab < 2; ++ab) {
                            const int c = 2 * r + aa;
                            const int cc = 2 * r + ab;
                            const double pen_c = A_.sign * B_.sign * nrm[aa] * nrm[ab] * gamma;
                            const double con_c = -half * A_.sign * nrm[aa];
                            const double adj_c = -half * B_.sign * nrm[ab];
                            E.assign(nab, 0.0);
                            for (std::size_t k = 0; k < nab; ++k)
                                E[k] = pen_c * P[k] + con_c * Qvg[ab][k] + adj_c * Qgv[aa][k];
                            add_block(A, A_.off + static_cast<std::size_t>(c * NA),
                                      B_.off + static_cast<std::size_t>(cc * NB), E.data(), NA, NB);
                        }
            }
    }
    return A;
}

// Load functional
//   F(tau) = (F, tau) + <g_D, tau n>_{Dirichlet} + <g_N, gamma_e tau n - div_h tau>_{Neumann}
// The essential (Neumann) datum enters with the adjoint-consistency sign of
// the symmetric Nitsche method: elementwise integration by parts of the
// div-div form shows a smooth field with sigma n = g_N satisfies the discrete
// system only with the minus sign (the consistency test pins this down).
inline DofVector assemble_rhs(const DgSpace& space, const Scenario& scn, double t,
                              const PenaltyParams& pen) {
    detail::require_classified(space.mesh());
    const PolyMesh& mesh = space.mesh();
    DofVector b(space.total_dofs(), 0.0);

    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        const std::vector<double>& val = space.volume_values(e);
        const int N = space.n_scalar_modes(e);
        const std::size_t off = space.elem_offset(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Mat2 F = scn.source(rule.pts[q], t);
            const double w = rule.wts[q];
            const double* phi = val.data() + q * static_cast<std::size_t>(N);
            for (int c = 0; c < 4; ++c) {
                const double fc = w * F(c / 2, c % 2);
                if (fc == 0.0) continue;
                double* bc = b.data() + off + static_cast<std::size_t>(c * N);
                for (int m = 0; m < N; ++m) bc[m] += fc * phi[m];
            }
        }
    }

    for (int f = 0; f < mesh.n_faces(); ++f) {
        const Face& face = mesh.faces[static_cast<std::size_t>(f)];
        if (face.kind == FaceKind::Interior) continue;
        const QuadRule& rule = space.face_rule(f);
        const std::vector<double>& val = space.boundary_values(f);
        const int N = space.n_scalar_modes(face.plus);
        const std::size_t off = space.elem_offset(face.plus);
        const double nrm[2] = {face.normal.x, face.normal.y};

        if (face.kind == FaceKind::Dirichlet) {
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const Vec2 g = scn.dirichlet(rule.pts[q], t);
                const double gr[2] = {g.x, g.y};
                const double w = rule.wts[q];
                const double* phi = val.data() + q * static_cast<std::size_t>(N);
                for (int r = 0; r < 2; ++r)
                    for (int a = 0; a < 2; ++a) {
                        const double fc = w * gr[r] * nrm[a];
                        if (fc == 0.0) continue;
                        double* bc = b.data() + off + static_cast<std::size_t>((2 * r + a) * N);
                        for (int m = 0; m < N; ++m) bc[m] += fc * phi[m];
                    }
            }
        } else { // Neumann
            const double gamma = penalty_gamma(space, f, pen);
            const std::vector<double>& gxv = space.boundary_gx(f);
            const std::vector<double>& gyv = space.boundary_gy(f);
            const std::vector<double>* gv[2] = {&gxv, &gyv};
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const Vec2 g = scn.neumann(rule.pts[q], face.normal, t);
                const double gr[2] = {g.x, g.y};
                const double w = rule.wts[q];
                const double* phi = val.data() + q * static_cast<std::size_t>(N);
                for (int r = 0; r < 2; ++r)
                    for (int a = 0; a < 2; ++a) {
                        const double fc = w * gr[r];
                        if (fc == 0.0) continue;
                        const double* ga = gv[a]->data() + q * static_cast<std::size_t>(N);
                        double* bc = b.data() + off + static_cast<std::size_t>((2 * r + a) * N);
                        for (int m = 0; m < N; ++m) bc[m] += fc * (gamma * nrm[a] * phi[m] - ga[m]);
                    }
            }
        }
    }
    return b;
}

namespace detail {

// Evaluate a discrete tensor field at pre-tabulated basis values.
inline Mat2 combine_tensor(const double* u_off, const double* phi, int N) {
    Mat2 m;
    for (int c = 0; c < 4; ++c) {
        double s = 0.0;
        const double* uc = u_off + static_cast<std::ptrdiff_t>(c) * N;
        for (int k = 0; k < N; ++k) s += uc[k] * phi[k];
        m(c / 2, c % 2) = s;
    }
    return m;
}

inline Vec2 combine_div(const double* u_off, const double* gx, const double* gy, int N) {
    Vec2 d{0.0, 0.0};
    for (int k = 0; k < N; ++k) {
        d.x += u_off[k] * gx[k] + u_off[N + k] * gy[k];
        d.y += u_off[2 * N + k] * gx[k] + u_off[3 * N + k] * gy[k];
    }
    return d;
}

} // namespace detail

// dG seminorm |sigma|^2_dG = ||div_h sigma||^2 + sum over interior/Neumann
// faces of the penalty-weighted normal-jump norm.
inline double dg_seminorm_sq(const DgSpace& space, const DofVector& u, const PenaltyParams& pen) {
    space.check_size(u);
    const PolyMesh& mesh = space.mesh();
    double s = 0.0;
    std::vector<double> val, gx, gy, vm, gxm, gym;
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        space.eval_basis(e, rule.pts.data(), rule.pts.size(), val, &gx, &gy);
        const int N = space.n_scalar_modes(e);
        const double* ue = u.data() + space.elem_offset(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Vec2 d = detail::combine_div(ue, gx.data() + q * static_cast<std::size_t>(N),
                                               gy.data() + q * static_cast<std::size_t>(N), N);
            s += rule.wts[q] * (d.x * d.x + d.y * d.y);
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
            Mat2 jump = detail::combine_tensor(up, val.data() + q * static_cast<std::size_t>(Np), Np);
            if (interior)
                jump = jump - detail::combine_tensor(um, vm.data() + q * static_cast<std::size_t>(Nm), Nm);
            const Vec2 jn{jump(0, 0) * face.normal.x + jump(0, 1) * face.normal.y,
                          jump(1, 0) * face.normal.x + jump(1, 1) * face.normal.y};
            s += rule.wts[q] * gamma * (jn.x * jn.x + jn.y * jn.y);
        }
    }
    return s;
}

inline double dg_seminorm(const DgSpace& space, const DofVector& u, const PenaltyParams& pen) {
    return std::sqrt(dg_seminorm_sq(space, u, pen));
}

// Triple norm of a discrete field: the dG seminorm plus the penalty-inverse
// weighted average of the elementwise divergence over interior/Neumann faces.
inline double triple_norm(const DgSpace& space, const DofVector& u, const PenaltyParams& pen) {
    space.check_size(u);
    const PolyMesh& mesh = space.mesh();
    double s = dg_seminorm_sq(space, u, pen);
    std::vector<double> val, gx, gy, vm, gxm, gym;
    for (int f = 0; f < mesh.n_faces(); ++f) {
        const Face& face = mesh.faces[static_cast<std::size_t>(f)];
        if (face.kind == FaceKind::Dirichlet) continue;
        const QuadRule& rule = space.face_rule(f);
        const double gamma = penalty_gamma(space, f, pen);
        space.eval_basis(face.plus, rule.pts.data(), rule.pts.size(), val, &gx, &gy);
        const int Np = space.n_scalar_modes(face.plus);
        const double* up = u.data() + space.elem_offset(face.plus);
        const bool interior = face.kind == FaceKind::Interior;
        int Nm = 0;
        const double* um = nullptr;
        if (interior) {
            space.eval_basis(face.minus, rule.pts.data(), rule.pts.size(), vm, &gxm, &gym);
            Nm = space.n_scalar_modes(face.minus);
            um = u.data() + space.elem_offset(face.minus);
        }
        for (std::size_t q = 0; q < rule.size(); ++q) {
            Vec2 avg = detail::combine_div(up, gx.data() + q * static_cast<std::size_t>(Np),
                                           gy.data() + q * static_cast<std::size_t>(Np), Np);
            if (interior) {
                const Vec2 dm = detail::combine_div(um, gxm.data() + q * static_cast<std::size_t>(Nm),
                                                    gym.data() + q * static_cast<std::size_t>(Nm), Nm);
                avg.x = 0.5 * (avg.x + dm.x);
                avg.y = 0.5 * (avg.y + dm.y);
            }
            s += rule.wts[q] / gamma * (avg.x * avg.x + avg.y * avg.y);
        }
    }
    return std::sqrt(s);
}

// Triple norm of a smooth (single-valued) field given with its divergence:
// interior jumps vanish, Neumann faces keep the trace terms.
inline double triple_norm_field(const DgSpace& space, const std::function<Mat2(Vec2)>& sigma,
                                const std::function<Vec2(Vec2)>& div_sigma,
                                const PenaltyParams& pen) {
    const PolyMesh& mesh = space.mesh();
    double s = 0.0;
    for (int e = 0; e < space.n_elements(); ++e) {
        const QuadRule& rule = space.volume_rule(e);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Vec2 d = div_sigma(rule.pts[q]);
            s += rule.wts[q] * (d.x * d.x + d.y * d.y);
        }
    }
    for (int f = 0; f < mesh.n_faces(); ++f) {
        const Face& face = mesh.faces[static_cast<std::size_t>(f)];
        if (face.kind == FaceKind::Dirichlet) continue;
        const QuadRule& rule = space.face_rule(f);
        const double gamma = penalty_gamma(space, f, pen);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Vec2 d = div_sigma(rule.pts[q]);
            double avg2 = d.x * d.x + d.y * d.y;
            if (face.kind == FaceKind::Neumann) {
                const Mat2 m = sigma(rule.pts[q]);
                const Vec2 tn{m(0, 0) * face.normal.x + m(0, 1) * face.normal.y,
                              m(1, 0) * face.normal.x + m(1, 1) * face.normal.y};
                s += rule.wts[q] * gamma * (tn.x * tn.x + tn.y * tn.y);
            }
            s += rule.wts[q] / gamma * avg2;
        }
    }
    return std::sqrt(s);
}

// ||mu^{-1/2} dev sigma_h||_{L2}; equals sqrt(x^T M x).
inline double dev_energy_norm(const DgSpace& space, const DofVector& u, double mu) {
    space.check_size(u);
    double s = 0.0;
    for (int e = 0; e < space.n_elements(); ++e) {
        const int N = space.n_scalar_modes(e);
        const double* ue = u.data() + space.elem_offset(e);
        // Orthonormal modes: integrate dev componentwise by coefficients.
        for (int m = 0; m < N; ++m) {
            const double d = 0.5 * (ue[m] - ue[3 * N + m]);
            s += 2.0 * d * d + ue[N + m] * ue[N + m] + ue[2 * N + m] * ue[2 * N + m];
        }
    }
    return std::sqrt(s / mu);
}

} // namespace psdg
