// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "psdg/error.hpp"
#include "psdg/space.hpp"

namespace psdg {

// Compressed sparse row storage with 32-bit indices.  The layout matches what
// Eigen expects for a row-major sparse map, so solvers can wrap it without
// copying.  Column indices are sorted and unique within each row.
struct CsrMatrix {
    std::int32_t n = 0;
    std::vector<std::int32_t> row_ptr; // n + 1
    std::vector<std::int32_t> col;
    std::vector<double> val;

    std::size_t nnz() const { return col.size(); }

    void spmv(const double* x, double* y) const {
        for (std::int32_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::int32_t k = row_ptr[static_cast<std::size_t>(i)];
                 k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
                s += val[static_cast<std::size_t>(k)] * x[col[static_cast<std::size_t>(k)]];
            y[i] = s;
        }
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        require(x.size() == static_cast<std::size_t>(n), "spmv: vector length ", x.size(),
                " does not match matrix dimension ", n);
        std::vector<double> y(static_cast<std::size_t>(n));
        spmv(x.data(), y.data());
        return y;
    }

    // Index of entry (i, j), or -1 when absent from the pattern.
    std::int64_t find(std::int32_t i, std::int32_t j) const {
        const std::int32_t lo = row_ptr[static_cast<std::size_t>(i)];
        const std::int32_t hi = row_ptr[static_cast<std::size_t>(i) + 1];
        const auto* first = col.data() + lo;
        const auto* last = col.data() + hi;
        const auto* it = std::lower_bound(first, last, j);
        if (it == last || *it != j) return -1;
        return lo + (it - first);
    }

    double& at(std::int32_t i, std::int32_t j) {
        const std::int64_t k = find(i, j);
        require(k >= 0, "matrix entry (", i, ", ", j, ") is outside the sparsity pattern");
        return val[static_cast<std::size_t>(k)];
    }

    double get(std::int32_t i, std::int32_t j) const {
        const std::int64_t k = find(i, j);
        return k < 0 ? 0.0 : val[static_cast<std::size_t>(k)];
    }

    void scale(double a) {
        for (double& v : val) v *= a;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(static_cast<std::size_t>(n), 0.0);
        for (std::int32_t i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = get(i, i);
        return d;
    }

    // max_{ij} |A_ij - A_ji|; entries missing from the transposed pattern count
    // with value zero.
    double symmetry_error() const {
        double m = 0.0;
        for (std::int32_t i = 0; i < n; ++i)
            for (std::int32_t k = row_ptr[static_cast<std::size_t>(i)];
                 k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
                const std::int32_t j = col[static_cast<std::size_t>(k)];
                m = std::max(m, std::abs(val[static_cast<std::size_t>(k)] - get(j, i)));
            }
        return m;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : val) m = std::max(m, std::abs(v));
        return m;
    }
};

// dst += alpha * src, requiring src's pattern to be contained in dst's.
inline void axpy_into(const CsrMatrix& src, double alpha, CsrMatrix& dst) {
    require(src.n == dst.n, "axpy_into: dimension mismatch ", src.n, " vs ", dst.n);
    for (std::int32_t i = 0; i < src.n; ++i) {
        std::int32_t kd = dst.row_ptr[static_cast<std::size_t>(i)];
        const std::int32_t kd_end = dst.row_ptr[static_cast<std::size_t>(i) + 1];
        for (std::int32_t ks = src.row_ptr[static_cast<std::size_t>(i)];
             ks < src.row_ptr[static_cast<std::size_t>(i) + 1]; ++ks) {
            const std::int32_t j = src.col[static_cast<std::size_t>(ks)];
            while (kd < kd_end && dst.col[static_cast<std::size_t>(kd)] < j) ++kd;
            require(kd < kd_end && dst.col[static_cast<std::size_t>(kd)] == j,
                    "axpy_into: source entry (", i, ", ", j, ") missing from destination pattern");
            dst.val[static_cast<std::size_t>(kd)] += alpha * src.val[static_cast<std::size_t>(ks)];
        }
    }
}

// C = A + alpha * B on the union sparsity pattern (two-pointer row merge).
inline CsrMatrix add_matrices(const CsrMatrix& A, double alpha, const CsrMatrix& B) {
    require(A.n == B.n, "add_matrices: dimension mismatch ", A.n, " vs ", B.n);
    CsrMatrix C;
    C.n = A.n;
    C.row_ptr.reserve(static_cast<std::size_t>(A.n) + 1);
    C.row_ptr.push_back(0);
    C.col.reserve(std::max(A.nnz(), B.nnz()));
    C.val.reserve(std::max(A.nnz(), B.nnz()));
    for (std::int32_t i = 0; i < A.n; ++i) {
        std::int32_t ka = A.row_ptr[static_cast<std::size_t>(i)];
        std::int32_t kb = B.row_ptr[static_cast<std::size_t>(i)];
        const std::int32_t ea = A.row_ptr[static_cast<std::size_t>(i) + 1];
        const std::int32_t eb = B.row_ptr[static_cast<std::size_t>(i) + 1];
        while (ka < ea || kb < eb) {
            const std::int32_t ja =
                ka < ea ? A.col[static_cast<std::size_t>(ka)] : std::numeric_limits<std::int32_t>::max();
            const std::int32_t jb =
                kb < eb ? B.col[static_cast<std::size_t>(kb)] : std::numeric_limits<std::int32_t>::max();
            if (ja < jb) {
                C.col.push_back(ja);
                C.val.push_back(A.val[static_cast<std::size_t>(ka++)]);
            } else if (jb < ja) {
                C.col.push_back(jb);
                C.val.push_back(alpha * B.val[static_cast<std::size_t>(kb++)]);
            } else {
                C.col.push_back(ja);
                C.val.push_back(A.val[static_cast<std::size_t>(ka++)] +
                                alpha * B.val[static_cast<std::size_t>(kb++)]);
            }
        }
        C.row_ptr.push_back(static_cast<std::int32_t>(C.col.size()));
    }
    return C;
}

// Adds a dense row-major nr x nc block at global position (row0, col0).  The
// block's column span must be contiguous inside each touched row (true for
// the element-block patterns built below).
inline void add_block(CsrMatrix& A, std::size_t row0, std::size_t col0, const double* B, int nr,
                      int nc) {
    for (int r = 0; r < nr; ++r) {
        const std::int32_t i = static_cast<std::int32_t>(row0) + r;
        const std::int64_t k0 = A.find(i, static_cast<std::int32_t>(col0));
        require(k0 >= 0, "add_block: position (", i, ", ", col0, ") not in pattern");
        double* dst = A.val.data() + k0;
        const double* src = B + static_cast<std::size_t>(r) * static_cast<std::size_t>(nc);
        for (int c = 0; c < nc; ++c) dst[c] += src[c];
    }
}

// Block sparsity pattern over the space's element dof blocks: always the
// diagonal blocks, plus the face-neighbor coupling blocks when requested.
inline CsrMatrix make_block_csr(const DgSpace& space, bool neighbor_coupling) {
    const PolyMesh& mesh = space.mesh();
    const std::size_t ne = static_cast<std::size_t>(mesh.n_elements());
    require(space.total_dofs() < static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()),
            "matrix dimension exceeds 32-bit index range");

    std::vector<std::vector<int>> nbr(ne);
    for (std::size_t e = 0; e < ne; ++e) nbr[e].push_back(static_cast<int>(e));
    if (neighbor_coupling) {
        for (const Face& f : mesh.faces) {
            if (f.minus < 0) continue;
            nbr[static_cast<std::size_t>(f.plus)].push_back(f.minus);
            nbr[static_cast<std::size_t>(f.minus)].push_back(f.plus);
        }
    }
    for (auto& v : nbr) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    CsrMatrix A;
    A.n = static_cast<std::int32_t>(space.total_dofs());
    A.row_ptr.assign(static_cast<std::size_t>(A.n) + 1, 0);

    std::size_t nnz = 0;
    for (std::size_t e = 0; e < ne; ++e) {
        std::size_t row_nnz = 0;
        for (int g : nbr[e]) row_nnz += space.elem_dofs(g);
        const std::size_t rows = space.elem_dofs(static_cast<int>(e));
        const std::size_t off = space.elem_offset(static_cast<int>(e));
        for (std::size_t r = 0; r < rows; ++r)
            A.row_ptr[off + r + 1] = static_cast<std::int32_t>(row_nnz);
        nnz += rows * row_nnz;
    }
    require(nnz < static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()),
            "sparsity pattern exceeds 32-bit nnz range (", nnz, " entries)");
    for (std::size_t i = 0; i < static_cast<std::size_t>(A.n); ++i) A.row_ptr[i + 1] += A.row_ptr[i];

    A.col.resize(nnz);
    A.val.assign(nnz, 0.0);
    for (std::size_t e = 0; e < ne; ++e) {
        const std::size_t rows = space.elem_dofs(static_cast<int>(e));
        const std::size_t off = space.elem_offset(static_cast<int>(e));
        for (std::size_t r = 0; r < rows; ++r) {
            std::int32_t k = A.row_ptr[off + r];
            for (int g : nbr[e]) {
                const std::size_t goff = space.elem_offset(g);
                for (std::size_t c = 0; c < space.elem_dofs(g); ++c)
                    A.col[static_cast<std::size_t>(k++)] = static_cast<std::int32_t>(goff + c);
            }
        }
    }
    return A;
}

} // namespace psdg
