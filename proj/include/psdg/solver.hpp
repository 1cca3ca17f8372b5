// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "psdg/assembly.hpp"
#include "psdg/error.hpp"
#include "psdg/scenario.hpp"
#include "psdg/space.hpp"
#include "psdg/sparse.hpp"

namespace psdg {

// ---------------------------------------------------------------------------
// theta-method time grid: t_n = n dt, n = 0..n_steps, with n_steps dt = T.
// theta = 1 is implicit Euler, theta = 1/2 Crank-Nicolson; other values in
// [0, 1] are accepted but reported as unvalidated.

struct TimeIntegrator {
    double theta = 0.5;
    double dt = 0.0;
    double T = 0.0;
    int n_steps = 0;

    TimeIntegrator(double theta_, double dt_, double T_) : theta(theta_), dt(dt_), T(T_) {
        require(theta >= 0.0 && theta <= 1.0, "theta must lie in [0, 1], got ", theta);
        require(dt > 0.0, "dt must be positive, got ", dt);
        require(T > 0.0, "final time T must be positive, got ", T);
        const double ratio = T / dt;
        n_steps = static_cast<int>(std::llround(ratio));
        require(n_steps >= 1 && std::abs(n_steps * dt - T) <= 1e-12 * T,
                "T must be an integer multiple of dt: T = ", T, ", dt = ", dt,
                " gives T/dt = ", ratio);
    }

    double time(int n) const { return dt * n; }
    bool validated_theta() const { return theta == 1.0 || theta == 0.5; }
};

enum class SolveMethod { Cg, DenseCholesky, SparseCholesky };

inline std::string to_string(SolveMethod m) {
    switch (m) {
    case SolveMethod::Cg: return "cg";
    case SolveMethod::DenseCholesky: return "dense_cholesky";
    case SolveMethod::SparseCholesky: return "sparse_cholesky";
    }
    return "?";
}

struct SolveOptions {
    SolveMethod method = SolveMethod::Cg;
    double tol = 1e-10; // relative residual (CG)
    int max_iters = 20000;

    void validate() const {
        require(tol > 0.0 && tol < 1.0, "solver tolerance must lie in (0, 1), got ", tol);
        require(max_iters >= 1, "max_iters must be at least 1, got ", max_iters);
    }
};

struct SolveStats {
    int solves = 0;
    int factorizations = 0;
    long total_iterations = 0; // CG only
    long max_iterations = 0;   // CG only, worst single solve
    double last_residual = 0.0;
};

namespace detail {

using EigenCsrMap = Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, std::int32_t>>;

inline EigenCsrMap map_csr(const CsrMatrix& A) {
    return EigenCsrMap(A.n, A.n, static_cast<std::int32_t>(A.nnz()), A.row_ptr.data(),
                       A.col.data(), A.val.data());
}

} // namespace detail

// One factorized (or preconditioned) symmetric positive definite operator,
// reused across all solves.  The referenced matrix must outlive the solver
// and must not change values after construction.
class LinearSolver {
public:
    LinearSolver(const CsrMatrix& S, const SolveOptions& opts)
        : S_(S), opts_(opts), map_(detail::map_csr(S)) {
        opts_.validate();
        switch (opts_.method) {
        case SolveMethod::Cg:
            cg_.setTolerance(opts_.tol);
            cg_.setMaxIterations(opts_.max_iters);
            cg_.compute(map_);
            break;
        case SolveMethod::DenseCholesky: {
            require(S_.n <= 5000, "dense Cholesky is limited to 5000 unknowns, got ", S_.n,
                    "; use cg or sparse_cholesky");
            Eigen::MatrixXd D = Eigen::MatrixXd::Zero(S_.n, S_.n);
            for (std::int32_t i = 0; i < S_.n; ++i)
                for (std::int32_t k = S_.row_ptr[static_cast<std::size_t>(i)];
                     k < S_.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
                    D(i, S_.col[static_cast<std::size_t>(k)]) = S_.val[static_cast<std::size_t>(k)];
            llt_ = std::make_unique<Eigen::LLT<Eigen::MatrixXd>>(D);
            require(llt_->info() == Eigen::Success,
                    "dense Cholesky factorization failed: the system matrix is not positive "
                    "definite (is the penalty parameter alpha too small, or is the boundary "
                    "all-Dirichlet, leaving the constant isotropic mode unconstrained?)");
            stats_.factorizations = 1;
            break;
        }
        case SolveMethod::SparseCholesky: {
            Eigen::SparseMatrix<double, Eigen::ColMajor, std::int32_t> col = map_;
            sllt_ = std::make_unique<
                Eigen::SimplicialLLT<Eigen::SparseMatrix<double, Eigen::ColMajor, std::int32_t>>>();
            sllt_->compute(col);
            require(sllt_->info() == Eigen::Success,
                    "sparse Cholesky factorization failed: the system matrix is not positive "
                    "definite (is the penalty parameter alpha too small, or is the boundary "
                    "all-Dirichlet, leaving the constant isotropic mode unconstrained?)");
            stats_.factorizations = 1;
            break;
        }
        }
    }

    // Solves S x = b; `guess` (if given) warm-starts the iterative path.
    DofVector solve(const DofVector& b, const DofVector* guess = nullptr) {
        require(b.size() == static_cast<std::size_t>(S_.n), "solve: rhs length ", b.size(),
                " does not match system size ", S_.n);
        Eigen::Map<const Eigen::VectorXd> rhs(b.data(), S_.n);
        DofVector x(b.size());
        Eigen::Map<Eigen::VectorXd> out(x.data(), S_.n);
        ++stats_.solves;
        switch (opts_.method) {
        case SolveMethod::Cg: {
            if (guess) {
                Eigen::Map<const Eigen::VectorXd> g(guess->data(), S_.n);
                out = cg_.solveWithGuess(rhs, g);
            } else {
                out = cg_.solve(rhs);
            }
            stats_.total_iterations += cg_.iterations();
            stats_.max_iterations = std::max(stats_.max_iterations, static_cast<long>(cg_.iterations()));
            stats_.last_residual = cg_.error();
            require(cg_.info() == Eigen::Success, "conjugate gradient did not converge within ",
                    opts_.max_iters, " iterations: final relative residual ", cg_.error(),
                    " (tolerance ", opts_.tol, ")");
            break;
        }
        case SolveMethod::DenseCholesky:
            out = llt_->solve(rhs);
            break;
        case SolveMethod::SparseCholesky:
            out = sllt_->solve(rhs);
            break;
        }
        return x;
    }

    const SolveStats& stats() const { return stats_; }

private:
    using EigenCsr = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int32_t>;

    const CsrMatrix& S_;
    SolveOptions opts_;
    detail::EigenCsrMap map_;
    // The Map matches EigenCsr's scalar/order/index exactly, so compute()
    // binds it by reference without copying.
    Eigen::ConjugateGradient<EigenCsr, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg_;
    std::unique_ptr<Eigen::LLT<Eigen::MatrixXd>> llt_;
    std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double, Eigen::ColMajor, std::int32_t>>>
        sllt_;
    SolveStats stats_;
};

// L2 projection of the scenario's initial pseudo-stress.
inline DofVector initial_state(const DgSpace& space, const Scenario& scn) {
    return l2_project(space, scn.initial);
}

// ---------------------------------------------------------------------------
// theta-method stepping:  (M + theta dt A) s^{n+1}
//                       = [M - (1-theta) dt A] s^n + dt [theta f^{n+1} + (1-theta) f^n].
// The system operator S = M + theta dt A is formed and factorized once.  For
// theta > 0 the step RHS is rewritten as
//     (1/theta) M s^n - ((1-theta)/theta) S s^n + dt [...]
// so A itself is not needed after S is built.

class ThetaStepper {
public:
    ThetaStepper(CsrMatrix M, const CsrMatrix& A, const TimeIntegrator& ti,
                 const SolveOptions& opts)
        : M_(std::move(M)), ti_(ti) {
        S_ = ti_.theta > 0.0 ? add_matrices(M_, ti_.theta * ti_.dt, A)
                             : M_; // explicit Euler inverts M alone (singular; fails in solve)
        if (ti_.theta == 0.0) A_explicit_ = std::make_unique<CsrMatrix>(A);
        solver_ = std::make_unique<LinearSolver>(S_, opts);
    }

    DofVector step(const DofVector& sigma_n, const DofVector& f_n, const DofVector& f_np1) {
        const double th = ti_.theta;
        const double dt = ti_.dt;
        DofVector rhs(sigma_n.size());
        if (th == 0.0) {
            const DofVector Ms = M_.apply(sigma_n);
            const DofVector As = A_explicit_->apply(sigma_n);
            for (std::size_t i = 0; i < rhs.size(); ++i)
                rhs[i] = Ms[i] - dt * As[i] + dt * f_n[i];
        } else if (th == 1.0) {
            const DofVector Ms = M_.apply(sigma_n);
            for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = Ms[i] + dt * f_np1[i];
        } else {
            const DofVector Ms = M_.apply(sigma_n);
            const DofVector Ss = S_.apply(sigma_n);
            const double a = 1.0 / th;
            const double b = (1.0 - th) / th;
            for (std::size_t i = 0; i < rhs.size(); ++i)
                rhs[i] = a * Ms[i] - b * Ss[i] + dt * (th * f_np1[i] + (1.0 - th) * f_n[i]);
        }
        return solver_->solve(rhs, &sigma_n);
    }

    const SolveStats& stats() const { return solver_->stats(); }
    const CsrMatrix& system_matrix() const { return S_; }

private:
    CsrMatrix M_;
    CsrMatrix S_;
    std::unique_ptr<CsrMatrix> A_explicit_;
    TimeIntegrator ti_;
    std::unique_ptr<LinearSolver> solver_;
};

// Single step with a freshly built operator (no caching).  Suitable for
// scalar surrogates and for validating the cached path against.
inline DofVector theta_step(const CsrMatrix& M, const CsrMatrix& A, const DofVector& sigma_n,
                            const DofVector& f_n, const DofVector& f_np1,
                            const TimeIntegrator& ti, const SolveOptions& opts) {
    ThetaStepper stepper(M, A, ti, opts);
    return stepper.step(sigma_n, f_n, f_np1);
}

// ---------------------------------------------------------------------------

struct RunStats {
    int n_steps = 0;
    std::size_t dofs = 0;
    double theta = 0.0;
    bool theta_validated = true;
    double assemble_seconds = 0.0; // matrix + all RHS assemblies
    double solve_seconds = 0.0;    // factorization + linear solves
    SolveStats linear;
};

struct History {
    std::vector<double> times;      // t_0 .. t_{n_steps}
    std::vector<DofVector> states;  // one per stored time
    RunStats stats;

    const DofVector& final_state() const {
        require(!states.empty(), "history is empty");
        return states.back();
    }
};

// Probe callback: invoked with (step index n, t_n, sigma_h^n) for n = 0
// (initial state) and after every accepted step, in order.
using Probe = std::function<void(int, double, const DofVector&)>;

inline History run(const DgSpace& space, const Scenario& scn, const TimeIntegrator& ti,
                   const SolveOptions& opts, const PenaltyParams& pen = {},
                   const std::vector<Probe>& probes = {}) {
    detail::check_scenario(scn);
    opts.validate();
    using Clock = std::chrono::steady_clock;
    const auto seconds_since = [](Clock::time_point t0) {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    };

    History hist;
    hist.stats.n_steps = ti.n_steps;
    hist.stats.dofs = space.total_dofs();
    hist.stats.theta = ti.theta;
    hist.stats.theta_validated = ti.validated_theta();

    auto t0 = Clock::now();
    CsrMatrix M = assemble_mass(space, scn.mu);
    CsrMatrix A = assemble_stiffness(space, pen);
    DofVector f_n = assemble_rhs(space, scn, ti.time(0), pen);
    hist.stats.assemble_seconds += seconds_since(t0);

    t0 = Clock::now();
    ThetaStepper stepper(std::move(M), A, ti, opts);
    A = CsrMatrix{}; // release: the stepper kept what it needs
    hist.stats.solve_seconds += seconds_since(t0);

    DofVector sigma = initial_state(space, scn);
    hist.times.push_back(ti.time(0));
    hist.states.push_back(sigma);
    for (const Probe& probe : probes)
        if (probe) probe(0, ti.time(0), sigma);

    for (int n = 0; n < ti.n_steps; ++n) {
        const double t_next = ti.time(n + 1);
        try {
            t0 = Clock::now();
            DofVector f_np1 = assemble_rhs(space, scn, t_next, pen);
            hist.stats.assemble_seconds += seconds_since(t0);

            t0 = Clock::now();
            sigma = stepper.step(sigma, f_n, f_np1);
            hist.stats.solve_seconds += seconds_since(t0);

            f_n = std::move(f_np1);
        } catch (const Error& e) {
            fail("time step ", n + 1, " of ", ti.n_steps, " (t = ", t_next, ") failed: ",
                 e.what());
        }
        hist.times.push_back(t_next);
        hist.states.push_back(sigma);
        for (const Probe& probe : probes)
            if (probe) probe(n + 1, t_next, sigma);
    }
    hist.stats.linear = stepper.stats();
    return hist;
}

} // namespace psdg
