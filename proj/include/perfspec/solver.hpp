#pragma once

// Jacobi-preconditioned conjugate gradients with manual FLOP accounting.
//
// Vectors are split into fixed blocks of kBlockRows rows. Workers claim
// whole blocks and reductions sum per-block partials in block order, so the
// iterates are bitwise identical for any worker count.

#include "perfspec/errors.hpp"
#include "perfspec/flops.hpp"
#include "perfspec/parallel.hpp"
#include "perfspec/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace perfspec {

inline constexpr std::size_t kBlockRows = 1024;

struct SolverOptions {
    double tol{1e-7}; // relative residual ||b - Au|| / ||b||
    std::size_t max_iterations{10'000};
};

struct SolveResult {
    std::vector<double> u;
    std::size_t iterations{0};
    bool converged{false};
    double relative_residual{0.0};
};

namespace detail {

class BlockKernels {
public:
    BlockKernels(std::size_t n, WorkerPool& pool)
        : n_(n), blocks_((n + kBlockRows - 1) / kBlockRows), pool_(pool), partial_(blocks_) {}

    template <typename Body>
    void rows(Body&& body) {
        const std::function<void(std::size_t)> fn = [&](std::size_t b) {
            const auto lo = b * kBlockRows;
            const auto hi = std::min(n_, lo + kBlockRows);
            for (auto i = lo; i < hi; ++i) body(i);
        };
        pool_.for_each_block(blocks_, fn);
    }

    template <typename Term>
    double sum(Term&& term) {
        const std::function<void(std::size_t)> fn = [&](std::size_t b) {
            const auto lo = b * kBlockRows;
            const auto hi = std::min(n_, lo + kBlockRows);
            double s = 0.0;
            for (auto i = lo; i < hi; ++i) s += term(i);
            partial_[b] = s;
        };
        pool_.for_each_block(blocks_, fn);
        return std::accumulate(partial_.begin(), partial_.end(), 0.0);
    }

private:
    std::size_t n_;
    std::size_t blocks_;
    WorkerPool& pool_;
    std::vector<double> partial_;
};

} // namespace detail

/// Solves A u = b for symmetric positive definite A. Convergence means
/// ||b - A u||_2 <= tol ||b||_2 on the recursively updated residual.
/// On non-convergence the final iterate is returned with converged = false.
///
/// FLOPs charged: SpMV 2 nnz, dot 2n, axpy 2n, norm 2n, Jacobi n per
/// application (plus n for forming the inverse diagonal).
[[nodiscard]] inline SolveResult solve_cg_jacobi(const CsrMatrix& a, std::span<const double> b,
                                                 const SolverOptions& options, WorkerPool& pool,
                                                 FlopCounter& counter) {
    const std::size_t n = a.rows;
    if (a.cols != n || b.size() != n) throw SolverError("system dimensions do not match");
    if (!(options.tol > 0.0 && options.tol < 1.0)) throw SolverError("tolerance must lie in (0, 1)");

    std::vector<double> inv_diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a.at(i, i);
        if (d == 0.0) throw SolverError("zero diagonal entry in row " + std::to_string(i));
        inv_diag[i] = 1.0 / d;
    }
    counter.add(Kernel::Jacobi, n);

    const auto nn = static_cast<std::uint64_t>(n);
    const auto nnz = static_cast<std::uint64_t>(a.nnz());
    detail::BlockKernels k(n, pool);
    SolveResult result;
    result.u.assign(n, 0.0);
    auto& x = result.u;
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> z(n);
    std::vector<double> p(n);
    std::vector<double> q(n);

    const double b_norm = std::sqrt(k.sum([&](std::size_t i) { return b[i] * b[i]; }));
    counter.add(Kernel::Norm, 2 * nn);
    if (b_norm == 0.0) {
        result.converged = true;
        return result;
    }

    k.rows([&](std::size_t i) { z[i] = inv_diag[i] * r[i]; });
    counter.add(Kernel::Jacobi, nn);
    p = z;
    double rz = k.sum([&](std::size_t i) { return r[i] * z[i]; });
    counter.add(Kernel::Dot, 2 * nn);

    double r_norm = b_norm;
    for (std::size_t it = 1; it <= options.max_iterations; ++it) {
        k.rows([&](std::size_t i) {
            double s = 0.0;
            for (auto kk = a.row_offsets[i]; kk < a.row_offsets[i + 1]; ++kk) {
                s += a.values[kk] * p[a.column_indices[kk]];
            }
            q[i] = s;
        });
        counter.add(Kernel::Spmv, 2 * nnz);
        const double pq = k.sum([&](std::size_t i) { return p[i] * q[i]; });
        counter.add(Kernel::Dot, 2 * nn);
        if (!(pq > 0.0)) throw SolverError("matrix is not positive definite (p^T A p <= 0)");
        const double step = rz / pq;

        k.rows([&](std::size_t i) {
            x[i] += step * p[i];
            r[i] -= step * q[i];
        });
        counter.add(Kernel::Axpy, 4 * nn);

        r_norm = std::sqrt(k.sum([&](std::size_t i) { return r[i] * r[i]; }));
        counter.add(Kernel::Norm, 2 * nn);
        result.iterations = it;
        if (r_norm <= options.tol * b_norm) {
            result.converged = true;
            break;
        }

        k.rows([&](std::size_t i) { z[i] = inv_diag[i] * r[i]; });
        counter.add(Kernel::Jacobi, nn);
        const double rz_next = k.sum([&](std::size_t i) { return r[i] * z[i]; });
        counter.add(Kernel::Dot, 2 * nn);
        const double beta = rz_next / rz;
        rz = rz_next;
        k.rows([&](std::size_t i) { p[i] = z[i] + beta * p[i]; });
        counter.add(Kernel::Axpy, 2 * nn);
    }
    result.relative_residual = r_norm / b_norm;
    return result;
}

[[nodiscard]] inline SolveResult solve_cg_jacobi(const CsrMatrix& a, std::span<const double> b,
                                                 const SolverOptions& options, std::size_t workers,
                                                 FlopCounter& counter) {
    WorkerPool pool(workers);
    return solve_cg_jacobi(a, b, options, pool, counter);
}

} // namespace perfspec
