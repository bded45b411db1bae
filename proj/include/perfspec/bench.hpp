#pragma once

// The steady-diffusion benchmark: mesh, assemble, solve, measure.

#include "perfspec/cache.hpp"
#include "perfspec/errors.hpp"
#include "perfspec/fem.hpp"
#include "perfspec/flops.hpp"
#include "perfspec/ingest.hpp"
#include "perfspec/mesh.hpp"
#include "perfspec/metrics.hpp"
#include "perfspec/solver.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

namespace perfspec {

struct BenchConfig {
    std::size_t n{8};
    double alpha{0.0};
    double tol{1e-7};
    std::size_t max_iterations{10'000};
    std::size_t workers{1};
    std::optional<CacheConfig> cache_model;
    Discretization discretization{Discretization::CG1};
    std::string label; // derived from alpha when empty
};

inline void validate(const BenchConfig& c) {
    if (c.n < 2) throw DataError("n must be >= 2 so the mesh has interior vertices");
    if (!(c.alpha >= 0.0)) throw DataError("alpha must be >= 0");
    if (!(c.tol > 0.0 && c.tol < 1.0)) throw DataError("tol must lie in (0, 1)");
    if (c.workers < 1) throw DataError("workers must be >= 1");
    if (c.max_iterations < 1) throw DataError("max_iterations must be >= 1");
    if (c.discretization != Discretization::CG1) {
        throw DataError("only CG1 can be solved; other discretizations are count-only");
    }
    if (c.cache_model) {
        validate(*c.cache_model);
        if (!is_valid_line_size(c.cache_model->line_size)) {
            throw DataError("cache line size must be one of 32, 64, 128, 256");
        }
        std::array<bool, 3> seen{};
        for (const auto& l : c.cache_model->levels) {
            const auto level = parse_cache_level(l.name);
            if (!level) throw DataError("cache level '" + l.name + "' must be named L1, L2 or L3");
            if (std::exchange(seen[static_cast<std::size_t>(*level)], true)) {
                throw DataError("cache level " + l.name + " appears twice");
            }
        }
    }
}

[[nodiscard]] inline std::string default_bench_label(double alpha) {
    return "cg1-alpha" + detail::format_double(alpha);
}

/// Traces of the solver kernels: the one-off setup and one full iteration.
/// Both traces declare the same arrays in the same order, so they share a
/// layout and can be replayed back to back through one simulator.
struct SolverTraces {
    AccessTrace setup;
    AccessTrace iteration;
};

[[nodiscard]] inline SolverTraces trace_cg_jacobi(const CsrMatrix& a) {
    const std::size_t n = a.rows;
    SolverTraces t;
    for (AccessTrace* tr : {&t.setup, &t.iteration}) {
        const auto m = add_spmv_arrays(*tr, a, n); // x operand = p, y = q
        const auto b = tr->add_array("b", 8 * n);
        const auto x = tr->add_array("u", 8 * n);
        const auto r = tr->add_array("r", 8 * n);
        const auto z = tr->add_array("z", 8 * n);
        const auto dinv = tr->add_array("inv_diag", 8 * n);
        const auto p = m.x;
        const auto q = m.y;
        if (tr == &t.setup) {
            append_vector_kernel(*tr, n, {b}, {r});       // r = b
            append_vector_kernel(*tr, n, {b}, {});        // ||b||
            append_vector_kernel(*tr, n, {dinv, r}, {z}); // z = D^-1 r
            append_vector_kernel(*tr, n, {z}, {p});       // p = z
            append_vector_kernel(*tr, n, {r, z}, {});     // r.z
        } else {
            append_spmv(*tr, a, m);                             // q = A p
            append_vector_kernel(*tr, n, {p, q}, {});           // p.q
            append_vector_kernel(*tr, n, {x, p, r, q}, {x, r}); // u += s p, r -= s q
            append_vector_kernel(*tr, n, {r}, {});              // ||r||
            append_vector_kernel(*tr, n, {dinv, r}, {z});       // z = D^-1 r
            append_vector_kernel(*tr, n, {r, z}, {});           // r.z
            append_vector_kernel(*tr, n, {z, p}, {p});          // p = z + beta p
        }
    }
    return t;
}

/// Solver-kernel cache misses for a solve of `iterations` iterations.
///
/// Every iteration replays the same address sequence. Once the first level
/// has seen one iteration, the LRU state it hands to the next iteration no
/// longer changes, so its per-iteration misses are constant from then on;
/// each deeper level sees a stable miss stream one iteration later. With L
/// levels, iteration L+1 is therefore representative of every later one, and
/// only setup plus L+1 iterations are simulated.
[[nodiscard]] inline MissCounts simulate_cg_jacobi(const CsrMatrix& a, std::size_t iterations,
                                                   const CacheConfig& config) {
    const auto traces = trace_cg_jacobi(a);
    CacheSimulator sim(config);
    sim.run(traces.setup);
    const std::size_t simulated = std::min(iterations, config.levels.size() + 1);
    MissCounts before_last = sim.counts();
    for (std::size_t it = 0; it < simulated; ++it) {
        before_last = sim.counts();
        sim.run(traces.iteration);
    }
    MissCounts total = sim.counts();
    if (simulated == iterations) return total;

    const MissCounts steady = total - before_last;
    const auto extra = static_cast<std::uint64_t>(iterations - simulated);
    for (std::size_t i = 0; i < total.levels.size(); ++i) {
        total.levels[i].hits += extra * steady.levels[i].hits;
        total.levels[i].misses += extra * steady.levels[i].misses;
        total.levels[i].writebacks += extra * steady.levels[i].writebacks;
    }
    total.accesses += extra * steady.accesses;
    total.line_touches += extra * steady.line_touches;
    return total;
}

/// Every iteration simulated in full; the reference for simulate_cg_jacobi.
[[nodiscard]] inline MissCounts simulate_cg_jacobi_exhaustive(const CsrMatrix& a, std::size_t iterations,
                                                              const CacheConfig& config) {
    const auto traces = trace_cg_jacobi(a);
    CacheSimulator sim(config);
    sim.run(traces.setup);
    for (std::size_t it = 0; it < iterations; ++it) sim.run(traces.iteration);
    return sim.counts();
}

struct BenchResult {
    RunRecord record;
    FlopCounter flops;
    std::size_t interior_dofs{0};
    std::optional<MissCounts> cache;
};

/// Runs one benchmark. Wall time covers mesh construction, assembly and the
/// solve; error evaluation and cache simulation are not timed.
/// Throws NonConvergenceError if the solver exhausts max_iterations.
[[nodiscard]] inline BenchResult run_benchmark_detailed(const BenchConfig& config) {
    validate(config);
    BenchResult out;
    using clock = std::chrono::steady_clock;

    const auto t0 = clock::now();
    const auto mesh = build_mesh(config.n);
    const auto system = assemble_system(mesh, config.alpha, &out.flops);
    WorkerPool pool(config.workers);
    const auto solve = solve_cg_jacobi(system.matrix, system.rhs, {config.tol, config.max_iterations}, pool,
                                       out.flops);
    const auto t1 = clock::now();
    if (!solve.converged) throw NonConvergenceError(solve.iterations, solve.relative_residual);

    auto& r = out.record;
    r.label = config.label.empty() ? default_bench_label(config.alpha) : config.label;
    r.dofs = count_dofs(config.n, Discretization::CG1);
    r.wall_time = std::max(std::chrono::duration<double>(t1 - t0).count(),
                           std::chrono::duration<double>(clock::duration(1)).count());
    r.flops = out.flops.total();
    r.linear_iterations = solve.iterations;
    r.workers = static_cast<std::uint32_t>(config.workers);
    r.h_size = mesh.h();
    r.alpha = config.alpha;
    r.l2_error = l2_error(solve.u, mesh);
    r.discretization = Discretization::CG1;
    out.interior_dofs = system.rhs.size();

    if (config.cache_model) {
        out.cache = simulate_cg_jacobi(system.matrix, solve.iterations, *config.cache_model);
        for (std::size_t i = 0; i < out.cache->levels.size(); ++i) {
            const auto level = parse_cache_level(out.cache->levels[i].name);
            r.cache_counters.push_back({*level, out.cache->levels[i].misses, config.cache_model->line_size});
        }
    }
    return out;
}

[[nodiscard]] inline RunRecord run_benchmark(const BenchConfig& config) {
    return run_benchmark_detailed(config).record;
}

} // namespace perfspec
