#pragma once

// STREAM-style triad a(i) = b(i) + q c(i) over double arrays.

#include "perfspec/errors.hpp"
#include "perfspec/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace perfspec {

inline constexpr int kTriadRepetitions = 10;
inline constexpr double kTriadBytesPerElement = 24.0; // two reads, one write; no write-allocate

struct TriadResult {
    std::size_t length{0};
    std::size_t workers{1};
    double best_time{0.0};      // seconds
    double bandwidth_gbs{0.0};  // 24 * length / best_time, in 1e9 bytes/s
    bool verified{false};       // a == b + q c exactly after the last repetition
};

[[nodiscard]] inline double triad_bandwidth_gbs(std::size_t length, double seconds) noexcept {
    return kTriadBytesPerElement * static_cast<double>(length) / seconds * 1e-9;
}

/// Best-of-10 triad. Workers own contiguous chunks of the arrays.
[[nodiscard]] inline TriadResult stream_triad(std::size_t length, std::size_t workers) {
    if (length < 1) throw DomainError("triad length must be >= 1");
    constexpr double q = 3.0;
    std::vector<double> a(length, 0.0);
    std::vector<double> b(length);
    std::vector<double> c(length);
    // Small integers and halves keep b + q c exact in double precision.
    for (std::size_t i = 0; i < length; ++i) {
        b[i] = static_cast<double>(i % 1024);
        c[i] = 0.5 * static_cast<double>(i % 7);
    }

    WorkerPool pool(workers);
    const std::size_t chunks = std::min(length, pool.size());
    const std::size_t chunk = (length + chunks - 1) / chunks;
    const std::function<void(std::size_t)> kernel = [&](std::size_t w) {
        const auto lo = w * chunk;
        const auto hi = std::min(length, lo + chunk);
        double* __restrict pa = a.data();
        const double* __restrict pb = b.data();
        const double* __restrict pc = c.data();
        for (auto i = lo; i < hi; ++i) pa[i] = pb[i] + q * pc[i];
    };

    using clock = std::chrono::steady_clock;
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < kTriadRepetitions; ++rep) {
        const auto t0 = clock::now();
        pool.for_each_block(chunks, kernel);
        const auto t1 = clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    // Floor at one clock tick so tiny arrays still report a finite bandwidth.
    const double tick = std::chrono::duration<double>(clock::duration(1)).count();
    best = std::max(best, tick);

    TriadResult r;
    r.length = length;
    r.workers = pool.size();
    r.best_time = best;
    r.bandwidth_gbs = triad_bandwidth_gbs(length, best);
    r.verified = true;
    for (std::size_t i = 0; i < length; ++i) {
        if (a[i] != b[i] + q * c[i]) {
            r.verified = false;
            break;
        }
    }
    return r;
}

} // namespace perfspec
