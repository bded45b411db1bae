#pragma once

// Intensity and rate metrics over solver run records.
//
// Every function here is pure; records and derived points are plain values.

#include "perfspec/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace perfspec {

enum class CacheLevel { L1, L2, L3 };

inline constexpr std::array<CacheLevel, 3> kCacheLevels{CacheLevel::L1, CacheLevel::L2,
                                                        CacheLevel::L3};

[[nodiscard]] constexpr std::string_view to_string(CacheLevel level) noexcept {
    switch (level) {
    case CacheLevel::L1: return "L1";
    case CacheLevel::L2: return "L2";
    case CacheLevel::L3: return "L3";
    }
    return "?";
}

[[nodiscard]] inline std::optional<CacheLevel> parse_cache_level(std::string_view s) noexcept {
    for (auto level : kCacheLevels) {
        if (to_string(level) == s) return level;
    }
    return std::nullopt;
}

enum class Discretization { CG1, CG2, DG1, DG2 };

[[nodiscard]] constexpr std::string_view to_string(Discretization d) noexcept {
    switch (d) {
    case Discretization::CG1: return "CG1";
    case Discretization::CG2: return "CG2";
    case Discretization::DG1: return "DG1";
    case Discretization::DG2: return "DG2";
    }
    return "?";
}

[[nodiscard]] inline std::optional<Discretization> parse_discretization(std::string_view s) noexcept {
    for (auto d : {Discretization::CG1, Discretization::CG2, Discretization::DG1, Discretization::DG2}) {
        if (to_string(d) == s) return d;
    }
    return std::nullopt;
}

[[nodiscard]] constexpr bool is_valid_line_size(std::uint64_t bytes) noexcept {
    return bytes == 32 || bytes == 64 || bytes == 128 || bytes == 256;
}

struct CacheLevelCounters {
    CacheLevel level{CacheLevel::L1};
    std::uint64_t misses{0};
    std::uint32_t line_size{64};

    friend bool operator==(const CacheLevelCounters&, const CacheLevelCounters&) = default;
};

/// One benchmark or solve execution.
///
/// `dofs` is the total discretization size, Dirichlet boundary nodes included.
struct RunRecord {
    std::string label;
    std::uint64_t dofs{1};
    double wall_time{1.0}; // seconds
    std::uint64_t flops{0};
    std::vector<CacheLevelCounters> cache_counters;
    std::optional<std::uint64_t> linear_iterations;
    std::optional<std::uint64_t> nonlinear_iterations;
    std::uint32_t workers{1};
    std::optional<double> h_size;
    std::optional<double> l2_error;
    std::optional<double> alpha;
    Discretization discretization{Discretization::CG1};

    [[nodiscard]] const CacheLevelCounters* counters(CacheLevel level) const noexcept {
        auto it = std::find_if(cache_counters.begin(), cache_counters.end(),
                               [level](const CacheLevelCounters& c) { return c.level == level; });
        return it == cache_counters.end() ? nullptr : &*it;
    }

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// --- intensity -------------------------------------------------------------

/// Total bytes transferred attributed to one cache level.
[[nodiscard]] inline std::uint64_t tbt_bytes(std::uint64_t misses, std::uint64_t line_size) {
    if (!std::has_single_bit(line_size)) {
        throw DomainError("line size must be a power of two");
    }
    return misses * line_size;
}

[[nodiscard]] inline double ai_per_byte(std::uint64_t flops, std::uint64_t tbt) {
    if (tbt == 0) throw DomainError("arithmetic intensity undefined: zero bytes transferred");
    return static_cast<double>(flops) / static_cast<double>(tbt);
}

[[nodiscard]] inline double ai_per_miss(std::uint64_t flops, std::uint64_t misses) {
    if (misses == 0) throw DomainError("arithmetic intensity undefined: zero cache misses");
    return static_cast<double>(flops) / static_cast<double>(misses);
}

// --- rates -----------------------------------------------------------------

/// Degrees of freedom solved per second.
[[nodiscard]] inline double rate1(std::uint64_t dofs, double wall_time) {
    if (!(wall_time > 0.0)) throw DomainError("wall time must be > 0");
    return static_cast<double>(dofs) / wall_time;
}

/// Degrees of freedom solved per second per solver iteration.
[[nodiscard]] inline double rate2(std::uint64_t dofs, double wall_time, std::uint64_t iterations) {
    if (!(wall_time > 0.0)) throw DomainError("wall time must be > 0");
    if (iterations == 0) throw DomainError("iteration count must be >= 1");
    // dividing rate1 keeps rate2 * iterations within one ulp of rate1
    return rate1(dofs, wall_time) / static_cast<double>(iterations);
}

/// Degrees of freedom solved per second per worker.
[[nodiscard]] inline double rate3(std::uint64_t dofs, double wall_time, std::uint64_t workers) {
    if (!(wall_time > 0.0)) throw DomainError("wall time must be > 0");
    if (workers == 0) throw DomainError("worker count must be >= 1");
    return rate1(dofs, wall_time) / static_cast<double>(workers);
}

// --- scaling ---------------------------------------------------------------

/// Strong-scaling efficiency in percent relative to a baseline run.
/// `units` may be nodes or cores; the ratio is the same for a fixed cores-per-node.
[[nodiscard]] inline double strong_scaling_efficiency(double base_time, double base_units,
                                                      double time, double units) {
    if (!(base_time > 0.0) || !(time > 0.0)) throw DomainError("times must be > 0");
    if (!(base_units > 0.0) || !(units > 0.0)) throw DomainError("unit counts must be > 0");
    return 100.0 * (base_time * base_units) / (time * units);
}

struct StrongScalingSample {
    double units;
    double time;
};

/// Efficiencies of a strong-scaling series; the first sample is the baseline (100%).
[[nodiscard]] inline std::vector<double>
strong_scaling_efficiencies(std::span<const StrongScalingSample> samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    if (samples.empty()) return out;
    const auto& base = samples.front();
    for (const auto& s : samples) {
        out.push_back(strong_scaling_efficiency(base.time, base.units, s.time, s.units));
    }
    return out;
}

[[nodiscard]] inline long round_percent(double percent) { return std::lround(percent); }

[[nodiscard]] inline double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(value * scale) / scale;
}

/// Ordinary least-squares slope of y against x.
[[nodiscard]] inline double least_squares_slope(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw DomainError("slope undefined: abscissae are not distinct");
    return sxy / sxx;
}

struct ErrorSample {
    double h;
    double error;
};

/// Observed convergence order: log-log least-squares slope of error against mesh size.
[[nodiscard]] inline double convergence_slope(std::span<const ErrorSample> points) {
    if (points.size() < 2) throw DomainError("convergence slope needs at least 2 points");
    std::vector<double> lx;
    std::vector<double> ly;
    lx.reserve(points.size());
    ly.reserve(points.size());
    for (const auto& p : points) {
        if (!(p.h > 0.0)) throw DomainError("mesh size must be > 0");
        if (!(p.error > 0.0)) throw DomainError("error must be > 0");
        lx.push_back(std::log(p.h));
        ly.push_back(std::log(p.error));
    }
    return least_squares_slope(lx, ly);
}

// --- spectrum points -------------------------------------------------------

struct LevelIntensity {
    CacheLevel level{CacheLevel::L1};
    std::uint64_t tbt_bytes{0};
    std::optional<double> ai_per_byte; // absent when the level saw no misses
    std::optional<double> ai_per_miss;
};

struct SpectrumPoint {
    RunRecord record;
    std::vector<LevelIntensity> intensity;
    double rate1{0.0};
    std::optional<double> rate2;
    double rate3{0.0};

    [[nodiscard]] const LevelIntensity* level(CacheLevel l) const noexcept {
        auto it = std::find_if(intensity.begin(), intensity.end(),
                               [l](const LevelIntensity& li) { return li.level == l; });
        return it == intensity.end() ? nullptr : &*it;
    }
};

[[nodiscard]] inline SpectrumPoint make_spectrum_point(const RunRecord& record) {
    SpectrumPoint p;
    p.record = record;
    p.rate1 = rate1(record.dofs, record.wall_time);
    p.rate3 = rate3(record.dofs, record.wall_time, record.workers);
    if (record.linear_iterations && *record.linear_iterations > 0) {
        p.rate2 = rate2(record.dofs, record.wall_time, *record.linear_iterations);
    }
    for (const auto& c : record.cache_counters) {
        LevelIntensity li;
        li.level = c.level;
        li.tbt_bytes = tbt_bytes(c.misses, c.line_size);
        if (c.misses > 0) {
            li.ai_per_byte = ai_per_byte(record.flops, li.tbt_bytes);
            li.ai_per_miss = ai_per_miss(record.flops, c.misses);
        }
        p.intensity.push_back(li);
    }
    std::sort(p.intensity.begin(), p.intensity.end(),
              [](const LevelIntensity& a, const LevelIntensity& b) { return a.level < b.level; });
    return p;
}

/// Points of one static-scaling study: increasing problem size at fixed concurrency.
struct ScalingSeries {
    std::string label;
    std::vector<SpectrumPoint> points;
};

/// Sorts by dofs and enforces the series invariants.
[[nodiscard]] inline ScalingSeries make_scaling_series(std::string label,
                                                       std::vector<SpectrumPoint> points) {
    std::stable_sort(points.begin(), points.end(), [](const SpectrumPoint& a, const SpectrumPoint& b) {
        return a.record.dofs < b.record.dofs;
    });
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (points[i].record.dofs == points[i - 1].record.dofs) {
            throw DataError("series '" + label + "' has two records with dofs = " +
                            std::to_string(points[i].record.dofs));
        }
        if (points[i].record.workers != points[0].record.workers) {
            throw DataError("series '" + label + "' mixes worker counts");
        }
    }
    return ScalingSeries{std::move(label), std::move(points)};
}

enum class StaticScaling { Flat, TailOff, DipLeft, Mixed };

[[nodiscard]] constexpr std::string_view to_string(StaticScaling s) noexcept {
    switch (s) {
    case StaticScaling::Flat: return "Flat";
    case StaticScaling::TailOff: return "TailOff";
    case StaticScaling::DipLeft: return "DipLeft";
    case StaticScaling::Mixed: return "Mixed";
    }
    return "?";
}

struct HalfSlopes {
    double lower;
    double upper;
};

/// log(rate1)-vs-log(dofs) slopes over the lower and upper halves of a series.
/// For an odd count the middle point belongs to both halves.
[[nodiscard]] inline HalfSlopes static_scaling_slopes(const ScalingSeries& series) {
    const auto n = series.points.size();
    if (n < 3) throw DomainError("static-scaling classification needs at least 3 points");
    std::vector<double> lx;
    std::vector<double> ly;
    for (const auto& p : series.points) {
        lx.push_back(std::log(static_cast<double>(p.record.dofs)));
        ly.push_back(std::log(p.rate1));
    }
    const std::size_t half = (n + 1) / 2;
    const std::span<const double> x(lx);
    const std::span<const double> y(ly);
    return HalfSlopes{least_squares_slope(x.first(half), y.first(half)),
                      least_squares_slope(x.last(half), y.last(half))};
}

[[nodiscard]] inline StaticScaling classify_static_scaling(const ScalingSeries& series,
                                                           double flat_band = 0.1) {
    const auto s = static_scaling_slopes(series);
    const bool lower_flat = std::abs(s.lower) <= flat_band;
    const bool upper_flat = std::abs(s.upper) <= flat_band;
    if (lower_flat && upper_flat) return StaticScaling::Flat;
    if (s.upper < -flat_band) return StaticScaling::TailOff;
    if (s.lower > flat_band && upper_flat) return StaticScaling::DipLeft;
    return StaticScaling::Mixed;
}

} // namespace perfspec
