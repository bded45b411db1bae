#pragma once

// Cache-miss counting without hardware counters.
//
// A trace lists byte-range accesses into named arrays. The simulator lays the
// arrays out back to back (each base aligned up to the line size), splits
// every access into line touches and drives a multi-level set-associative LRU
// hierarchy: a touch probes L1, then L2, then L3, stopping at the first hit.
// Every level that missed allocates the line (reads and writes alike). Dirty
// state is tracked at the first level; dirty evictions and flushes count as
// write-backs, never as misses. Levels are non-inclusive and there is no
// prefetcher.

#include "perfspec/errors.hpp"
#include "perfspec/metrics.hpp"
#include "perfspec/sparse.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace perfspec {

struct CacheLevelConfig {
    std::string name;
    std::uint64_t size_bytes{0};
    std::uint32_t ways{1};

    friend bool operator==(const CacheLevelConfig&, const CacheLevelConfig&) = default;
};

struct CacheConfig {
    std::vector<CacheLevelConfig> levels;
    std::uint32_t line_size{64};

    [[nodiscard]] std::uint64_t sets(std::size_t level) const {
        return levels[level].size_bytes / (static_cast<std::uint64_t>(levels[level].ways) * line_size);
    }

    friend bool operator==(const CacheConfig&, const CacheConfig&) = default;
};

inline void validate(const CacheConfig& config) {
    if (config.levels.empty()) throw DataError("cache config has no levels");
    if (!std::has_single_bit(config.line_size)) throw DataError("line size must be a power of two");
    for (std::size_t i = 0; i < config.levels.size(); ++i) {
        const auto& l = config.levels[i];
        if (l.ways < 1) throw DataError("level " + l.name + ": ways must be >= 1");
        const std::uint64_t way_bytes = static_cast<std::uint64_t>(l.ways) * config.line_size;
        if (l.size_bytes == 0 || l.size_bytes % way_bytes != 0) {
            throw DataError("level " + l.name + ": size must be a multiple of ways x line size");
        }
        if (!std::has_single_bit(config.sets(i))) {
            throw DataError("level " + l.name + ": number of sets must be a power of two");
        }
    }
}

/// One core's share of a 10-core Xeon E5-2680v2: 32 KB 8-way L1,
/// 256 KB 8-way L2 and a 2.5 MB 20-way slice of the shared 25 MB L3.
[[nodiscard]] inline CacheConfig default_cache_config() {
    return CacheConfig{{{"L1", 32 * 1024, 8}, {"L2", 256 * 1024, 8}, {"L3", 2560 * 1024, 20}}, 64};
}

/// Reads `key = value` lines. Each `level.name` opens a new level that the
/// following `level.size_kb` / `level.ways` keys fill in; `line_size_bytes`
/// applies to every level. `#` starts a comment.
[[nodiscard]] inline CacheConfig parse_cache_config(std::string_view text) {
    CacheConfig config;
    config.line_size = 0;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    auto trim = [](std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return std::string_view{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    auto number = [&](std::string_view v) {
        std::uint64_t out = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size()) {
            throw ParseError(line_no, "expected a non-negative integer, got '" + std::string(v) + "'");
        }
        return out;
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = line;
        if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
        sv = trim(sv);
        if (sv.empty()) continue;
        const auto eq = sv.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
        const auto key = trim(sv.substr(0, eq));
        const auto value = trim(sv.substr(eq + 1));
        if (key == "line_size_bytes") {
            const auto v = number(value);
            if (v == 0 || v > std::numeric_limits<std::uint32_t>::max()) {
                throw ParseError(line_no, "line size out of range");
            }
            config.line_size = static_cast<std::uint32_t>(v);
        } else if (key == "level.name") {
            config.levels.push_back({std::string(value), 0, 0});
        } else if (key == "level.size_kb" || key == "level.ways") {
            if (config.levels.empty()) throw ParseError(line_no, std::string(key) + " before any level.name");
            const auto v = number(value);
            if (key == "level.size_kb") {
                config.levels.back().size_bytes = v * 1024;
            } else {
                if (v > std::numeric_limits<std::uint32_t>::max()) throw ParseError(line_no, "ways out of range");
                config.levels.back().ways = static_cast<std::uint32_t>(v);
            }
        } else {
            throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
        }
    }
    if (config.line_size == 0) config.line_size = 64;
    validate(config);
    return config;
}

[[nodiscard]] inline CacheConfig load_cache_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cache config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_cache_config(buf.str());
}

[[nodiscard]] inline std::string format_cache_config(const CacheConfig& config) {
    std::string out = "line_size_bytes = " + std::to_string(config.line_size) + "\n";
    for (const auto& l : config.levels) {
        out += "level.name = " + l.name + "\n";
        out += "level.size_kb = " + std::to_string(l.size_bytes / 1024) + "\n";
        out += "level.ways = " + std::to_string(l.ways) + "\n";
    }
    return out;
}

// --- traces ----------------------------------------------------------------

enum class AccessKind : std::uint8_t { Read, Write };

struct Access {
    std::uint32_t array;
    std::uint64_t offset;
    std::uint32_t length;
    AccessKind kind;
};

struct TraceArray {
    std::string name;
    std::uint64_t bytes;
    std::optional<std::uint64_t> base; // explicit placement; automatic when empty
};

class AccessTrace {
public:
    std::uint32_t add_array(std::string name, std::uint64_t bytes,
                            std::optional<std::uint64_t> base = std::nullopt) {
        arrays_.push_back({std::move(name), bytes, base});
        return static_cast<std::uint32_t>(arrays_.size() - 1);
    }

    void read(std::uint32_t array, std::uint64_t offset, std::uint32_t length) {
        push(array, offset, length, AccessKind::Read);
    }
    void write(std::uint32_t array, std::uint64_t offset, std::uint32_t length) {
        push(array, offset, length, AccessKind::Write);
    }
    void push(std::uint32_t array, std::uint64_t offset, std::uint32_t length, AccessKind kind) {
        if (array >= arrays_.size()) throw DataError("access to unknown array");
        if (length < 1) throw DataError("access length must be >= 1");
        if (offset + length > arrays_[array].bytes) {
            throw DataError("access past the end of array '" + arrays_[array].name + "'");
        }
        accesses_.push_back({array, offset, length, kind});
    }

    void reserve(std::size_t n) { accesses_.reserve(n); }

    [[nodiscard]] const std::vector<TraceArray>& arrays() const noexcept { return arrays_; }
    [[nodiscard]] const std::vector<Access>& accesses() const noexcept { return accesses_; }
    [[nodiscard]] std::size_t size() const noexcept { return accesses_.size(); }

    /// Base address of every array: explicit bases are kept, the rest are
    /// placed after the highest end so far, aligned up to `alignment`.
    /// Throws if any two arrays overlap.
    [[nodiscard]] std::vector<std::uint64_t> layout(std::uint64_t alignment) const {
        std::vector<std::uint64_t> base(arrays_.size());
        std::uint64_t cursor = 0;
        for (const auto& a : arrays_) {
            if (a.base) cursor = std::max(cursor, *a.base + a.bytes);
        }
        for (std::size_t i = 0; i < arrays_.size(); ++i) {
            if (arrays_[i].base) {
                base[i] = *arrays_[i].base;
            } else {
                cursor = (cursor + alignment - 1) / alignment * alignment;
                base[i] = cursor;
                cursor += arrays_[i].bytes;
            }
        }
        std::vector<std::size_t> order(arrays_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto l, auto r) { return base[l] < base[r]; });
        for (std::size_t k = 1; k < order.size(); ++k) {
            const auto prev = order[k - 1];
            if (base[prev] + arrays_[prev].bytes > base[order[k]]) {
                throw DataError("arrays '" + arrays_[prev].name + "' and '" + arrays_[order[k]].name +
                                "' overlap");
            }
        }
        return base;
    }

private:
    std::vector<TraceArray> arrays_;
    std::vector<Access> accesses_;
};

// --- simulator -------------------------------------------------------------

struct LevelCounts {
    std::string name;
    std::uint64_t hits{0};
    std::uint64_t misses{0};
    std::uint64_t writebacks{0};

    friend bool operator==(const LevelCounts&, const LevelCounts&) = default;
};

struct MissCounts {
    std::vector<LevelCounts> levels;
    std::uint64_t accesses{0};
    std::uint64_t line_touches{0};

    friend bool operator==(const MissCounts&, const MissCounts&) = default;

    /// Element-wise difference, for attributing misses to a trace phase.
    [[nodiscard]] MissCounts operator-(const MissCounts& earlier) const {
        MissCounts d = *this;
        for (std::size_t i = 0; i < d.levels.size(); ++i) {
            d.levels[i].hits -= earlier.levels[i].hits;
            d.levels[i].misses -= earlier.levels[i].misses;
            d.levels[i].writebacks -= earlier.levels[i].writebacks;
        }
        d.accesses -= earlier.accesses;
        d.line_touches -= earlier.line_touches;
        return d;
    }
};

class CacheSimulator {
public:
    explicit CacheSimulator(CacheConfig config) : config_(std::move(config)) {
        validate(config_);
        line_shift_ = static_cast<unsigned>(std::countr_zero(config_.line_size));
        for (std::size_t i = 0; i < config_.levels.size(); ++i) {
            Level l;
            l.sets = config_.sets(i);
            l.ways = config_.levels[i].ways;
            l.tag.assign(l.sets * l.ways, kInvalid);
            l.stamp.assign(l.sets * l.ways, 0);
            l.dirty.assign(l.sets * l.ways, 0);
            levels_.push_back(std::move(l));
            counts_.levels.push_back({config_.levels[i].name, 0, 0, 0});
        }
    }

    [[nodiscard]] const CacheConfig& config() const noexcept { return config_; }

    /// One access of `length` bytes at a flat address.
    void access(std::uint64_t address, std::uint64_t length, AccessKind kind) {
        ++counts_.accesses;
        const auto first = address >> line_shift_;
        const auto last = (address + length - 1) >> line_shift_;
        for (auto line = first; line <= last; ++line) touch(line, kind);
    }

    /// Replays a trace with array bases from trace.layout(line_size).
    void run(const AccessTrace& trace) {
        const auto base = trace.layout(config_.line_size);
        for (const auto& a : trace.accesses()) access(base[a.array] + a.offset, a.length, a.kind);
    }

    /// Writes back every dirty line at every level (counted as write-backs).
    void flush() {
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            auto& l = levels_[i];
            for (std::size_t s = 0; s < l.dirty.size(); ++s) {
                if (l.dirty[s]) {
                    ++counts_.levels[i].writebacks;
                    l.dirty[s] = 0;
                }
            }
        }
    }

    [[nodiscard]] const MissCounts& counts() const noexcept { return counts_; }

private:
    static constexpr std::uint64_t kInvalid = std::numeric_limits<std::uint64_t>::max();

    struct Level {
        std::uint64_t sets{0};
        std::uint32_t ways{0};
        std::vector<std::uint64_t> tag;   // line address, kInvalid when empty
        std::vector<std::uint64_t> stamp; // last-use time
        std::vector<std::uint8_t> dirty;
    };

    void touch(std::uint64_t line, AccessKind kind) {
        ++counts_.line_touches;
        ++clock_;
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            auto& l = levels_[i];
            const std::size_t set_base = static_cast<std::size_t>(line & (l.sets - 1)) * l.ways;
            std::size_t victim = set_base;
            bool hit = false;
            for (std::size_t w = set_base; w < set_base + l.ways; ++w) {
                if (l.tag[w] == line) {
                    victim = w;
                    hit = true;
                    break;
                }
                if (l.tag[w] == kInvalid) {
                    if (l.tag[victim] != kInvalid) victim = w;
                } else if (l.tag[victim] != kInvalid && l.stamp[w] < l.stamp[victim]) {
                    victim = w;
                }
            }
            if (hit) {
                ++counts_.levels[i].hits;
                l.stamp[victim] = clock_;
                if (kind == AccessKind::Write && i == 0) l.dirty[victim] = 1;
                return;
            }
            ++counts_.levels[i].misses;
            if (l.tag[victim] != kInvalid && l.dirty[victim]) ++counts_.levels[i].writebacks;
            l.tag[victim] = line;
            l.stamp[victim] = clock_;
            l.dirty[victim] = (kind == AccessKind::Write && i == 0) ? 1 : 0;
        }
    }

    CacheConfig config_;
    unsigned line_shift_{6};
    std::vector<Level> levels_;
    MissCounts counts_;
    std::uint64_t clock_{0};
};

[[nodiscard]] inline MissCounts simulate(const AccessTrace& trace, const CacheConfig& config) {
    CacheSimulator sim(config);
    sim.run(trace);
    return sim.counts();
}

// --- SpMV traffic ----------------------------------------------------------

/// Bytes moved by y = A x when every array crosses the memory bus exactly
/// once: 8-byte values and 4-byte column indices, 4-byte row offsets, x read
/// once, y read and written once.
[[nodiscard]] constexpr std::uint64_t perfect_cache_spmv_bytes(std::uint64_t m, std::uint64_t n,
                                                               std::uint64_t nnz) noexcept {
    return 12 * nnz + 4 * (m + 1) + 8 * n + 16 * m;
}

/// Array ids of the CSR operands inside a trace.
struct SpmvArrays {
    std::uint32_t row_offsets;
    std::uint32_t column_indices;
    std::uint32_t values;
    std::uint32_t x;
    std::uint32_t y;
};

[[nodiscard]] inline SpmvArrays add_spmv_arrays(AccessTrace& trace, const CsrMatrix& a, std::uint64_t x_len) {
    return SpmvArrays{trace.add_array("row_offsets", 4 * (a.rows + 1)),
                      trace.add_array("column_indices", 4 * std::max<std::size_t>(a.nnz(), 1)),
                      trace.add_array("values", 8 * std::max<std::size_t>(a.nnz(), 1)),
                      trace.add_array("x", 8 * x_len), trace.add_array("y", 8 * a.rows)};
}

/// Canonical CSR SpMV sequence: per row the two offsets, per nonzero its
/// column index, value and x entry, then one write of y.
inline void append_spmv(AccessTrace& trace, const CsrMatrix& a, const SpmvArrays& ids) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        trace.read(ids.row_offsets, 4 * i, 4);
        trace.read(ids.row_offsets, 4 * (i + 1), 4);
        for (auto k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            trace.read(ids.column_indices, 4ULL * k, 4);
            trace.read(ids.values, 8ULL * k, 8);
            trace.read(ids.x, 8ULL * a.column_indices[k], 8);
        }
        trace.write(ids.y, 8 * i, 8);
    }
}

[[nodiscard]] inline AccessTrace trace_spmv(const CsrMatrix& a, std::uint64_t x_len) {
    AccessTrace trace;
    trace.reserve(3 * a.rows + 3 * a.nnz());
    const auto ids = add_spmv_arrays(trace, a, x_len);
    append_spmv(trace, a, ids);
    return trace;
}

/// Element-wise vector kernel over n doubles: reads of every input then one
/// write per output, element by element.
inline void append_vector_kernel(AccessTrace& trace, std::size_t n, std::initializer_list<std::uint32_t> reads,
                                 std::initializer_list<std::uint32_t> writes) {
    for (std::size_t i = 0; i < n; ++i) {
        for (auto r : reads) trace.read(r, 8 * i, 8);
        for (auto w : writes) trace.write(w, 8 * i, 8);
    }
}

} // namespace perfspec
