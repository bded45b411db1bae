#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <string_view>

namespace perfspec {

enum class Kernel { Assembly, Spmv, Dot, Axpy, Norm, Jacobi };

inline constexpr std::size_t kNumKernels = 6;

[[nodiscard]] constexpr std::string_view to_string(Kernel k) noexcept {
    switch (k) {
    case Kernel::Assembly: return "assembly";
    case Kernel::Spmv: return "spmv";
    case Kernel::Dot: return "dot";
    case Kernel::Axpy: return "axpy";
    case Kernel::Norm: return "norm";
    case Kernel::Jacobi: return "jacobi";
    }
    return "?";
}

/// Manual FLOP tally by kernel. One add or multiply counts 1, as do a
/// division and a square root. Counts are charged per kernel invocation by
/// the coordinating thread, so they never depend on the worker count.
class FlopCounter {
public:
    void add(Kernel k, std::uint64_t flops) noexcept { counts_[static_cast<std::size_t>(k)] += flops; }

    [[nodiscard]] std::uint64_t count(Kernel k) const noexcept {
        return counts_[static_cast<std::size_t>(k)];
    }

    [[nodiscard]] std::uint64_t total() const noexcept {
        return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
    }

    friend bool operator==(const FlopCounter&, const FlopCounter&) = default;

private:
    std::array<std::uint64_t, kNumKernels> counts_{};
};

} // namespace perfspec
