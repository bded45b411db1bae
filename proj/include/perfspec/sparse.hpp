#pragma once

#include "perfspec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace perfspec {

/// Compressed sparse row matrix with 32-bit column indices.
struct CsrMatrix {
    std::size_t rows{0};
    std::size_t cols{0};
    std::vector<std::uint32_t> row_offsets{0};
    std::vector<std::uint32_t> column_indices;
    std::vector<double> values;

    [[nodiscard]] std::size_t nnz() const noexcept { return values.size(); }

    [[nodiscard]] std::span<const std::uint32_t> row_columns(std::size_t i) const noexcept {
        return std::span(column_indices).subspan(row_offsets[i], row_offsets[i + 1] - row_offsets[i]);
    }
    [[nodiscard]] std::span<const double> row_values(std::size_t i) const noexcept {
        return std::span(values).subspan(row_offsets[i], row_offsets[i + 1] - row_offsets[i]);
    }

    /// Entry (i, j), zero when not stored.
    [[nodiscard]] double at(std::size_t i, std::size_t j) const noexcept {
        const auto c = row_columns(i);
        auto it = std::lower_bound(c.begin(), c.end(), static_cast<std::uint32_t>(j));
        if (it == c.end() || *it != j) return 0.0;
        return values[row_offsets[i] + static_cast<std::size_t>(it - c.begin())];
    }

    /// Index into `values` of entry (i, j); the entry must be stored.
    [[nodiscard]] std::size_t slot(std::size_t i, std::size_t j) const {
        const auto c = row_columns(i);
        auto it = std::lower_bound(c.begin(), c.end(), static_cast<std::uint32_t>(j));
        if (it == c.end() || *it != j) {
            throw SolverError("entry (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") is outside the sparsity pattern");
        }
        return row_offsets[i] + static_cast<std::size_t>(it - c.begin());
    }

    [[nodiscard]] static CsrMatrix identity(std::size_t n) {
        CsrMatrix a;
        a.rows = a.cols = n;
        a.row_offsets.resize(n + 1);
        a.column_indices.resize(n);
        a.values.assign(n, 1.0);
        for (std::size_t i = 0; i <= n; ++i) a.row_offsets[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = 0; i < n; ++i) a.column_indices[i] = static_cast<std::uint32_t>(i);
        return a;
    }

    [[nodiscard]] static CsrMatrix diagonal(std::span<const double> d) {
        auto a = identity(d.size());
        std::copy(d.begin(), d.end(), a.values.begin());
        return a;
    }
};

/// Structural checks: offsets nondecreasing, columns sorted, unique and in range.
[[nodiscard]] inline bool is_valid_csr(const CsrMatrix& a) {
    if (a.row_offsets.size() != a.rows + 1 || a.row_offsets.front() != 0) return false;
    if (a.row_offsets.back() != a.column_indices.size() || a.column_indices.size() != a.values.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.rows; ++i) {
        if (a.row_offsets[i] > a.row_offsets[i + 1]) return false;
        const auto c = a.row_columns(i);
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (c[k] >= a.cols) return false;
            if (k > 0 && c[k - 1] >= c[k]) return false;
        }
    }
    return true;
}

/// Builds a square pattern from per-row column lists (values zeroed).
[[nodiscard]] inline CsrMatrix csr_from_pattern(std::vector<std::vector<std::uint32_t>> pattern,
                                                std::size_t cols) {
    CsrMatrix a;
    a.rows = pattern.size();
    a.cols = cols;
    a.row_offsets.assign(a.rows + 1, 0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        auto& row = pattern[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        a.row_offsets[i + 1] = a.row_offsets[i] + static_cast<std::uint32_t>(row.size());
    }
    a.column_indices.reserve(a.row_offsets.back());
    for (const auto& row : pattern) a.column_indices.insert(a.column_indices.end(), row.begin(), row.end());
    a.values.assign(a.column_indices.size(), 0.0);
    return a;
}

/// Sequential y = A x.
inline void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (auto k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            s += a.values[k] * x[a.column_indices[k]];
        }
        y[i] = s;
    }
}

/// max |A - A^T| over all entries.
[[nodiscard]] inline double max_asymmetry(const CsrMatrix& a) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        const auto c = a.row_columns(i);
        const auto v = a.row_values(i);
        for (std::size_t k = 0; k < c.size(); ++k) {
            worst = std::max(worst, std::abs(v[k] - a.at(c[k], i)));
        }
    }
    return worst;
}

} // namespace perfspec
