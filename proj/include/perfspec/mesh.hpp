#pragma once

// Structured tetrahedral meshes of the unit cube and DOF counting.

#include "perfspec/errors.hpp"
#include "perfspec/metrics.hpp"

#include <array>
#include <cstddef>
#include <cstdint>

namespace perfspec {

using Point3 = std::array<double, 3>;

/// Unit cube split into n^3 cells, each cut into 6 tetrahedra around the
/// (0,0,0)-(1,1,1) diagonal (Freudenthal decomposition). Vertices and
/// elements are computed on demand, so very fine meshes cost nothing to build.
class StructuredTetMesh {
public:
    static constexpr std::size_t kTetsPerCell = 6;

    explicit StructuredTetMesh(std::size_t n) : n_(n) {
        if (n < 1) throw DomainError("mesh needs at least one segment per side");
    }

    [[nodiscard]] std::size_t segments() const noexcept { return n_; }
    [[nodiscard]] double h() const noexcept { return 1.0 / static_cast<double>(n_); }
    [[nodiscard]] std::size_t points_per_side() const noexcept { return n_ + 1; }
    [[nodiscard]] std::size_t num_vertices() const noexcept {
        return points_per_side() * points_per_side() * points_per_side();
    }
    [[nodiscard]] std::size_t num_cells() const noexcept { return n_ * n_ * n_; }
    [[nodiscard]] std::size_t num_elements() const noexcept { return kTetsPerCell * num_cells(); }
    [[nodiscard]] std::size_t num_interior_vertices() const noexcept {
        return n_ < 2 ? 0 : (n_ - 1) * (n_ - 1) * (n_ - 1);
    }

    [[nodiscard]] std::size_t vertex_index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        const auto p = points_per_side();
        return i + p * (j + p * k);
    }

    [[nodiscard]] std::array<std::size_t, 3> vertex_ijk(std::size_t v) const noexcept {
        const auto p = points_per_side();
        return {v % p, (v / p) % p, v / (p * p)};
    }

    [[nodiscard]] Point3 vertex(std::size_t v) const noexcept {
        const auto ijk = vertex_ijk(v);
        const double inv = h();
        return {static_cast<double>(ijk[0]) * inv, static_cast<double>(ijk[1]) * inv,
                static_cast<double>(ijk[2]) * inv};
    }

    [[nodiscard]] bool on_boundary(std::size_t v) const noexcept {
        const auto ijk = vertex_ijk(v);
        for (auto c : ijk) {
            if (c == 0 || c == n_) return true;
        }
        return false;
    }

    /// Position of an interior vertex in the eliminated system (lexicographic,
    /// x fastest), or -1 for a boundary vertex.
    [[nodiscard]] std::ptrdiff_t interior_index(std::size_t v) const noexcept {
        const auto ijk = vertex_ijk(v);
        for (auto c : ijk) {
            if (c == 0 || c == n_) return -1;
        }
        const auto m = n_ - 1;
        return static_cast<std::ptrdiff_t>((ijk[0] - 1) + m * ((ijk[1] - 1) + m * (ijk[2] - 1)));
    }

    /// Vertex indices of element e, positively oriented.
    [[nodiscard]] std::array<std::size_t, 4> element(std::size_t e) const noexcept {
        // Axis orderings of the six monotone lattice paths from the cell's
        // low corner to its high corner; odd permutations are flagged.
        static constexpr std::array<std::array<int, 3>, kTetsPerCell> kPaths{
            {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
        static constexpr std::array<bool, kTetsPerCell> kOdd{false, true, true, false, false, true};

        const std::size_t cell = e / kTetsPerCell;
        const std::size_t t = e % kTetsPerCell;
        std::array<std::size_t, 3> ijk{cell % n_, (cell / n_) % n_, cell / (n_ * n_)};
        std::array<std::size_t, 4> out{};
        out[0] = vertex_index(ijk[0], ijk[1], ijk[2]);
        for (std::size_t s = 0; s < 3; ++s) {
            ++ijk[static_cast<std::size_t>(kPaths[t][s])];
            out[s + 1] = vertex_index(ijk[0], ijk[1], ijk[2]);
        }
        if (kOdd[t]) std::swap(out[1], out[2]);
        return out;
    }

    [[nodiscard]] std::array<Point3, 4> element_vertices(std::size_t e) const noexcept {
        const auto ids = element(e);
        return {vertex(ids[0]), vertex(ids[1]), vertex(ids[2]), vertex(ids[3])};
    }

private:
    std::size_t n_;
};

[[nodiscard]] inline StructuredTetMesh build_mesh(std::size_t n) { return StructuredTetMesh(n); }

/// Signed volume of a tetrahedron.
[[nodiscard]] inline double tet_volume(const std::array<Point3, 4>& x) noexcept {
    const Point3 a{x[1][0] - x[0][0], x[1][1] - x[0][1], x[1][2] - x[0][2]};
    const Point3 b{x[2][0] - x[0][0], x[2][1] - x[0][1], x[2][2] - x[0][2]};
    const Point3 c{x[3][0] - x[0][0], x[3][1] - x[0][1], x[3][2] - x[0][2]};
    const double det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
                       a[2] * (b[0] * c[1] - b[1] * c[0]);
    return det / 6.0;
}

/// Total degrees of freedom of a discretization on the n-per-side mesh.
[[nodiscard]] inline std::uint64_t count_dofs(std::uint64_t n, Discretization d) {
    if (n < 1) throw DomainError("mesh needs at least one segment per side");
    const std::uint64_t tets = 6 * n * n * n;
    switch (d) {
    case Discretization::CG1: return (n + 1) * (n + 1) * (n + 1);
    case Discretization::CG2: return (2 * n + 1) * (2 * n + 1) * (2 * n + 1);
    case Discretization::DG1: return 4 * tets;
    case Discretization::DG2: return 10 * tets;
    }
    throw DomainError("unknown discretization");
}

} // namespace perfspec
