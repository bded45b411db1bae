#pragma once

// Linear (CG1) finite elements for steady diffusion on the structured unit-cube mesh:
// the anisotropic diffusivity, the sine manufactured solution, stiffness/load
// assembly with homogeneous Dirichlet elimination, and the L2 error norm.

#include "perfspec/errors.hpp"
#include "perfspec/flops.hpp"
#include "perfspec/mesh.hpp"
#include "perfspec/sparse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace perfspec {

using Matrix3 = std::array<std::array<double, 3>, 3>;

/// D(x) = alpha (|x|^2 I - x x^T) + I. Identity at the origin and for alpha = 0.
[[nodiscard]] inline Matrix3 diffusivity_tensor(const Point3& x, double alpha) noexcept {
    const double xx = x[0] * x[0];
    const double yy = x[1] * x[1];
    const double zz = x[2] * x[2];
    Matrix3 d{};
    d[0][0] = alpha * (yy + zz) + 1.0;
    d[1][1] = alpha * (xx + zz) + 1.0;
    d[2][2] = alpha * (xx + yy) + 1.0;
    d[0][1] = d[1][0] = -alpha * x[0] * x[1];
    d[0][2] = d[2][0] = -alpha * x[0] * x[2];
    d[1][2] = d[2][1] = -alpha * x[1] * x[2];
    return d;
}

struct ManufacturedValues {
    double c; // exact solution
    double f; // forcing, -div(D grad c)
};

/// c = sin(2 pi x) sin(2 pi y) sin(2 pi z) and the forcing it induces under D(x; alpha).
///
/// With r = |x|^2 and D = I + alpha (r I - x x^T):
///   div(D grad c) = lap c + alpha (r lap c - 2 x.grad c - x^T H x)
/// where H is the Hessian of c. For alpha = 0 this gives f = 12 pi^2 c.
[[nodiscard]] inline ManufacturedValues manufactured_solution(const Point3& x, double alpha) noexcept {
    constexpr double k = 2.0 * std::numbers::pi;
    const double sx = std::sin(k * x[0]);
    const double sy = std::sin(k * x[1]);
    const double sz = std::sin(k * x[2]);
    const double c = sx * sy * sz;
    const double lap = -3.0 * k * k * c;
    if (alpha == 0.0) return {c, -lap};

    const double cx = std::cos(k * x[0]);
    const double cy = std::cos(k * x[1]);
    const double cz = std::cos(k * x[2]);
    const double kk = k * k;
    const double x_dot_grad = k * (x[0] * cx * sy * sz + x[1] * sx * cy * sz + x[2] * sx * sy * cz);
    const double hxy = kk * cx * cy * sz;
    const double hxz = kk * cx * sy * cz;
    const double hyz = kk * sx * cy * cz;
    const double r = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    const double xhx = -kk * c * r + 2.0 * (x[0] * x[1] * hxy + x[0] * x[2] * hxz + x[1] * x[2] * hyz);
    const double div = lap + alpha * (r * lap - 2.0 * x_dot_grad - xhx);
    return {c, -div};
}

/// Symmetric tetrahedral quadrature in barycentric coordinates; weights sum to 1
/// and are scaled by the element volume at use.
template <std::size_t N>
struct TetQuadrature {
    std::array<std::array<double, 4>, N> points;
    std::array<double, N> weights;
};

namespace detail {

constexpr std::array<double, 4> perm_aaab(double a, std::size_t pos) {
    std::array<double, 4> p{a, a, a, a};
    p[pos] = 1.0 - 3.0 * a;
    return p;
}

constexpr std::array<double, 4> perm_aabb(double a, std::size_t i, std::size_t j) {
    const double b = 0.5 - a;
    std::array<double, 4> p{b, b, b, b};
    p[i] = a;
    p[j] = a;
    return p;
}

} // namespace detail

/// 4-point rule, exact for polynomials of degree 2.
inline constexpr TetQuadrature<4> kTetDegree2 = [] {
    constexpr double a = 0.1381966011250105151795413165634361882280;
    TetQuadrature<4> q{};
    for (std::size_t i = 0; i < 4; ++i) {
        q.points[i] = detail::perm_aaab(a, i);
        q.weights[i] = 0.25;
    }
    return q;
}();

/// 14-point rule with positive weights, exact for polynomials of degree 5.
inline constexpr TetQuadrature<14> kTetDegree5 = [] {
    constexpr double a1 = 0.3108859192633006097973457337634578;
    constexpr double w1 = 0.1126879257180158507991856523332863;
    constexpr double a2 = 0.0927352503108912264023239137370306;
    constexpr double w2 = 0.0734930431163619495437102054863275;
    constexpr double a3 = 0.0455037041256496494918805262793394;
    constexpr double w3 = 0.0425460207770814664380694281202574;
    TetQuadrature<14> q{};
    std::size_t n = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        q.points[n] = detail::perm_aaab(a1, i);
        q.weights[n++] = w1;
    }
    for (std::size_t i = 0; i < 4; ++i) {
        q.points[n] = detail::perm_aaab(a2, i);
        q.weights[n++] = w2;
    }
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
            q.points[n] = detail::perm_aabb(a3, i, j);
            q.weights[n++] = w3;
        }
    }
    return q;
}();

[[nodiscard]] inline Point3 barycentric_point(const std::array<Point3, 4>& x,
                                              const std::array<double, 4>& lambda) noexcept {
    Point3 p{};
    for (std::size_t d = 0; d < 3; ++d) {
        p[d] = lambda[0] * x[0][d] + lambda[1] * x[1][d] + lambda[2] * x[2][d] + lambda[3] * x[3][d];
    }
    return p;
}

/// Constant gradients of the four P1 basis functions and the element volume.
struct P1Element {
    std::array<Point3, 4> grad;
    double volume;
};

[[nodiscard]] inline P1Element p1_element(const std::array<Point3, 4>& x) {
    const Point3 a{x[1][0] - x[0][0], x[1][1] - x[0][1], x[1][2] - x[0][2]};
    const Point3 b{x[2][0] - x[0][0], x[2][1] - x[0][1], x[2][2] - x[0][2]};
    const Point3 c{x[3][0] - x[0][0], x[3][1] - x[0][1], x[3][2] - x[0][2]};
    auto cross = [](const Point3& u, const Point3& v) {
        return Point3{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    };
    // Rows of the inverse Jacobian are the scaled cross products of its columns.
    const Point3 bc = cross(b, c);
    const Point3 ca = cross(c, a);
    const Point3 ab = cross(a, b);
    const double det = a[0] * bc[0] + a[1] * bc[1] + a[2] * bc[2];
    if (!(det > 0.0)) throw SolverError("degenerate or inverted element");
    const double inv = 1.0 / det;
    P1Element e{};
    for (std::size_t d = 0; d < 3; ++d) {
        e.grad[1][d] = bc[d] * inv;
        e.grad[2][d] = ca[d] * inv;
        e.grad[3][d] = ab[d] * inv;
        e.grad[0][d] = -(e.grad[1][d] + e.grad[2][d] + e.grad[3][d]);
    }
    e.volume = det / 6.0;
    return e;
}

/// Local 4x4 stiffness vol * grad_a^T D grad_b; only a <= b is computed and
/// mirrored, so the result is bitwise symmetric.
[[nodiscard]] inline std::array<std::array<double, 4>, 4> p1_stiffness(const P1Element& e, const Matrix3& d) {
    std::array<Point3, 4> dg{};
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t r = 0; r < 3; ++r) {
            dg[a][r] = d[r][0] * e.grad[a][0] + d[r][1] * e.grad[a][1] + d[r][2] * e.grad[a][2];
        }
    }
    std::array<std::array<double, 4>, 4> k{};
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = a; b < 4; ++b) {
            const double v =
                e.volume * (e.grad[a][0] * dg[b][0] + e.grad[a][1] * dg[b][1] + e.grad[a][2] * dg[b][2]);
            k[a][b] = v;
            k[b][a] = v;
        }
    }
    return k;
}

// Manual FLOP counts of the assembly kernels above, per element.
inline constexpr std::uint64_t kGeometryFlops = 9 + 27 + 5 + 1 + 9 + 6 + 1; // J, cross, det, 1/det, scale, grad0, vol
inline constexpr std::uint64_t kCentroidFlops = 12;
inline constexpr std::uint64_t kTensorFlops = 23;
inline constexpr std::uint64_t kLocalStiffnessFlops = 4 * 15 + 10 * 6;
inline constexpr std::uint64_t kScatterFlops = 16;
inline constexpr std::uint64_t kForcingFlops = 60; // general-alpha arithmetic; sin/cos not charged
inline constexpr std::uint64_t kLoadFlopsPerPoint = 21 + kForcingFlops + 2 + 4 * 2;
inline constexpr std::uint64_t kAssemblyFlopsPerElement = kGeometryFlops + kCentroidFlops + kTensorFlops +
                                                          kLocalStiffnessFlops + kScatterFlops +
                                                          kTetDegree2.points.size() * kLoadFlopsPerPoint;

/// Assembled Dirichlet-eliminated system over the interior vertices.
struct LinearSystem {
    CsrMatrix matrix;
    std::vector<double> rhs;
};

namespace detail {

/// Assembles over the vertices with dof_of_vertex >= 0. Load integration uses
/// the degree-2 rule; D is evaluated at the element centroid.
template <typename Forcing>
LinearSystem assemble(const StructuredTetMesh& mesh, double alpha, const std::vector<std::ptrdiff_t>& dof_of_vertex,
                      std::size_t ndofs, Forcing&& forcing, FlopCounter* counter) {
    std::vector<std::vector<std::uint32_t>> pattern(ndofs);
    for (auto& row : pattern) row.reserve(16);
    const auto ne = mesh.num_elements();
    for (std::size_t e = 0; e < ne; ++e) {
        const auto ids = mesh.element(e);
        for (auto va : ids) {
            const auto ia = dof_of_vertex[va];
            if (ia < 0) continue;
            auto& row = pattern[static_cast<std::size_t>(ia)];
            for (auto vb : ids) {
                const auto ib = dof_of_vertex[vb];
                if (ib < 0) continue;
                const auto col = static_cast<std::uint32_t>(ib);
                if (std::find(row.begin(), row.end(), col) == row.end()) row.push_back(col);
            }
        }
    }
    LinearSystem sys{csr_from_pattern(std::move(pattern), ndofs), std::vector<double>(ndofs, 0.0)};

    for (std::size_t e = 0; e < ne; ++e) {
        const auto ids = mesh.element(e);
        std::array<std::ptrdiff_t, 4> dof{};
        bool any = false;
        for (std::size_t a = 0; a < 4; ++a) {
            dof[a] = dof_of_vertex[ids[a]];
            any = any || dof[a] >= 0;
        }
        if (!any) continue;
        const std::array<Point3, 4> x{mesh.vertex(ids[0]), mesh.vertex(ids[1]), mesh.vertex(ids[2]),
                                      mesh.vertex(ids[3])};
        const auto geo = p1_element(x);
        const auto centroid = barycentric_point(x, {0.25, 0.25, 0.25, 0.25});
        const auto k = p1_stiffness(geo, diffusivity_tensor(centroid, alpha));
        for (std::size_t a = 0; a < 4; ++a) {
            if (dof[a] < 0) continue;
            const auto ia = static_cast<std::size_t>(dof[a]);
            for (std::size_t b = 0; b < 4; ++b) {
                if (dof[b] < 0) continue;
                sys.matrix.values[sys.matrix.slot(ia, static_cast<std::size_t>(dof[b]))] += k[a][b];
            }
        }
        for (std::size_t q = 0; q < kTetDegree2.points.size(); ++q) {
            const auto& lambda = kTetDegree2.points[q];
            const double wf = kTetDegree2.weights[q] * geo.volume * forcing(barycentric_point(x, lambda));
            for (std::size_t a = 0; a < 4; ++a) {
                if (dof[a] >= 0) sys.rhs[static_cast<std::size_t>(dof[a])] += wf * lambda[a];
            }
        }
    }
    if (counter) counter->add(Kernel::Assembly, ne * kAssemblyFlopsPerElement);
    return sys;
}

inline std::vector<std::ptrdiff_t> interior_dof_map(const StructuredTetMesh& mesh) {
    std::vector<std::ptrdiff_t> map(mesh.num_vertices());
    for (std::size_t v = 0; v < map.size(); ++v) map[v] = mesh.interior_index(v);
    return map;
}

} // namespace detail

/// Stiffness over every vertex, before boundary elimination.
[[nodiscard]] inline CsrMatrix assemble_full_stiffness(const StructuredTetMesh& mesh, double alpha) {
    std::vector<std::ptrdiff_t> all(mesh.num_vertices());
    for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<std::ptrdiff_t>(v);
    return detail::assemble(mesh, alpha, all, all.size(), [](const Point3&) { return 0.0; }, nullptr).matrix;
}

/// Interior system for an arbitrary forcing function f(x).
template <typename Forcing>
[[nodiscard]] LinearSystem assemble_system(const StructuredTetMesh& mesh, double alpha, Forcing&& forcing,
                                           FlopCounter* counter = nullptr) {
    if (mesh.segments() < 2) throw DomainError("mesh has no interior vertices (n < 2)");
    return detail::assemble(mesh, alpha, detail::interior_dof_map(mesh), mesh.num_interior_vertices(),
                            std::forward<Forcing>(forcing), counter);
}

/// Interior system for the manufactured sine solution.
[[nodiscard]] inline LinearSystem assemble_system(const StructuredTetMesh& mesh, double alpha,
                                                  FlopCounter* counter = nullptr) {
    return assemble_system(
        mesh, alpha, [alpha](const Point3& x) { return manufactured_solution(x, alpha).f; }, counter);
}

/// || u_h - c ||_L2 over the cube, with u_h the P1 interpolant of interior
/// values `u` (zero on the boundary) and c the exact sine solution.
[[nodiscard]] inline double l2_error(std::span<const double> u, const StructuredTetMesh& mesh) {
    if (u.size() != mesh.num_interior_vertices()) {
        throw DomainError("solution vector does not match the interior vertex count");
    }
    double sum = 0.0;
    const auto ne = mesh.num_elements();
    for (std::size_t e = 0; e < ne; ++e) {
        const auto ids = mesh.element(e);
        std::array<double, 4> nodal{};
        std::array<Point3, 4> x{};
        for (std::size_t a = 0; a < 4; ++a) {
            const auto idx = mesh.interior_index(ids[a]);
            nodal[a] = idx < 0 ? 0.0 : u[static_cast<std::size_t>(idx)];
            x[a] = mesh.vertex(ids[a]);
        }
        const double volume = tet_volume(x);
        double local = 0.0;
        for (std::size_t q = 0; q < kTetDegree5.points.size(); ++q) {
            const auto& lambda = kTetDegree5.points[q];
            const double uh =
                lambda[0] * nodal[0] + lambda[1] * nodal[1] + lambda[2] * nodal[2] + lambda[3] * nodal[3];
            const double diff = uh - manufactured_solution(barycentric_point(x, lambda), 0.0).c;
            local += kTetDegree5.weights[q] * diff * diff;
        }
        sum += volume * local;
    }
    return std::sqrt(sum);
}

} // namespace perfspec
