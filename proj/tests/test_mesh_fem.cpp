#include "perfspec/fem.hpp"
#include "perfspec/mesh.hpp"
#include "perfspec/solver.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <vector>

using namespace perfspec;

namespace {

using Dense = std::vector<std::vector<double>>;

double factorial(int k) { return std::tgamma(k + 1.0); }

// Barycentric coordinates of p in tet x, from a 4x4 solve by Gaussian
// elimination (independent of the cross-product formulas in the library).
std::array<double, 4> barycentric(const std::array<Point3, 4>& x, const Point3& p) {
    double m[4][5];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m[r][c] = r == 0 ? 1.0 : x[static_cast<std::size_t>(c)][static_cast<std::size_t>(r - 1)];
        m[r][4] = r == 0 ? 1.0 : p[static_cast<std::size_t>(r - 1)];
    }
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r = c + 1; r < 4; ++r) {
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        }
        for (int k = 0; k < 5; ++k) std::swap(m[c][k], m[piv][k]);
        for (int r = 0; r < 4; ++r) {
            if (r == c) continue;
            const double f = m[r][c] / m[c][c];
            for (int k = 0; k < 5; ++k) m[r][k] -= f * m[c][k];
        }
    }
    return {m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]};
}

// Gradients of the P1 basis: columns of the inverse of [1 x y z]^T.
std::array<Point3, 4> basis_gradients(const std::array<Point3, 4>& x) {
    std::array<Point3, 4> g{};
    // lambda_a(p) is affine; differentiate numerically-exactly via unit offsets
    const Point3 o = x[0];
    const auto l0 = barycentric(x, o);
    for (std::size_t d = 0; d < 3; ++d) {
        Point3 p = o;
        p[d] += 1.0;
        const auto l1 = barycentric(x, p);
        for (std::size_t a = 0; a < 4; ++a) g[a][d] = l1[a] - l0[a];
    }
    return g;
}

// Dense stiffness over the interior vertices, element by element.
Dense dense_interior_stiffness(const StructuredTetMesh& mesh, double alpha) {
    const auto m = mesh.num_interior_vertices();
    Dense a(m, std::vector<double>(m, 0.0));
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto ids = mesh.element(e);
        const auto x = mesh.element_vertices(e);
        const auto g = basis_gradients(x);
        Point3 c{};
        for (const auto& v : x) {
            for (std::size_t d = 0; d < 3; ++d) c[d] += 0.25 * v[d];
        }
        // D = alpha (|c|^2 I - c c^T) + I, written out directly
        const double r2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
        double dmat[3][3];
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) dmat[i][j] = alpha * ((i == j ? r2 : 0.0) - c[i] * c[j]) + (i == j);
        }
        const double vol = 1.0 / (6.0 * std::pow(static_cast<double>(mesh.segments()), 3));
        for (std::size_t p = 0; p < 4; ++p) {
            const auto ip = mesh.interior_index(ids[p]);
            if (ip < 0) continue;
            for (std::size_t q = 0; q < 4; ++q) {
                const auto iq = mesh.interior_index(ids[q]);
                if (iq < 0) continue;
                double s = 0.0;
                for (std::size_t i = 0; i < 3; ++i) {
                    for (std::size_t j = 0; j < 3; ++j) s += g[p][i] * dmat[i][j] * g[q][j];
                }
                a[static_cast<std::size_t>(ip)][static_cast<std::size_t>(iq)] += vol * s;
            }
        }
    }
    return a;
}

std::vector<double> matvec(const CsrMatrix& a, const std::vector<double>& x) {
    std::vector<double> y(a.rows);
    spmv(a, x, y);
    return y;
}

} // namespace

// --- mesh ------------------------------------------------------------------

TEST(Mesh, Counts) {
    const auto m1 = build_mesh(1);
    EXPECT_EQ(m1.num_vertices(), 8u);
    EXPECT_EQ(m1.num_elements(), 6u);
    const auto m20 = build_mesh(20);
    EXPECT_EQ(m20.num_vertices(), 9'261u);
    EXPECT_EQ(m20.num_elements(), 48'000u);
    EXPECT_EQ(m20.num_interior_vertices(), 19u * 19u * 19u);
    EXPECT_THROW((void)build_mesh(0), DomainError);
}

TEST(Mesh, PositiveEqualVolumesSummingToOne) {
    for (std::size_t n : {1u, 2u, 3u, 7u}) {
        const auto mesh = build_mesh(n);
        const double expected = 1.0 / (6.0 * static_cast<double>(n * n * n));
        double total = 0.0;
        for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
            const double v = tet_volume(mesh.element_vertices(e));
            EXPECT_NEAR(v, expected, 1e-15);
            EXPECT_GT(v, 0.0);
            total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Mesh, ConformingFaces) {
    // Every interior face is shared by two tets; the boundary carries
    // 2 triangles per square on each of the 6 faces.
    for (std::size_t n : {1u, 2u, 4u}) {
        const auto mesh = build_mesh(n);
        std::map<std::array<std::size_t, 3>, int> faces;
        for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
            const auto ids = mesh.element(e);
            for (std::size_t skip = 0; skip < 4; ++skip) {
                std::array<std::size_t, 3> f{};
                std::size_t k = 0;
                for (std::size_t a = 0; a < 4; ++a) {
                    if (a != skip) f[k++] = ids[a];
                }
                std::sort(f.begin(), f.end());
                ++faces[f];
            }
        }
        std::size_t boundary = 0;
        for (const auto& [f, count] : faces) {
            ASSERT_LE(count, 2);
            if (count == 1) ++boundary;
        }
        EXPECT_EQ(boundary, 12 * n * n);
    }
}

TEST(Mesh, RandomPointsLieInExactlyOneTet) {
    const auto mesh = build_mesh(2);
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Point3 p{u(rng), u(rng), u(rng)};
        int inside = 0;
        for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
            const auto l = barycentric(mesh.element_vertices(e), p);
            if (std::all_of(l.begin(), l.end(), [](double v) { return v >= -1e-12; })) ++inside;
        }
        EXPECT_EQ(inside, 1);
    }
}

TEST(Mesh, InteriorIndexing) {
    const auto mesh = build_mesh(4);
    std::size_t interior = 0;
    std::vector<int> seen(mesh.num_interior_vertices(), 0);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        const auto idx = mesh.interior_index(v);
        EXPECT_EQ(idx < 0, mesh.on_boundary(v));
        if (idx >= 0) {
            ++interior;
            ++seen[static_cast<std::size_t>(idx)];
        }
    }
    EXPECT_EQ(interior, 27u);
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
}

TEST(CountDofs, Examples) {
    EXPECT_EQ(count_dofs(20, Discretization::CG1), 9'261u);
    EXPECT_EQ(count_dofs(20, Discretization::CG2), 68'921u);
    EXPECT_EQ(count_dofs(20, Discretization::DG1), 192'000u);
    EXPECT_EQ(count_dofs(20, Discretization::DG2), 480'000u);
    EXPECT_EQ(count_dofs(40, Discretization::DG2), 3'840'000u);
    EXPECT_EQ(count_dofs(1, Discretization::CG1), 8u);
    EXPECT_THROW((void)count_dofs(0, Discretization::CG1), DomainError);
    for (std::uint64_t n = 1; n < 200; ++n) {
        EXPECT_EQ(count_dofs(n, Discretization::CG2), count_dofs(2 * n, Discretization::CG1));
        EXPECT_EQ(count_dofs(n, Discretization::CG1), build_mesh(n).num_vertices());
        EXPECT_EQ(count_dofs(n, Discretization::DG1), 4 * build_mesh(n).num_elements());
    }
}

// --- coefficients ------------------------------------------------------------

TEST(Diffusivity, Examples) {
    const Matrix3 identity{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    EXPECT_EQ(diffusivity_tensor({0.3, 0.7, 0.1}, 0.0), identity);
    EXPECT_EQ(diffusivity_tensor({0.0, 0.0, 0.0}, 55.0), identity);
    const Matrix3 ones{{{3, -1, -1}, {-1, 3, -1}, {-1, -1, 3}}};
    EXPECT_EQ(diffusivity_tensor({1, 1, 1}, 1.0), ones);
}

TEST(Diffusivity, SymmetricPositiveDefinite) {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Point3 x{u(rng), u(rng), u(rng)};
        const auto d = diffusivity_tensor(x, 1000.0 * u(rng));
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(d[a][b], d[b][a]);
        }
        // x is an eigenvector with eigenvalue 1
        for (std::size_t a = 0; a < 3; ++a) {
            const double dx = d[a][0] * x[0] + d[a][1] * x[1] + d[a][2] * x[2];
            EXPECT_NEAR(dx, x[a], 1e-9 * (1.0 + std::abs(d[a][a])));
        }
    }
}

TEST(Manufactured, Examples) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const auto v = manufactured_solution({0.25, 0.25, 0.25}, 0.0);
    EXPECT_NEAR(v.c, 1.0, 1e-15);
    EXPECT_NEAR(v.f, 12.0 * pi2, 1e-12);
    EXPECT_EQ(manufactured_solution({0.0, 0.4, 0.9}, 7.0).c, 0.0);
    EXPECT_EQ(manufactured_solution({0.4, 0.0, 0.9}, 7.0).c, 0.0);
    EXPECT_EQ(manufactured_solution({0.4, 0.9, 0.0}, 7.0).c, 0.0);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const auto w = manufactured_solution({u(rng), u(rng), u(rng)}, 0.0);
        EXPECT_NEAR(w.f, 12.0 * pi2 * w.c, 1e-12 * 12.0 * pi2);
    }
}

TEST(Manufactured, MatchesFiniteDifferenceDivergence) {
    constexpr double k = 2.0 * std::numbers::pi;
    auto grad_c = [](const Point3& x) {
        return Point3{k * std::cos(k * x[0]) * std::sin(k * x[1]) * std::sin(k * x[2]),
                      k * std::sin(k * x[0]) * std::cos(k * x[1]) * std::sin(k * x[2]),
                      k * std::sin(k * x[0]) * std::sin(k * x[1]) * std::cos(k * x[2])};
    };
    for (double alpha : {10.0, 1000.0}) {
        auto flux = [&](const Point3& x, std::size_t d) {
            const auto dm = diffusivity_tensor(x, alpha);
            const auto g = grad_c(x);
            return dm[d][0] * g[0] + dm[d][1] * g[1] + dm[d][2] * g[2];
        };
        std::mt19937 rng(alpha == 10.0 ? 20 : 21);
        std::uniform_real_distribution<double> u(0.05, 0.95);
        constexpr double step = 1e-5;
        for (int i = 0; i < 20; ++i) {
            const Point3 x{u(rng), u(rng), u(rng)};
            double div = 0.0;
            for (std::size_t d = 0; d < 3; ++d) {
                Point3 xp = x;
                Point3 xm = x;
                xp[d] += step;
                xm[d] -= step;
                div += (flux(xp, d) - flux(xm, d)) / (2.0 * step);
            }
            const double f = manufactured_solution(x, alpha).f;
            EXPECT_NEAR(f, -div, 1e-6 * std::max(1.0, std::abs(div))) << "alpha=" << alpha << " point " << i;
        }
    }
}

// --- quadrature --------------------------------------------------------------

template <std::size_t N>
void check_exactness(const TetQuadrature<N>& rule, int degree) {
    // Reference tet (0,0,0),(1,0,0),(0,1,0),(0,0,1): integral of x^a y^b z^c
    // is a! b! c! / (a+b+c+3)!, and the volume is 1/6.
    for (int a = 0; a <= degree; ++a) {
        for (int b = 0; a + b <= degree; ++b) {
            for (int c = 0; a + b + c <= degree; ++c) {
                double q = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    const auto& l = rule.points[i];
                    q += rule.weights[i] * std::pow(l[1], a) * std::pow(l[2], b) * std::pow(l[3], c);
                }
                q /= 6.0;
                const double exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                EXPECT_NEAR(q, exact, 1e-15) << a << b << c;
            }
        }
    }
}

TEST(Quadrature, Degree2IsExact) { check_exactness(kTetDegree2, 2); }
TEST(Quadrature, Degree5IsExact) { check_exactness(kTetDegree5, 5); }

TEST(Quadrature, WeightsAndPoints) {
    double s = 0.0;
    for (double w : kTetDegree5.weights) s += w;
    EXPECT_NEAR(s, 1.0, 1e-15);
    for (const auto& p : kTetDegree5.points) EXPECT_NEAR(p[0] + p[1] + p[2] + p[3], 1.0, 1e-15);
}

// --- assembly ----------------------------------------------------------------

TEST(Assembly, NTwoSingleUnknownMatchesDenseOracle) {
    const auto mesh = build_mesh(2);
    for (double alpha : {0.0, 3.0, 1000.0}) {
        const auto sys = assemble_system(mesh, alpha);
        ASSERT_EQ(sys.matrix.rows, 1u);
        ASSERT_EQ(sys.matrix.nnz(), 1u);
        const auto dense = dense_interior_stiffness(mesh, alpha);
        EXPECT_NEAR(sys.matrix.values[0], dense[0][0], 1e-13 * std::abs(dense[0][0]));
    }
    // The Freudenthal P1 Laplacian has diagonal 6h.
    EXPECT_NEAR(assemble_system(mesh, 0.0).matrix.values[0], 6.0 * 0.5, 1e-14);
}

TEST(Assembly, MatchesDenseOracleEverywhere) {
    for (std::size_t n : {3u, 4u}) {
        const auto mesh = build_mesh(n);
        for (double alpha : {0.0, 10.0}) {
            const auto sys = assemble_system(mesh, alpha);
            const auto dense = dense_interior_stiffness(mesh, alpha);
            for (std::size_t i = 0; i < dense.size(); ++i) {
                for (std::size_t j = 0; j < dense.size(); ++j) {
                    EXPECT_NEAR(sys.matrix.at(i, j), dense[i][j], 1e-12 * (1.0 + std::abs(dense[i][i])));
                }
            }
        }
    }
}

TEST(Assembly, SevenPointStencilForLaplacian) {
    const auto mesh = build_mesh(5);
    const auto a = assemble_system(mesh, 0.0).matrix;
    const double h = 0.2;
    for (std::size_t i = 0; i < a.rows; ++i) {
        EXPECT_NEAR(a.at(i, i), 6.0 * h, 1e-14);
        double off = 0.0;
        for (auto v : a.row_values(i)) off += v;
        off -= a.at(i, i);
        EXPECT_GE(off, -6.0 * h - 1e-14);
    }
}

TEST(Assembly, ConstantsInKernel) {
    for (double alpha : {0.0, 25.0}) {
        const auto mesh = build_mesh(4);
        const auto full = assemble_full_stiffness(mesh, alpha);
        const auto y = matvec(full, std::vector<double>(full.rows, 1.0));
        for (double v : y) EXPECT_NEAR(v, 0.0, 1e-12);
    }
}

TEST(Assembly, ExactlySymmetric) {
    for (double alpha : {0.0, 1.0, 1000.0}) {
        const auto sys = assemble_system(build_mesh(5), alpha);
        EXPECT_EQ(max_asymmetry(sys.matrix), 0.0);
        EXPECT_TRUE(is_valid_csr(sys.matrix));
    }
}

TEST(Assembly, PositiveDefinite) {
    const auto a = assemble_system(build_mesh(6), 100.0).matrix;
    std::mt19937 rng(17);
    std::normal_distribution<double> g;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> v(a.rows);
        for (auto& x : v) x = g(rng);
        const auto av = matvec(a, v);
        double q = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) q += v[k] * av[k];
        EXPECT_GT(q, 0.0);
    }
}

TEST(Assembly, LinearLoadMatchesMassMatrix) {
    // For f in the P1 space, the degree-2 rule integrates f * phi exactly,
    // so b = M f with element mass matrix vol/20 (1 + delta_ab).
    const auto mesh = build_mesh(3);
    auto f = [](const Point3& x) { return 1.0 + x[0] + 2.0 * x[1] - 3.0 * x[2]; };
    const auto sys = assemble_system(mesh, 0.0, f);
    std::vector<double> expected(mesh.num_interior_vertices(), 0.0);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto ids = mesh.element(e);
        const double vol = tet_volume(mesh.element_vertices(e));
        for (std::size_t a = 0; a < 4; ++a) {
            const auto ia = mesh.interior_index(ids[a]);
            if (ia < 0) continue;
            for (std::size_t b = 0; b < 4; ++b) {
                expected[static_cast<std::size_t>(ia)] += vol / 20.0 * (a == b ? 2.0 : 1.0) * f(mesh.vertex(ids[b]));
            }
        }
    }
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(sys.rhs[i], expected[i], 1e-15);
}

TEST(Assembly, GalerkinConsistency) {
    // With b the discrete load of w (b = A w), the solver returns w.
    const auto mesh = build_mesh(6);
    for (double alpha : {0.0, 50.0}) {
        const auto a = assemble_system(mesh, alpha).matrix;
        std::mt19937 rng(23);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> w(a.rows);
        for (auto& v : w) v = u(rng);
        const auto b = matvec(a, w);
        FlopCounter counter;
        const auto sol = solve_cg_jacobi(a, b, {1e-14, 10'000}, 1, counter);
        ASSERT_TRUE(sol.converged);
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(sol.u[i], w[i], 1e-10);
    }
}

TEST(Assembly, RejectsEmptyInterior) {
    EXPECT_THROW((void)assemble_system(build_mesh(1), 0.0), DomainError);
}

TEST(Assembly, ChargesFixedFlopsPerElement) {
    const auto mesh = build_mesh(3);
    FlopCounter counter;
    (void)assemble_system(mesh, 2.0, &counter);
    EXPECT_EQ(counter.count(Kernel::Assembly), mesh.num_elements() * kAssemblyFlopsPerElement);
    EXPECT_EQ(counter.total(), counter.count(Kernel::Assembly));
}

// --- error norm --------------------------------------------------------------

TEST(L2Error, ZeroFieldGivesNormOfSolution) {
    for (std::size_t n : {4u, 8u}) {
        const auto mesh = build_mesh(n);
        const std::vector<double> zero(mesh.num_interior_vertices(), 0.0);
        EXPECT_NEAR(l2_error(zero, mesh), std::sqrt(0.125), n == 4 ? 2e-3 : 1e-4);
    }
    const auto mesh = build_mesh(16);
    const std::vector<double> zero(mesh.num_interior_vertices(), 0.0);
    EXPECT_NEAR(l2_error(zero, mesh), 0.353553, 1e-6);
}

TEST(L2Error, InterpolantErrorIsSecondOrder) {
    std::vector<ErrorSample> pts;
    for (std::size_t n : {16u, 32u, 64u}) {
        const auto mesh = build_mesh(n);
        std::vector<double> u(mesh.num_interior_vertices());
        for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
            const auto i = mesh.interior_index(v);
            if (i >= 0) u[static_cast<std::size_t>(i)] = manufactured_solution(mesh.vertex(v), 0.0).c;
        }
        pts.push_back({mesh.h(), l2_error(u, mesh)});
    }
    EXPECT_NEAR(convergence_slope(pts), 2.0, 0.2);
}

TEST(L2Error, SizeMismatchThrows) {
    const auto mesh = build_mesh(3);
    const std::vector<double> wrong(5, 0.0);
    EXPECT_THROW((void)l2_error(wrong, mesh), DomainError);
}
