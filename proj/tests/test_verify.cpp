#include <catch2/catch.hpp>

#include <cmath>

#include "helmfem/experiments.hpp"
#include "helmfem/verify.hpp"

using namespace helmfem;

TEST_CASE("cr solve with zero load", "[verify]")
{
    const Triangulation mesh = make_lshape_mesh();
    const CrSolution sol = cr_solve(mesh, std::vector<double>(6, 0.0));
    REQUIRE(sol.dim == mesh.n_interior_edges());
    REQUIRE(sol.coeffs.norm() <= 1e-15);
}

TEST_CASE("cr solve on the split square, f = 1", "[verify]")
{
    const Triangulation mesh = make_unit_square_mesh();
    const CrSolution sol = cr_solve(mesh, std::vector<double>(2, 1.0));
    REQUIRE(sol.dim == 1);
    // single scalar equation: stiffness 8, load 1/3
    REQUIRE(sol.coeffs[0] == Approx(1.0 / 24.0).epsilon(1e-13));
}

TEST_CASE("cr solve matches a dense brute-force solve", "[verify]")
{
    const Triangulation mesh = make_lshape_mesh().bisect({0, 1, 2, 3, 4, 5});
    REQUIRE(mesh.n_interior_edges() <= 50);
    const std::vector<double> f(mesh.n_triangles(), -1.0);
    const CrSolution sol = cr_solve(mesh, f);

    // independent dense assembly with midpoint-value basis functions
    std::vector<int> dof(mesh.n_edges(), -1);
    int n = 0;
    for (int e = 0; e < mesh.n_edges(); ++e)
        if (!mesh.edge(e).boundary) dof[e] = n++;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Vec2 p0 = mesh.corner(t, 0), p1 = mesh.corner(t, 1), p2 = mesh.corner(t, 2);
        const double a2 = doubled_signed_area(p0, p1, p2);
        const Vec2 gl[3] = {(p2 - p1).rot90() / a2, (p0 - p2).rot90() / a2,
                            (p1 - p0).rot90() / a2};
        for (int i = 0; i < 3; ++i) {
            const int di = dof[mesh.tri_edge(t, i)];
            if (di < 0) continue;
            b[di] += f[t] * 0.5 * a2 / 3.0;
            for (int j = 0; j < 3; ++j) {
                const int dj = dof[mesh.tri_edge(t, j)];
                if (dj >= 0) K(di, dj) += 2.0 * a2 * gl[i].dot(gl[j]);
            }
        }
    }
    const Eigen::VectorXd dense = K.fullPivLu().solve(b);
    REQUIRE((dense - sol.coeffs).norm() <= 1e-10 * std::max(1.0, dense.norm()));
}

TEST_CASE("cr equivalence for the linear datum", "[verify]")
{
    const VectorField phi([](const Vec2& p) { return 0.5 * p; }, 1);
    const Triangulation t0 = make_lshape_mesh();
    REQUIRE(check_cr_equivalence(t0, phi) <= 1e-9);

    const Triangulation red2 = t0.red_refine().red_refine();
    REQUIRE(check_cr_equivalence(red2, phi) <= 1e-9);

    const Triangulation graded = t0.bisect({0}).bisect({0, 1, 2}).bisect({0, 4});
    REQUIRE(check_cr_equivalence(graded, phi) <= 1e-9);
}

TEST_CASE("cr equivalence for a constant datum", "[verify]")
{
    const VectorField phi([](const Vec2&) { return Vec2{0.4, -0.7}; }, 0);
    const Triangulation mesh = make_lshape_mesh().bisect({1, 3});
    REQUIRE(check_cr_equivalence(mesh, phi) <= 1e-10);
    // the forcing vanishes, so both fields are zero
    const MixedSolution sol = solve_mixed(mesh, 0, phi);
    REQUIRE(std::sqrt(sol.xh.norm2(sol.p)) <= 1e-10);
}

TEST_CASE("cr equivalence rejects non piecewise-constant divergence", "[verify]")
{
    const VectorField phi([](const Vec2& p) { return Vec2{std::sin(p.x), 0.0}; });
    REQUIRE_THROWS_AS(check_cr_equivalence(make_lshape_mesh(), phi),
                      std::invalid_argument);
}

TEST_CASE("projection property on three meshes and all degrees", "[verify]")
{
    const Triangulation t0 = make_lshape_mesh();
    const Triangulation meshes[] = {t0, t0.red_refine(), t0.bisect({0, 2}).bisect({1, 3, 5})};
    for (const Triangulation& mesh : meshes)
        for (int k = 0; k <= 2; ++k) {
            const YhSpace yh(mesh, k);
            for (unsigned seed = 0; seed < 20; ++seed) {
                const Eigen::VectorXd v = random_conforming_field(yh, 1000u + seed);
                REQUIRE(check_projection_property(mesh, k, v) <= 1e-12);
            }
        }
}

TEST_CASE("projection property for the zero function", "[verify]")
{
    const Triangulation mesh = make_lshape_mesh();
    const YhSpace yh(mesh, 0);
    REQUIRE(check_projection_property(mesh, 0,
                                      Eigen::VectorXd::Zero(yh.n_nodes())) == 0.0);
}

TEST_CASE("two-level projection property", "[verify]")
{
    const Triangulation coarse = make_lshape_mesh();
    const Triangulation fine =
        coarse.bisect({0, 1, 2, 3, 4, 5}).bisect({0, 1, 2, 3});
    for (int k = 0; k <= 2; ++k) {
        const YhSpace yf(fine, k);
        for (unsigned seed = 0; seed < 5; ++seed) {
            const Eigen::VectorXd v = random_conforming_field(yf, 7000u + seed);
            REQUIRE(check_projection_property_two_level(coarse, fine, k, v) <= 1e-12);
        }
    }
}

TEST_CASE("triangle Helmholtz decomposition", "[verify]")
{
    const Triangulation lshape = make_lshape_mesh();
    DecompositionReport rep = check_triangle_decomposition(lshape);
    REQUIRE(rep.dim_total == 12);
    REQUIRE(rep.dim_gradients == 5);
    REQUIRE(rep.dim_curls == 7);
    REQUIRE(rep.ok());

    const Triangulation square = make_unit_square_mesh();
    rep = check_triangle_decomposition(square);
    REQUIRE(rep.dim_total == 4);
    REQUIRE(rep.dim_gradients == 1);
    REQUIRE(rep.dim_curls == 3);
    REQUIRE(rep.ok());

    REQUIRE(check_triangle_decomposition(lshape.red_refine()).ok());
    REQUIRE(check_triangle_decomposition(lshape.bisect({0, 1, 4})).ok());
}

TEST_CASE("square partition counts and Euler identity", "[verify]")
{
    const SquarePartition one = SquarePartition::build(1, 1, {0, 0}, 1, 1);
    REQUIRE(one.n_cells() == 1);
    REQUIRE(one.n_vertices() == 4);
    REQUIRE(one.n_interior_edges() == 0);
    REQUIRE(one.euler_identity_holds());

    const SquarePartition two = SquarePartition::build(2, 2, {0, 0}, 1, 1);
    REQUIRE(two.n_cells() == 4);
    REQUIRE(two.n_vertices() == 9);
    REQUIRE(two.n_interior_edges() == 4);
    REQUIRE(two.euler_identity_holds());

    const SquarePartition wide = SquarePartition::build(4, 2, {0, 0}, 4, 2);
    REQUIRE(wide.n_cells() == 8);
    REQUIRE(wide.n_vertices() == 15);
    REQUIRE(wide.n_interior_edges() == 10);
    REQUIRE(wide.euler_identity_holds());

    REQUIRE_THROWS_AS(SquarePartition::build(2, 1, {0, 0}, 1.0, 1.0),
                      std::invalid_argument);
}

TEST_CASE("square Helmholtz decomposition", "[verify]")
{
    DecompositionReport rep =
        check_square_decomposition(SquarePartition::build(2, 2, {0, 0}, 1, 1));
    REQUIRE(rep.dim_total == 12);
    REQUIRE(rep.dim_gradients == 4);
    REQUIRE(rep.dim_curls == 8);
    REQUIRE(rep.ok());

    rep = check_square_decomposition(SquarePartition::build(1, 2, {0, 0}, 1, 2));
    REQUIRE(rep.dim_total == 6);
    REQUIRE(rep.dim_gradients == 1);
    REQUIRE(rep.dim_curls == 5);
    REQUIRE(rep.ok());

    rep = check_square_decomposition(SquarePartition::build(4, 4, {-1, -1}, 2, 2));
    REQUIRE(rep.ok());
}
