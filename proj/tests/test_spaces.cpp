#include <catch2/catch.hpp>

#include <random>

#include "helmfem/experiments.hpp"
#include "helmfem/spaces.hpp"

using namespace helmfem;

namespace {

Triangulation reference_triangle()
{
    return Triangulation::build_initial({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
}

} // namespace

TEST_CASE("X_h dimensions", "[spaces]")
{
    const Triangulation lshape = make_lshape_mesh();
    REQUIRE(XhSpace(lshape, 0).dim() == 12);

    const Triangulation one = reference_triangle();
    REQUIRE(XhSpace(one, 1).dim() == 6);

    const Triangulation square = make_unit_square_mesh();
    REQUIRE(XhSpace(square, 2).dim() == 24);
}

TEST_CASE("Y_h node counts and ndof", "[spaces]")
{
    const Triangulation lshape = make_lshape_mesh();
    const YhSpace y0(lshape, 0);
    REQUIRE(y0.n_nodes() == 8);
    REQUIRE(y0.ndof() == 7);

    const Triangulation one = reference_triangle();
    const YhSpace y1(one, 1);
    REQUIRE(y1.n_nodes() == 6);
    REQUIRE(y1.ndof() == 5);

    const Triangulation square = make_unit_square_mesh();
    const YhSpace y2(square, 2);
    REQUIRE(y2.n_nodes() == 16);
    REQUIRE(y2.ndof() == 15);
}

TEST_CASE("curl of a constant vanishes", "[spaces]")
{
    const Triangulation mesh = make_lshape_mesh();
    for (int k = 0; k <= 2; ++k) {
        const XhSpace xh(mesh, k);
        const YhSpace yh(mesh, k);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(yh.n_nodes());
        REQUIRE(yh.curl_to_x(ones, xh).norm() <= 1e-13);
    }
}

TEST_CASE("curl of beta(x,y) = y is (1, 0)", "[spaces]")
{
    const Triangulation mesh = reference_triangle();
    const XhSpace xh(mesh, 0);
    const YhSpace yh(mesh, 0);
    Eigen::VectorXd beta(3);
    for (int v = 0; v < 3; ++v) beta[v] = mesh.vertex(v).y;
    const Eigen::VectorXd c = yh.curl_to_x(beta, xh);
    const Vec2 val = xh.evaluate(c, 0, mesh.centroid(0));
    REQUIRE(val.x == Approx(1.0).margin(1e-14));
    REQUIRE(val.y == Approx(0.0).margin(1e-14));
}

TEST_CASE("curl of beta(x,y) = x y is (x, -y)", "[spaces]")
{
    const Triangulation mesh = make_unit_square_mesh();
    const XhSpace xh(mesh, 1);
    const YhSpace yh(mesh, 1);
    // nodal interpolation of xy is exact in P2
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(yh.n_nodes());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto g = yh.global_nodes(t);
        const std::array<std::array<double, 3>, 6> nodes = {{
            {1, 0, 0}, {0, 1, 0}, {0, 0, 1},
            {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}}};
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Vec2 p = nodes[i][0] * mesh.corner(t, 0) +
                           nodes[i][1] * mesh.corner(t, 1) +
                           nodes[i][2] * mesh.corner(t, 2);
            beta[g[i]] = p.x * p.y;
        }
    }
    const Eigen::VectorXd c = yh.curl_to_x(beta, xh);
    for (int t = 0; t < mesh.n_triangles(); ++t)
        for (double r : {0.2, 0.6})
            for (double s : {0.1, 0.3}) {
                const Vec2 p = mesh.map_ref(t, r, s);
                const Vec2 val = xh.evaluate(c, t, p);
                REQUIRE(val.x == Approx(p.x).margin(1e-13));
                REQUIRE(val.y == Approx(-p.y).margin(1e-13));
            }
}

TEST_CASE("projection reproduces fields already in X_h", "[spaces]")
{
    const Triangulation mesh = make_lshape_mesh().bisect({0, 3});
    for (int k = 0; k <= 2; ++k) {
        const VectorField field(
            [k](const Vec2& p) {
                if (k == 0) return Vec2{1.25, -0.5};
                double u = 1.0 + 2.0 * p.x - p.y;
                double v = 0.5 * p.x + p.y;
                if (k >= 2) {
                    u += 0.25 * p.x * p.y;
                    v -= p.y * p.y;
                }
                return Vec2{u, v};
            },
            k);
        const XhSpace xh(mesh, k);
        const Eigen::VectorXd c = xh.project(field, 8);
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const Vec2 p = mesh.map_ref(t, 0.3, 0.4);
            REQUIRE((xh.evaluate(c, t, p) - field(p)).norm() <= 1e-12);
        }
    }
}

TEST_CASE("projection of a linear field onto P_0 is its centroid value", "[spaces]")
{
    const Triangulation mesh = reference_triangle();
    const XhSpace xh(mesh, 0);
    const VectorField phi([](const Vec2& p) { return 0.5 * p; }, 1);
    const Eigen::VectorXd c = xh.project(phi, 8);
    const Vec2 val = xh.evaluate(c, 0, Vec2{0.2, 0.2});
    REQUIRE(val.x == Approx(1.0 / 6.0).margin(1e-14));
    REQUIRE(val.y == Approx(1.0 / 6.0).margin(1e-14));
}

TEST_CASE("Curl Y_h is contained in X_h", "[spaces]")
{
    for (const Triangulation& mesh :
         {make_lshape_mesh(), make_unit_square_mesh().bisect({0, 1})}) {
        for (int k = 0; k <= 2; ++k) {
            const XhSpace xh(mesh, k);
            const YhSpace yh(mesh, k);
            for (int j = 0; j < yh.n_nodes(); ++j) {
                Eigen::VectorXd beta = Eigen::VectorXd::Zero(yh.n_nodes());
                beta[j] = 1.0;
                const Eigen::VectorXd c = yh.curl_to_x(beta, xh);
                for (int t = 0; t < mesh.n_triangles(); ++t)
                    for (double r : {0.25, 0.5})
                        for (double s : {0.2, 0.4}) {
                            const Vec2 p = mesh.map_ref(t, r, s);
                            const Vec2 direct = yh.evaluate_curl(
                                beta, t, mesh.barycentric(t, p));
                            REQUIRE((xh.evaluate(c, t, p) - direct).norm() <= 1e-12);
                        }
            }
        }
    }
}

TEST_CASE("projection is idempotent and a contraction", "[spaces]")
{
    const Triangulation mesh = make_lshape_mesh();
    const VectorField field(
        [](const Vec2& p) {
            return Vec2{std::sin(p.x + 0.3 * p.y), std::cos(p.x * p.y)};
        });
    for (int k = 0; k <= 2; ++k) {
        const XhSpace xh(mesh, k);
        const Eigen::VectorXd c = xh.project(field, 10);
        const Eigen::VectorXd c2 = project_to_coarse(xh, xh, c);
        REQUIRE((c - c2).norm() <= 1e-12 * std::max(1.0, c.norm()));

        const double field_norm2 = integrate(
            [&](const Vec2& p) { return field(p).squared_norm(); }, mesh, 10);
        REQUIRE(xh.norm2(c) <= field_norm2 + 1e-12);
    }
}

TEST_CASE("projection commutes with refinement on nested meshes", "[spaces]")
{
    const Triangulation coarse = make_lshape_mesh();
    const Triangulation fine = coarse.bisect({0, 1, 2, 3, 4, 5});
    // polynomial field of degree k+2: non-trivial projection, exact quadrature
    for (int k = 0; k <= 2; ++k) {
        const VectorField field(
            [k](const Vec2& p) {
                const double s = std::pow(p.x + 0.7, k + 2);
                const double t = std::pow(p.y - 0.4, k + 2);
                return Vec2{s + 0.5 * t, s * 0.25 - t};
            },
            k + 2);
        const XhSpace xc(coarse, k);
        const XhSpace xf(fine, k);
        const Eigen::VectorXd direct = xc.project(field, 8);
        const Eigen::VectorXd via_fine = project_to_coarse(xc, xf, xf.project(field, 8));
        REQUIRE((direct - via_fine).norm() <= 1e-12 * std::max(1.0, direct.norm()));
    }
}

TEST_CASE("mean normalization leaves the curl unchanged", "[spaces]")
{
    const Triangulation mesh = make_lshape_mesh();
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int k = 0; k <= 2; ++k) {
        const XhSpace xh(mesh, k);
        const YhSpace yh(mesh, k);
        Eigen::VectorXd beta(yh.n_nodes());
        for (int i = 0; i < beta.size(); ++i) beta[i] = uni(rng);
        Eigen::VectorXd shifted = beta;
        shifted.array() += 3.25;
        const Eigen::VectorXd c1 = yh.curl_to_x(beta, xh);
        const Eigen::VectorXd c2 = yh.curl_to_x(shifted, xh);
        REQUIRE((c1 - c2).norm() <= 1e-12 * std::max(1.0, c1.norm()));

        Eigen::VectorXd normalized = beta;
        yh.normalize_mean(normalized);
        REQUIRE(std::abs(yh.mean(normalized)) <= 1e-12);
    }
}
