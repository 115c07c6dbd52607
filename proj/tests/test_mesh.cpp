#include <catch2/catch.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <tuple>

#include "helmfem/experiments.hpp"
#include "helmfem/triangulation.hpp"

using namespace helmfem;

namespace {

Triangulation reference_triangle()
{
    return Triangulation::build_initial({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
}

using LeafSet = std::set<std::tuple<int, int, std::uint64_t, std::uint64_t>>;

LeafSet leaves(const Triangulation& m)
{
    LeafSet s;
    for (const Triangle& t : m.triangles())
        s.insert({t.root, t.path.depth, t.path.bits[0], t.path.bits[1]});
    return s;
}

} // namespace

TEST_CASE("reference triangle counts", "[mesh]")
{
    const Triangulation m = reference_triangle();
    const CountsReport r = m.validate();
    REQUIRE(r.ok());
    REQUIRE(r.n_triangles == 1);
    REQUIRE(r.n_vertices == 3);
    REQUIRE(r.n_edges == 3);
    REQUIRE(r.n_interior_edges == 0);
}

TEST_CASE("L-shaped initial mesh counts", "[mesh]")
{
    const Triangulation m = make_lshape_mesh();
    const CountsReport r = m.validate();
    REQUIRE(r.ok());
    REQUIRE(r.n_triangles == 6);
    REQUIRE(r.n_vertices == 8);
    REQUIRE(r.n_edges == 13);
    REQUIRE(r.n_interior_edges == 5);
}

TEST_CASE("unit square split by a diagonal", "[mesh]")
{
    const Triangulation m = make_unit_square_mesh();
    REQUIRE(m.n_triangles() == 2);
    REQUIRE(m.n_edges() == 5);
    REQUIRE(m.n_interior_edges() == 1);
}

TEST_CASE("invalid input meshes are rejected", "[mesh]")
{
    // clockwise triangle
    REQUIRE_THROWS_AS(Triangulation::build_initial({{0, 0}, {1, 0}, {0, 1}},
                                                   {{0, 2, 1}}),
                      std::invalid_argument);
    // degenerate (collinear) triangle
    REQUIRE_THROWS_AS(Triangulation::build_initial({{0, 0}, {1, 0}, {2, 0}},
                                                   {{0, 1, 2}}),
                      std::invalid_argument);
    // hanging vertex: one big triangle above, two halves below
    REQUIRE_THROWS_AS(Triangulation::build_initial(
                          {{0, 0}, {2, 0}, {1, 1}, {1, 0}, {1, -1}},
                          {{0, 1, 2}, {0, 4, 3}, {3, 4, 1}}),
                      std::invalid_argument);
    // refinement edge index out of range
    REQUIRE_THROWS_AS(Triangulation::build_initial({{0, 0}, {1, 0}, {0, 1}},
                                                   {{0, 1, 2}}, {3}),
                      std::invalid_argument);
    // inconsistent orientation across the shared edge
    REQUIRE_THROWS_AS(Triangulation::build_initial(
                          {{0, 0}, {1, 0}, {1, 1}, {0, 1}},
                          {{0, 1, 2}, {0, 3, 2}}),
                      std::invalid_argument);
}

TEST_CASE("bisect with empty marking is the identity", "[mesh]")
{
    const Triangulation m = make_lshape_mesh();
    const Triangulation b = m.bisect({});
    REQUIRE(b.n_triangles() == m.n_triangles());
    REQUIRE(leaves(b) == leaves(m));
}

TEST_CASE("bisect rejects invalid triangle ids", "[mesh]")
{
    const Triangulation m = reference_triangle();
    REQUIRE_THROWS_AS(m.bisect({1}), std::invalid_argument);
    REQUIRE_THROWS_AS(m.bisect({-1}), std::invalid_argument);
}

TEST_CASE("single bisection produces two children sharing the midpoint", "[mesh]")
{
    const Triangulation m = reference_triangle();
    const Triangulation b = m.bisect({0});
    REQUIRE(b.n_triangles() == 2);
    REQUIRE(b.n_vertices() == 4);
    REQUIRE(b.validate().ok());
    // the refinement edge of the root is the hypotenuse; its midpoint is new
    const Vec2 mid = b.vertex(3);
    REQUIRE(mid.x == Approx(0.5));
    REQUIRE(mid.y == Approx(0.5));
    REQUIRE(b.refines(m));
}

TEST_CASE("closure propagates through the L-shaped mesh", "[mesh]")
{
    const Triangulation m = make_lshape_mesh();
    // triangle 0 touches the reentrant corner; its refinement edge is the
    // interior diagonal shared with triangle 1
    const Triangulation b = m.bisect({0});
    REQUIRE(b.validate().ok());
    REQUIRE(b.n_triangles() > m.n_triangles() + 1);
    REQUIRE(b.refines(m));
}

TEST_CASE("red refinement counts", "[mesh]")
{
    const Triangulation one = reference_triangle();
    const Triangulation r1 = one.red_refine();
    CountsReport c = r1.validate();
    REQUIRE(c.ok());
    REQUIRE(c.n_triangles == 4);
    REQUIRE(c.n_edges == 9);
    REQUIRE(c.n_interior_edges == 3);

    REQUIRE(r1.red_refine().n_triangles() == 16);
    REQUIRE(make_lshape_mesh().red_refine().n_triangles() == 24);
}

TEST_CASE("overlay is idempotent and absorbs refinements", "[mesh]")
{
    const Triangulation t0 = make_lshape_mesh();
    const Triangulation a = t0.bisect({0, 2});
    REQUIRE(leaves(overlay(a, a)) == leaves(a));

    const Triangulation b = a.bisect({0, 1, 2});
    REQUIRE(leaves(overlay(a, b)) == leaves(b));
    REQUIRE(leaves(overlay(b, a)) == leaves(b));
}

TEST_CASE("overlay of two single bisections of the square", "[mesh]")
{
    const Triangulation t0 = make_unit_square_mesh();
    const Triangulation a = t0.bisect({0});
    const Triangulation b = t0.bisect({1});
    const Triangulation ov = overlay(a, b);
    REQUIRE(ov.validate().ok());
    REQUIRE(ov.n_triangles() == t0.n_triangles() + 2);
    REQUIRE(ov.refines(a));
    REQUIRE(ov.refines(b));
}

TEST_CASE("overlay rejects meshes from different initial triangulations", "[mesh]")
{
    const Triangulation a = make_lshape_mesh();
    const Triangulation b = make_lshape_mesh();
    REQUIRE_THROWS_AS(overlay(a, b), std::invalid_argument);
}

TEST_CASE("overlay is commutative and tight", "[mesh][property]")
{
    const Triangulation t0 = make_lshape_mesh();
    std::mt19937 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        auto randomly_refined = [&]() {
            Triangulation m = t0;
            const int rounds = 1 + int(rng() % 3);
            for (int i = 0; i < rounds; ++i) {
                std::vector<int> marked;
                for (int t = 0; t < m.n_triangles(); ++t)
                    if (rng() % 3 == 0) marked.push_back(t);
                if (marked.empty()) marked.push_back(int(rng() % m.n_triangles()));
                m = m.bisect(marked);
            }
            return m;
        };
        const Triangulation a = randomly_refined();
        const Triangulation b = randomly_refined();
        const Triangulation ab = overlay(a, b);
        const Triangulation ba = overlay(b, a);
        REQUIRE(leaves(ab) == leaves(ba));
        REQUIRE(ab.refines(a));
        REQUIRE(ab.refines(b));
        REQUIRE(ab.validate().ok());

        // tightness: every overlay triangle comes from one of the inputs
        const LeafSet la = leaves(a), lb = leaves(b);
        for (const auto& leaf : leaves(ab))
            REQUIRE((la.count(leaf) || lb.count(leaf)));

        // any common refinement refines the overlay
        std::vector<int> all(ab.n_triangles());
        for (int t = 0; t < ab.n_triangles(); ++t) all[t] = t;
        const Triangulation finer = ab.bisect(all);
        REQUIRE(finer.refines(a));
        REQUIRE(finer.refines(b));
        REQUIRE(finer.refines(ab));
    }
}

TEST_CASE("bisection invariants hold along random refinement", "[mesh][property]")
{
    std::mt19937 rng(123);
    Triangulation m = make_lshape_mesh();
    Triangulation prev = m;
    for (int round = 0; round < 8; ++round) {
        std::vector<int> marked;
        for (int t = 0; t < m.n_triangles(); ++t)
            if (rng() % 4 == 0) marked.push_back(t);
        if (marked.empty()) marked.push_back(0);
        prev = m;
        m = m.bisect(marked);
        const CountsReport r = m.validate();
        REQUIRE(r.ok());
        REQUIRE(m.refines(prev));
        REQUIRE(m.n_triangles() >= prev.n_triangles() + int(marked.size()));
    }
}

TEST_CASE("minimum angle is bounded by the similarity classes", "[mesh]")
{
    Triangulation sweep = make_lshape_mesh();
    for (int i = 0; i < 4; ++i) {
        std::vector<int> all(sweep.n_triangles());
        for (int t = 0; t < sweep.n_triangles(); ++t) all[t] = t;
        sweep = sweep.bisect(all);
    }
    const double floor_angle = sweep.min_angle();

    // strongly graded refinement towards the reentrant corner
    Triangulation m = make_lshape_mesh();
    for (int round = 0; round < 20; ++round) {
        std::vector<int> marked;
        for (int t = 0; t < m.n_triangles(); ++t) {
            const double d = std::min({m.corner(t, 0).norm(), m.corner(t, 1).norm(),
                                       m.corner(t, 2).norm()});
            if (d < 0.3) marked.push_back(t);
        }
        REQUIRE(!marked.empty());
        m = m.bisect(marked);
        REQUIRE(m.min_angle() >= floor_angle - 1e-12);
    }
    REQUIRE(m.n_triangles() > 100);
}
