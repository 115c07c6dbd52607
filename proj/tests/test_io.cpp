#include <catch2/catch.hpp>

#include <sstream>

#include "helmfem/experiments.hpp"
#include "helmfem/triangulation.hpp"

using namespace helmfem;

TEST_CASE("mesh text format round-trips bit-exactly", "[io]")
{
    // awkward decimal coordinates to exercise the 17-digit formatting
    const std::vector<Vec2> v = {{0.1, 0.2}, {1.0 + 1.0 / 3.0, -0.7 + 1.0},
                                 {1.23456789012345678, 1.3 + 1e-9}, {0.0625, 0.9}};
    const std::vector<std::array<int, 3>> t = {{0, 1, 2}, {0, 2, 3}};
    Triangulation mesh = Triangulation::build_initial(v, t);

    std::ostringstream out;
    mesh.save(out);
    std::istringstream in(out.str());
    const Triangulation back = Triangulation::load(in);

    REQUIRE(back.n_vertices() == mesh.n_vertices());
    REQUIRE(back.n_triangles() == mesh.n_triangles());
    for (int i = 0; i < mesh.n_vertices(); ++i) {
        REQUIRE(back.vertex(i).x == mesh.vertex(i).x);
        REQUIRE(back.vertex(i).y == mesh.vertex(i).y);
    }
    for (int i = 0; i < mesh.n_triangles(); ++i) {
        REQUIRE(back.tri(i).v == mesh.tri(i).v);
        REQUIRE(back.tri(i).ref_edge == mesh.tri(i).ref_edge);
    }

    // a second save produces identical bytes
    std::ostringstream again;
    back.save(again);
    REQUIRE(again.str() == out.str());
}

TEST_CASE("mesh load rejects malformed input", "[io]")
{
    std::istringstream bad_header("points 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 0\n");
    REQUIRE_THROWS_AS(Triangulation::load(bad_header), std::invalid_argument);

    std::istringstream truncated("vertices 3\n0 0\n1 0\n");
    REQUIRE_THROWS_AS(Triangulation::load(truncated), std::invalid_argument);

    std::istringstream bad_ref("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 5\n");
    REQUIRE_THROWS_AS(Triangulation::load(bad_ref), std::invalid_argument);
}

TEST_CASE("csv output is deterministic", "[io]")
{
    const ExperimentSpec spec = make_experiment("square-smooth");
    const auto rows1 = run_uniform(spec, 0, 300, 10);
    const auto rows2 = run_uniform(spec, 0, 300, 10);

    std::ostringstream a, b;
    write_csv(a, rows1);
    write_csv(b, rows2);
    REQUIRE(a.str() == b.str());
    REQUIRE(a.str().rfind("experiment,mode,k,level,ndof,card_T,error,lambda,mu,branch\n",
                          0) == 0);
    // LF endings only
    REQUIRE(a.str().find('\r') == std::string::npos);
}

TEST_CASE("adaptive run fills the branch column with valid values", "[io]")
{
    ExperimentSpec spec = make_experiment("lshape-const");
    AfemConfig cfg;
    cfg.k = 0;
    cfg.max_ndof = 500;
    cfg.max_levels = 60;
    const auto rows = run_adaptive(spec, cfg);
    REQUIRE(rows.size() > 2);
    long prev = 0;
    for (const ResultRow& r : rows) {
        REQUIRE((r.branch == "doerfler" || r.branch == "data"));
        REQUIRE(r.ndof > prev);
        prev = r.ndof;
        REQUIRE(r.mode == "adaptive");
        REQUIRE_FALSE(r.error.has_value());   // no exact p for this experiment
    }
}

TEST_CASE("rate fitting recovers an exact power law", "[io]")
{
    std::vector<ResultRow> rows;
    for (int i = 1; i <= 6; ++i) {
        ResultRow r;
        r.ndof = 100L << (2 * i);
        r.lambda = 3.0 * std::pow(double(r.ndof), -0.5);
        rows.push_back(r);
    }
    REQUIRE(fit_rate(rows, 5, true) == Approx(-0.5).margin(1e-12));
}
