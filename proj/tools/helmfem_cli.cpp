// Command-line driver: convergence experiments (uniform and adaptive),
// structural verification checks, and mesh-file inspection.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "helmfem/adapt.hpp"
#include "helmfem/estimator.hpp"
#include "helmfem/experiments.hpp"
#include "helmfem/verify.hpp"

using namespace helmfem;

namespace {

int run_command(const std::string& experiment, const std::string& mode, int k,
                double theta, double kappa, double rho, long max_ndof,
                int max_levels, int quad_degree, const std::string& out_path)
{
    const ExperimentSpec spec = make_experiment(experiment);
    std::vector<ResultRow> rows;
    if (mode == "uniform") {
        rows = run_uniform(spec, k, max_ndof, max_levels, quad_degree);
    } else if (mode == "adaptive") {
        AfemConfig cfg;
        cfg.theta_A = theta;
        cfg.kappa = kappa;
        cfg.rho_B = rho;
        cfg.k = k;
        cfg.max_ndof = max_ndof;
        cfg.max_levels = max_levels;
        cfg.quad_degree = quad_degree;
        rows = run_adaptive(spec, cfg);
    } else {
        std::cerr << "unknown mode: " << mode << " (use uniform or adaptive)\n";
        return 2;
    }

    write_csv(out_path, rows);
    for (const ResultRow& r : rows)
        std::printf("level %3d  ndof %8ld  card_T %8ld  lambda %.6e  mu %.6e%s%s\n",
                    r.level, r.ndof, r.card_T, r.lambda, r.mu,
                    r.error ? "  error " : "",
                    r.error ? std::to_string(*r.error).c_str() : "");

    const bool has_error = !rows.empty() && rows.back().error.has_value();
    const int window = (mode == "uniform") ? 3 : 5;
    const double rate = fit_rate(rows, window, true);
    std::printf("least-squares rate of %s vs ndof over the last %d levels: %.4f\n",
                has_error ? "error" : "lambda", window, rate);
    return 0;
}

struct CheckRunner {
    int failures = 0;
    int total = 0;

    void check(const std::string& name, bool ok, double value)
    {
        ++total;
        if (!ok) ++failures;
        std::printf("%-58s %s  (%.3e)\n", name.c_str(), ok ? "ok" : "FAILED", value);
    }
};

int verify_command(bool fault_inject)
{
    CheckRunner r;
    const VectorField linear_phi([](const Vec2& p) { return 0.5 * p; }, 1);

    const Triangulation t0 = make_lshape_mesh();
    const Triangulation meshes[] = {t0, t0.red_refine(),
                                    t0.bisect({0, 2}).bisect({1, 3, 5})};
    const char* mesh_names[] = {"initial L-shape", "red-refined L-shape",
                                "graded L-shape"};

    for (int i = 0; i < 3; ++i) {
        const double dev = check_cr_equivalence(meshes[i], linear_phi);
        r.check(std::string("cr equivalence, ") + mesh_names[i], dev <= 1e-9, dev);
    }

    for (int i = 0; i < 3; ++i)
        for (int k = 0; k <= 2; ++k) {
            double worst = 0.0;
            const YhSpace yh(meshes[i], k);
            for (unsigned seed = 0; seed < 5; ++seed)
                worst = std::max(worst, check_projection_property(
                    meshes[i], k, random_conforming_field(yh, 500u + seed)));
            r.check(std::string("projection property, ") + mesh_names[i] +
                        ", k=" + std::to_string(k),
                    worst <= 1e-12, worst);
        }

    {
        const Triangulation fine = t0.bisect({0, 1, 2, 3, 4, 5}).bisect({0, 1});
        double worst = 0.0;
        for (int k = 0; k <= 2; ++k) {
            const YhSpace yf(fine, k);
            worst = std::max(worst, check_projection_property_two_level(
                t0, fine, k, random_conforming_field(yf, 900u + k)));
        }
        r.check("two-level projection property", worst <= 1e-12, worst);
    }

    for (int i = 0; i < 3; ++i) {
        const DecompositionReport rep = check_triangle_decomposition(meshes[i]);
        r.check(std::string("triangle Helmholtz decomposition, ") + mesh_names[i],
                rep.ok(), rep.max_gram);
    }

    {
        const SquarePartition parts[] = {SquarePartition::build(2, 2, {0, 0}, 1, 1),
                                         SquarePartition::build(1, 2, {0, 0}, 1, 2),
                                         SquarePartition::build(4, 4, {-1, -1}, 2, 2)};
        const char* names[] = {"2x2", "1x2", "4x4"};
        for (int i = 0; i < 3; ++i) {
            const DecompositionReport rep = check_square_decomposition(parts[i]);
            r.check(std::string("square Helmholtz decomposition, ") + names[i],
                    rep.ok(), rep.max_gram);
        }
    }

    if (fault_inject) {
        // sanity of the checks themselves: a perturbed solution must fail
        const Triangulation mesh = t0;
        const MixedSolution sol = solve_mixed(mesh, 0, linear_phi);
        GaussLegendre gl(8);
        std::vector<double> f(mesh.n_triangles());
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const std::vector<Vec2> tri{mesh.corner(t, 0), mesh.corner(t, 1),
                                        mesh.corner(t, 2)};
            f[t] = flux_mean(linear_phi, tri, gl);
        }
        const CrSolution cr = cr_solve(mesh, f);
        Eigen::VectorXd perturbed = sol.p;
        perturbed[0] += 1e-3;
        double dev = 0.0;
        for (int t = 0; t < mesh.n_triangles(); ++t)
            dev = std::max(dev, (sol.xh.evaluate(perturbed, t, mesh.centroid(t)) -
                                 cr.gradient[t]).norm());
        r.check("fault injection detected by cr equivalence", dev > 1e-9, dev);
    }

    std::printf("%d/%d checks passed\n", r.total - r.failures, r.total);
    return r.failures == 0 ? 0 : 1;
}

int mesh_info_command(const std::string& path)
{
    const Triangulation mesh = Triangulation::load(path);
    const CountsReport rep = mesh.validate();
    std::printf("triangles        %ld\n", rep.n_triangles);
    std::printf("vertices         %ld\n", rep.n_vertices);
    std::printf("edges            %ld\n", rep.n_edges);
    std::printf("interior edges   %ld\n", rep.n_interior_edges);
    std::printf("min angle (deg)  %.4f\n", rep.min_angle * 180.0 / M_PI);
    std::printf("invariants       %s\n", rep.ok() ? "ok" : rep.violation.c_str());
    return rep.ok() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mixed FEM for the 2D Poisson problem via the Helmholtz "
                 "decomposition: experiments, verification, mesh tools"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a convergence experiment");
    std::string experiment, mode = "uniform", out_path;
    int k = 0, max_levels = 40, quad_degree = 8;
    double theta = 0.1, kappa = 0.5, rho = 0.75;
    long max_ndof = 200000;
    run->add_option("--experiment", experiment, "experiment id")
        ->required()
        ->check(CLI::IsMember(experiment_ids()));
    run->add_option("--mode", mode, "uniform | adaptive")
        ->check(CLI::IsMember({"uniform", "adaptive"}));
    run->add_option("--k", k, "polynomial degree (0, 1, 2)")
        ->required()
        ->check(CLI::Range(0, 2));
    run->add_option("--theta", theta, "Doerfler bulk parameter");
    run->add_option("--kappa", kappa, "separate-marking guard");
    run->add_option("--rho", rho, "data reduction factor");
    run->add_option("--max-ndof", max_ndof, "stop once ndof reaches this");
    run->add_option("--max-levels", max_levels, "maximum number of levels");
    run->add_option("--quad-degree", quad_degree, "quadrature exactness degree");
    run->add_option("--out", out_path, "output CSV path")->required();

    // verify
    auto* verify = app.add_subcommand("verify", "run the structural checks");
    bool fault_inject = false;
    verify->add_flag("--fault-inject", fault_inject,
                     "also perturb a solution and require the checks to notice");

    // mesh info
    auto* mesh_cmd = app.add_subcommand("mesh", "mesh file tools");
    auto* info = mesh_cmd->add_subcommand("info", "validate and summarize a mesh file");
    std::string mesh_path;
    info->add_option("file", mesh_path, "mesh file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return run_command(experiment, mode, k, theta, kappa, rho, max_ndof,
                               max_levels, quad_degree, out_path);
        if (verify->parsed()) return verify_command(fault_inject);
        if (mesh_cmd->parsed() && info->parsed()) return mesh_info_command(mesh_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 2;
}
