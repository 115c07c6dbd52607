#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "helmfem/adapt.hpp"
#include "helmfem/estimator.hpp"
#include "helmfem/fields.hpp"
#include "helmfem/system.hpp"
#include "helmfem/triangulation.hpp"

namespace helmfem {

// ---------------------------------------------------------------------------
// Reference domains.
// ---------------------------------------------------------------------------

/// L-shaped domain (-1,1)^2 minus the closed quadrant [0,1] x [-1,0], with
/// the standard six-triangle initial mesh.  Refinement edges are the long
/// diagonals (longest-edge rule).
inline Triangulation make_lshape_mesh()
{
    const std::vector<Vec2> v = {{0, 0}, {1, 0}, {1, 1}, {0, 1},
                                 {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}};
    const std::vector<std::array<int, 3>> t = {
        {0, 1, 2}, {0, 2, 3}, {0, 3, 5}, {3, 4, 5}, {0, 5, 6}, {0, 6, 7}};
    return Triangulation::build_initial(v, t);
}

/// Unit square split along the diagonal into two triangles.
inline Triangulation make_unit_square_mesh()
{
    const std::vector<Vec2> v = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const std::vector<std::array<int, 3>> t = {{0, 1, 2}, {0, 2, 3}};
    return Triangulation::build_initial(v, t);
}

// ---------------------------------------------------------------------------
// Analytic fields.  The corner singularity r^(2/3) sin(2 phi / 3) uses the
// polar angle measured from the positive x-axis, so it vanishes on both
// legs of the reentrant corner of the L-shaped domain.
// ---------------------------------------------------------------------------

inline double singular_alpha_value(const Vec2& p)
{
    const double r = p.norm();
    if (r == 0.0) return 0.0;
    return std::pow(r, 2.0 / 3.0) * std::sin(2.0 * polar_angle(p) / 3.0);
}

/// Gradient of r^(2/3) sin(2 phi / 3); unbounded at the origin.
inline Vec2 singular_gradient(const Vec2& p)
{
    const double r = p.norm();
    const double t = polar_angle(p);
    const double c = (2.0 / 3.0) * std::pow(r, -1.0 / 3.0);
    const Vec2 er{std::cos(t), std::sin(t)};
    const Vec2 et{-std::sin(t), std::cos(t)};
    return c * (std::sin(2.0 * t / 3.0) * er + std::cos(2.0 * t / 3.0) * et);
}

/// Curl of the same function: (d/dy, -d/dx).
inline Vec2 singular_curl(const Vec2& p)
{
    const Vec2 g = singular_gradient(p);
    return {g.y, -g.x};
}

/// Radial cutoff: 0 inside radius 1/2, 1 outside radius 1, a quartic
/// C^1 blend in between.
inline double cutoff_value(double r)
{
    if (r <= 0.5) return 0.0;
    if (r >= 1.0) return 1.0;
    return ((16.0 * r - 64.0) * r + 88.0) * r * r - 48.0 * r + 9.0;
}

inline double cutoff_derivative(double r)
{
    if (r <= 0.5 || r >= 1.0) return 0.0;
    return ((64.0 * r - 192.0) * r + 176.0) * r - 48.0;
}

/// Gradient of u_D = cutoff(|x|) * r^(2/3) sin(2 phi / 3); smooth (H^2)
/// because the cutoff removes the corner singularity.
inline Vec2 lifted_dirichlet_gradient(const Vec2& p)
{
    const double r = p.norm();
    if (r <= 0.5) return {0.0, 0.0};
    const double g = cutoff_value(r), dg = cutoff_derivative(r);
    Vec2 grad = g * singular_gradient(p);
    if (dg != 0.0) {
        const Vec2 er = p / r;
        grad += dg * singular_alpha_value(p) * er;
    }
    return grad;
}

inline Vec2 smooth_sine_gradient(const Vec2& p)
{
    return {M_PI * std::cos(M_PI * p.x) * std::sin(M_PI * p.y),
            M_PI * std::sin(M_PI * p.x) * std::cos(M_PI * p.y)};
}

// ---------------------------------------------------------------------------
// Experiment registry.
// ---------------------------------------------------------------------------

struct ExperimentSpec {
    std::string id;
    Triangulation initial_mesh;
    ProblemData problem;
};

/// Known experiments:
///   lshape-dirichlet  harmonic singular solution, phi = 0, lifted
///                     inhomogeneous Dirichlet data
///   lshape-const      f = -1 via phi = (x, y)/2, homogeneous data
///   singular-alpha    smooth p, singular stream part via
///                     phi = grad(u) + Curl(alpha)
///   square-smooth     smooth sanity problem on the unit square
inline ExperimentSpec make_experiment(const std::string& id)
{
    if (id == "lshape-dirichlet") {
        ProblemData prob;
        prob.phi = zero_vector_field();
        prob.grad_uD = VectorField(lifted_dirichlet_gradient);
        prob.exact_p = VectorField(singular_gradient);
        // phi = 0 forces p = -Curl(alpha), so Curl(alpha) = -grad(u).
        prob.exact_curl_alpha =
            VectorField([](const Vec2& p) { return -1.0 * singular_gradient(p); });
        return {id, make_lshape_mesh(), std::move(prob)};
    }
    if (id == "lshape-const") {
        ProblemData prob;
        prob.phi = VectorField([](const Vec2& p) { return 0.5 * p; }, 1);
        return {id, make_lshape_mesh(), std::move(prob)};
    }
    if (id == "singular-alpha") {
        ProblemData prob;
        prob.phi = VectorField([](const Vec2& p) {
            return smooth_sine_gradient(p) + singular_curl(p);
        });
        prob.exact_p = VectorField(smooth_sine_gradient);
        prob.exact_curl_alpha = VectorField(singular_curl);
        return {id, make_lshape_mesh(), std::move(prob)};
    }
    if (id == "square-smooth") {
        ProblemData prob;
        prob.phi = VectorField(smooth_sine_gradient);
        prob.exact_p = VectorField(smooth_sine_gradient);
        prob.exact_curl_alpha = zero_vector_field();
        return {id, make_unit_square_mesh(), std::move(prob)};
    }
    throw std::invalid_argument("unknown experiment id: " + id);
}

inline std::vector<std::string> experiment_ids()
{
    return {"lshape-dirichlet", "lshape-const", "singular-alpha", "square-smooth"};
}

// ---------------------------------------------------------------------------
// Convergence histories.
// ---------------------------------------------------------------------------

struct ResultRow {
    std::string experiment;
    std::string mode;       // uniform | adaptive
    int k = 0;
    int level = 0;
    long ndof = 0;
    long card_T = 0;
    std::optional<double> error;
    double lambda = 0.0;
    double mu = 0.0;
    std::string branch;     // doerfler | data | uniform
};

/// History on uniformly red-refined meshes.
inline std::vector<ResultRow> run_uniform(const ExperimentSpec& spec, int k,
                                          long max_ndof, int max_levels,
                                          int quad_degree = 8)
{
    std::vector<ResultRow> rows;
    Triangulation mesh = spec.initial_mesh;
    SolveOptions opts;
    opts.quad_degree = quad_degree;
    for (int level = 0; level <= max_levels; ++level) {
        MixedSolution sol = solve_mixed(mesh, k, spec.problem.phi,
                                        spec.problem.grad_uD, opts);
        EstimatorReport est = estimate(sol, spec.problem, quad_degree);
        ResultRow row;
        row.experiment = spec.id;
        row.mode = "uniform";
        row.k = k;
        row.level = level;
        row.ndof = sol.ndof;
        row.card_T = mesh.n_triangles();
        row.lambda = est.lambda();
        row.mu = est.mu();
        if (spec.problem.exact_p)
            row.error = exact_error(sol, *spec.problem.exact_p, quad_degree);
        row.branch = "uniform";
        rows.push_back(row);
        if (sol.ndof >= max_ndof || level == max_levels) break;
        mesh = mesh.red_refine();
    }
    return rows;
}

inline std::vector<ResultRow> run_adaptive(const ExperimentSpec& spec,
                                           const AfemConfig& cfg)
{
    std::vector<ResultRow> rows;
    for (const AfemRecord& rec : afem_loop(spec.initial_mesh, spec.problem, cfg)) {
        ResultRow row;
        row.experiment = spec.id;
        row.mode = "adaptive";
        row.k = cfg.k;
        row.level = rec.level;
        row.ndof = rec.ndof;
        row.card_T = rec.card_T;
        row.error = rec.error;
        row.lambda = rec.lambda;
        row.mu = rec.mu;
        row.branch = to_string(rec.branch);
        rows.push_back(row);
    }
    return rows;
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows)
{
    os << "experiment,mode,k,level,ndof,card_T,error,lambda,mu,branch\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };
    for (const ResultRow& r : rows) {
        os << r.experiment << ',' << r.mode << ',' << r.k << ',' << r.level << ','
           << r.ndof << ',' << r.card_T << ','
           << (r.error ? num(*r.error) : std::string()) << ','
           << num(r.lambda) << ',' << num(r.mu) << ',' << r.branch << '\n';
    }
}

inline void write_csv(const std::string& path, const std::vector<ResultRow>& rows)
{
    std::ofstream os(path, std::ios::binary);   // LF line endings everywhere
    detail::require(bool(os), "write_csv: cannot open " + path);
    write_csv(os, rows);
}

/// Least-squares slope of log10(value) against log10(ndof) over the last
/// `n_last` rows; `value` is the error when available, else lambda.
inline double fit_rate(const std::vector<ResultRow>& rows, int n_last,
                       bool prefer_error = true)
{
    std::vector<std::pair<double, double>> pts;
    for (const ResultRow& r : rows) {
        const double v = (prefer_error && r.error) ? *r.error : r.lambda;
        if (v > 0.0 && r.ndof > 0) pts.emplace_back(std::log10(double(r.ndof)),
                                                    std::log10(v));
    }
    const int n = static_cast<int>(pts.size());
    const int start = std::max(0, n - n_last);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int cnt = n - start;
    detail::require(cnt >= 2, "fit_rate: not enough data points");
    for (int i = start; i < n; ++i) {
        sx += pts[i].first;
        sy += pts[i].second;
        sxx += pts[i].first * pts[i].first;
        sxy += pts[i].first * pts[i].second;
    }
    return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

} // namespace helmfem
