#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <optional>
#include <vector>

#include "helmfem/fields.hpp"
#include "helmfem/spaces.hpp"

namespace helmfem {

struct SolveOptions {
    int quad_degree = 8;    // raised to at least 2k+2 internally
    int pin_node = 0;       // node fixed to remove the constant mode
    bool use_cg = false;    // diagonally preconditioned CG instead of LDLT
    double cg_tol = 1e-12;
};

/// Stiffness matrix of the reduced problem: (Curl b_i, Curl b_j) over the
/// Y_h Lagrange basis.  In 2D this equals the usual gradient-gradient
/// stiffness matrix, since Curl is a pointwise rotation of the gradient.
inline Eigen::SparseMatrix<double> assemble_curl_curl(const YhSpace& yh)
{
    const Triangulation& mesh = yh.mesh();
    const int nloc = yh.local_size();
    TriangleQuadrature quad(std::max(2 * yh.degree(), 1));
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh.n_triangles()) * nloc * nloc);
    std::vector<double> val(nloc);
    std::vector<std::array<double, 3>> dl(nloc);
    std::vector<Vec2> grad(nloc);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto g = yh.global_nodes(t);
        const auto gl = yh.barycentric_gradients(t);
        const double jac = 2.0 * mesh.area(t);
        Eigen::MatrixXd local = Eigen::MatrixXd::Zero(nloc, nloc);
        for (const auto& q : quad.points()) {
            yh.eval_local({1.0 - q.x - q.y, q.x, q.y}, val.data(), dl.data());
            for (int i = 0; i < nloc; ++i)
                grad[i] = dl[i][0] * gl[0] + dl[i][1] * gl[1] + dl[i][2] * gl[2];
            for (int i = 0; i < nloc; ++i)
                for (int j = 0; j <= i; ++j)
                    local(i, j) += q.w * jac * grad[i].dot(grad[j]);
        }
        for (int i = 0; i < nloc; ++i)
            for (int j = 0; j < nloc; ++j)
                trip.emplace_back(g[i], g[j], local(std::max(i, j), std::min(i, j)));
    }
    Eigen::SparseMatrix<double> K(yh.n_nodes(), yh.n_nodes());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

/// Load vector (g, Curl b_i) for an analytic datum g.
inline Eigen::VectorXd assemble_rhs(const VectorField& g, const YhSpace& yh,
                                    int quad_degree)
{
    const Triangulation& mesh = yh.mesh();
    const int nloc = yh.local_size();
    const int qd = g.degree >= 0 ? std::max(g.degree + yh.degree(), 1)
                                 : std::max(quad_degree, 2 * yh.degree());
    TriangleQuadrature quad(qd);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(yh.n_nodes());
    std::vector<double> val(nloc);
    std::vector<std::array<double, 3>> dl(nloc);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto gn = yh.global_nodes(t);
        const auto gl = yh.barycentric_gradients(t);
        const Vec2 a = mesh.corner(t, 0), bb = mesh.corner(t, 1), cc = mesh.corner(t, 2);
        const double jac = doubled_signed_area(a, bb, cc);
        for (const auto& q : quad.points()) {
            const Vec2 p = a + q.x * (bb - a) + q.y * (cc - a);
            const Vec2 gv = g(p);
            yh.eval_local({1.0 - q.x - q.y, q.x, q.y}, val.data(), dl.data());
            for (int i = 0; i < nloc; ++i) {
                const Vec2 gr = dl[i][0] * gl[0] + dl[i][1] * gl[1] + dl[i][2] * gl[2];
                // Curl b_i = (d b_i/dy, -d b_i/dx)
                b[gn[i]] += q.w * jac * (gv.x * gr.y - gv.y * gr.x);
            }
        }
    }
    return b;
}

/// Discrete solution of the mixed problem on one mesh.  The spaces are kept
/// alongside the coefficient vectors; they reference the mesh passed to
/// solve_mixed, which must outlive this object.
struct MixedSolution {
    XhSpace xh;
    YhSpace yh;
    Eigen::VectorXd alpha;    // Y_h coefficients, mean normalized
    Eigen::VectorXd p;        // X_h coefficients
    long ndof = 0;
    double solver_residual = 0.0;
};

/// Solves the mixed discretization through its reduced form: the Curl-Curl
/// system for alpha_h with datum phi - grad(u_D), followed by
/// p_h = Pi_k phi - Curl alpha_h.  One node is pinned to fix the constant
/// mode; alpha_h is mean normalized afterwards.
inline MixedSolution solve_mixed(const Triangulation& mesh, int k,
                                 const VectorField& phi,
                                 const std::optional<VectorField>& grad_uD = {},
                                 const SolveOptions& opts = {})
{
    XhSpace xh(mesh, k);
    YhSpace yh(mesh, k);
    const int qd = std::max(opts.quad_degree, 2 * k + 2);

    VectorField datum = phi;
    if (grad_uD) {
        const VectorField lift = *grad_uD;
        const VectorField base = phi;
        int deg = (base.degree >= 0 && lift.degree >= 0)
                      ? std::max(base.degree, lift.degree) : -1;
        datum = VectorField(
            [base, lift](const Vec2& p) { return base(p) - lift(p); }, deg);
    }

    Eigen::SparseMatrix<double> K = assemble_curl_curl(yh);
    Eigen::VectorXd b = assemble_rhs(datum, yh, qd);

    const int n = yh.n_nodes();
    const int pin = opts.pin_node;
    detail::require(pin >= 0 && pin < n, "solve_mixed: pin node out of range");
    auto reduced = [&](int i) { return i < pin ? i : i - 1; };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(K.nonZeros());
    for (int col = 0; col < K.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, col); it; ++it)
            if (it.row() != pin && it.col() != pin)
                trip.emplace_back(reduced(it.row()), reduced(it.col()), it.value());
    Eigen::SparseMatrix<double> A(n - 1, n - 1);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd rhs(n - 1);
    for (int i = 0; i < n; ++i)
        if (i != pin) rhs[reduced(i)] = b[i];

    Eigen::VectorXd x;
    if (opts.use_cg) {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                                 Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(opts.cg_tol);
        cg.setMaxIterations(10L * (n - 1));
        cg.compute(A);
        x = cg.solve(rhs);
        if (cg.info() != Eigen::Success)
            throw std::runtime_error("solve_mixed: CG did not converge");
    } else {
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("solve_mixed: factorization failed (singular system)");
        x = ldlt.solve(rhs);
    }
    const double bn = rhs.norm();
    const double res = bn > 0.0 ? (A * x - rhs).norm() / bn : (A * x - rhs).norm();

    MixedSolution sol{std::move(xh), std::move(yh), Eigen::VectorXd::Zero(n),
                      Eigen::VectorXd(), n - 1, res};
    for (int i = 0; i < n; ++i)
        if (i != pin) sol.alpha[i] = x[reduced(i)];
    sol.yh.normalize_mean(sol.alpha);
    sol.p = sol.xh.project(phi, qd) - sol.yh.curl_to_x(sol.alpha, sol.xh);
    return sol;
}

} // namespace helmfem
