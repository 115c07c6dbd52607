#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <random>
#include <vector>

#include "helmfem/quadrature.hpp"
#include "helmfem/spaces.hpp"
#include "helmfem/square_partition.hpp"
#include "helmfem/system.hpp"
#include "helmfem/triangulation.hpp"

namespace helmfem {

// ---------------------------------------------------------------------------
// Crouzeix-Raviart oracle.  Deliberately assembled through its own basis
// table (psi_j = 1 - 2 lambda_j per element) so that it shares no code with
// the mixed solver beyond the mesh.
// ---------------------------------------------------------------------------

struct CrSolution {
    Eigen::VectorXd coeffs;      // one midpoint value per interior edge
    std::vector<Vec2> gradient;  // piecewise constant gradient, per element
    int dim = 0;
};

namespace cr_detail {

/// Constant gradients of the three P1 barycentric coordinates.
inline std::array<Vec2, 3> lambda_gradients(const Triangulation& mesh, int t)
{
    const Vec2 p0 = mesh.corner(t, 0), p1 = mesh.corner(t, 1), p2 = mesh.corner(t, 2);
    const double inv = 1.0 / doubled_signed_area(p0, p1, p2);
    return {(p2 - p1).rot90() * inv, (p0 - p2).rot90() * inv, (p1 - p0).rot90() * inv};
}

} // namespace cr_detail

/// Nonconforming P1 solve: (grad_NC u, grad_NC v) = (f, v) over functions
/// that are continuous at interior edge midpoints and vanish at boundary
/// edge midpoints.  `f` is piecewise constant (one value per element).
inline CrSolution cr_solve(const Triangulation& mesh, const std::vector<double>& f)
{
    detail::require(static_cast<int>(f.size()) == mesh.n_triangles(),
                    "cr_solve: f must have one value per element");

    std::vector<int> dof(mesh.n_edges(), -1);
    int ndof = 0;
    for (int e = 0; e < mesh.n_edges(); ++e)
        if (!mesh.edge(e).boundary) dof[e] = ndof++;

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndof);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto gl = cr_detail::lambda_gradients(mesh, t);
        const double area = mesh.area(t);
        for (int i = 0; i < 3; ++i) {
            const int di = dof[mesh.tri_edge(t, i)];
            if (di < 0) continue;
            rhs[di] += f[t] * area / 3.0;   // integral of psi_i = area / 3
            for (int j = 0; j < 3; ++j) {
                const int dj = dof[mesh.tri_edge(t, j)];
                if (dj < 0) continue;
                trip.emplace_back(di, dj, 4.0 * area * gl[i].dot(gl[j]));
            }
        }
    }
    Eigen::SparseMatrix<double> K(ndof, ndof);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("cr_solve: factorization failed");
    CrSolution sol;
    sol.dim = ndof;
    sol.coeffs = ldlt.solve(rhs);
    sol.gradient.assign(mesh.n_triangles(), Vec2{0.0, 0.0});
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto gl = cr_detail::lambda_gradients(mesh, t);
        Vec2 g{0.0, 0.0};
        for (int i = 0; i < 3; ++i) {
            const int di = dof[mesh.tri_edge(t, i)];
            if (di >= 0) g += sol.coeffs[di] * (-2.0) * gl[i];
        }
        sol.gradient[t] = g;
    }
    return sol;
}

/// Mean of -div(phi) over a polygon boundary, from the divergence theorem.
inline double flux_mean(const VectorField& phi, const std::vector<Vec2>& poly,
                        const GaussLegendre& gl)
{
    double flux = 0.0, area2 = 0.0;
    const int n = static_cast<int>(poly.size());
    for (int i = 0; i < n; ++i) {
        const Vec2 a = poly[i], b = poly[(i + 1) % n];
        const Vec2 d = b - a;
        const Vec2 nu{d.y, -d.x};   // outward for CCW polygons, length |d|
        for (std::size_t q = 0; q < gl.points.size(); ++q)
            flux += gl.weights[q] * phi(a + gl.points[q] * d).dot(nu);
        area2 += a.cross(b);
    }
    return -flux / (0.5 * area2);
}

/// For k = 0 and a datum with elementwise constant divergence, p_h equals
/// the nonconforming gradient of the Crouzeix-Raviart solution.  Returns
/// the maximum elementwise deviation between the two independently
/// computed fields.
inline double check_cr_equivalence(const Triangulation& mesh, const VectorField& phi,
                                   int quad_degree = 8)
{
    GaussLegendre gl(8);
    std::vector<double> f(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const std::vector<Vec2> tri{mesh.corner(t, 0), mesh.corner(t, 1),
                                    mesh.corner(t, 2)};
        f[t] = flux_mean(phi, tri, gl);
        // The divergence must be constant per element: compare the flux
        // means over the four red children.
        const Vec2 m01 = midpoint(tri[0], tri[1]), m12 = midpoint(tri[1], tri[2]),
                   m20 = midpoint(tri[2], tri[0]);
        const std::vector<Vec2> sub[4] = {{tri[0], m01, m20},
                                          {tri[1], m12, m01},
                                          {tri[2], m20, m12},
                                          {m01, m12, m20}};
        const double scale = std::max(1.0, std::abs(f[t]));
        for (const auto& child : sub)
            detail::require(std::abs(flux_mean(phi, child, gl) - f[t]) <= 1e-8 * scale,
                            "check_cr_equivalence: -div(phi) is not piecewise constant");
    }

    const CrSolution cr = cr_solve(mesh, f);
    SolveOptions opts;
    opts.quad_degree = quad_degree;
    const MixedSolution mixed = solve_mixed(mesh, 0, phi, {}, opts);
    double dev = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Vec2 ph = mixed.xh.evaluate(mixed.p, t, mesh.centroid(t));
        dev = std::max(dev, (ph - cr.gradient[t]).norm());
    }
    return dev;
}

// ---------------------------------------------------------------------------
// Projection property.
// ---------------------------------------------------------------------------

/// Random coefficients of a conforming P_{k+1} function with zero trace.
inline Eigen::VectorXd random_conforming_field(const YhSpace& yh, unsigned seed)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXd v(yh.n_nodes());
    for (int i = 0; i < yh.n_nodes(); ++i) v[i] = uni(rng);
    for (int i : yh.boundary_nodes()) v[i] = 0.0;
    return v;
}

/// Residual of the projection property: the elementwise L2 projection of
/// grad(v), v in P_{k+1} and H^1_0, must be orthogonal to Curl Y_h.
/// Returns max_j |(Pi_k grad v, Curl b_j)| / (||grad v|| ||Curl b_j||).
inline double check_projection_property(const Triangulation& mesh, int k,
                                        const Eigen::VectorXd& v)
{
    XhSpace xh(mesh, k);
    YhSpace yh(mesh, k);
    detail::require(v.size() == yh.n_nodes(),
                    "check_projection_property: coefficient size mismatch");

    // w = Pi_k grad(v), elementwise exact.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(xh.dim());
    {
        TriangleQuadrature quad(std::max(2 * k, 1));
        const int m = xh.scalar_size();
        std::vector<double> chi(m);
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const Vec2 a = mesh.corner(t, 0), b = mesh.corner(t, 1),
                       c = mesh.corner(t, 2);
            const double jac = doubled_signed_area(a, b, c);
            for (const auto& q : quad.points()) {
                const Vec2 p = a + q.x * (b - a) + q.y * (c - a);
                const Vec2 g = yh.evaluate_gradient(v, t, {1.0 - q.x - q.y, q.x, q.y});
                xh.basis(t).values(p, chi.data());
                for (int i = 0; i < m; ++i) {
                    w[xh.offset(t) + 2 * i] += q.w * jac * g.x * chi[i];
                    w[xh.offset(t) + 2 * i + 1] += q.w * jac * g.y * chi[i];
                }
            }
        }
    }

    const Eigen::SparseMatrix<double> K = assemble_curl_curl(yh);
    const double grad_norm = std::sqrt(std::max(0.0, double(v.transpose() * (K * v))));
    if (grad_norm == 0.0) return 0.0;

    // r_j = (w, Curl b_j)
    Eigen::VectorXd r = Eigen::VectorXd::Zero(yh.n_nodes());
    {
        TriangleQuadrature quad(std::max(2 * k, 1));
        const int nloc = yh.local_size();
        std::vector<double> val(nloc);
        std::vector<std::array<double, 3>> dl(nloc);
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const auto gn = yh.global_nodes(t);
            const auto glb = yh.barycentric_gradients(t);
            const Vec2 a = mesh.corner(t, 0), b = mesh.corner(t, 1),
                       c = mesh.corner(t, 2);
            const double jac = doubled_signed_area(a, b, c);
            for (const auto& q : quad.points()) {
                const Vec2 p = a + q.x * (b - a) + q.y * (c - a);
                const Vec2 wv = xh.evaluate(w, t, p);
                yh.eval_local({1.0 - q.x - q.y, q.x, q.y}, val.data(), dl.data());
                for (int i = 0; i < nloc; ++i) {
                    const Vec2 gr = dl[i][0] * glb[0] + dl[i][1] * glb[1] + dl[i][2] * glb[2];
                    r[gn[i]] += q.w * jac * (wv.x * gr.y - wv.y * gr.x);
                }
            }
        }
    }

    double res = 0.0;
    for (int j = 0; j < yh.n_nodes(); ++j) {
        const double curl_norm = std::sqrt(K.coeff(j, j));
        if (curl_norm > 0.0)
            res = std::max(res, std::abs(r[j]) / (grad_norm * curl_norm));
    }
    return res;
}

/// Orthogonality residual of a given X_h coefficient vector against
/// Curl Y_h on the same mesh, normalized by the norms of both factors.
inline double orthogonality_residual(const XhSpace& xh, const Eigen::VectorXd& q)
{
    const Triangulation& mesh = xh.mesh();
    const int k = xh.degree();
    YhSpace yh(mesh, k);
    const double q_norm = std::sqrt(xh.norm2(q));
    if (q_norm == 0.0) return 0.0;
    const Eigen::SparseMatrix<double> K = assemble_curl_curl(yh);

    Eigen::VectorXd r = Eigen::VectorXd::Zero(yh.n_nodes());
    TriangleQuadrature quad(std::max(2 * k, 1));
    const int nloc = yh.local_size();
    std::vector<double> val(nloc);
    std::vector<std::array<double, 3>> dl(nloc);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto gn = yh.global_nodes(t);
        const auto glb = yh.barycentric_gradients(t);
        const double jac = 2.0 * mesh.area(t);
        for (const auto& qp : quad.points()) {
            const Vec2 p = mesh.map_ref(t, qp.x, qp.y);
            const Vec2 wv = xh.evaluate(q, t, p);
            yh.eval_local({1.0 - qp.x - qp.y, qp.x, qp.y}, val.data(), dl.data());
            for (int i = 0; i < nloc; ++i) {
                const Vec2 gr = dl[i][0] * glb[0] + dl[i][1] * glb[1] + dl[i][2] * glb[2];
                r[gn[i]] += qp.w * jac * (wv.x * gr.y - wv.y * gr.x);
            }
        }
    }
    double res = 0.0;
    for (int j = 0; j < yh.n_nodes(); ++j) {
        const double curl_norm = std::sqrt(K.coeff(j, j));
        if (curl_norm > 0.0)
            res = std::max(res, std::abs(r[j]) / (q_norm * curl_norm));
    }
    return res;
}

/// Two-mesh form of the projection property: projecting a discrete
/// orthogonal gradient of a refinement back to the coarse mesh lands in
/// the coarse orthogonal-gradient space again.
inline double check_projection_property_two_level(const Triangulation& coarse,
                                                  const Triangulation& fine, int k,
                                                  const Eigen::VectorXd& v_fine)
{
    XhSpace xf(fine, k);
    YhSpace yf(fine, k);
    detail::require(v_fine.size() == yf.n_nodes(),
                    "check_projection_property_two_level: coefficient size mismatch");
    // w = Pi_{X(fine)} grad(v) is a discrete orthogonal gradient on the
    // fine mesh by the single-mesh property.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(xf.dim());
    TriangleQuadrature quad(std::max(2 * k, 1));
    const int m = xf.scalar_size();
    std::vector<double> chi(m);
    for (int t = 0; t < fine.n_triangles(); ++t) {
        const double jac = 2.0 * fine.area(t);
        for (const auto& q : quad.points()) {
            const Vec2 p = fine.map_ref(t, q.x, q.y);
            const Vec2 g = yf.evaluate_gradient(v_fine, t, {1 - q.x - q.y, q.x, q.y});
            xf.basis(t).values(p, chi.data());
            for (int i = 0; i < m; ++i) {
                w[xf.offset(t) + 2 * i] += q.w * jac * g.x * chi[i];
                w[xf.offset(t) + 2 * i + 1] += q.w * jac * g.y * chi[i];
            }
        }
    }
    XhSpace xc(coarse, k);
    const Eigen::VectorXd wc = project_to_coarse(xc, xf, w);
    return orthogonality_residual(xc, wc);
}

// ---------------------------------------------------------------------------
// Discrete Helmholtz decompositions.
// ---------------------------------------------------------------------------

struct DecompositionReport {
    long dim_total = 0;       // dimension of the decomposed space
    long dim_gradients = 0;   // nonconforming gradient part
    long dim_curls = 0;       // Curl part
    bool dims_ok = false;
    double max_gram = 0.0;            // largest normalized cross inner product
    double singular_value_ratio = 0.0;  // smallest/largest of the combined basis
    bool ok(double tol = 1e-12) const
    {
        return dims_ok && max_gram <= tol && singular_value_ratio > 1e-8;
    }
};

/// P_0(T; R^2) = grad_NC CR^1_0(T) + Curl (P_1(T) cap Y), an L2-orthogonal
/// decomposition.  Verifies the dimension identity, the orthogonality of
/// the two parts and the joint spanning (full rank of the combined basis).
inline DecompositionReport check_triangle_decomposition(const Triangulation& mesh)
{
    DecompositionReport rep;
    const long T = mesh.n_triangles();
    rep.dim_total = 2 * T;
    rep.dim_gradients = mesh.n_interior_edges();
    rep.dim_curls = mesh.n_vertices() - 1;
    rep.dims_ok = (rep.dim_total == rep.dim_gradients + rep.dim_curls);

    // Coordinates in the orthonormal basis of P_0(T;R^2): a constant field
    // q on T has coordinates sqrt(area) * q.
    auto coords_of = [&](const std::vector<Vec2>& field) {
        Eigen::VectorXd c(2 * T);
        for (long t = 0; t < T; ++t) {
            const double s = std::sqrt(mesh.area(static_cast<int>(t)));
            c[2 * t] = s * field[t].x;
            c[2 * t + 1] = s * field[t].y;
        }
        return c;
    };

    Eigen::MatrixXd grads(2 * T, rep.dim_gradients);
    {
        int col = 0;
        for (int e = 0; e < mesh.n_edges(); ++e) {
            if (mesh.edge(e).boundary) continue;
            std::vector<Vec2> field(T, Vec2{0.0, 0.0});
            for (int side = 0; side < 2; ++side) {
                const int t = side == 0 ? mesh.edge(e).tri_plus : mesh.edge(e).tri_minus;
                const auto gl = cr_detail::lambda_gradients(mesh, t);
                for (int j = 0; j < 3; ++j)
                    if (mesh.tri_edge(t, j) == e) field[t] = -2.0 * gl[j];
            }
            grads.col(col++) = coords_of(field);
        }
    }

    Eigen::MatrixXd curls(2 * T, mesh.n_vertices());
    for (int z = 0; z < mesh.n_vertices(); ++z) {
        std::vector<Vec2> field(T, Vec2{0.0, 0.0});
        for (int t = 0; t < T; ++t) {
            const auto gl = cr_detail::lambda_gradients(mesh, t);
            for (int j = 0; j < 3; ++j)
                if (mesh.tri(t).v[j] == z) field[t] = Vec2{gl[j].y, -gl[j].x};
        }
        curls.col(z) = coords_of(field);
    }

    for (long i = 0; i < grads.cols(); ++i)
        for (long j = 0; j < curls.cols(); ++j)
            rep.max_gram = std::max(rep.max_gram,
                std::abs(grads.col(i).dot(curls.col(j))) /
                (grads.col(i).norm() * curls.col(j).norm()));

    // Combined rank: all gradients plus the curls of all but one nodal
    // function (the hats sum to a constant, whose Curl vanishes).
    Eigen::MatrixXd combined(2 * T, rep.dim_gradients + rep.dim_curls);
    combined.leftCols(rep.dim_gradients) = grads;
    combined.rightCols(rep.dim_curls) = curls.rightCols(rep.dim_curls);
    for (long c = 0; c < combined.cols(); ++c)
        combined.col(c).normalize();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(combined);
    rep.singular_value_ratio =
        svd.singularValues()(svd.singularValues().size() - 1) / svd.singularValues()(0);
    return rep;
}

/// Discrete Helmholtz decomposition on square partitions:
/// X_1^rect(T) = grad_NC V^rot_NC(T) + Curl V_{Q,1}(T), L2-orthogonal.
/// V^rot_NC is the rotated bilinear (Rannacher-Turek) space with
/// integral-mean edge continuity; V_{Q,1} the conforming bilinears.
inline DecompositionReport check_square_decomposition(const SquarePartition& sq)
{
    DecompositionReport rep;
    const int T = sq.n_cells();
    rep.dim_total = 3L * T;
    rep.dim_gradients = sq.n_interior_edges();
    rep.dim_curls = sq.n_vertices() - 1;
    rep.dims_ok = (rep.dim_total == rep.dim_gradients + rep.dim_curls);

    const double s = sq.cell_size();

    // Rotated bilinear local basis on the reference cell [0,1]^2, dual to
    // the four edge-mean functionals (edges: bottom, right, top, left).
    Eigen::Matrix4d means;
    means << 1.0, 0.5, 0.0, 1.0 / 3.0,
             1.0, 1.0, 0.5, 2.0 / 3.0,
             1.0, 0.5, 1.0, -2.0 / 3.0,
             1.0, 0.0, 0.5, -1.0 / 3.0;
    // columns are the nodal basis coefficients: means * rot_basis = identity
    const Eigen::Matrix4d rot_basis = means.inverse();

    auto rot_value_grad = [&](int node, double xh, double yh_) {
        const Eigen::Vector4d mono(1.0, xh, yh_, xh * xh - yh_ * yh_);
        const Eigen::Vector4d dx(0.0, 1.0, 0.0, 2.0 * xh);
        const Eigen::Vector4d dy(0.0, 0.0, 1.0, -2.0 * yh_);
        const Eigen::Vector4d c = rot_basis.col(node);
        return std::make_pair(c.dot(mono), Vec2{c.dot(dx) / s, c.dot(dy) / s});
    };

    // Q1 nodal basis on the reference cell (corner order as in Cell::v).
    auto q1_value_grad = [&](int corner, double xh, double yh_) {
        const double vx = (corner == 1 || corner == 2) ? xh : 1.0 - xh;
        const double vy = (corner >= 2) ? yh_ : 1.0 - yh_;
        const double dx = ((corner == 1 || corner == 2) ? 1.0 : -1.0) * vy / s;
        const double dy = ((corner >= 2) ? 1.0 : -1.0) * vx / s;
        return std::make_pair(vx * vy, Vec2{dx, dy});
    };

    // 3-point tensor Gauss rule per cell: exact for the bi-quintic
    // integrands appearing below.
    GaussLegendre gl(3);

    // Coordinates with respect to the orthonormal X_1^rect cell basis
    // { sqrt6/s^2 (-(x-cx), y-cy), e1/s, e2/s }.
    auto coords_of = [&](auto&& field) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(3L * T);
        for (int cell = 0; cell < T; ++cell) {
            const Vec2 o = sq.vertices()[sq.cell(cell).v[0]];
            const Vec2 ctr = sq.center(cell);
            for (std::size_t i = 0; i < gl.points.size(); ++i)
                for (std::size_t j = 0; j < gl.points.size(); ++j) {
                    const double xh = gl.points[i], yh_ = gl.points[j];
                    const Vec2 p{o.x + s * xh, o.y + s * yh_};
                    const Vec2 v = field(cell, xh, yh_, p);
                    const double w = gl.weights[i] * gl.weights[j] * s * s;
                    const Vec2 u1 = Vec2{-(p.x - ctr.x), p.y - ctr.y} * (std::sqrt(6.0) / (s * s));
                    c[3 * cell] += w * v.dot(u1);
                    c[3 * cell + 1] += w * v.x / s;
                    c[3 * cell + 2] += w * v.y / s;
                }
        }
        return c;
    };

    Eigen::MatrixXd grads(3L * T, rep.dim_gradients);
    {
        std::vector<int> dof(sq.n_edges(), -1);
        int nd = 0;
        for (int e = 0; e < sq.n_edges(); ++e)
            if (!sq.edges()[e].boundary) dof[e] = nd++;
        for (int e = 0; e < sq.n_edges(); ++e) {
            if (dof[e] < 0) continue;
            grads.col(dof[e]) = coords_of(
                [&](int cell, double xh, double yh_, const Vec2&) -> Vec2 {
                    for (int j = 0; j < 4; ++j)
                        if (sq.cell_edge(cell, j) == e)
                            return rot_value_grad(j, xh, yh_).second;
                    return {0.0, 0.0};
                });
        }
    }

    Eigen::MatrixXd curls(3L * T, sq.n_vertices());
    for (int z = 0; z < sq.n_vertices(); ++z) {
        curls.col(z) = coords_of(
            [&](int cell, double xh, double yh_, const Vec2&) -> Vec2 {
                for (int j = 0; j < 4; ++j)
                    if (sq.cell(cell).v[j] == z) {
                        const Vec2 g = q1_value_grad(j, xh, yh_).second;
                        return {g.y, -g.x};
                    }
                return {0.0, 0.0};
            });
    }

    for (long i = 0; i < grads.cols(); ++i)
        for (long j = 0; j < curls.cols(); ++j)
            rep.max_gram = std::max(rep.max_gram,
                std::abs(grads.col(i).dot(curls.col(j))) /
                (grads.col(i).norm() * curls.col(j).norm()));

    Eigen::MatrixXd combined(3L * T, rep.dim_gradients + rep.dim_curls);
    combined.leftCols(rep.dim_gradients) = grads;
    combined.rightCols(rep.dim_curls) = curls.rightCols(rep.dim_curls);
    for (long c = 0; c < combined.cols(); ++c)
        combined.col(c).normalize();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(combined);
    rep.singular_value_ratio =
        svd.singularValues()(svd.singularValues().size() - 1) / svd.singularValues()(0);
    return rep;
}

} // namespace helmfem
