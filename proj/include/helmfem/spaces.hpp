#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "helmfem/fields.hpp"
#include "helmfem/geometry.hpp"
#include "helmfem/quadrature.hpp"
#include "helmfem/triangulation.hpp"

namespace helmfem {

/// L2-orthonormal polynomial basis of P_k on one triangle, built from
/// centered and h-scaled monomials by a Cholesky factorization of the mass
/// matrix.  With this basis the element mass matrix is the identity, which
/// makes projections and norms trivial.
class ScalarElementBasis {
public:
    ScalarElementBasis() = default;

    ScalarElementBasis(const Triangulation& mesh, int t, int k)
        : k_(k), m_((k + 1) * (k + 2) / 2), center_(mesh.centroid(t)),
          scale_(mesh.h(t))
    {
        exponents_.reserve(m_);
        for (int d = 0; d <= k; ++d)
            for (int i = d; i >= 0; --i)
                exponents_.push_back({i, d - i});

        TriangleQuadrature quad(std::max(2 * k, 1));
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m_, m_);
        const Vec2 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
        const double jac = doubled_signed_area(a, b, c);
        std::vector<double> mono(m_);
        for (const auto& q : quad.points()) {
            const Vec2 p = a + q.x * (b - a) + q.y * (c - a);
            monomials(p, mono.data());
            for (int i = 0; i < m_; ++i)
                for (int j = 0; j <= i; ++j)
                    gram(i, j) += q.w * jac * mono[i] * mono[j];
        }
        gram = gram.selfadjointView<Eigen::Lower>();
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("ScalarElementBasis: singular element mass matrix");
        coeff_ = llt.matrixL().solve(Eigen::MatrixXd::Identity(m_, m_));
    }

    int size() const { return m_; }

    void values(const Vec2& p, double* out) const
    {
        thread_local std::vector<double> mono;
        mono.resize(m_);
        monomials(p, mono.data());
        for (int i = 0; i < m_; ++i) {
            double s = 0.0;
            for (int j = 0; j <= i; ++j) s += coeff_(i, j) * mono[j];
            out[i] = s;
        }
    }

    void gradients(const Vec2& p, Vec2* out) const
    {
        const double xi = (p.x - center_.x) / scale_;
        const double eta = (p.y - center_.y) / scale_;
        thread_local std::vector<Vec2> dmono;
        dmono.resize(m_);
        for (int j = 0; j < m_; ++j) {
            const auto [ex, ey] = exponents_[j];
            const double dx = ex > 0 ? ex * ipow(xi, ex - 1) * ipow(eta, ey) : 0.0;
            const double dy = ey > 0 ? ey * ipow(xi, ex) * ipow(eta, ey - 1) : 0.0;
            dmono[j] = Vec2{dx, dy} / scale_;
        }
        for (int i = 0; i < m_; ++i) {
            Vec2 s{0.0, 0.0};
            for (int j = 0; j <= i; ++j) s += coeff_(i, j) * dmono[j];
            out[i] = s;
        }
    }

private:
    void monomials(const Vec2& p, double* out) const
    {
        const double xi = (p.x - center_.x) / scale_;
        const double eta = (p.y - center_.y) / scale_;
        for (int j = 0; j < m_; ++j)
            out[j] = ipow(xi, exponents_[j].first) * ipow(eta, exponents_[j].second);
    }

    static double ipow(double x, int n)
    {
        double r = 1.0;
        for (int i = 0; i < n; ++i) r *= x;
        return r;
    }

    int k_ = 0;
    int m_ = 1;
    Vec2 center_;
    double scale_ = 1.0;
    std::vector<std::pair<int, int>> exponents_;
    Eigen::MatrixXd coeff_;     // lower triangular, orthonormal basis in monomials
};

/// X_h(T) = P_k(T; R^2): discontinuous vector-valued polynomials with an
/// orthonormal scalar basis per element.  Coefficient layout: element t,
/// scalar basis i, component c -> t * 2m + 2i + c.
class XhSpace {
public:
    XhSpace(const Triangulation& mesh, int k)
        : mesh_(&mesh), k_(k), m_((k + 1) * (k + 2) / 2)
    {
        detail::require(k >= 0, "XhSpace: polynomial degree must be >= 0");
        bases_.reserve(mesh.n_triangles());
        for (int t = 0; t < mesh.n_triangles(); ++t)
            bases_.emplace_back(mesh, t, k);
    }

    const Triangulation& mesh() const { return *mesh_; }
    int degree() const { return k_; }
    int scalar_size() const { return m_; }
    long dim() const { return 2L * m_ * mesh_->n_triangles(); }
    const ScalarElementBasis& basis(int t) const { return bases_[t]; }

    long offset(int t) const { return 2L * m_ * t; }

    /// Elementwise L2 projection of an analytic field.
    Eigen::VectorXd project(const VectorField& field, int quad_degree) const
    {
        const int qd = field.degree >= 0 ? std::max(field.degree + k_, 1)
                                         : std::max(quad_degree, 2 * k_);
        TriangleQuadrature quad(qd);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(dim());
        std::vector<double> chi(m_);
        for (int t = 0; t < mesh_->n_triangles(); ++t) {
            const Vec2 a = mesh_->corner(t, 0), b = mesh_->corner(t, 1),
                       cc = mesh_->corner(t, 2);
            const double jac = doubled_signed_area(a, b, cc);
            for (const auto& q : quad.points()) {
                const Vec2 p = a + q.x * (b - a) + q.y * (cc - a);
                const Vec2 v = field(p);
                bases_[t].values(p, chi.data());
                for (int i = 0; i < m_; ++i) {
                    c[offset(t) + 2 * i] += q.w * jac * v.x * chi[i];
                    c[offset(t) + 2 * i + 1] += q.w * jac * v.y * chi[i];
                }
            }
        }
        return c;
    }

    Vec2 evaluate(const Eigen::VectorXd& coeffs, int t, const Vec2& p) const
    {
        thread_local std::vector<double> chi;
        chi.resize(m_);
        bases_[t].values(p, chi.data());
        Vec2 v{0.0, 0.0};
        for (int i = 0; i < m_; ++i) {
            v.x += coeffs[offset(t) + 2 * i] * chi[i];
            v.y += coeffs[offset(t) + 2 * i + 1] * chi[i];
        }
        return v;
    }

    /// Scalar curl d(q_y)/dx - d(q_x)/dy of the represented field.
    double curl(const Eigen::VectorXd& coeffs, int t, const Vec2& p) const
    {
        thread_local std::vector<Vec2> grad;
        grad.resize(m_);
        bases_[t].gradients(p, grad.data());
        double s = 0.0;
        for (int i = 0; i < m_; ++i)
            s += coeffs[offset(t) + 2 * i + 1] * grad[i].x
               - coeffs[offset(t) + 2 * i] * grad[i].y;
        return s;
    }

    /// Squared L2 norm; exact because the basis is orthonormal.
    double norm2(const Eigen::VectorXd& coeffs) const { return coeffs.squaredNorm(); }

    /// L2 distance between the represented field and an analytic field.
    double l2_error(const Eigen::VectorXd& coeffs, const VectorField& field,
                    int quad_degree) const
    {
        TriangleQuadrature quad(quad_degree);
        double s = 0.0;
        for (int t = 0; t < mesh_->n_triangles(); ++t) {
            const Vec2 a = mesh_->corner(t, 0), b = mesh_->corner(t, 1),
                       cc = mesh_->corner(t, 2);
            const double jac = doubled_signed_area(a, b, cc);
            for (const auto& q : quad.points()) {
                const Vec2 p = a + q.x * (b - a) + q.y * (cc - a);
                s += q.w * jac * (field(p) - evaluate(coeffs, t, p)).squared_norm();
            }
        }
        return std::sqrt(s);
    }

private:
    const Triangulation* mesh_;
    int k_;
    int m_;
    std::vector<ScalarElementBasis> bases_;
};

/// Exact projection of a field represented on a fine space onto the X_h
/// space of a coarser mesh of the same family.  Integrates per fine element
/// so that the piecewise polynomial structure is respected.
inline Eigen::VectorXd project_to_coarse(const XhSpace& coarse, const XhSpace& fine,
                                         const Eigen::VectorXd& fine_coeffs)
{
    const auto parent = fine.mesh().ancestors_in(coarse.mesh());
    const int k = std::max(coarse.degree(), fine.degree());
    TriangleQuadrature quad(std::max(2 * k, 1));
    Eigen::VectorXd c = Eigen::VectorXd::Zero(coarse.dim());
    const int m = coarse.scalar_size();
    std::vector<double> chi(m);
    for (int t = 0; t < fine.mesh().n_triangles(); ++t) {
        const Vec2 a = fine.mesh().corner(t, 0), b = fine.mesh().corner(t, 1),
                   cc = fine.mesh().corner(t, 2);
        const double jac = doubled_signed_area(a, b, cc);
        const int tc = parent[t];
        for (const auto& q : quad.points()) {
            const Vec2 p = a + q.x * (b - a) + q.y * (cc - a);
            const Vec2 v = fine.evaluate(fine_coeffs, t, p);
            coarse.basis(tc).values(p, chi.data());
            for (int i = 0; i < m; ++i) {
                c[coarse.offset(tc) + 2 * i] += q.w * jac * v.x * chi[i];
                c[coarse.offset(tc) + 2 * i + 1] += q.w * jac * v.y * chi[i];
            }
        }
    }
    return c;
}

/// Y_h(T) = P_{k+1}(T) intersected with H^1 and the zero-mean constraint:
/// continuous Lagrange elements of degree k+1 with nodes at the vertices,
/// on the edges and (for cubics) at the element centroid.  The zero-mean
/// constraint is handled by the solver (one pinned node plus mean
/// normalization), so ndof = n_nodes - 1.
class YhSpace {
public:
    YhSpace(const Triangulation& mesh, int k)
        : mesh_(&mesh), k_(k), mdeg_(k + 1)
    {
        detail::require(k >= 0 && k <= 2, "YhSpace: supported degrees are k = 0, 1, 2");
        n_vertex_ = mesh.n_vertices();
        n_edge_nodes_ = (mdeg_ - 1) * mesh.n_edges();
        n_interior_ = (mdeg_ == 3) ? mesh.n_triangles() : 0;
        n_nodes_ = n_vertex_ + n_edge_nodes_ + n_interior_;
    }

    const Triangulation& mesh() const { return *mesh_; }
    int degree() const { return k_; }                // degree of the paired X space
    int poly_degree() const { return mdeg_; }
    int n_nodes() const { return n_nodes_; }
    int ndof() const { return n_nodes_ - 1; }
    int local_size() const { return (mdeg_ + 1) * (mdeg_ + 2) / 2; }

    /// Global node ids of the local nodes of triangle t.  Local order:
    /// 3 vertices, then mdeg-1 nodes per edge (edge j runs from local
    /// vertex (j+1)%3 to (j+2)%3), then the interior node for cubics.
    std::vector<int> global_nodes(int t) const
    {
        std::vector<int> g;
        g.reserve(local_size());
        const Triangle& tr = mesh_->tri(t);
        for (int j = 0; j < 3; ++j) g.push_back(tr.v[j]);
        const int per_edge = mdeg_ - 1;
        for (int j = 0; j < 3 && per_edge > 0; ++j) {
            const int e = mesh_->tri_edge(t, j);
            const Edge& ed = mesh_->edge(e);
            const int va = tr.v[(j + 1) % 3];
            const int canon_start = std::min(ed.a, ed.b);
            for (int i = 1; i <= per_edge; ++i) {
                const int off = (va == canon_start) ? (i - 1) : (per_edge - i);
                g.push_back(n_vertex_ + e * per_edge + off);
            }
        }
        if (mdeg_ == 3)
            g.push_back(n_vertex_ + n_edge_nodes_ + t);
        return g;
    }

    /// Nodes lying on the domain boundary (used to build H^1_0 subspaces).
    std::vector<int> boundary_nodes() const
    {
        std::vector<int> out;
        for (int v = 0; v < mesh_->n_vertices(); ++v)
            if (mesh_->vertex_on_boundary(v)) out.push_back(v);
        const int per_edge = mdeg_ - 1;
        for (int e = 0; e < mesh_->n_edges() && per_edge > 0; ++e)
            if (mesh_->edge(e).boundary)
                for (int i = 0; i < per_edge; ++i)
                    out.push_back(n_vertex_ + e * per_edge + i);
        return out;
    }

    /// Values and barycentric derivatives of all local basis functions at a
    /// barycentric point.
    void eval_local(const std::array<double, 3>& l, double* val,
                    std::array<double, 3>* dl) const
    {
        const double l0 = l[0], l1 = l[1], l2 = l[2];
        switch (mdeg_) {
        case 1:
            val[0] = l0; val[1] = l1; val[2] = l2;
            dl[0] = {1, 0, 0}; dl[1] = {0, 1, 0}; dl[2] = {0, 0, 1};
            break;
        case 2: {
            const double ls[3] = {l0, l1, l2};
            for (int i = 0; i < 3; ++i) {
                val[i] = ls[i] * (2 * ls[i] - 1);
                dl[i] = {0, 0, 0};
                dl[i][i] = 4 * ls[i] - 1;
            }
            for (int j = 0; j < 3; ++j) {
                const int a = (j + 1) % 3, b = (j + 2) % 3;
                val[3 + j] = 4 * ls[a] * ls[b];
                dl[3 + j] = {0, 0, 0};
                dl[3 + j][a] = 4 * ls[b];
                dl[3 + j][b] = 4 * ls[a];
            }
            break;
        }
        case 3: {
            const double ls[3] = {l0, l1, l2};
            for (int i = 0; i < 3; ++i) {
                val[i] = 0.5 * ls[i] * (3 * ls[i] - 1) * (3 * ls[i] - 2);
                dl[i] = {0, 0, 0};
                dl[i][i] = 0.5 * (27 * ls[i] * ls[i] - 18 * ls[i] + 2);
            }
            int n = 3;
            for (int j = 0; j < 3; ++j) {
                const int a = (j + 1) % 3, b = (j + 2) % 3;
                // node nearer a (lambda_a = 2/3), then nearer b
                val[n] = 4.5 * ls[a] * ls[b] * (3 * ls[a] - 1);
                dl[n] = {0, 0, 0};
                dl[n][a] = 4.5 * ls[b] * (6 * ls[a] - 1);
                dl[n][b] = 4.5 * ls[a] * (3 * ls[a] - 1);
                ++n;
                val[n] = 4.5 * ls[a] * ls[b] * (3 * ls[b] - 1);
                dl[n] = {0, 0, 0};
                dl[n][a] = 4.5 * ls[b] * (3 * ls[b] - 1);
                dl[n][b] = 4.5 * ls[a] * (6 * ls[b] - 1);
                ++n;
            }
            val[n] = 27 * l0 * l1 * l2;
            dl[n] = {27 * l1 * l2, 27 * l0 * l2, 27 * l0 * l1};
            break;
        }
        default:
            throw std::logic_error("YhSpace: unsupported degree");
        }
    }

    /// Physical gradients of the barycentric coordinates of triangle t.
    std::array<Vec2, 3> barycentric_gradients(int t) const
    {
        const Vec2 p0 = mesh_->corner(t, 0), p1 = mesh_->corner(t, 1),
                   p2 = mesh_->corner(t, 2);
        const double inv = 1.0 / doubled_signed_area(p0, p1, p2);
        return {(p2 - p1).rot90() * inv, (p0 - p2).rot90() * inv,
                (p1 - p0).rot90() * inv};
    }

    double evaluate(const Eigen::VectorXd& coeffs, int t,
                    const std::array<double, 3>& lambda) const
    {
        const int n = local_size();
        std::vector<double> val(n);
        std::vector<std::array<double, 3>> dl(n);
        eval_local(lambda, val.data(), dl.data());
        const auto g = global_nodes(t);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += coeffs[g[i]] * val[i];
        return s;
    }

    Vec2 evaluate_gradient(const Eigen::VectorXd& coeffs, int t,
                           const std::array<double, 3>& lambda) const
    {
        const int n = local_size();
        std::vector<double> val(n);
        std::vector<std::array<double, 3>> dl(n);
        eval_local(lambda, val.data(), dl.data());
        const auto g = global_nodes(t);
        const auto gl = barycentric_gradients(t);
        Vec2 s{0.0, 0.0};
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c)
                s += coeffs[g[i]] * dl[i][c] * gl[c];
        return s;
    }

    /// Curl of the represented scalar function: (d/dy, -d/dx).
    Vec2 evaluate_curl(const Eigen::VectorXd& coeffs, int t,
                       const std::array<double, 3>& lambda) const
    {
        const Vec2 g = evaluate_gradient(coeffs, t, lambda);
        return {g.y, -g.x};
    }

    double mean(const Eigen::VectorXd& coeffs) const
    {
        TriangleQuadrature quad(mdeg_);
        double integral = 0.0, area = 0.0;
        for (int t = 0; t < mesh_->n_triangles(); ++t) {
            const double a2 = 2.0 * mesh_->area(t);
            area += 0.5 * a2;
            for (const auto& q : quad.points())
                integral += q.w * a2 *
                    evaluate(coeffs, t, {1.0 - q.x - q.y, q.x, q.y});
        }
        return integral / area;
    }

    /// Subtract the mean from the nodal values; with a Lagrange basis this
    /// shifts the represented function by exactly that constant.
    void normalize_mean(Eigen::VectorXd& coeffs) const
    {
        coeffs.array() -= mean(coeffs);
    }

    /// Exact representation of Curl beta_h in the paired X_h space
    /// (Curl Y_h is contained in X_h elementwise).
    Eigen::VectorXd curl_to_x(const Eigen::VectorXd& coeffs, const XhSpace& xh) const
    {
        TriangleQuadrature quad(std::max(2 * k_, 1));
        Eigen::VectorXd c = Eigen::VectorXd::Zero(xh.dim());
        const int m = xh.scalar_size();
        std::vector<double> chi(m);
        for (int t = 0; t < mesh_->n_triangles(); ++t) {
            const Vec2 a = mesh_->corner(t, 0), b = mesh_->corner(t, 1),
                       cc = mesh_->corner(t, 2);
            const double jac = doubled_signed_area(a, b, cc);
            for (const auto& q : quad.points()) {
                const Vec2 p = a + q.x * (b - a) + q.y * (cc - a);
                const Vec2 v = evaluate_curl(coeffs, t, {1.0 - q.x - q.y, q.x, q.y});
                xh.basis(t).values(p, chi.data());
                for (int i = 0; i < m; ++i) {
                    c[xh.offset(t) + 2 * i] += q.w * jac * v.x * chi[i];
                    c[xh.offset(t) + 2 * i + 1] += q.w * jac * v.y * chi[i];
                }
            }
        }
        return c;
    }

private:
    const Triangulation* mesh_;
    int k_;
    int mdeg_;
    int n_vertex_ = 0;
    int n_edge_nodes_ = 0;
    int n_interior_ = 0;
    int n_nodes_ = 0;
};

/// Integral of a scalar field over the whole mesh.
template <typename F>
double integrate(F&& field, const Triangulation& mesh, int quad_degree)
{
    TriangleQuadrature quad(quad_degree);
    double s = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t)
        s += quad.integrate(mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2),
                            field);
    return s;
}

} // namespace helmfem
