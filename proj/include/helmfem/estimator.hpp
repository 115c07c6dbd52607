#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "helmfem/fields.hpp"
#include "helmfem/quadrature.hpp"
#include "helmfem/spaces.hpp"
#include "helmfem/system.hpp"

namespace helmfem {

/// Per-triangle estimator contributions and their totals.
struct EstimatorReport {
    Eigen::VectorXd lambda2;    // residual estimator, per triangle
    Eigen::VectorXd mu2;        // data oscillation, per triangle
    double lambda2_total = 0.0;
    double mu2_total = 0.0;

    double lambda() const { return std::sqrt(lambda2_total); }
    double mu() const { return std::sqrt(mu2_total); }
};

/// Residual estimator: lambda^2(T) = ||h_T curl_NC p_h||^2_{L2(T)}
/// + h_T sum_{E in E(T)} ||[p_h]_E . tau_E||^2_{L2(E)}.  Interior edge
/// contributions enter both adjacent triangles, each weighted by its own
/// h_T.  On boundary edges the jump is p_h . tau_E minus the tangential
/// Dirichlet datum when one is given.
inline Eigen::VectorXd estimate_lambda(const XhSpace& xh, const Eigen::VectorXd& p,
                                       const std::optional<VectorField>& grad_uD = {},
                                       int edge_points = -1)
{
    const Triangulation& mesh = xh.mesh();
    const int k = xh.degree();
    Eigen::VectorXd lambda2 = Eigen::VectorXd::Zero(mesh.n_triangles());

    // Volume part: the curl of p_h has degree k-1, so degree 2k quadrature
    // is exact (and the term vanishes identically for k = 0).
    if (k > 0) {
        TriangleQuadrature quad(2 * k);
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const double h2 = mesh.area(t);
            const double v = quad.integrate(
                mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2),
                [&](const Vec2& x) {
                    const double c = xh.curl(p, t, x);
                    return c * c;
                });
            lambda2[t] += h2 * v;
        }
    }

    GaussLegendre gl(edge_points > 0 ? edge_points : k + 3);
    for (int e = 0; e < mesh.n_edges(); ++e) {
        const Edge& ed = mesh.edge(e);
        const Vec2 pa = mesh.vertex(ed.a), pb = mesh.vertex(ed.b);
        double integral = 0.0;
        for (std::size_t q = 0; q < gl.points.size(); ++q) {
            const Vec2 x = pa + gl.points[q] * (pb - pa);
            double jump = xh.evaluate(p, ed.tri_plus, x).dot(ed.tangent);
            if (ed.boundary) {
                if (grad_uD) jump -= (*grad_uD)(x).dot(ed.tangent);
            } else {
                jump -= xh.evaluate(p, ed.tri_minus, x).dot(ed.tangent);
            }
            integral += gl.weights[q] * jump * jump;
        }
        integral *= ed.length;
        lambda2[ed.tri_plus] += mesh.h(ed.tri_plus) * integral;
        if (!ed.boundary)
            lambda2[ed.tri_minus] += mesh.h(ed.tri_minus) * integral;
    }
    return lambda2;
}

namespace mu_detail {

struct Moments {
    Eigen::VectorXd cx, cy;   // projection moments per scalar basis function
    double g2 = 0.0;          // integral of |g|^2
    double magnitude = 0.0;   // sum of absolute summands; roundoff reference

    Moments(int m) : cx(Eigen::VectorXd::Zero(m)), cy(Eigen::VectorXd::Zero(m)) {}
    Moments& operator+=(const Moments& o)
    {
        cx += o.cx;
        cy += o.cy;
        g2 += o.g2;
        magnitude += o.magnitude;
        return *this;
    }
};

template <typename G>
Moments single_level(const ScalarElementBasis& basis, int m,
                     const TriangleQuadrature& quad, const Vec2& a, const Vec2& b,
                     const Vec2& c, G&& g)
{
    Moments mo(m);
    const double jac = doubled_signed_area(a, b, c);
    std::vector<double> chi(m);
    for (const auto& q : quad.points()) {
        const Vec2 x = a + q.x * (b - a) + q.y * (c - a);
        const Vec2 gv = g(x);
        basis.values(x, chi.data());
        const double w = q.w * jac;
        double abs_chi = 0.0;
        for (int i = 0; i < m; ++i) {
            mo.cx[i] += w * gv.x * chi[i];
            mo.cy[i] += w * gv.y * chi[i];
            abs_chi += std::abs(chi[i]);
        }
        mo.g2 += w * gv.squared_norm();
        mo.magnitude += w * ((std::abs(gv.x) + std::abs(gv.y)) * abs_chi +
                             gv.squared_norm());
    }
    return mo;
}

// Error-controlled composite integration: compare one level against the
// four red children and recurse where they disagree.  This resolves data
// with localized kinks or corner singularities well below the tolerances
// of the structural checks; smooth elements stop at the first level.
// `element_scale` is the magnitude of the whole element's moments; subcells
// that are negligible against it stop recursing.  The final subcell
// decomposition is recorded so that the residual can be integrated without
// cancellation.
template <typename G>
Moments adaptive(const ScalarElementBasis& basis, int m,
                 const TriangleQuadrature& quad, const Vec2& a, const Vec2& b,
                 const Vec2& c, G&& g, int depth, double element_scale,
                 std::vector<std::array<Vec2, 3>>& cells)
{
    const Moments coarse = single_level(basis, m, quad, a, b, c, g);
    const Vec2 ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    const std::array<std::array<Vec2, 3>, 4> kids = {{
        {a, ab, ca}, {b, bc, ab}, {c, ca, bc}, {ab, bc, ca}}};
    Moments fine(m);
    for (const auto& kid : kids)
        fine += single_level(basis, m, quad, kid[0], kid[1], kid[2], g);

    const double scale = fine.g2 + fine.cx.squaredNorm() + fine.cy.squaredNorm();
    if (depth == 0) element_scale = scale;
    const double diff = std::abs(fine.g2 - coarse.g2) +
                        (fine.cx - coarse.cx).lpNorm<1>() +
                        (fine.cy - coarse.cy).lpNorm<1>();
    // second test: differences at the roundoff level of the accumulated
    // sums cannot be integrated away by refining further
    if (depth >= 8 || scale <= 3e-14 * element_scale ||
        diff <= std::max(1e-8 * scale, 1e-13 * fine.magnitude)) {
        for (const auto& kid : kids) cells.push_back(kid);
        return fine;
    }

    Moments out(m);
    for (const auto& kid : kids)
        out += adaptive(basis, m, quad, kid[0], kid[1], kid[2], g, depth + 1,
                        element_scale, cells);
    return out;
}

} // namespace mu_detail

/// Memo for per-element data oscillations.  A triangle is identified by its
/// position in the bisection forest, which pins its geometry exactly, so
/// values can be reused across the meshes of one adaptive run (same family,
/// degree, datum and quadrature degree).
class MuCache {
public:
    MuCache() = default;

    bool lookup(const Triangulation& mesh, int t, double& value) const
    {
        const auto it = values_.find(key_of(mesh.tri(t)));
        if (it == values_.end()) return false;
        value = it->second;
        return true;
    }

    void store(const Triangulation& mesh, int t, double value)
    {
        values_.emplace(key_of(mesh.tri(t)), value);
    }

    bool matches(std::uint64_t family, int k, int quad_degree) const
    {
        return family_ == family && k_ == k && quad_degree_ == quad_degree;
    }

    void reset(std::uint64_t family, int k, int quad_degree)
    {
        values_.clear();
        family_ = family;
        k_ = k;
        quad_degree_ = quad_degree;
    }

private:
    struct Key {
        int root;
        std::uint8_t depth;
        std::array<std::uint64_t, 2> bits;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const
        {
            std::uint64_t h = static_cast<std::uint64_t>(k.root) * 0x9e3779b97f4a7c15ULL;
            h ^= k.bits[0] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h ^= k.bits[1] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h ^= k.depth;
            return static_cast<std::size_t>(h);
        }
    };

    static Key key_of(const Triangle& tr)
    {
        return {tr.root, tr.path.depth, tr.path.bits};
    }

    std::unordered_map<Key, double, KeyHash> values_;
    std::uint64_t family_ = 0;
    int k_ = -1;
    int quad_degree_ = -1;
};

/// Data oscillation: mu^2(T) = ||g - Pi_k g||^2_{L2(T)} with
/// g = phi - grad(u_D).  The moments are integrated with an
/// error-controlled composite rule, so the quasimonotonicity of mu under
/// refinement is observed down to roundoff even for data with kinks.
inline Eigen::VectorXd estimate_mu(const XhSpace& xh, const VectorField& phi,
                                   const std::optional<VectorField>& grad_uD = {},
                                   int quad_degree = 8, MuCache* cache = nullptr)
{
    const Triangulation& mesh = xh.mesh();
    const int k = xh.degree();
    const int m = xh.scalar_size();
    TriangleQuadrature quad(std::max(quad_degree, 2 * k + 2));
    Eigen::VectorXd mu2 = Eigen::VectorXd::Zero(mesh.n_triangles());

    if (cache && !cache->matches(mesh.family(), k, quad_degree))
        cache->reset(mesh.family(), k, quad_degree);

    auto g = [&](const Vec2& x) {
        Vec2 v = phi(x);
        if (grad_uD) v -= (*grad_uD)(x);
        return v;
    };
    std::vector<std::array<Vec2, 3>> cells;
    std::vector<double> chi(m);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        if (cache && cache->lookup(mesh, t, mu2[t])) continue;
        cells.clear();
        const mu_detail::Moments mo = mu_detail::adaptive(
            xh.basis(t), m, quad, mesh.corner(t, 0), mesh.corner(t, 1),
            mesh.corner(t, 2), g, 0, 0.0, cells);
        // residual integral over the final decomposition; the orthonormal
        // basis makes the moments the projection coefficients
        double s = 0.0;
        for (const auto& cell : cells) {
            const double jac = doubled_signed_area(cell[0], cell[1], cell[2]);
            for (const auto& q : quad.points()) {
                const Vec2 x =
                    cell[0] + q.x * (cell[1] - cell[0]) + q.y * (cell[2] - cell[0]);
                Vec2 r = g(x);
                xh.basis(t).values(x, chi.data());
                for (int i = 0; i < m; ++i) {
                    r.x -= mo.cx[i] * chi[i];
                    r.y -= mo.cy[i] * chi[i];
                }
                s += q.w * jac * r.squared_norm();
            }
        }
        mu2[t] = s;
        if (cache) cache->store(mesh, t, mu2[t]);
    }
    return mu2;
}

inline EstimatorReport estimate(const MixedSolution& sol, const ProblemData& prob,
                                int quad_degree = 8, MuCache* cache = nullptr)
{
    EstimatorReport r;
    r.lambda2 = estimate_lambda(sol.xh, sol.p, prob.grad_uD);
    r.mu2 = estimate_mu(sol.xh, prob.phi, prob.grad_uD, quad_degree, cache);
    r.lambda2_total = r.lambda2.sum();
    r.mu2_total = r.mu2.sum();
    return r;
}

/// ||p - p_h||_{L2} against an analytic exact gradient.
inline double exact_error(const MixedSolution& sol, const VectorField& p_exact,
                          int quad_degree = 8)
{
    return sol.xh.l2_error(sol.p, p_exact, quad_degree);
}

} // namespace helmfem
