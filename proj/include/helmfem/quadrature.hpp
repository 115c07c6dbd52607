#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "helmfem/geometry.hpp"

namespace helmfem {

/// Gauss-Legendre rule with n points on [0, 1].  Nodes are computed by
/// Newton iteration on the Legendre recurrence, so the rule is accurate to
/// machine precision for any n.  Exact for polynomials of degree 2n - 1.
struct GaussLegendre {
    std::vector<double> points;
    std::vector<double> weights;

    explicit GaussLegendre(int n)
    {
        if (n < 1 || n > 64)
            throw std::invalid_argument("GaussLegendre: point count out of range");
        points.resize(n);
        weights.resize(n);
        for (int i = 0; i < n; ++i) {
            // Initial guess (Chebyshev-like), then Newton on P_n.
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int j = 2; j <= n; ++j) {
                    double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            points[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

/// Quadrature point on the reference triangle {x, y >= 0, x + y <= 1}.
struct TriQuadPoint {
    double x, y;
    double w;   // weights sum to 1/2 (the reference area)
};

/// Quadrature rule on the reference triangle, exact for polynomials of
/// total degree <= `degree`.  Low degrees use compact symmetric rules with
/// closed-form constants; higher degrees fall back to a Duffy-transformed
/// tensor Gauss rule, which stays exact to machine precision.
class TriangleQuadrature {
public:
    explicit TriangleQuadrature(int degree)
    {
        if (degree < 0 || degree > 50)
            throw std::invalid_argument("TriangleQuadrature: unsupported degree");
        if (degree <= 1) {
            pts_ = {{1.0 / 3.0, 1.0 / 3.0, 0.5}};
        } else if (degree == 2) {
            const double a = 1.0 / 6.0, b = 2.0 / 3.0, w = 1.0 / 6.0;
            pts_ = {{a, a, w}, {b, a, w}, {a, b, w}};
        } else if (degree <= 5) {
            // 7-point degree-5 rule; orbit constants have closed forms.
            const double s = std::sqrt(15.0);
            const double a1 = (6.0 - s) / 21.0, w1 = 0.5 * (155.0 - s) / 1200.0;
            const double a2 = (6.0 + s) / 21.0, w2 = 0.5 * (155.0 + s) / 1200.0;
            pts_ = {{1.0 / 3.0, 1.0 / 3.0, 0.5 * 9.0 / 40.0},
                    {a1, a1, w1}, {1.0 - 2.0 * a1, a1, w1}, {a1, 1.0 - 2.0 * a1, w1},
                    {a2, a2, w2}, {1.0 - 2.0 * a2, a2, w2}, {a2, 1.0 - 2.0 * a2, w2}};
        } else {
            // Duffy map (x, y) = (u (1 - v), v); Jacobian (1 - v).
            GaussLegendre gu((degree + 2) / 2);      // ceil((degree+1)/2)
            GaussLegendre gv((degree + 3) / 2);      // ceil((degree+2)/2)
            for (std::size_t i = 0; i < gu.points.size(); ++i)
                for (std::size_t j = 0; j < gv.points.size(); ++j) {
                    const double u = gu.points[i], v = gv.points[j];
                    pts_.push_back({u * (1.0 - v), v,
                                    gu.weights[i] * gv.weights[j] * (1.0 - v)});
                }
        }
    }

    const std::vector<TriQuadPoint>& points() const { return pts_; }

    /// Integrate f over the physical triangle (a, b, c).
    template <typename F>
    double integrate(const Vec2& a, const Vec2& b, const Vec2& c, F&& f) const
    {
        const double jac = doubled_signed_area(a, b, c);
        double sum = 0.0;
        for (const auto& q : pts_) {
            const Vec2 p = a + q.x * (b - a) + q.y * (c - a);
            sum += q.w * f(p);
        }
        return sum * jac;
    }

private:
    std::vector<TriQuadPoint> pts_;
};

} // namespace helmfem
