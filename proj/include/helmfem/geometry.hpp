#pragma once

#include <cmath>
#include <iosfwd>

namespace helmfem {

/// Plain 2D point / vector with value semantics.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {s * x, s * y}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    /// 2D cross product (z-component of the 3D cross product).
    constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    constexpr double squared_norm() const { return x * x + y * y; }

    /// Counterclockwise rotation by 90 degrees.
    constexpr Vec2 rot90() const { return {-y, x}; }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

inline Vec2 midpoint(const Vec2& a, const Vec2& b)
{
    return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
}

/// Twice the signed area of the triangle (a, b, c); positive for
/// counterclockwise orientation.
constexpr double doubled_signed_area(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return (b - a).cross(c - a);
}

/// Polar angle in [0, 2*pi), measured counterclockwise from the positive
/// x-axis.  Points on the positive x-axis map to 0.
inline double polar_angle(const Vec2& v)
{
    double t = std::atan2(v.y, v.x);
    if (t < 0.0) t += 2.0 * M_PI;
    return t;
}

} // namespace helmfem
