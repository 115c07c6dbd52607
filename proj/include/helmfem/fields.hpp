#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "helmfem/geometry.hpp"

namespace helmfem {

/// Analytic vector-valued field on the domain.  `degree` is an optional
/// polynomial-degree hint (-1 for non-polynomial fields); integration
/// routines use it to pick exact quadrature where possible.
struct VectorField {
    std::function<Vec2(const Vec2&)> f;
    int degree = -1;

    VectorField() = default;
    VectorField(std::function<Vec2(const Vec2&)> fn, int deg = -1)
        : f(std::move(fn)), degree(deg) {}

    Vec2 operator()(const Vec2& p) const { return f(p); }
    explicit operator bool() const { return static_cast<bool>(f); }
};

struct ScalarField {
    std::function<double(const Vec2&)> f;
    int degree = -1;

    ScalarField() = default;
    ScalarField(std::function<double(const Vec2&)> fn, int deg = -1)
        : f(std::move(fn)), degree(deg) {}

    double operator()(const Vec2& p) const { return f(p); }
    explicit operator bool() const { return static_cast<bool>(f); }
};

inline VectorField zero_vector_field()
{
    return VectorField([](const Vec2&) { return Vec2{0.0, 0.0}; }, 0);
}

/// Data of one boundary value problem in the mixed formulation: the datum
/// phi with -div phi = f, an optional Dirichlet lift gradient, and optional
/// exact fields for error evaluation.
struct ProblemData {
    VectorField phi;
    std::optional<VectorField> grad_uD;          // absent for homogeneous runs
    std::optional<VectorField> exact_p;          // gradient of the exact solution
    std::optional<VectorField> exact_curl_alpha; // Curl of the exact stream part
};

} // namespace helmfem
