#pragma once

#include <array>
#include <optional>

#include "meshforge/geometry.hpp"
#include "meshforge/mesh.hpp"

namespace meshforge {

/// Plane {x : a x + b y + c z + d = 0} with unit normal (a, b, c).
struct Plane {
    double a = 0.0, b = 0.0, c = 1.0, d = 0.0;

    Vec3 normal() const { return {a, b, c}; }
    double signed_distance(const Vec3& p) const { return a * p.x + b * p.y + c * p.z + d; }

    friend bool operator==(const Plane&, const Plane&) = default;
};

/// Degenerate-triangle threshold: cross-product norm relative to the squared
/// longest edge.
inline constexpr double kDegenerateEpsilon = 1e-12;
/// Singularity threshold on the scaled determinant of the 3x3 block.
inline constexpr double kSingularEpsilon = 1e-10;

/// Throws DegenerateTriangle when the corners are (nearly) collinear.
Plane plane_of_triangle(const Vec3& p0, const Vec3& p1, const Vec3& p2);
std::optional<Plane> try_plane_of_triangle(const Vec3& p0, const Vec3& p1, const Vec3& p2);

/// Symmetric 4x4 form accumulating p p^T over planes. Stores the upper
/// triangle row-major: xx xy xz xw yy yz yw zz zw ww.
class Quadric {
public:
    constexpr Quadric() = default;
    explicit constexpr Quadric(const std::array<double, 10>& coefficients) : c_(coefficients) {}

    static Quadric from_plane(const Plane& p);

    /// Entry (row, col) of the full symmetric matrix, indices in [0, 4).
    double at(int row, int col) const;
    const std::array<double, 10>& coefficients() const { return c_; }

    /// v^T Q v with v = (x, y, z, 1), clamped at zero.
    double eval(const Vec3& v) const;

    Quadric& operator+=(const Quadric& o)
    {
        for (int i = 0; i < 10; ++i) c_[i] += o.c_[i];
        return *this;
    }
    friend Quadric operator+(Quadric a, const Quadric& b) { return a += b; }
    friend bool operator==(const Quadric&, const Quadric&) = default;

private:
    std::array<double, 10> c_{};
};

inline Quadric quadric_of_plane(const Plane& p) { return Quadric::from_plane(p); }
inline Quadric add(const Quadric& a, const Quadric& b) { return a + b; }

/// Sum of face-plane quadrics over the non-degenerate faces incident to v.
Quadric vertex_quadric(const Mesh& mesh, const Adjacency& adjacency, VertexId v);

struct Placement {
    Vec3 position;
    double cost = 0.0;
};

/// Least-cost member of {v1, v2, (v1 + v2) / 2}, ties in that order.
Placement best_of_subset(const Quadric& q, const Vec3& v1, const Vec3& v2);

/// Minimizer of the form when its 3x3 block is invertible, else (or when the
/// solve loses to it numerically) the subset rule.
Placement placement(const Quadric& q, const Vec3& v1, const Vec3& v2);

/// Stationary point -A^{-1} b of the quadratic form, if A is non-singular.
std::optional<Vec3> quadric_center(const Quadric& q);

}  // namespace meshforge
