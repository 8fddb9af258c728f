#include "meshforge/quadric.hpp"

#include <algorithm>
#include <cmath>

#include "meshforge/error.hpp"

namespace meshforge {

std::optional<Plane> try_plane_of_triangle(const Vec3& p0, const Vec3& p1, const Vec3& p2)
{
    const Vec3 n = cross(p1 - p0, p2 - p0);
    const double longest = std::max({squared_norm(p1 - p0), squared_norm(p2 - p1), squared_norm(p0 - p2)});
    const double area2 = norm(n);
    if (!(area2 > kDegenerateEpsilon * longest) || area2 == 0.0) return std::nullopt;
    const Vec3 u = n / area2;
    return Plane{u.x, u.y, u.z, -dot(u, p0)};
}

Plane plane_of_triangle(const Vec3& p0, const Vec3& p1, const Vec3& p2)
{
    if (auto plane = try_plane_of_triangle(p0, p1, p2)) return *plane;
    throw DegenerateTriangle();
}

Quadric Quadric::from_plane(const Plane& p)
{
    return Quadric({p.a * p.a, p.a * p.b, p.a * p.c, p.a * p.d,
                    p.b * p.b, p.b * p.c, p.b * p.d,
                    p.c * p.c, p.c * p.d,
                    p.d * p.d});
}

double Quadric::at(int row, int col) const
{
    if (row > col) std::swap(row, col);
    // Offset of row r in the packed upper triangle: 0, 4, 7, 9.
    static constexpr int kRowStart[4] = {0, 4, 7, 9};
    return c_[kRowStart[row] + (col - row)];
}

double Quadric::eval(const Vec3& v) const
{
    const auto& q = c_;
    const double x = v.x, y = v.y, z = v.z;
    const double value = q[0] * x * x + 2 * q[1] * x * y + 2 * q[2] * x * z + 2 * q[3] * x
                       + q[4] * y * y + 2 * q[5] * y * z + 2 * q[6] * y
                       + q[7] * z * z + 2 * q[8] * z
                       + q[9];
    return value > 0.0 ? value : 0.0;
}

Quadric vertex_quadric(const Mesh& mesh, const Adjacency& adjacency, VertexId v)
{
    Quadric q;
    for (std::uint32_t f : adjacency.faces_of(v)) {
        const Face& face = mesh.faces[f];
        if (auto plane = try_plane_of_triangle(mesh.positions[face[0]], mesh.positions[face[1]],
                                               mesh.positions[face[2]])) {
            q += Quadric::from_plane(*plane);
        }
    }
    return q;
}

Placement best_of_subset(const Quadric& q, const Vec3& v1, const Vec3& v2)
{
    const Vec3 mid = 0.5 * (v1 + v2);
    Placement best{v1, q.eval(v1)};
    if (const double c = q.eval(v2); c < best.cost) best = {v2, c};
    if (const double c = q.eval(mid); c < best.cost) best = {mid, c};
    return best;
}

std::optional<Vec3> quadric_center(const Quadric& q)
{
    const double a00 = q.at(0, 0), a01 = q.at(0, 1), a02 = q.at(0, 2);
    const double a11 = q.at(1, 1), a12 = q.at(1, 2), a22 = q.at(2, 2);
    const Vec3 b{q.at(0, 3), q.at(1, 3), q.at(2, 3)};

    // Cofactors of the symmetric 3x3 block.
    const double c00 = a11 * a22 - a12 * a12;
    const double c01 = a02 * a12 - a01 * a22;
    const double c02 = a01 * a12 - a02 * a11;
    const double c11 = a00 * a22 - a02 * a02;
    const double c12 = a01 * a02 - a00 * a12;
    const double c22 = a00 * a11 - a01 * a01;
    const double det = a00 * c00 + a01 * c01 + a02 * c02;

    const double row_norm = std::max({std::abs(a00) + std::abs(a01) + std::abs(a02),
                                      std::abs(a01) + std::abs(a11) + std::abs(a12),
                                      std::abs(a02) + std::abs(a12) + std::abs(a22)});
    const double scale = std::max(1.0, row_norm * row_norm * row_norm);
    if (!(std::abs(det) > kSingularEpsilon * scale)) return std::nullopt;

    // x = -A^{-1} b with A^{-1} = adj(A) / det.
    const Vec3 x{-(c00 * b.x + c01 * b.y + c02 * b.z) / det,
                 -(c01 * b.x + c11 * b.y + c12 * b.z) / det,
                 -(c02 * b.x + c12 * b.y + c22 * b.z) / det};
    if (!is_finite(x)) return std::nullopt;
    return x;
}

Placement placement(const Quadric& q, const Vec3& v1, const Vec3& v2)
{
    const Placement fallback = best_of_subset(q, v1, v2);
    if (auto center = quadric_center(q)) {
        const double cost = q.eval(*center);
        if (cost <= fallback.cost) return {*center, cost};
    }
    return fallback;
}

}  // namespace meshforge
