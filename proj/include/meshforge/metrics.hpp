#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "meshforge/mesh.hpp"

namespace meshforge {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Euclidean distance from p to the closed triangle abc (degenerate allowed).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Uniform grid over a mesh's triangles for nearest-surface queries.
class TriangleGrid {
public:
    explicit TriangleGrid(const Mesh& mesh);

    /// Distance from p to the nearest triangle; +inf for a faceless mesh.
    double nearest_distance(const Vec3& p) const;

private:
    std::int64_t cell_key(std::int64_t x, std::int64_t y, std::int64_t z) const
    {
        return (z * dims_[1] + y) * dims_[0] + x;
    }

    const Mesh* mesh_;
    Vec3 origin_;
    double cell_ = 1.0;
    std::array<std::int64_t, 3> dims_{1, 1, 1};
    std::vector<std::uint32_t> cell_start_;
    std::vector<std::uint32_t> cell_faces_;
};

/// Deterministic area-uniform surface samples. `stream` separates
/// independent sample sets drawn with the same seed.
std::vector<Vec3> sample_surface(const Mesh& mesh, std::size_t count, std::uint64_t seed,
                                 std::uint64_t stream = 0);

enum class Direction { AToB, Symmetric };

struct DeviationReport {
    double mean = 0.0;
    double max = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    Direction direction = Direction::AToB;

    std::string to_json() const;
};

/// Distances from samples on `a` to the surface of `b`. Symmetric mode also
/// samples `b` against `a` and reports the larger max and the pooled mean.
/// Throws ZeroAreaMesh.
DeviationReport sampled_deviation(const Mesh& a, const Mesh& b, std::size_t samples, std::uint64_t seed,
                                  Direction direction = Direction::AToB);

}  // namespace meshforge
