#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meshforge/geometry.hpp"

namespace meshforge {

using VertexId = std::uint32_t;
using Face = std::array<VertexId, 3>;

/// Indexed triangle set. Counter-clockwise winding gives the outward normal.
struct Mesh {
    std::vector<Vec3> positions;
    std::vector<Face> faces;

    std::size_t vertex_count() const { return positions.size(); }
    std::size_t face_count() const { return faces.size(); }

    /// Throws InvalidMesh on out-of-range indices or non-finite coordinates.
    void validate() const;

    friend bool operator==(const Mesh&, const Mesh&) = default;
};

/// Vertex-to-face incidence and the canonical (i < j) edge set.
class Adjacency {
public:
    explicit Adjacency(const Mesh& mesh);

    const std::vector<std::uint32_t>& faces_of(VertexId v) const { return vertex_faces_[v]; }
    const std::vector<std::pair<VertexId, VertexId>>& edges() const { return edges_; }
    bool has_edge(VertexId a, VertexId b) const;
    std::size_t vertex_count() const { return vertex_faces_.size(); }

private:
    std::vector<std::vector<std::uint32_t>> vertex_faces_;
    std::vector<std::pair<VertexId, VertexId>> edges_;
};

Mesh load_obj(std::istream& in);
Mesh load_obj_string(std::string_view text);
Mesh load_obj_file(const std::string& path);

void save_obj(const Mesh& mesh, std::ostream& out);
std::string save_obj_string(const Mesh& mesh);
void save_obj_file(const Mesh& mesh, const std::string& path);

/// Drops faces with repeated corners and exact duplicates (same index set,
/// any rotation or winding); the first occurrence survives.
Mesh cleanup(const Mesh& mesh);
std::vector<Face> cleanup_faces(const std::vector<Face>& faces);

/// Half the diagonal of the axis-aligned bounding box.
double bounding_radius(const Mesh& mesh);

Box3 bounding_box(const Mesh& mesh);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace meshforge
