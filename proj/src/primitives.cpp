#include "meshforge/primitives.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace meshforge {

Mesh make_tetrahedron()
{
    return {{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}},
            {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}}};
}

Mesh make_cube(double h)
{
    Mesh m;
    for (int i = 0; i < 8; ++i) {
        m.positions.push_back({i & 1 ? h : -h, i & 2 ? h : -h, i & 4 ? h : -h});
    }
    // Quads listed counter-clockwise from outside, split along one diagonal.
    const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
    for (const auto& q : quads) {
        m.faces.push_back({VertexId(q[0]), VertexId(q[1]), VertexId(q[2])});
        m.faces.push_back({VertexId(q[0]), VertexId(q[2]), VertexId(q[3])});
    }
    return m;
}

Mesh make_octahedron(double r)
{
    return {{{r, 0, 0}, {-r, 0, 0}, {0, r, 0}, {0, -r, 0}, {0, 0, r}, {0, 0, -r}},
            {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}}};
}

Mesh make_icosphere(int subdivisions, double radius)
{
    if (subdivisions < 0) throw std::invalid_argument("negative subdivision count");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    m.positions = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (Vec3& p : m.positions) p = normalized(p);

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<VertexId, VertexId>, VertexId> midpoints;
        auto midpoint = [&](VertexId a, VertexId b) {
            const auto key = std::minmax(a, b);
            auto [it, inserted] = midpoints.try_emplace({key.first, key.second}, VertexId(m.positions.size()));
            if (inserted) m.positions.push_back(normalized(m.positions[a] + m.positions[b]));
            return it->second;
        };
        std::vector<Face> faces;
        faces.reserve(m.faces.size() * 4);
        for (const Face& f : m.faces) {
            const VertexId ab = midpoint(f[0], f[1]);
            const VertexId bc = midpoint(f[1], f[2]);
            const VertexId ca = midpoint(f[2], f[0]);
            faces.push_back({f[0], ab, ca});
            faces.push_back({f[1], bc, ab});
            faces.push_back({f[2], ca, bc});
            faces.push_back({ab, bc, ca});
        }
        m.faces = std::move(faces);
    }
    for (Vec3& p : m.positions) p *= radius;
    return m;
}

Mesh make_torus(int rings, int segments, double major_radius, double minor_radius)
{
    if (rings < 3 || segments < 3) throw std::invalid_argument("torus needs at least 3 rings and segments");
    Mesh m;
    for (int i = 0; i < rings; ++i) {
        const double u = 2.0 * std::numbers::pi * i / rings;
        for (int j = 0; j < segments; ++j) {
            const double v = 2.0 * std::numbers::pi * j / segments;
            const double r = major_radius + minor_radius * std::cos(v);
            m.positions.push_back({r * std::cos(u), r * std::sin(u), minor_radius * std::sin(v)});
        }
    }
    auto id = [&](int i, int j) { return VertexId((i % rings) * segments + (j % segments)); };
    for (int i = 0; i < rings; ++i) {
        for (int j = 0; j < segments; ++j) {
            const VertexId a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            m.faces.push_back({a, b, c});
            m.faces.push_back({a, c, d});
        }
    }
    return m;
}

}  // namespace meshforge
