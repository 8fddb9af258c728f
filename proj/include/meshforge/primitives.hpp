#pragma once

#include "meshforge/mesh.hpp"

namespace meshforge {

// Closed test solids, outward-facing.
Mesh make_tetrahedron();
Mesh make_cube(double half_size = 0.5);
Mesh make_octahedron(double radius = 1.0);

/// Subdivided icosahedron projected onto a sphere: 20 * 4^subdivisions faces.
Mesh make_icosphere(int subdivisions, double radius = 1.0);

/// Torus grid with 2 * rings * segments faces.
Mesh make_torus(int rings, int segments, double major_radius = 1.0, double minor_radius = 0.35);

}  // namespace meshforge
