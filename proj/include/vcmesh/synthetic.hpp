#pragma once

#include <cstdint>

#include "vcmesh/mesh.hpp"

namespace vcmesh {

// Unit-sphere triangulation by icosahedron midpoint subdivision:
// 12, 42, 162, 642, ... vertices.
LoadedMesh make_icosphere(int subdivisions);

// Triangulated unit square with cells_per_side quads per edge,
// (n+1)^2 vertices.
LoadedMesh make_grid(int cells_per_side);

// Per sample, every vertex moves by the sum of 3 random low-frequency
// sinusoidal fields; their combined amplitude is `amplitude` times the
// bounding-box diagonal. Fixed topology, reproducible by seed; every sample
// is marked Train.
MeshDataset synthesize_deformations(const LoadedMesh& base, int samples, uint64_t seed,
                                    double amplitude = 0.1);

}  // namespace vcmesh
