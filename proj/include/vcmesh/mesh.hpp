#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcmesh/tensor.hpp"

namespace vcmesh {

// Undirected vertex adjacency of a mesh. Every layer in the network operates
// on this graph view; faces/cells are only consumed while building it.
class MeshTopology {
public:
    MeshTopology() = default;

    // Takes ownership of adjacency lists; sorts, dedupes, strips self-loops
    // and enforces symmetry. Throws InputError on out-of-range indices.
    MeshTopology(int num_vertices, std::vector<std::vector<int>> adjacency);

    int num_vertices() const { return num_vertices_; }
    const std::vector<int>& neighbors(int v) const { return adjacency_[static_cast<size_t>(v)]; }
    const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }
    int degree(int v) const { return static_cast<int>(adjacency_[static_cast<size_t>(v)].size()); }
    int64_t edge_count() const;
    bool has_edge(int a, int b) const;

private:
    int num_vertices_ = 0;
    std::vector<std::vector<int>> adjacency_;  // sorted ascending, no self-loops, symmetric
};

// Per-vertex real-valued channels; one row per vertex of the owning topology.
struct VertexFeatures {
    Tensor values;          // V x C
    std::string semantics;  // e.g. "position-xyz"
};

enum class Split : uint8_t { Train = 0, Val = 1, Test = 2 };

// Registered mesh samples: a single shared topology, many per-vertex signals.
struct MeshDataset {
    MeshTopology topology;
    std::vector<Tensor> samples;  // each V x C
    std::vector<Split> splits;    // one per sample

    std::vector<int> indices_of(Split s) const;
};

// A mesh as read from disk: graph + positions + the original cells
// (kept so outputs can be written with the source connectivity).
struct LoadedMesh {
    MeshTopology topology;
    Tensor positions;                     // V x 3
    std::vector<std::vector<int>> cells;  // 0-based
};

// Every cell induces a clique among its vertices, so triangles, quads and
// tetrahedra all reduce to the same rule.
MeshTopology build_topology_from_cells(int num_vertices, const std::vector<std::vector<int>>& cells);

LoadedMesh load_obj(const std::string& path);
LoadedMesh load_cells(const std::string& path);
LoadedMesh load_mesh(const std::string& path);  // sniffs the format from the first record
void save_obj(const std::string& path, const Tensor& positions, const std::vector<std::vector<int>>& faces);
void save_cells(const std::string& path, const Tensor& positions, const std::vector<std::vector<int>>& cells);

// All vertices within graph distance k of v, v included. Sorted ascending.
std::vector<int> k_ring(const MeshTopology& topology, int v, int k);

// Component labels 0..C-1, numbered by each component's smallest vertex.
std::vector<int> connected_components(const MeshTopology& topology);
int component_count(const MeshTopology& topology);

// Adds one edge between the closest vertex pair of every pair of components
// whose minimum distance is <= threshold; repeats until connected or no pair
// qualifies. Ties break toward the lexicographically smallest vertex pair.
MeshTopology bridge_components(const MeshTopology& topology, const Tensor& positions, double threshold);

}  // namespace vcmesh
