#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vcmesh/mesh.hpp"

namespace vcmesh {

enum class MapDirection : uint8_t { Down = 0, Up = 1 };

// Ragged per-output-vertex neighborhood table over an input graph. Down maps
// go fine -> coarse (one row per sampled vertex), up maps coarse -> fine (one
// row per fine vertex, listing the sampled vertices it can draw from).
// Rows are sorted ascending; coefficient tables index into rows positionally,
// so row order is part of the serialized contract.
class SamplingMap {
public:
    SamplingMap() : offsets_{0} {}
    SamplingMap(MapDirection direction, int stride, int radius, int in_vertices,
                std::vector<std::vector<int>> rows);

    MapDirection direction() const { return direction_; }
    int stride() const { return stride_; }
    int radius() const { return radius_; }
    int in_vertices() const { return in_vertices_; }
    int out_vertices() const { return static_cast<int>(offsets_.size()) - 1; }

    int row_size(int i) const { return offsets_[static_cast<size_t>(i) + 1] - offsets_[static_cast<size_t>(i)]; }
    std::vector<int> row(int i) const;
    int64_t total_slots() const { return static_cast<int64_t>(indices_.size()); }
    int max_row_size() const;
    double mean_row_size() const;

    // flat (CSR) view
    const std::vector<int>& flat_offsets() const { return offsets_; }  // size N+1
    const std::vector<int>& flat_indices() const { return indices_; }  // size total_slots
    const std::vector<int>& slot_owners() const { return owners_; }    // output row per slot

    // dense N x max(E_i) table with validity mask; vacant entries are -1
    void to_dense(std::vector<int32_t>& table, std::vector<uint8_t>& mask) const;
    static SamplingMap from_dense(MapDirection direction, int stride, int radius, int in_vertices,
                                  int out_vertices, int width, const std::vector<int32_t>& table,
                                  const std::vector<uint8_t>& mask);

    bool operator==(const SamplingMap& o) const;

private:
    MapDirection direction_;
    int stride_ = 1;
    int radius_ = 1;
    int in_vertices_ = 0;
    std::vector<int> offsets_;
    std::vector<int> indices_;
    std::vector<int> owners_;
};

struct HierarchyLevel {
    int stride = 2;
    int radius = 2;
    std::vector<int> selected;  // indices into the finer graph, ascending
    MeshTopology coarse;
    SamplingMap down;  // finer -> coarse
    SamplingMap up;    // coarse -> finer
};

struct LevelSpec {
    int stride = 2;
    int radius = 2;
    std::vector<int> pinned;  // vertices of the finer graph that must be selected
};

class SamplingHierarchy {
public:
    SamplingHierarchy() = default;
    SamplingHierarchy(MeshTopology base, std::vector<HierarchyLevel> levels);

    const MeshTopology& base() const { return base_; }
    int depth() const { return static_cast<int>(levels_.size()); }
    const HierarchyLevel& level(int i) const { return levels_[static_cast<size_t>(i)]; }
    int coarsest_vertex_count() const;

    // base-mesh vertex that each coarsest-level vertex was sampled from
    std::vector<int> base_anchors() const;

    bool operator==(const SamplingHierarchy& o) const;

private:
    MeshTopology base_;
    std::vector<HierarchyLevel> levels_;
};

// Stride-s vertex selection: pinned vertices first, then a seeded queue
// traversal that keeps selected vertices at mutual graph distance >= s while
// covering every vertex within distance s-1. Sorted ascending.
std::vector<int> select_vertices(const MeshTopology& topology, int stride,
                                 const std::vector<int>& pinned, uint64_t seed);

// Coarse edge (a, b) iff the fine counterparts are within graph distance 2s-1.
MeshTopology build_coarse_topology(const MeshTopology& fine, const std::vector<int>& selected, int stride);

SamplingMap build_down_map(const MeshTopology& fine, const std::vector<int>& selected, int stride, int radius);
SamplingMap build_up_map(const MeshTopology& fine, const std::vector<int>& selected, int stride, int radius);

SamplingHierarchy build_hierarchy(const MeshTopology& base, const std::vector<LevelSpec>& specs, uint64_t seed);

struct ReceptiveField {
    int latent_vertex = 0;
    std::vector<int> base_vertices;  // sorted ascending
};

// Base vertices a coarsest-level vertex influences, composed through the
// chain of up maps.
ReceptiveField receptive_field(const SamplingHierarchy& hierarchy, int latent_vertex);

}  // namespace vcmesh
