#include "vcmesh/sampling.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <stdexcept>

#include "vcmesh/error.hpp"
#include "vcmesh/rng.hpp"

namespace vcmesh {

namespace {

// Distances from source, truncated at max_depth; -1 where unreached.
std::vector<int> bounded_distances(const MeshTopology& t, int source, int max_depth) {
    std::vector<int> dist(static_cast<size_t>(t.num_vertices()), -1);
    dist[static_cast<size_t>(source)] = 0;
    std::deque<int> frontier{source};
    while (!frontier.empty()) {
        int v = frontier.front();
        frontier.pop_front();
        int dv = dist[static_cast<size_t>(v)];
        if (dv == max_depth) continue;
        for (int w : t.neighbors(v)) {
            if (dist[static_cast<size_t>(w)] < 0) {
                dist[static_cast<size_t>(w)] = dv + 1;
                frontier.push_back(w);
            }
        }
    }
    return dist;
}

void check_stride_radius(int stride, int radius) {
    if (stride < 1) throw InputError("sampling stride must be >= 1");
    if (radius < 0) throw InputError("sampling radius must be >= 0");
}

}  // namespace

SamplingMap::SamplingMap(MapDirection direction, int stride, int radius, int in_vertices,
                         std::vector<std::vector<int>> rows)
    : direction_(direction), stride_(stride), radius_(radius), in_vertices_(in_vertices) {
    check_stride_radius(stride, radius);
    if (in_vertices < 0) throw InputError("sampling map input size must be >= 0");
    offsets_.reserve(rows.size() + 1);
    offsets_.push_back(0);
    for (size_t i = 0; i < rows.size(); ++i) {
        auto& row = rows[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        for (int v : row) {
            if (v < 0 || v >= in_vertices)
                throw InputError("sampling map row entry out of range");
            indices_.push_back(v);
            owners_.push_back(static_cast<int>(i));
        }
        offsets_.push_back(static_cast<int>(indices_.size()));
    }
}

std::vector<int> SamplingMap::row(int i) const {
    if (i < 0 || i >= out_vertices()) throw InputError("sampling map row index out of range");
    return std::vector<int>(indices_.begin() + offsets_[static_cast<size_t>(i)],
                            indices_.begin() + offsets_[static_cast<size_t>(i) + 1]);
}

int SamplingMap::max_row_size() const {
    int m = 0;
    for (int i = 0; i < out_vertices(); ++i) m = std::max(m, row_size(i));
    return m;
}

double SamplingMap::mean_row_size() const {
    if (out_vertices() == 0) return 0.0;
    return static_cast<double>(total_slots()) / static_cast<double>(out_vertices());
}

void SamplingMap::to_dense(std::vector<int32_t>& table, std::vector<uint8_t>& mask) const {
    int n = out_vertices();
    int w = max_row_size();
    table.assign(static_cast<size_t>(n) * static_cast<size_t>(w), -1);
    mask.assign(static_cast<size_t>(n) * static_cast<size_t>(w), 0);
    for (int i = 0; i < n; ++i) {
        int begin = offsets_[static_cast<size_t>(i)];
        for (int k = 0; k < row_size(i); ++k) {
            size_t cell = static_cast<size_t>(i) * static_cast<size_t>(w) + static_cast<size_t>(k);
            table[cell] = indices_[static_cast<size_t>(begin + k)];
            mask[cell] = 1;
        }
    }
}

SamplingMap SamplingMap::from_dense(MapDirection direction, int stride, int radius, int in_vertices,
                                    int out_vertices, int width, const std::vector<int32_t>& table,
                                    const std::vector<uint8_t>& mask) {
    if (out_vertices < 0 || width < 0) throw InputError("dense sampling table has negative extent");
    size_t cells = static_cast<size_t>(out_vertices) * static_cast<size_t>(width);
    if (table.size() != cells || mask.size() != cells)
        throw InputError("dense sampling table size mismatch");
    std::vector<std::vector<int>> rows(static_cast<size_t>(out_vertices));
    for (int i = 0; i < out_vertices; ++i) {
        for (int k = 0; k < width; ++k) {
            size_t cell = static_cast<size_t>(i) * static_cast<size_t>(width) + static_cast<size_t>(k);
            if (mask[cell]) rows[static_cast<size_t>(i)].push_back(table[cell]);
        }
    }
    return SamplingMap(direction, stride, radius, in_vertices, std::move(rows));
}

bool SamplingMap::operator==(const SamplingMap& o) const {
    return direction_ == o.direction_ && stride_ == o.stride_ && radius_ == o.radius_ &&
           in_vertices_ == o.in_vertices_ && offsets_ == o.offsets_ && indices_ == o.indices_;
}

std::vector<int> select_vertices(const MeshTopology& topology, int stride,
                                 const std::vector<int>& pinned, uint64_t seed) {
    check_stride_radius(stride, 0);
    int n = topology.num_vertices();
    for (int p : pinned) {
        if (p < 0 || p >= n) throw InputError("pinned vertex out of range");
    }
    {
        std::vector<int> sorted = pinned;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw InputError("pinned vertices must be distinct");
    }
    for (size_t i = 0; i < pinned.size(); ++i) {
        auto dist = bounded_distances(topology, pinned[i], stride - 1);
        for (size_t j = 0; j < pinned.size(); ++j) {
            if (j != i && dist[static_cast<size_t>(pinned[j])] >= 0)
                throw InputError("pinned vertices closer than the stride");
        }
    }

    // covered = within distance stride-1 of a selected vertex
    std::vector<uint8_t> selected(static_cast<size_t>(n), 0);
    std::vector<uint8_t> covered(static_cast<size_t>(n), 0);
    std::vector<int> order;
    std::queue<int> pending;
    Rng rng(seed);

    auto take = [&](int v) {
        selected[static_cast<size_t>(v)] = 1;
        order.push_back(v);
        pending.push(v);
        auto dist = bounded_distances(topology, v, stride - 1);
        for (int w = 0; w < n; ++w)
            if (dist[static_cast<size_t>(w)] >= 0) covered[static_cast<size_t>(w)] = 1;
    };

    // a candidate is admissible if no already selected vertex sits within
    // distance stride-1 of it
    auto admissible = [&](int c) {
        auto dist = bounded_distances(topology, c, stride - 1);
        for (int w = 0; w < n; ++w)
            if (dist[static_cast<size_t>(w)] >= 0 && selected[static_cast<size_t>(w)]) return false;
        return true;
    };

    for (int p : pinned) take(p);

    while (true) {
        while (!pending.empty()) {
            int v = pending.front();
            pending.pop();
            auto dist = bounded_distances(topology, v, stride);
            for (int c = 0; c < n; ++c) {
                if (dist[static_cast<size_t>(c)] != stride) continue;
                if (covered[static_cast<size_t>(c)]) continue;
                if (admissible(c)) take(c);
            }
        }
        std::vector<int> uncovered;
        for (int v = 0; v < n; ++v)
            if (!covered[static_cast<size_t>(v)]) uncovered.push_back(v);
        if (uncovered.empty()) break;
        take(uncovered[rng.uniform_int(uncovered.size())]);
    }

    std::sort(order.begin(), order.end());
    return order;
}

MeshTopology build_coarse_topology(const MeshTopology& fine, const std::vector<int>& selected, int stride) {
    check_stride_radius(stride, 0);
    int k = static_cast<int>(selected.size());
    std::vector<int> coarse_of(static_cast<size_t>(fine.num_vertices()), -1);
    for (int c = 0; c < k; ++c) {
        int v = selected[static_cast<size_t>(c)];
        if (v < 0 || v >= fine.num_vertices()) throw InputError("selected vertex out of range");
        coarse_of[static_cast<size_t>(v)] = c;
    }
    std::vector<std::vector<int>> adj(static_cast<size_t>(k));
    int reach = 2 * stride - 1;
    for (int a = 0; a < k; ++a) {
        auto dist = bounded_distances(fine, selected[static_cast<size_t>(a)], reach);
        for (int b = a + 1; b < k; ++b) {
            if (dist[static_cast<size_t>(selected[static_cast<size_t>(b)])] >= 0) {
                adj[static_cast<size_t>(a)].push_back(b);
                adj[static_cast<size_t>(b)].push_back(a);
            }
        }
    }
    return MeshTopology(k, std::move(adj));
}

SamplingMap build_down_map(const MeshTopology& fine, const std::vector<int>& selected, int stride, int radius) {
    check_stride_radius(stride, radius);
    std::vector<std::vector<int>> rows;
    rows.reserve(selected.size());
    for (int v : selected) {
        if (v < 0 || v >= fine.num_vertices()) throw InputError("selected vertex out of range");
        rows.push_back(k_ring(fine, v, radius));
    }
    return SamplingMap(MapDirection::Down, stride, radius, fine.num_vertices(), std::move(rows));
}

SamplingMap build_up_map(const MeshTopology& fine, const std::vector<int>& selected, int stride, int radius) {
    check_stride_radius(stride, radius);
    std::vector<std::vector<int>> rows(static_cast<size_t>(fine.num_vertices()));
    for (size_t c = 0; c < selected.size(); ++c) {
        int v = selected[c];
        if (v < 0 || v >= fine.num_vertices()) throw InputError("selected vertex out of range");
        for (int f : k_ring(fine, v, radius)) rows[static_cast<size_t>(f)].push_back(static_cast<int>(c));
    }
    for (size_t f = 0; f < rows.size(); ++f) {
        if (rows[f].empty())
            throw ConfigError("up-sampling radius " + std::to_string(radius) +
                              " leaves vertex " + std::to_string(f) +
                              " without a sampled vertex in reach; increase the radius");
    }
    return SamplingMap(MapDirection::Up, stride, radius, static_cast<int>(selected.size()), std::move(rows));
}

SamplingHierarchy::SamplingHierarchy(MeshTopology base, std::vector<HierarchyLevel> levels)
    : base_(std::move(base)), levels_(std::move(levels)) {
    const MeshTopology* fine = &base_;
    for (const auto& level : levels_) {
        if (static_cast<int>(level.selected.size()) != level.coarse.num_vertices())
            throw InputError("hierarchy level selection and coarse graph disagree");
        for (int v : level.selected) {
            if (v < 0 || v >= fine->num_vertices())
                throw InputError("hierarchy level selects a vertex outside the finer graph");
        }
        if (level.down.in_vertices() != fine->num_vertices() ||
            level.down.out_vertices() != level.coarse.num_vertices() ||
            level.up.in_vertices() != level.coarse.num_vertices() ||
            level.up.out_vertices() != fine->num_vertices())
            throw InputError("hierarchy level map extents disagree with the graphs");
        fine = &level.coarse;
    }
}

int SamplingHierarchy::coarsest_vertex_count() const {
    if (levels_.empty()) return base_.num_vertices();
    return levels_.back().coarse.num_vertices();
}

std::vector<int> SamplingHierarchy::base_anchors() const {
    std::vector<int> anchors(static_cast<size_t>(coarsest_vertex_count()));
    for (size_t c = 0; c < anchors.size(); ++c) {
        int v = static_cast<int>(c);
        for (int l = depth() - 1; l >= 0; --l) v = levels_[static_cast<size_t>(l)].selected[static_cast<size_t>(v)];
        anchors[c] = v;
    }
    return anchors;
}

bool SamplingHierarchy::operator==(const SamplingHierarchy& o) const {
    if (base_.num_vertices() != o.base_.num_vertices() || base_.adjacency() != o.base_.adjacency())
        return false;
    if (levels_.size() != o.levels_.size()) return false;
    for (size_t i = 0; i < levels_.size(); ++i) {
        const auto& a = levels_[i];
        const auto& b = o.levels_[i];
        if (a.stride != b.stride || a.radius != b.radius || a.selected != b.selected) return false;
        if (a.coarse.adjacency() != b.coarse.adjacency()) return false;
        if (!(a.down == b.down) || !(a.up == b.up)) return false;
    }
    return true;
}

SamplingHierarchy build_hierarchy(const MeshTopology& base, const std::vector<LevelSpec>& specs, uint64_t seed) {
    std::vector<HierarchyLevel> levels;
    levels.reserve(specs.size());
    const MeshTopology* fine = &base;
    for (size_t i = 0; i < specs.size(); ++i) {
        const auto& spec = specs[i];
        HierarchyLevel level;
        level.stride = spec.stride;
        level.radius = spec.radius;
        try {
            level.selected = select_vertices(*fine, spec.stride, spec.pinned, seed + i);
            level.coarse = build_coarse_topology(*fine, level.selected, spec.stride);
            level.down = build_down_map(*fine, level.selected, spec.stride, spec.radius);
            level.up = build_up_map(*fine, level.selected, spec.stride, spec.radius);
        } catch (const ConfigError& e) {
            throw ConfigError("level " + std::to_string(i) + ": " + e.what());
        }
        levels.push_back(std::move(level));
        fine = &levels.back().coarse;
    }
    return SamplingHierarchy(base, std::move(levels));
}

ReceptiveField receptive_field(const SamplingHierarchy& hierarchy, int latent_vertex) {
    if (latent_vertex < 0 || latent_vertex >= hierarchy.coarsest_vertex_count())
        throw InputError("latent vertex out of range");
    std::vector<int> current{latent_vertex};
    for (int l = hierarchy.depth() - 1; l >= 0; --l) {
        const SamplingMap& up = hierarchy.level(l).up;
        std::vector<uint8_t> in_set(static_cast<size_t>(up.in_vertices()), 0);
        for (int c : current) in_set[static_cast<size_t>(c)] = 1;
        std::vector<int> next;
        for (int f = 0; f < up.out_vertices(); ++f) {
            for (int c : up.row(f)) {
                if (in_set[static_cast<size_t>(c)]) {
                    next.push_back(f);
                    break;
                }
            }
        }
        current = std::move(next);
    }
    return ReceptiveField{latent_vertex, std::move(current)};
}

}  // namespace vcmesh
