#include "vcmesh/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "vcmesh/error.hpp"

namespace vcmesh {

MeshTopology::MeshTopology(int num_vertices, std::vector<std::vector<int>> adjacency)
    : num_vertices_(num_vertices), adjacency_(std::move(adjacency)) {
    if (static_cast<int>(adjacency_.size()) != num_vertices_)
        throw InputError("adjacency list count does not match vertex count");
    for (int v = 0; v < num_vertices_; ++v) {
        auto& row = adjacency_[static_cast<size_t>(v)];
        for (int u : row) {
            if (u < 0 || u >= num_vertices_) throw InputError("neighbor index out of range");
        }
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        row.erase(std::remove(row.begin(), row.end(), v), row.end());
    }
    // enforce symmetry
    for (int v = 0; v < num_vertices_; ++v) {
        for (int u : adjacency_[static_cast<size_t>(v)]) {
            auto& back = adjacency_[static_cast<size_t>(u)];
            if (!std::binary_search(back.begin(), back.end(), v)) {
                back.insert(std::upper_bound(back.begin(), back.end(), v), v);
            }
        }
    }
}

int64_t MeshTopology::edge_count() const {
    int64_t twice = 0;
    for (const auto& row : adjacency_) twice += static_cast<int64_t>(row.size());
    return twice / 2;
}

bool MeshTopology::has_edge(int a, int b) const {
    const auto& row = adjacency_[static_cast<size_t>(a)];
    return std::binary_search(row.begin(), row.end(), b);
}

std::vector<int> MeshDataset::indices_of(Split s) const {
    std::vector<int> out;
    for (size_t i = 0; i < splits.size(); ++i) {
        if (splits[i] == s) out.push_back(static_cast<int>(i));
    }
    return out;
}

MeshTopology build_topology_from_cells(int num_vertices, const std::vector<std::vector<int>>& cells) {
    std::vector<std::vector<int>> adj(static_cast<size_t>(num_vertices));
    for (const auto& cell : cells) {
        if (cell.size() < 2) throw InputError("cell with fewer than 2 vertices");
        for (int idx : cell) {
            if (idx < 0 || idx >= num_vertices) throw InputError("cell vertex index out of range");
        }
        for (size_t a = 0; a < cell.size(); ++a) {
            for (size_t b = a + 1; b < cell.size(); ++b) {
                if (cell[a] == cell[b]) continue;
                adj[static_cast<size_t>(cell[a])].push_back(cell[b]);
                adj[static_cast<size_t>(cell[b])].push_back(cell[a]);
            }
        }
    }
    return MeshTopology(num_vertices, std::move(adj));
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& what) {
    std::ostringstream os;
    os << path << ":" << line_no << ": " << what;
    throw ParseError(os.str());
}

bool parse_double(const std::string& tok, double& out) {
    try {
        size_t used = 0;
        out = std::stod(tok, &used);
        return used == tok.size();
    } catch (...) {
        return false;
    }
}

bool parse_int(const std::string& tok, long& out) {
    auto first = tok.data();
    auto last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream is(line);
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

}  // namespace

LoadedMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open mesh file: " + path);

    std::vector<double> coords;
    std::vector<std::vector<int>> faces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto toks = split_ws(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks[0] == "v") {
            if (toks.size() < 4) parse_fail(path, line_no, "vertex record needs 3 coordinates");
            for (int k = 1; k <= 3; ++k) {
                double x;
                if (!parse_double(toks[static_cast<size_t>(k)], x))
                    parse_fail(path, line_no, "bad vertex coordinate '" + toks[static_cast<size_t>(k)] + "'");
                coords.push_back(x);
            }
        } else if (toks[0] == "f") {
            if (toks.size() < 3) parse_fail(path, line_no, "face record needs at least 2 indices");
            std::vector<int> face;
            for (size_t k = 1; k < toks.size(); ++k) {
                // vertex/texcoord/normal forms: keep the part before the first '/'
                std::string head = toks[k].substr(0, toks[k].find('/'));
                long idx;
                if (!parse_int(head, idx)) parse_fail(path, line_no, "bad face index '" + toks[k] + "'");
                long nv = static_cast<long>(coords.size() / 3);
                if (idx < 1 || idx > nv) {
                    std::ostringstream os;
                    os << "face index " << idx << " out of range (mesh has " << nv << " vertices so far) at "
                       << path << ":" << line_no;
                    throw InputError(os.str());
                }
                face.push_back(static_cast<int>(idx - 1));
            }
            faces.push_back(std::move(face));
        }
        // vn / vt / usemtl / o / g / s / mtllib are ignored
    }

    int nv = static_cast<int>(coords.size() / 3);
    LoadedMesh mesh;
    mesh.positions = Tensor::from({nv, 3}, std::move(coords));
    mesh.topology = build_topology_from_cells(nv, faces);
    mesh.cells = std::move(faces);
    return mesh;
}

// Plain-text cell format for tet and other non-surface meshes:
//   verts N cells M celltype T
//   x y z               (N lines)
//   i0 i1 ... i(T-1)    (M lines, 0-based)
LoadedMesh load_cells(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open mesh file: " + path);

    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) parse_fail(path, 1, "missing header");
    ++line_no;
    auto head = split_ws(line);
    long nv = 0, nc = 0, arity = 0;
    if (head.size() != 6 || head[0] != "verts" || head[2] != "cells" || head[4] != "celltype" ||
        !parse_int(head[1], nv) || !parse_int(head[3], nc) || !parse_int(head[5], arity))
        parse_fail(path, line_no, "expected header 'verts N cells M celltype T'");
    if (nv < 0 || nc < 0 || arity < 2) parse_fail(path, line_no, "bad header counts");

    std::vector<double> coords;
    coords.reserve(static_cast<size_t>(nv) * 3);
    for (long i = 0; i < nv; ++i) {
        if (!std::getline(in, line)) parse_fail(path, line_no + 1, "unexpected end of file in positions");
        ++line_no;
        auto toks = split_ws(line);
        if (toks.size() != 3) parse_fail(path, line_no, "position line needs 3 coordinates");
        for (const auto& t : toks) {
            double x;
            if (!parse_double(t, x)) parse_fail(path, line_no, "bad coordinate '" + t + "'");
            coords.push_back(x);
        }
    }

    std::vector<std::vector<int>> cells;
    cells.reserve(static_cast<size_t>(nc));
    for (long i = 0; i < nc; ++i) {
        if (!std::getline(in, line)) parse_fail(path, line_no + 1, "unexpected end of file in cells");
        ++line_no;
        auto toks = split_ws(line);
        if (static_cast<long>(toks.size()) != arity) parse_fail(path, line_no, "cell line arity mismatch");
        std::vector<int> cell;
        for (const auto& t : toks) {
            long idx;
            if (!parse_int(t, idx)) parse_fail(path, line_no, "bad cell index '" + t + "'");
            if (idx < 0 || idx >= nv) throw InputError("cell index out of range at " + path + ":" + std::to_string(line_no));
            cell.push_back(static_cast<int>(idx));
        }
        cells.push_back(std::move(cell));
    }

    LoadedMesh mesh;
    mesh.positions = Tensor::from({nv, 3}, std::move(coords));
    mesh.topology = build_topology_from_cells(static_cast<int>(nv), cells);
    mesh.cells = std::move(cells);
    return mesh;
}

LoadedMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open mesh file: " + path);
    std::string first;
    std::getline(in, first);
    in.close();
    if (first.rfind("verts ", 0) == 0) return load_cells(path);
    return load_obj(path);
}

void save_obj(const std::string& path, const Tensor& positions, const std::vector<std::vector<int>>& faces) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write mesh file: " + path);
    out.precision(12);
    int64_t nv = positions.rows();
    for (int64_t v = 0; v < nv; ++v) {
        out << "v " << positions(v, 0) << " " << positions(v, 1) << " " << positions(v, 2) << "\n";
    }
    for (const auto& f : faces) {
        out << "f";
        for (int idx : f) out << " " << idx + 1;
        out << "\n";
    }
}

void save_cells(const std::string& path, const Tensor& positions, const std::vector<std::vector<int>>& cells) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write mesh file: " + path);
    out.precision(12);
    size_t arity = cells.empty() ? 2 : cells[0].size();
    out << "verts " << positions.rows() << " cells " << cells.size() << " celltype " << arity << "\n";
    for (int64_t v = 0; v < positions.rows(); ++v)
        out << positions(v, 0) << " " << positions(v, 1) << " " << positions(v, 2) << "\n";
    for (const auto& c : cells) {
        for (size_t k = 0; k < c.size(); ++k) out << (k ? " " : "") << c[k];
        out << "\n";
    }
}

std::vector<int> k_ring(const MeshTopology& topology, int v, int k) {
    if (v < 0 || v >= topology.num_vertices()) throw InputError("k_ring: vertex out of range");
    if (k < 0) throw InputError("k_ring: negative radius");
    std::vector<int> dist(static_cast<size_t>(topology.num_vertices()), -1);
    std::queue<int> q;
    dist[static_cast<size_t>(v)] = 0;
    q.push(v);
    std::vector<int> out{v};
    while (!q.empty()) {
        int cur = q.front();
        q.pop();
        if (dist[static_cast<size_t>(cur)] == k) continue;
        for (int nb : topology.neighbors(cur)) {
            if (dist[static_cast<size_t>(nb)] < 0) {
                dist[static_cast<size_t>(nb)] = dist[static_cast<size_t>(cur)] + 1;
                out.push_back(nb);
                q.push(nb);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> connected_components(const MeshTopology& topology) {
    int n = topology.num_vertices();
    std::vector<int> label(static_cast<size_t>(n), -1);
    int next = 0;
    for (int start = 0; start < n; ++start) {
        if (label[static_cast<size_t>(start)] >= 0) continue;
        label[static_cast<size_t>(start)] = next;
        std::queue<int> q;
        q.push(start);
        while (!q.empty()) {
            int cur = q.front();
            q.pop();
            for (int nb : topology.neighbors(cur)) {
                if (label[static_cast<size_t>(nb)] < 0) {
                    label[static_cast<size_t>(nb)] = next;
                    q.push(nb);
                }
            }
        }
        ++next;
    }
    return label;
}

int component_count(const MeshTopology& topology) {
    auto labels = connected_components(topology);
    int c = 0;
    for (int l : labels) c = std::max(c, l + 1);
    return c;
}

MeshTopology bridge_components(const MeshTopology& topology, const Tensor& positions, double threshold) {
    if (positions.rank() != 2 || positions.dim(1) != 3)
        throw InputError("bridge_components: positions must have 3 channels");
    if (positions.rows() != topology.num_vertices())
        throw InputError("bridge_components: positions row count mismatch");

    auto adj = topology.adjacency();
    int n = topology.num_vertices();
    auto dist2 = [&](int a, int b) {
        double s = 0;
        for (int c = 0; c < 3; ++c) {
            double d = positions(a, c) - positions(b, c);
            s += d * d;
        }
        return s;
    };

    double thr2 = threshold * threshold;
    while (true) {
        MeshTopology current(n, adj);
        auto labels = connected_components(current);
        int ncomp = 0;
        for (int l : labels) ncomp = std::max(ncomp, l + 1);
        if (ncomp <= 1) return current;

        // closest vertex pair per component pair; lexicographically smallest pair wins ties
        struct Best {
            double d2 = std::numeric_limits<double>::infinity();
            int a = -1, b = -1;
        };
        std::vector<Best> best(static_cast<size_t>(ncomp) * static_cast<size_t>(ncomp));
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                int ca = labels[static_cast<size_t>(a)], cb = labels[static_cast<size_t>(b)];
                if (ca == cb) continue;
                int lo = std::min(ca, cb), hi = std::max(ca, cb);
                auto& slot = best[static_cast<size_t>(lo) * static_cast<size_t>(ncomp) + static_cast<size_t>(hi)];
                double d2 = dist2(a, b);
                if (d2 < slot.d2) {
                    slot.d2 = d2;
                    slot.a = a;
                    slot.b = b;
                }
            }
        }

        bool added = false;
        for (const auto& slot : best) {
            if (slot.a >= 0 && slot.d2 <= thr2) {
                adj[static_cast<size_t>(slot.a)].push_back(slot.b);
                adj[static_cast<size_t>(slot.b)].push_back(slot.a);
                added = true;
            }
        }
        if (!added) return current;
    }
}

}  // namespace vcmesh
