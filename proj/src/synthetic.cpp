#include "vcmesh/synthetic.hpp"

#include <cmath>
#include <map>
#include <utility>

#include "vcmesh/error.hpp"
#include "vcmesh/rng.hpp"

namespace vcmesh {

namespace {

constexpr double kPi = 3.14159265358979323846;

void push_unit(std::vector<double>& coords, double x, double y, double z) {
    double n = std::sqrt(x * x + y * y + z * z);
    coords.push_back(x / n);
    coords.push_back(y / n);
    coords.push_back(z / n);
}

}  // namespace

LoadedMesh make_icosphere(int subdivisions) {
    if (subdivisions < 0) throw InputError("subdivision count must be >= 0");
    double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<double> coords;
    push_unit(coords, -1, t, 0);
    push_unit(coords, 1, t, 0);
    push_unit(coords, -1, -t, 0);
    push_unit(coords, 1, -t, 0);
    push_unit(coords, 0, -1, t);
    push_unit(coords, 0, 1, t);
    push_unit(coords, 0, -1, -t);
    push_unit(coords, 0, 1, -t);
    push_unit(coords, t, 0, -1);
    push_unit(coords, t, 0, 1);
    push_unit(coords, -t, 0, -1);
    push_unit(coords, -t, 0, 1);
    std::vector<std::vector<int>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},  {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},  {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},  {9, 8, 1}};

    for (int pass = 0; pass < subdivisions; ++pass) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            int idx = static_cast<int>(coords.size() / 3);
            push_unit(coords, (coords[static_cast<size_t>(3 * a)] + coords[static_cast<size_t>(3 * b)]) / 2,
                      (coords[static_cast<size_t>(3 * a + 1)] + coords[static_cast<size_t>(3 * b + 1)]) / 2,
                      (coords[static_cast<size_t>(3 * a + 2)] + coords[static_cast<size_t>(3 * b + 2)]) / 2);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::vector<int>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int ab = mid(f[0], f[1]);
            int bc = mid(f[1], f[2]);
            int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    LoadedMesh mesh;
    int n = static_cast<int>(coords.size() / 3);
    mesh.positions = Tensor::from({n, 3}, std::move(coords));
    mesh.cells = faces;
    mesh.topology = build_topology_from_cells(n, faces);
    return mesh;
}

LoadedMesh make_grid(int cells_per_side) {
    if (cells_per_side < 1) throw InputError("grid needs at least one cell per side");
    int n = cells_per_side;
    int side = n + 1;
    std::vector<double> coords;
    coords.reserve(static_cast<size_t>(side) * side * 3);
    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            coords.push_back(static_cast<double>(i) / n);
            coords.push_back(static_cast<double>(j) / n);
            coords.push_back(0.0);
        }
    }
    std::vector<std::vector<int>> faces;
    faces.reserve(static_cast<size_t>(n) * n * 2);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            int a = j * side + i;
            int b = a + 1;
            int c = a + side;
            int d = c + 1;
            faces.push_back({a, b, d});
            faces.push_back({a, d, c});
        }
    }
    LoadedMesh mesh;
    mesh.positions = Tensor::from({side * side, 3}, std::move(coords));
    mesh.cells = faces;
    mesh.topology = build_topology_from_cells(side * side, faces);
    return mesh;
}

MeshDataset synthesize_deformations(const LoadedMesh& base, int samples, uint64_t seed,
                                    double amplitude) {
    if (samples < 0) throw InputError("sample count must be >= 0");
    if (amplitude < 0.0) throw InputError("amplitude must be >= 0");
    const Tensor& p = base.positions;
    if (p.rank() != 2 || p.dim(1) != 3) throw InputError("base positions must be V x 3");
    int n = static_cast<int>(p.dim(0));
    if (n == 0) throw InputError("base mesh has no vertices");

    double lo[3], hi[3];
    for (int c = 0; c < 3; ++c) lo[c] = hi[c] = p(0, c);
    for (int v = 1; v < n; ++v) {
        for (int c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], p(v, c));
            hi[c] = std::max(hi[c], p(v, c));
        }
    }
    double diag = std::sqrt((hi[0] - lo[0]) * (hi[0] - lo[0]) + (hi[1] - lo[1]) * (hi[1] - lo[1]) +
                            (hi[2] - lo[2]) * (hi[2] - lo[2]));
    if (diag == 0.0) diag = 1.0;

    Rng rng(seed);
    auto unit_vector = [&rng](double out[3]) {
        double z = rng.uniform(-1.0, 1.0);
        double a = rng.uniform(0.0, 2.0 * kPi);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        out[0] = r * std::cos(a);
        out[1] = r * std::sin(a);
        out[2] = z;
    };

    MeshDataset data;
    data.topology = base.topology;
    data.samples.reserve(static_cast<size_t>(samples));
    data.splits.assign(static_cast<size_t>(samples), Split::Train);
    for (int s = 0; s < samples; ++s) {
        Tensor sample = p;
        for (int field = 0; field < 3; ++field) {
            double dir[3], amp[3];
            unit_vector(dir);
            unit_vector(amp);
            double freq = rng.uniform(0.5, 1.5);
            double phase = rng.uniform(0.0, 2.0 * kPi);
            double scale = amplitude * diag / 3.0;
            for (int v = 0; v < n; ++v) {
                double proj = dir[0] * p(v, 0) + dir[1] * p(v, 1) + dir[2] * p(v, 2);
                double wave = std::sin(2.0 * kPi * freq * proj / diag + phase);
                for (int c = 0; c < 3; ++c) sample(v, c) += scale * amp[c] * wave;
            }
        }
        data.samples.push_back(std::move(sample));
    }
    return data;
}

}  // namespace vcmesh
