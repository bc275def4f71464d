#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>

#include "vcmesh/error.hpp"
#include "vcmesh/mesh.hpp"
#include "vcmesh/model.hpp"
#include "vcmesh/sampling.hpp"
#include "vcmesh/serialize.hpp"
#include "vcmesh/synthetic.hpp"

namespace py = pybind11;
using namespace vcmesh;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_array(const DoubleArray& arr) {
    if (arr.ndim() != 2) throw InputError("expected a 2D array of doubles");
    Tensor t({arr.shape(0), arr.shape(1)});
    std::memcpy(t.data(), arr.data(), sizeof(double) * static_cast<size_t>(t.numel()));
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    if (t.rank() != 2) throw InputError("only 2D tensors cross the boundary");
    py::array_t<double> arr({t.dim(0), t.dim(1)});
    std::memcpy(arr.mutable_data(), t.data(), sizeof(double) * static_cast<size_t>(t.numel()));
    return arr;
}

std::vector<LevelSpec> parse_levels(const py::object& levels) {
    std::vector<LevelSpec> specs;
    for (py::handle item : levels) {
        py::sequence seq = py::cast<py::sequence>(item);
        if (seq.size() < 2 || seq.size() > 3)
            throw InputError("each level is (stride, radius) or (stride, radius, pinned)");
        LevelSpec spec;
        spec.stride = py::cast<int>(seq[0]);
        spec.radius = py::cast<int>(seq[1]);
        if (seq.size() == 3) spec.pinned = py::cast<std::vector<int>>(seq[2]);
        specs.push_back(std::move(spec));
    }
    if (specs.empty()) throw InputError("need at least one level");
    return specs;
}

// model + optimizer state, so training can continue across calls
struct PyModel {
    AutoencoderModel model;
    TrainerState state;

    explicit PyModel(AutoencoderModel m) : model(std::move(m)) {}
};

MeshDataset dataset_from_samples(const MeshTopology& topology, const py::list& samples) {
    MeshDataset data;
    data.topology = topology;
    for (py::handle s : samples) {
        data.samples.push_back(tensor_from_array(py::cast<DoubleArray>(s)));
        data.splits.push_back(Split::Train);
    }
    if (data.samples.empty()) throw InputError("need at least one sample");
    return data;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fully convolutional mesh autoencoder core";
    m.attr("__version__") = "0.1.0";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<MeshTopology>(m, "Topology")
        .def(py::init([](int num_vertices, const std::vector<std::vector<int>>& cells) {
                 return build_topology_from_cells(num_vertices, cells);
             }),
             py::arg("num_vertices"), py::arg("cells"))
        .def_property_readonly("num_vertices", &MeshTopology::num_vertices)
        .def_property_readonly("edge_count", &MeshTopology::edge_count)
        .def("neighbors",
             [](const MeshTopology& t, int v) { return t.neighbors(v); })
        .def("degree", &MeshTopology::degree)
        .def("k_ring", [](const MeshTopology& t, int v, int k) { return k_ring(t, v, k); },
             py::arg("v"), py::arg("k"))
        .def("component_count", [](const MeshTopology& t) { return component_count(t); })
        .def("__repr__", [](const MeshTopology& t) {
            return "Topology(" + std::to_string(t.num_vertices()) + " vertices, " +
                   std::to_string(t.edge_count()) + " edges)";
        });

    py::class_<SamplingHierarchy>(m, "Hierarchy")
        .def_property_readonly("depth", &SamplingHierarchy::depth)
        .def_property_readonly("fingerprint",
                               [](const SamplingHierarchy& h) { return hierarchy_fingerprint(h); })
        .def_property_readonly("vertex_counts",
                               [](const SamplingHierarchy& h) {
                                   std::vector<int> counts{h.base().num_vertices()};
                                   for (int i = 0; i < h.depth(); ++i)
                                       counts.push_back(h.level(i).coarse.num_vertices());
                                   return counts;
                               })
        .def("receptive_field",
             [](const SamplingHierarchy& h, int latent_vertex) {
                 return receptive_field(h, latent_vertex).base_vertices;
             },
             py::arg("latent_vertex"))
        .def("save",
             [](const SamplingHierarchy& h, const std::string& path) { save_hierarchy(h, path); },
             py::arg("path"))
        .def("__repr__", [](const SamplingHierarchy& h) {
            return "Hierarchy(depth " + std::to_string(h.depth()) + ", " +
                   std::to_string(h.base().num_vertices()) + " -> " +
                   std::to_string(h.coarsest_vertex_count()) + " vertices)";
        });

    m.def("build_hierarchy",
          [](const MeshTopology& base, const py::object& levels, uint64_t seed) {
              return build_hierarchy(base, parse_levels(levels), seed);
          },
          py::arg("topology"), py::arg("levels"), py::arg("seed") = 0,
          "Coarsen a topology; levels is a list of (stride, radius[, pinned]) tuples.");
    m.def("load_hierarchy", &load_hierarchy, py::arg("path"));

    py::class_<LatentCode>(m, "Latent")
        .def(py::init([](const DoubleArray& values, uint64_t fingerprint) {
                 return LatentCode{tensor_from_array(values), fingerprint};
             }),
             py::arg("values"), py::arg("fingerprint"))
        .def_property(
            "values", [](const LatentCode& c) { return array_from_tensor(c.values); },
            [](LatentCode& c, const DoubleArray& v) { c.values = tensor_from_array(v); })
        .def_readonly("fingerprint", &LatentCode::fingerprint)
        .def("save", [](const LatentCode& c, const std::string& path) { save_latent(path, c); },
             py::arg("path"));
    m.def("load_latent", &load_latent, py::arg("path"));
    m.def("interpolate",
          [](const LatentCode& source, const LatentCode& target, const std::vector<int>& subset,
             double t) { return interpolate_latent(source, target, subset, t); },
          py::arg("source"), py::arg("target"), py::arg("subset"), py::arg("t"));
    m.def("mix",
          [](const LatentCode& base, const LatentCode& donor, const std::vector<int>& subset) {
              return mix_latent(base, donor, subset);
          },
          py::arg("base"), py::arg("donor"), py::arg("subset"));

    py::class_<PyModel>(m, "Model")
        .def_property_readonly("param_count", [](const PyModel& p) { return p.model.param_count(); })
        .def_property_readonly("channels", [](const PyModel& p) { return p.model.channel_plan(); })
        .def_property_readonly("basis_sizes", [](const PyModel& p) { return p.model.m_plan(); })
        .def_property_readonly("latent_vertices",
                               [](const PyModel& p) { return p.model.latent_vertices(); })
        .def_property_readonly("latent_channels",
                               [](const PyModel& p) { return p.model.latent_channels(); })
        .def_property_readonly("fingerprint", [](const PyModel& p) { return p.model.fingerprint(); })
        .def_property_readonly("epoch", [](const PyModel& p) { return p.state.epoch; })
        .def("encode", [](PyModel& p, const DoubleArray& x) { return p.model.encode(tensor_from_array(x)); },
             py::arg("x"))
        .def("decode",
             [](PyModel& p, const LatentCode& code) { return array_from_tensor(p.model.decode(code)); },
             py::arg("code"))
        .def("reconstruct",
             [](PyModel& p, const DoubleArray& x) {
                 return array_from_tensor(p.model.reconstruct(tensor_from_array(x)));
             },
             py::arg("x"))
        .def("train",
             [](PyModel& p, const py::list& samples, int epochs, int batch_size, double lr,
                double decay, double l1_weight, double laplacian_weight, uint64_t seed) {
                 MeshDataset data = dataset_from_samples(p.model.hierarchy().base(), samples);
                 TrainConfig cfg;
                 cfg.epochs = epochs;
                 cfg.batch_size = batch_size;
                 cfg.lr = lr;
                 cfg.decay = decay;
                 cfg.l1_weight = l1_weight;
                 cfg.laplacian_weight = laplacian_weight;
                 cfg.seed = seed;
                 TrainResult r;
                 {
                     py::gil_scoped_release release;
                     r = train(p.model, data, cfg, &p.state);
                 }
                 py::dict out;
                 out["initial_train_l1"] = r.initial_train_l1;
                 out["final_train_l1"] = r.final_train_l1;
                 out["epoch_train_l1"] = r.epoch_train_l1;
                 out["step_l1"] = r.step_l1;
                 out["step_loss"] = r.step_loss;
                 out["epochs_run"] = r.epochs_run;
                 return out;
             },
             py::arg("samples"), py::arg("epochs") = 1, py::arg("batch_size") = 16,
             py::arg("lr") = 1e-4, py::arg("decay") = 0.9, py::arg("l1_weight") = 1.0,
             py::arg("laplacian_weight") = 0.0, py::arg("seed") = 0)
        .def("save",
             [](const PyModel& p, const std::string& path) { save_checkpoint(path, p.model, p.state); },
             py::arg("path"))
        .def("__repr__", [](const PyModel& p) {
            return "Model(" + std::to_string(p.model.param_count()) + " parameters, latent " +
                   std::to_string(p.model.latent_vertices()) + " x " +
                   std::to_string(p.model.latent_channels()) + ")";
        });

    m.def("build_model",
          [](const SamplingHierarchy& hierarchy, const std::vector<int>& channels,
             const std::vector<int>& basis_sizes, bool residual, bool normalize_basis,
             uint64_t seed) {
              BuildOptions opts;
              opts.m_plan = basis_sizes;
              opts.use_residual = residual;
              opts.normalize_basis = normalize_basis;
              opts.init_seed = seed;
              return std::make_unique<PyModel>(build_autoencoder(hierarchy, channels, opts));
          },
          py::arg("hierarchy"), py::arg("channels"), py::arg("basis_sizes") = std::vector<int>{},
          py::arg("residual") = true, py::arg("normalize_basis") = false, py::arg("seed") = 0,
          "Build an autoencoder; channels has 2*depth+1 entries, empty basis_sizes = auto.");
    m.def("load_model",
          [](const std::string& path, const SamplingHierarchy& hierarchy) {
              TrainerState state;
              AutoencoderModel model = load_checkpoint(path, hierarchy, &state);
              auto p = std::make_unique<PyModel>(std::move(model));
              p->state = std::move(state);
              return p;
          },
          py::arg("path"), py::arg("hierarchy"));

    m.def("load_mesh",
          [](const std::string& path) {
              LoadedMesh mesh = load_mesh(path);
              return py::make_tuple(array_from_tensor(mesh.positions), mesh.cells);
          },
          py::arg("path"), "Read an .obj or cell-list mesh; returns (positions, cells).");
    m.def("save_obj",
          [](const std::string& path, const DoubleArray& positions,
             const std::vector<std::vector<int>>& cells) {
              save_obj(path, tensor_from_array(positions), cells);
          },
          py::arg("path"), py::arg("positions"), py::arg("cells"));
    m.def("make_icosphere",
          [](int subdivisions) {
              LoadedMesh mesh = make_icosphere(subdivisions);
              return py::make_tuple(array_from_tensor(mesh.positions), mesh.cells);
          },
          py::arg("subdivisions") = 0);
    m.def("make_grid",
          [](int cells_per_side) {
              LoadedMesh mesh = make_grid(cells_per_side);
              return py::make_tuple(array_from_tensor(mesh.positions), mesh.cells);
          },
          py::arg("cells_per_side"));
    m.def("synthesize",
          [](const DoubleArray& positions, const std::vector<std::vector<int>>& cells, int samples,
             uint64_t seed, double amplitude) {
              LoadedMesh base;
              base.positions = tensor_from_array(positions);
              base.cells = cells;
              base.topology = build_topology_from_cells(static_cast<int>(base.positions.rows()), cells);
              MeshDataset data = synthesize_deformations(base, samples, seed, amplitude);
              py::list out;
              for (const Tensor& t : data.samples) out.append(array_from_tensor(t));
              return out;
          },
          py::arg("positions"), py::arg("cells"), py::arg("samples"), py::arg("seed") = 0,
          py::arg("amplitude") = 0.1,
          "Deform a base mesh into a list of smooth synthetic samples.");
}
