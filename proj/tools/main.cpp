#include "CLI11.hpp"

#include "vcmesh/autodiff.hpp"
#include "vcmesh/config.hpp"
#include "vcmesh/error.hpp"
#include "vcmesh/layers.hpp"
#include "vcmesh/mesh.hpp"
#include "vcmesh/model.hpp"
#include "vcmesh/sampling.hpp"
#include "vcmesh/serialize.hpp"
#include "vcmesh/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace vcmesh;

namespace {

// Writes positions + cells, picking the format from the output extension.
void save_mesh_like(const std::string& path, const Tensor& positions,
                    const std::vector<std::vector<int>>& cells) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    if (p.extension() == ".obj") {
        save_obj(path, positions, cells);
    } else {
        save_cells(path, positions, cells);
    }
}

void check_topology(const MeshTopology& mesh, const SamplingHierarchy& hierarchy,
                    const std::string& what) {
    if (mesh.adjacency() != hierarchy.base().adjacency())
        throw InputError(what + " does not match the hierarchy's base mesh connectivity");
}

std::vector<int> parse_vertex_list(const std::string& text, int limit) {
    std::vector<int> out;
    if (text == "all") {
        out.resize(static_cast<size_t>(limit));
        for (int i = 0; i < limit; ++i) out[static_cast<size_t>(i)] = i;
        return out;
    }
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        size_t pos = 0;
        int v;
        try {
            v = std::stoi(item, &pos);
        } catch (const std::exception&) {
            throw InputError("bad vertex list entry '" + item + "'");
        }
        if (pos != item.size()) throw InputError("bad vertex list entry '" + item + "'");
        if (v < 0 || v >= limit)
            throw InputError("vertex " + std::to_string(v) + " out of range [0, " +
                             std::to_string(limit) + ")");
        out.push_back(v);
    }
    if (out.empty()) throw InputError("empty vertex list");
    return out;
}

std::vector<int> full_channel_plan(const std::vector<int>& half) {
    // half = [base, ..., latent]; mirror the interior back down to base.
    std::vector<int> plan = half;
    for (size_t i = half.size() - 1; i-- > 0;) plan.push_back(half[i]);
    return plan;
}

std::vector<int> full_m_plan(const std::vector<int>& half, int depth) {
    if (half.empty()) return {};
    std::vector<int> plan;
    if (static_cast<int>(half.size()) == depth) {
        plan = half;
        for (int j = 0; j < depth; ++j) plan.push_back(half[static_cast<size_t>(depth - 1 - j)]);
    } else if (static_cast<int>(half.size()) == 2 * depth) {
        plan = half;
    } else {
        throw ConfigError("m plan needs " + std::to_string(depth) + " or " +
                          std::to_string(2 * depth) + " entries, got " +
                          std::to_string(half.size()));
    }
    return plan;
}

int cmd_build_hierarchy(const std::string& mesh_path, const std::vector<std::string>& level_args,
                        uint64_t seed, const std::string& out_path, double bridge_threshold) {
    LoadedMesh mesh = load_mesh(mesh_path);
    MeshTopology topo = mesh.topology;
    int comps = component_count(topo);
    if (comps > 1) {
        if (bridge_threshold > 0.0) {
            topo = bridge_components(topo, mesh.positions, bridge_threshold);
            std::printf("bridged %d components into %d\n", comps, component_count(topo));
        } else {
            std::printf("warning: mesh has %d connected components; sampling treats them independently\n",
                        comps);
        }
    }
    std::vector<LevelSpec> specs;
    specs.reserve(level_args.size());
    for (const auto& a : level_args) specs.push_back(parse_level_spec(a));
    SamplingHierarchy h = build_hierarchy(topo, specs, seed);
    save_hierarchy(h, out_path);

    std::printf("base: %d vertices, %lld edges\n", topo.num_vertices(),
                static_cast<long long>(topo.edge_count()));
    for (int i = 0; i < h.depth(); ++i) {
        const HierarchyLevel& lv = h.level(i);
        std::printf("level %d: stride %d radius %d -> %d vertices, %lld edges; "
                    "down slots mean %.2f max %d; up slots mean %.2f max %d\n",
                    i, lv.stride, lv.radius, lv.coarse.num_vertices(),
                    static_cast<long long>(lv.coarse.edge_count()),
                    lv.down.mean_row_size(), lv.down.max_row_size(), lv.up.mean_row_size(),
                    lv.up.max_row_size());
    }
    std::printf("fingerprint: %016llx\n",
                static_cast<unsigned long long>(hierarchy_fingerprint(h)));
    std::printf("saved %s\n", out_path.c_str());
    return 0;
}

MeshDataset assemble_dataset(const RunConfig& cfg, const LoadedMesh& tmpl) {
    std::vector<std::string> files = expand_glob(cfg.dataset_glob);
    if (files.empty()) throw InputError("dataset pattern matched no files: " + cfg.dataset_glob);
    MeshDataset data;
    data.topology = tmpl.topology;
    data.samples.reserve(files.size());
    for (const auto& f : files) {
        LoadedMesh m = load_mesh(f);
        if (m.topology.adjacency() != tmpl.topology.adjacency())
            throw InputError("sample connectivity differs from template: " + f);
        data.samples.push_back(m.positions);
    }
    size_t n = files.size();
    auto n_test = static_cast<size_t>(std::floor(cfg.test_fraction * static_cast<double>(n)));
    auto n_val = static_cast<size_t>(std::floor(cfg.val_fraction * static_cast<double>(n)));
    if (n_test + n_val >= n)
        throw ConfigError("val/test fractions leave no training samples");
    data.splits.assign(n, Split::Train);
    for (size_t i = 0; i < n_test; ++i) data.splits[n - 1 - i] = Split::Test;
    for (size_t i = 0; i < n_val; ++i) data.splits[n - 1 - n_test - i] = Split::Val;
    return data;
}

int cmd_train(const std::string& config_path) {
    RunConfig cfg = parse_config(config_path);
    if (cfg.template_mesh.empty()) throw ConfigError("config is missing data.template");
    if (cfg.dataset_glob.empty()) throw ConfigError("config is missing data.dataset");
    if (cfg.levels.empty()) throw ConfigError("config is missing hierarchy.levels");
    if (cfg.channels.empty()) throw ConfigError("config is missing model.channels");
    if (cfg.out_dir.empty()) throw ConfigError("config is missing output.dir");

    LoadedMesh tmpl = load_mesh(cfg.template_mesh);
    MeshDataset data = assemble_dataset(cfg, tmpl);

    int depth = static_cast<int>(cfg.levels.size());
    if (static_cast<int>(cfg.channels.size()) != depth + 1)
        throw ConfigError("model.channels needs " + std::to_string(depth + 1) +
                          " entries (base through latent), got " +
                          std::to_string(cfg.channels.size()));
    if (cfg.channels[0] != data.samples[0].cols())
        throw ConfigError("model.channels starts at " + std::to_string(cfg.channels[0]) +
                          " but samples have " + std::to_string(data.samples[0].cols()) +
                          " channels");

    SamplingHierarchy hierarchy = build_hierarchy(tmpl.topology, cfg.levels, cfg.hierarchy_seed);
    fs::create_directories(cfg.out_dir);
    save_hierarchy(hierarchy, cfg.out_dir + "/hierarchy.vmsh");

    TrainConfig tc = cfg.train;
    tc.out_dir = cfg.out_dir;

    TrainerState state;
    AutoencoderModel model = [&]() -> AutoencoderModel {
        if (cfg.resume.empty()) {
            BuildOptions opts;
            opts.m_plan = full_m_plan(cfg.m_plan, depth);
            opts.use_residual = cfg.use_residual;
            opts.normalize_basis = cfg.normalize_basis;
            opts.init_seed = tc.seed;
            fs::remove(cfg.out_dir + "/train_log.tsv");
            return build_autoencoder(hierarchy, full_channel_plan(cfg.channels), opts);
        }
        return load_checkpoint(cfg.resume, hierarchy, &state);
    }();
    if (!cfg.resume.empty())
        std::printf("resuming from %s at epoch %d\n", cfg.resume.c_str(), state.epoch);

    std::printf("model: %lld parameters, latent %d x %d\n",
                static_cast<long long>(model.param_count()), model.latent_vertices(),
                model.latent_channels());
    size_t train_n = data.indices_of(Split::Train).size();
    size_t val_n = data.indices_of(Split::Val).size();
    std::printf("dataset: %zu train, %zu val, %zu test samples\n", train_n, val_n,
                data.samples.size() - train_n - val_n);

    TrainResult result = train(model, data, tc, &state);
    std::printf("initial train L1: %.8g\n", result.initial_train_l1);
    std::printf("final train L1:   %.8g\n", result.final_train_l1);
    if (!result.epoch_val_l1.empty())
        std::printf("final val L1:     %.8g\n", result.epoch_val_l1.back());
    std::printf("checkpoint: %s/checkpoint.ckpt\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_reconstruct(const std::string& ckpt, const std::string& hier_path,
                    const std::vector<std::string>& mesh_paths, const std::string& out_dir) {
    SamplingHierarchy hierarchy = load_hierarchy(hier_path);
    AutoencoderModel model = load_checkpoint(ckpt, hierarchy);
    fs::create_directories(out_dir);
    for (const auto& path : mesh_paths) {
        LoadedMesh m = load_mesh(path);
        check_topology(m.topology, hierarchy, path);
        if (m.positions.cols() != model.in_channels())
            throw InputError(path + ": expected " + std::to_string(model.in_channels()) +
                             " channels, got " + std::to_string(m.positions.cols()));
        Tensor recon = model.reconstruct(m.positions);
        double err = 0.0;
        for (int64_t i = 0; i < recon.rows(); ++i) {
            double d2 = 0.0;
            for (int64_t j = 0; j < recon.cols(); ++j) {
                double d = recon(i, j) - m.positions(i, j);
                d2 += d * d;
            }
            err += std::sqrt(d2);
        }
        err /= static_cast<double>(recon.rows());
        std::string stem = fs::path(path).stem().string();
        std::string out = out_dir + "/" + stem + "_recon.obj";
        save_mesh_like(out, recon, m.cells);
        std::printf("%s: mean vertex error %.8g -> %s\n", path.c_str(), err, out.c_str());
    }
    return 0;
}

int cmd_encode(const std::string& ckpt, const std::string& hier_path, const std::string& mesh_path,
               const std::string& out_path) {
    SamplingHierarchy hierarchy = load_hierarchy(hier_path);
    AutoencoderModel model = load_checkpoint(ckpt, hierarchy);
    LoadedMesh m = load_mesh(mesh_path);
    check_topology(m.topology, hierarchy, mesh_path);
    LatentCode code = model.encode(m.positions);
    save_latent(out_path, code);
    std::printf("latent %lld x %lld -> %s\n", static_cast<long long>(code.values.rows()),
                static_cast<long long>(code.values.cols()), out_path.c_str());
    return 0;
}

int cmd_decode(const std::string& ckpt, const std::string& hier_path, const std::string& code_path,
               const std::string& template_path, const std::string& out_path) {
    SamplingHierarchy hierarchy = load_hierarchy(hier_path);
    AutoencoderModel model = load_checkpoint(ckpt, hierarchy);
    LatentCode code = load_latent(code_path);
    Tensor decoded = model.decode(code);
    LoadedMesh tmpl = load_mesh(template_path);
    check_topology(tmpl.topology, hierarchy, template_path);
    save_mesh_like(out_path, decoded, tmpl.cells);
    std::printf("decoded %lld vertices -> %s\n", static_cast<long long>(decoded.rows()),
                out_path.c_str());
    return 0;
}

int cmd_interpolate(const std::string& ckpt, const std::string& hier_path,
                    const std::string& source_path, const std::string& target_path,
                    const std::string& vertices, int steps, const std::string& template_path,
                    const std::string& out_dir) {
    if (steps < 1) throw InputError("steps must be at least 1");
    SamplingHierarchy hierarchy = load_hierarchy(hier_path);
    AutoencoderModel model = load_checkpoint(ckpt, hierarchy);
    LatentCode source = load_latent(source_path);
    LatentCode target = load_latent(target_path);
    LoadedMesh tmpl = load_mesh(template_path);
    check_topology(tmpl.topology, hierarchy, template_path);
    std::vector<int> subset = parse_vertex_list(vertices, model.latent_vertices());
    fs::create_directories(out_dir);
    for (int k = 0; k < steps; ++k) {
        double t = steps == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(steps - 1);
        LatentCode code = interpolate_latent(source, target, subset, t);
        Tensor decoded = model.decode(code);
        char name[64];
        std::snprintf(name, sizeof name, "/frame_%03d.obj", k);
        save_mesh_like(out_dir + name, decoded, tmpl.cells);
        std::printf("t=%.4f -> %s%s\n", t, out_dir.c_str(), name);
    }
    return 0;
}

int cmd_mix(const std::string& ckpt, const std::string& hier_path, const std::string& base_path,
            const std::string& donor_path, const std::string& vertices,
            const std::string& template_path, const std::string& out_path,
            const std::string& code_out) {
    SamplingHierarchy hierarchy = load_hierarchy(hier_path);
    AutoencoderModel model = load_checkpoint(ckpt, hierarchy);
    LatentCode base = load_latent(base_path);
    LatentCode donor = load_latent(donor_path);
    std::vector<int> subset = parse_vertex_list(vertices, model.latent_vertices());
    LatentCode mixed = mix_latent(base, donor, subset);
    if (!code_out.empty()) save_latent(code_out, mixed);
    Tensor decoded = model.decode(mixed);
    LoadedMesh tmpl = load_mesh(template_path);
    check_topology(tmpl.topology, hierarchy, template_path);
    save_mesh_like(out_path, decoded, tmpl.cells);
    std::printf("mixed %zu latent vertices -> %s\n", subset.size(), out_path.c_str());
    return 0;
}

struct GradCase {
    std::string name;
    GradCheckReport report;
};

// Runs gradient checks on every layer type over a small irregular mesh.
int cmd_gradcheck(const std::string& scale, uint64_t seed) {
    const double eps = 1e-6;
    const double tol = 1e-4;
    bool full = scale == "full";

    LoadedMesh ico = make_icosphere(full ? 1 : 0);
    std::vector<LevelSpec> specs{{2, 2, {}}, {2, 2, {}}};
    SamplingHierarchy h = build_hierarchy(ico.topology, specs, seed);
    const SamplingMap& down = h.level(0).down;
    const SamplingMap& up = h.level(0).up;

    Rng rng(seed + 1);
    int in = 2, out = 3;
    auto random_features = [&](int verts, int ch) {
        Tensor x({verts, ch});
        for (int64_t i = 0; i < x.numel(); ++i) x.values()[static_cast<size_t>(i)] =
            rng.uniform(-1.0, 1.0);
        return x;
    };
    Tensor x_fine = random_features(down.in_vertices(), in);
    Tensor x_coarse = random_features(down.out_vertices(), in);
    Tensor target = random_features(down.in_vertices(), in);

    std::vector<GradCase> cases;
    auto check = [&](const std::string& name, const std::vector<Parameter*>& params,
                     const std::function<Value(Tape&)>& fw) {
        int64_t per = full ? 0 : 25;
        cases.push_back({name, grad_check(params, fw, eps, tol, per, seed + 77)});
    };

    {
        VcConvLayer layer("g_vc", down, in, out, 2, rng);
        check("vc-conv", {&layer.basis, &layer.coeffs, &layer.bias}, [&](Tape& t) {
            return t.sum(vc_conv_forward(t, layer, t.input(x_fine)));
        });
        VcConvLayer nlayer("g_vcn", down, in, out, 2, rng, true);
        check("vc-conv-normalized", {&nlayer.basis, &nlayer.coeffs, &nlayer.bias}, [&](Tape& t) {
            return t.sum(vc_conv_forward(t, nlayer, t.input(x_fine)));
        });
        Parameter px("g_vc_x", x_fine);
        check("vc-conv-input", {&px}, [&](Tape& t) {
            return t.sum(vc_conv_forward(t, layer, t.param(px)));
        });
    }
    {
        VcConvLayer layer("g_vt", up, in, out, 3, rng);
        check("vc-trans-conv", {&layer.basis, &layer.coeffs, &layer.bias}, [&](Tape& t) {
            return t.sum(vc_trans_conv_forward(t, layer, t.input(x_coarse)));
        });
    }
    {
        LcConvLayer layer("g_lc", down, in, out, rng);
        check("lc-conv", {&layer.weights, &layer.bias}, [&](Tape& t) {
            return t.sum(lc_conv_forward(t, layer, t.input(x_fine)));
        });
    }
    {
        VdWeights vd("g_pool", down);
        for (int64_t i = 0; i < vd.rho.value.numel(); ++i)
            vd.rho.value.values()[static_cast<size_t>(i)] = rng.uniform(0.2, 1.5);
        Parameter px("g_pool_x", x_fine);
        check("vd-pool", {&vd.rho, &px}, [&](Tape& t) {
            return t.sum(vd_pool_forward(t, vd, t.param(px)));
        });
    }
    {
        VdWeights vd("g_unpool", up);
        for (int64_t i = 0; i < vd.rho.value.numel(); ++i)
            vd.rho.value.values()[static_cast<size_t>(i)] = rng.uniform(0.2, 1.5);
        Parameter px("g_unpool_x", x_coarse);
        check("vd-unpool", {&vd.rho, &px}, [&](Tape& t) {
            return t.sum(vd_unpool_forward(t, vd, t.param(px)));
        });
    }
    {
        VdResLayer layer("g_res", down, in, out, rng);
        Parameter px("g_res_x", x_fine);
        std::vector<Parameter*> ps{&layer.vd.rho, &px};
        if (layer.channel_map) ps.push_back(&*layer.channel_map);
        check("vd-res", ps, [&](Tape& t) {
            return t.sum(vd_res_forward(t, layer, t.param(px)));
        });
        VdResLayer same("g_res_same", down, in, in, rng);
        check("vd-res-identity", {&same.vd.rho}, [&](Tape& t) {
            return t.sum(vd_res_forward(t, same, t.input(x_fine)));
        });
    }
    {
        Parameter px("g_avg_x", x_fine);
        check("avg-pool", {&px}, [&](Tape& t) {
            return t.sum(avg_pool_forward(t, down, t.param(px)));
        });
        check("max-pool", {&px}, [&](Tape& t) {
            return t.sum(max_pool_forward(t, down, t.param(px)));
        });
        Parameter pc("g_avg_c", x_coarse);
        check("avg-unpool", {&pc}, [&](Tape& t) {
            return t.sum(avg_unpool_forward(t, up, t.param(pc)));
        });
        check("max-unpool", {&pc}, [&](Tape& t) {
            return t.sum(max_unpool_forward(t, up, t.param(pc)));
        });
    }
    {
        Parameter px("g_elu_x", x_fine);
        check("elu", {&px}, [&](Tape& t) { return t.sum(t.elu(t.param(px))); });
        check("loss-l1", {&px}, [&](Tape& t) {
            return loss_l1(t, t.param(px), t.input(target));
        });
        check("loss-laplacian", {&px}, [&](Tape& t) {
            return loss_laplacian(t, t.param(px), t.input(target), h.base());
        });
    }
    {
        std::vector<int> plan{in, 3, 4, 3, in};
        BuildOptions opts;
        opts.init_seed = seed + 5;
        AutoencoderModel model = build_autoencoder(h, plan, opts);
        std::vector<Parameter*> ps = model.parameters();
        check("autoencoder", ps, [&](Tape& t) {
            return loss_l1(t, model.reconstruct_value(t, t.input(x_fine)), t.input(x_fine));
        });
    }

    bool ok = true;
    for (const auto& c : cases) {
        ok = ok && c.report.passed;
        std::printf("%-20s %-4s max rel err %.3e (%lld checks)\n", c.name.c_str(),
                    c.report.passed ? "ok" : "FAIL", c.report.max_rel_error,
                    static_cast<long long>(c.report.checked));
        if (!c.report.passed)
            std::printf("    worst: %s[%lld] analytic %.10g numeric %.10g\n",
                        c.report.worst.param.c_str(), static_cast<long long>(c.report.worst.index),
                        c.report.worst.analytic, c.report.worst.numeric);
    }
    std::printf("gradcheck %s\n", ok ? "passed" : "FAILED");
    return ok ? 0 : 2;
}

int cmd_stats(const std::string& ckpt, const std::string& hier_path) {
    SamplingHierarchy hierarchy = load_hierarchy(hier_path);
    AutoencoderModel model = load_checkpoint(ckpt, hierarchy);

    std::printf("depth: %d\n", model.depth());
    std::printf("channels:");
    for (int c : model.channel_plan()) std::printf(" %d", c);
    std::printf("\nbasis sizes:");
    for (int m : model.m_plan()) std::printf(" %d", m);
    std::printf("\nresidual shortcuts: %s, normalized basis: %s\n",
                model.use_residual() ? "yes" : "no", model.normalize_basis() ? "yes" : "no");

    std::printf("vertices: %d", hierarchy.base().num_vertices());
    for (int i = 0; i < hierarchy.depth(); ++i)
        std::printf(" -> %d", hierarchy.level(i).coarse.num_vertices());
    std::printf("\n");

    int64_t total = 0;
    auto show = [&](const ResidualBlock& b) {
        int64_t n = b.param_count();
        total += n;
        std::printf("  %-8s %4d -> %-4d M=%-3d %8lld params%s\n", b.name.c_str(), b.conv.in_channels,
                    b.conv.out_channels, b.conv.basis_size, static_cast<long long>(n),
                    b.res ? " (+residual)" : "");
    };
    std::printf("encoder:\n");
    for (const auto& b : model.encoder()) show(b);
    std::printf("decoder:\n");
    for (const auto& b : model.decoder()) show(b);
    std::printf("total: %lld parameters\n", static_cast<long long>(total));
    std::printf("latent: %d vertices x %d channels\n", model.latent_vertices(),
                model.latent_channels());

    std::vector<int> anchors = hierarchy.base_anchors();
    std::printf("latent anchors on base mesh:");
    for (int a : anchors) std::printf(" %d", a);
    std::printf("\n");
    return 0;
}

int cmd_make_synthetic(const std::string& base, int subdiv, int samples, uint64_t seed,
                       double amplitude, const std::string& out_dir) {
    LoadedMesh mesh;
    if (base == "icosphere") {
        mesh = make_icosphere(subdiv);
    } else if (base == "grid") {
        mesh = make_grid(subdiv);
    } else {
        throw InputError("unknown base shape '" + base + "' (use icosphere or grid)");
    }
    MeshDataset data = synthesize_deformations(mesh, samples, seed, amplitude);
    fs::create_directories(out_dir);
    save_obj(out_dir + "/base.obj", mesh.positions, mesh.cells);
    for (size_t i = 0; i < data.samples.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "/sample_%04d.obj", static_cast<int>(i));
        save_obj(out_dir + name, data.samples[i], mesh.cells);
    }
    std::printf("wrote base + %zu samples (%d vertices each) to %s\n", data.samples.size(),
                mesh.topology.num_vertices(), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fully convolutional mesh autoencoder"};
    app.require_subcommand(1);
    int rc = 0;

    {
        auto* c = app.add_subcommand("build-hierarchy", "sample a mesh into a coarsening hierarchy");
        auto mesh = std::make_shared<std::string>();
        auto levels = std::make_shared<std::vector<std::string>>();
        auto seed = std::make_shared<uint64_t>(0);
        auto out = std::make_shared<std::string>();
        auto bridge = std::make_shared<double>(0.0);
        c->add_option("--mesh", *mesh, "input mesh (.obj or cell list)")->required();
        c->add_option("--levels", *levels, "level spec stride:radius[:pin,pin,...], repeatable")
            ->required();
        c->add_option("--seed", *seed, "sampling seed");
        c->add_option("--out", *out, "output hierarchy file")->required();
        c->add_option("--bridge-threshold", *bridge,
                      "connect components whose closest vertices are within this distance");
        c->callback([=, &rc] { rc = cmd_build_hierarchy(*mesh, *levels, *seed, *out, *bridge); });
    }
    {
        auto* c = app.add_subcommand("train", "train an autoencoder from a config file");
        auto config = std::make_shared<std::string>();
        c->add_option("--config", *config, "run configuration file")->required();
        c->callback([=, &rc] { rc = cmd_train(*config); });
    }
    {
        auto* c = app.add_subcommand("reconstruct", "encode and decode meshes, reporting error");
        auto ckpt = std::make_shared<std::string>();
        auto hier = std::make_shared<std::string>();
        auto meshes = std::make_shared<std::vector<std::string>>();
        auto out = std::make_shared<std::string>(".");
        c->add_option("--ckpt", *ckpt, "checkpoint file")->required();
        c->add_option("--hierarchy", *hier, "hierarchy file")->required();
        c->add_option("--mesh", *meshes, "mesh to reconstruct, repeatable")->required();
        c->add_option("--out", *out, "output directory");
        c->callback([=, &rc] { rc = cmd_reconstruct(*ckpt, *hier, *meshes, *out); });
    }
    {
        auto* c = app.add_subcommand("encode", "encode a mesh to a latent code");
        auto ckpt = std::make_shared<std::string>();
        auto hier = std::make_shared<std::string>();
        auto mesh = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        c->add_option("--ckpt", *ckpt, "checkpoint file")->required();
        c->add_option("--hierarchy", *hier, "hierarchy file")->required();
        c->add_option("--mesh", *mesh, "input mesh")->required();
        c->add_option("--out", *out, "output latent file")->required();
        c->callback([=, &rc] { rc = cmd_encode(*ckpt, *hier, *mesh, *out); });
    }
    {
        auto* c = app.add_subcommand("decode", "decode a latent code to a mesh");
        auto ckpt = std::make_shared<std::string>();
        auto hier = std::make_shared<std::string>();
        auto code = std::make_shared<std::string>();
        auto tmpl = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        c->add_option("--ckpt", *ckpt, "checkpoint file")->required();
        c->add_option("--hierarchy", *hier, "hierarchy file")->required();
        c->add_option("--code", *code, "latent code file")->required();
        c->add_option("--template", *tmpl, "mesh providing output connectivity")->required();
        c->add_option("--out", *out, "output mesh file")->required();
        c->callback([=, &rc] { rc = cmd_decode(*ckpt, *hier, *code, *tmpl, *out); });
    }
    {
        auto* c = app.add_subcommand("interpolate", "blend two latent codes over several steps");
        auto ckpt = std::make_shared<std::string>();
        auto hier = std::make_shared<std::string>();
        auto source = std::make_shared<std::string>();
        auto target = std::make_shared<std::string>();
        auto vertices = std::make_shared<std::string>("all");
        auto steps = std::make_shared<int>(5);
        auto tmpl = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        c->add_option("--ckpt", *ckpt, "checkpoint file")->required();
        c->add_option("--hierarchy", *hier, "hierarchy file")->required();
        c->add_option("--source", *source, "latent code at t=0")->required();
        c->add_option("--target", *target, "latent code at t=1")->required();
        c->add_option("--vertices", *vertices, "latent vertices to blend: 'all' or i,j,...");
        c->add_option("--steps", *steps, "number of frames");
        c->add_option("--template", *tmpl, "mesh providing output connectivity")->required();
        c->add_option("--out", *out, "output directory")->required();
        c->callback([=, &rc] {
            rc = cmd_interpolate(*ckpt, *hier, *source, *target, *vertices, *steps, *tmpl, *out);
        });
    }
    {
        auto* c = app.add_subcommand("mix", "replace part of one latent code with another's");
        auto ckpt = std::make_shared<std::string>();
        auto hier = std::make_shared<std::string>();
        auto base = std::make_shared<std::string>();
        auto donor = std::make_shared<std::string>();
        auto vertices = std::make_shared<std::string>();
        auto tmpl = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto code_out = std::make_shared<std::string>();
        c->add_option("--ckpt", *ckpt, "checkpoint file")->required();
        c->add_option("--hierarchy", *hier, "hierarchy file")->required();
        c->add_option("--base", *base, "latent code to start from")->required();
        c->add_option("--donor", *donor, "latent code supplying the replaced vertices")->required();
        c->add_option("--vertices", *vertices, "latent vertices to replace: i,j,...")->required();
        c->add_option("--template", *tmpl, "mesh providing output connectivity")->required();
        c->add_option("--out", *out, "output mesh file")->required();
        c->add_option("--code-out", *code_out, "also save the mixed latent code here");
        c->callback([=, &rc] {
            rc = cmd_mix(*ckpt, *hier, *base, *donor, *vertices, *tmpl, *out, *code_out);
        });
    }
    {
        auto* c = app.add_subcommand("gradcheck", "verify analytic gradients of every layer");
        auto scale = std::make_shared<std::string>("small");
        auto seed = std::make_shared<uint64_t>(0);
        c->add_option("--scale", *scale, "small or full")
            ->check(CLI::IsMember({"small", "full"}));
        c->add_option("--seed", *seed, "randomization seed");
        c->callback([=, &rc] { rc = cmd_gradcheck(*scale, *seed); });
    }
    {
        auto* c = app.add_subcommand("stats", "describe a checkpointed model");
        auto ckpt = std::make_shared<std::string>();
        auto hier = std::make_shared<std::string>();
        c->add_option("--ckpt", *ckpt, "checkpoint file")->required();
        c->add_option("--hierarchy", *hier, "hierarchy file")->required();
        c->callback([=, &rc] { rc = cmd_stats(*ckpt, *hier); });
    }
    {
        auto* c = app.add_subcommand("make-synthetic", "generate a synthetic mesh dataset");
        auto base = std::make_shared<std::string>("icosphere");
        auto subdiv = std::make_shared<int>(2);
        auto samples = std::make_shared<int>(64);
        auto seed = std::make_shared<uint64_t>(0);
        auto amplitude = std::make_shared<double>(0.1);
        auto out = std::make_shared<std::string>();
        c->add_option("--base", *base, "icosphere or grid")
            ->check(CLI::IsMember({"icosphere", "grid"}));
        c->add_option("--subdiv", *subdiv, "subdivision level / grid resolution");
        c->add_option("--samples", *samples, "number of deformed samples");
        c->add_option("--seed", *seed, "deformation seed");
        c->add_option("--amplitude", *amplitude, "deformation strength");
        c->add_option("--out", *out, "output directory")->required();
        c->callback([=, &rc] {
            rc = cmd_make_synthetic(*base, *subdiv, *samples, *seed, *amplitude, *out);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return rc;
}
