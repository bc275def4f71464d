#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "vcmesh/mesh.hpp"
#include "vcmesh/model.hpp"
#include "vcmesh/serialize.hpp"

using namespace vcmesh;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
    std::string cmd = std::string(VCMESH_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult res;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof buf, pipe)) res.output.append(buf, n);
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::vector<uint8_t> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

// one synthetic dataset + trained checkpoint shared by the command tests
struct Fixture {
    std::string root;
    std::string data_dir;
    std::string run_dir;
    std::string config_path;
    std::string sample0;
    std::string base_obj;

    std::string hierarchy_path() const { return run_dir + "/hierarchy.vmsh"; }
    std::string ckpt_path() const { return run_dir + "/checkpoint.ckpt"; }
};

const Fixture& fixture() {
    static Fixture fx = [] {
        Fixture f;
        f.root = (fs::temp_directory_path() / "vcmesh_cli_fixture").string();
        fs::remove_all(f.root);
        f.data_dir = f.root + "/data";
        f.run_dir = f.root + "/run";
        f.config_path = f.root + "/run.cfg";
        f.sample0 = f.data_dir + "/sample_0000.obj";
        f.base_obj = f.data_dir + "/base.obj";

        RunResult gen = run_cli("make-synthetic --base icosphere --subdiv 1 --samples 6 --seed 3 --out " +
                                f.data_dir);
        REQUIRE(gen.exit_code == 0);

        std::ofstream cfg(f.config_path);
        cfg << "[data]\n"
            << "dataset = " << f.data_dir << "/sample_*.obj\n"
            << "template = " << f.base_obj << "\n"
            << "val_fraction = 0\ntest_fraction = 0\n"
            << "[hierarchy]\nlevels = 2:2 2:2\nseed = 7\n"
            << "[model]\nchannels = 3 4 4\nm = auto\n"
            << "[train]\nbatch_size = 4\nlr = 0.001\nepochs = 2\nseed = 1\n"
            << "[output]\ndir = " << f.run_dir << "\n";
        cfg.close();

        RunResult tr = run_cli("train --config " + f.config_path);
        REQUIRE(tr.exit_code == 0);
        return f;
    }();
    return fx;
}

}  // namespace

TEST_CASE("make-synthetic is deterministic and writes the full set") {
    std::string a = (fs::temp_directory_path() / "vcmesh_cli_synth_a").string();
    std::string b = (fs::temp_directory_path() / "vcmesh_cli_synth_b").string();
    fs::remove_all(a);
    fs::remove_all(b);
    RunResult ra = run_cli("make-synthetic --base grid --subdiv 3 --samples 4 --seed 11 --out " + a);
    RunResult rb = run_cli("make-synthetic --base grid --subdiv 3 --samples 4 --seed 11 --out " + b);
    CHECK(ra.exit_code == 0);
    CHECK(rb.exit_code == 0);
    CHECK(ra.output.find("wrote base + 4 samples") != std::string::npos);
    for (const char* name : {"/base.obj", "/sample_0000.obj", "/sample_0003.obj"}) {
        CHECK(fs::exists(a + name));
        CHECK(file_bytes(a + name) == file_bytes(b + name));
    }
    CHECK(!fs::exists(a + "/sample_0004.obj"));
    LoadedMesh m = load_mesh(a + "/sample_0002.obj");
    CHECK(m.topology.num_vertices() == 16);  // grid of 3x3 cells
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("build-hierarchy writes a loadable file") {
    const Fixture& fx = fixture();
    std::string out = fx.root + "/solo.vmsh";
    RunResult r = run_cli("build-hierarchy --mesh " + fx.base_obj +
                          " --levels 2:1 --levels 2:1 --seed 3 --out " + out);
    CHECK(r.exit_code == 0);
    SamplingHierarchy h = load_hierarchy(out);
    CHECK(h.depth() == 2);
    CHECK(h.base().num_vertices() == 42);
    CHECK(h.level(0).stride == 2);
    CHECK(h.level(0).radius == 1);
}

TEST_CASE("train produces checkpoint, hierarchy and log") {
    const Fixture& fx = fixture();
    CHECK(fs::exists(fx.ckpt_path()));
    CHECK(fs::exists(fx.hierarchy_path()));
    CHECK(fs::exists(fx.run_dir + "/train_log.tsv"));

    std::ifstream log(fx.run_dir + "/train_log.tsv");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) ++lines;
    CHECK(lines >= 3);  // header + one row per epoch

    SamplingHierarchy h = load_hierarchy(fx.hierarchy_path());
    AutoencoderModel model = load_checkpoint(fx.ckpt_path(), h);
    CHECK(model.depth() == 2);
    CHECK(model.channel_plan() == std::vector<int>{3, 4, 4, 4, 3});
}

TEST_CASE("stats reports the registered parameter total") {
    const Fixture& fx = fixture();
    RunResult r = run_cli("stats --ckpt " + fx.ckpt_path() + " --hierarchy " + fx.hierarchy_path());
    CHECK(r.exit_code == 0);

    SamplingHierarchy h = load_hierarchy(fx.hierarchy_path());
    AutoencoderModel model = load_checkpoint(fx.ckpt_path(), h);
    std::string expect = "total: " + std::to_string(model.param_count()) + " parameters";
    CHECK(r.output.find(expect) != std::string::npos);
    CHECK(r.output.find("depth: 2") != std::string::npos);
}

TEST_CASE("reconstruct reports the recomputable error") {
    const Fixture& fx = fixture();
    std::string out_dir = fx.root + "/recon";
    RunResult r = run_cli("reconstruct --ckpt " + fx.ckpt_path() + " --hierarchy " +
                          fx.hierarchy_path() + " --mesh " + fx.sample0 + " --out " + out_dir);
    CHECK(r.exit_code == 0);

    size_t pos = r.output.find("mean vertex error ");
    REQUIRE(pos != std::string::npos);
    double printed = std::strtod(r.output.c_str() + pos + 18, nullptr);

    SamplingHierarchy h = load_hierarchy(fx.hierarchy_path());
    AutoencoderModel model = load_checkpoint(fx.ckpt_path(), h);
    LoadedMesh m = load_mesh(fx.sample0);
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
    CHECK(printed == doctest::Approx(err).epsilon(1e-6));

    std::string out_obj = out_dir + "/sample_0000_recon.obj";
    REQUIRE(fs::exists(out_obj));
    std::string mine = fx.root + "/recon_mine.obj";
    save_obj(mine, recon, m.cells);
    CHECK(file_bytes(out_obj) == file_bytes(mine));
}

TEST_CASE("encode and decode round trip through files") {
    const Fixture& fx = fixture();
    std::string code_path = fx.root + "/s0.vmlc";
    RunResult enc = run_cli("encode --ckpt " + fx.ckpt_path() + " --hierarchy " + fx.hierarchy_path() +
                            " --mesh " + fx.sample0 + " --out " + code_path);
    CHECK(enc.exit_code == 0);
    CHECK(enc.output.find("latent ") != std::string::npos);

    SamplingHierarchy h = load_hierarchy(fx.hierarchy_path());
    AutoencoderModel model = load_checkpoint(fx.ckpt_path(), h);
    LatentCode code = load_latent(code_path);
    CHECK(code.fingerprint == model.fingerprint());
    CHECK(code.values.dim(0) == model.latent_vertices());
    CHECK(code.values.dim(1) == model.latent_channels());

    std::string dec_path = fx.root + "/s0_dec.obj";
    RunResult dec = run_cli("decode --ckpt " + fx.ckpt_path() + " --hierarchy " + fx.hierarchy_path() +
                            " --code " + code_path + " --template " + fx.base_obj + " --out " + dec_path);
    CHECK(dec.exit_code == 0);

    LoadedMesh tmpl = load_mesh(fx.base_obj);
    std::string mine = fx.root + "/s0_dec_mine.obj";
    save_obj(mine, model.decode(code), tmpl.cells);
    CHECK(file_bytes(dec_path) == file_bytes(mine));
}

TEST_CASE("interpolate writes one frame per step") {
    const Fixture& fx = fixture();
    std::string ca = fx.root + "/ia.vmlc";
    std::string cb = fx.root + "/ib.vmlc";
    REQUIRE(run_cli("encode --ckpt " + fx.ckpt_path() + " --hierarchy " + fx.hierarchy_path() +
                    " --mesh " + fx.sample0 + " --out " + ca).exit_code == 0);
    REQUIRE(run_cli("encode --ckpt " + fx.ckpt_path() + " --hierarchy " + fx.hierarchy_path() +
                    " --mesh " + fx.data_dir + "/sample_0001.obj --out " + cb).exit_code == 0);

    std::string frames = fx.root + "/frames";
    RunResult r = run_cli("interpolate --ckpt " + fx.ckpt_path() + " --hierarchy " +
                          fx.hierarchy_path() + " --source " + ca + " --target " + cb +
                          " --steps 3 --template " + fx.base_obj + " --out " + frames);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(frames + "/frame_000.obj"));
    CHECK(fs::exists(frames + "/frame_001.obj"));
    CHECK(fs::exists(frames + "/frame_002.obj"));
    CHECK(!fs::exists(frames + "/frame_003.obj"));

    // the first frame is the source decoded as-is
    SamplingHierarchy h = load_hierarchy(fx.hierarchy_path());
    AutoencoderModel model = load_checkpoint(fx.ckpt_path(), h);
    LoadedMesh tmpl = load_mesh(fx.base_obj);
    std::string mine = fx.root + "/frame0_mine.obj";
    save_obj(mine, model.decode(load_latent(ca)), tmpl.cells);
    CHECK(file_bytes(frames + "/frame_000.obj") == file_bytes(mine));
}

TEST_CASE("mix replaces the chosen latent vertices") {
    const Fixture& fx = fixture();
    std::string ca = fx.root + "/ma.vmlc";
    std::string cb = fx.root + "/mb.vmlc";
    REQUIRE(run_cli("encode --ckpt " + fx.ckpt_path() + " --hierarchy " + fx.hierarchy_path() +
                    " --mesh " + fx.sample0 + " --out " + ca).exit_code == 0);
    REQUIRE(run_cli("encode --ckpt " + fx.ckpt_path() + " --hierarchy " + fx.hierarchy_path() +
                    " --mesh " + fx.data_dir + "/sample_0002.obj --out " + cb).exit_code == 0);

    std::string out_obj = fx.root + "/mixed.obj";
    std::string out_code = fx.root + "/mixed.vmlc";
    RunResult r = run_cli("mix --ckpt " + fx.ckpt_path() + " --hierarchy " + fx.hierarchy_path() +
                          " --base " + ca + " --donor " + cb + " --vertices 0 --template " +
                          fx.base_obj + " --out " + out_obj + " --code-out " + out_code);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out_obj));

    LatentCode a = load_latent(ca);
    LatentCode b = load_latent(cb);
    LatentCode mixed = load_latent(out_code);
    for (int64_t c = 0; c < mixed.values.dim(1); ++c) {
        CHECK(mixed.values(0, c) == b.values(0, c));
        if (mixed.values.dim(0) > 1) CHECK(mixed.values(1, c) == a.values(1, c));
    }
}

TEST_CASE("gradcheck command passes at small scale") {
    RunResult r = run_cli("gradcheck --scale small --seed 5");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("gradcheck passed") != std::string::npos);
    CHECK(r.output.find("FAIL") == std::string::npos);
}

TEST_CASE("bad inputs exit with code 1") {
    const Fixture& fx = fixture();
    RunResult missing = run_cli("stats --ckpt /nonexistent.ckpt --hierarchy " + fx.hierarchy_path());
    CHECK(missing.exit_code == 1);
    CHECK(missing.output.find("error:") != std::string::npos);

    std::string bad_cfg = fx.root + "/bad.cfg";
    {
        std::ofstream out(bad_cfg);
        out << "[train]\nbogus_key = 1\n";
    }
    RunResult bad = run_cli("train --config " + bad_cfg);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("bogus_key") != std::string::npos);

    RunResult nosub = run_cli("definitely-not-a-command");
    CHECK(nosub.exit_code != 0);
}
