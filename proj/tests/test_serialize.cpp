#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "vcmesh/error.hpp"
#include "vcmesh/model.hpp"
#include "vcmesh/serialize.hpp"
#include "vcmesh/synthetic.hpp"

using namespace vcmesh;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<uint8_t> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

SamplingHierarchy ico_hierarchy() {
    return build_hierarchy(make_icosphere(1).topology, {{2, 2, {}}, {2, 2, {}}}, 7);
}

}  // namespace

TEST_CASE("primitive round trips") {
    ByteWriter w;
    w.u8(7);
    w.u32(0xdeadbeefu);
    w.u64(0x0123456789abcdefull);
    w.i32(-42);
    w.i64(-1234567890123ll);
    w.f64(3.14159);
    w.f64(-0.0);
    w.str("hello");
    w.str("");
    w.i32_vec({1, -2, 3});
    w.i32_vec({});
    w.f64_vec({0.5, -0.25});
    w.magic("VMXX");

    ByteReader r(w.bytes());
    CHECK(r.u8() == 7);
    CHECK(r.u32() == 0xdeadbeefu);
    CHECK(r.u64() == 0x0123456789abcdefull);
    CHECK(r.i32() == -42);
    CHECK(r.i64() == -1234567890123ll);
    CHECK(r.f64() == 3.14159);
    double nz = r.f64();
    CHECK(nz == 0.0);
    CHECK(std::signbit(nz));
    CHECK(r.str() == "hello");
    CHECK(r.str().empty());
    CHECK(r.i32_vec() == std::vector<int>{1, -2, 3});
    CHECK(r.i32_vec().empty());
    CHECK(r.f64_vec() == std::vector<double>{0.5, -0.25});
    r.magic("VMXX");
    CHECK(r.done());
    r.expect_done();
}

TEST_CASE("serialization is little-endian regardless of host") {
    ByteWriter w;
    w.u32(0x01020304u);
    CHECK(w.bytes() == std::vector<uint8_t>{0x04, 0x03, 0x02, 0x01});

    ByteWriter wf;
    wf.f64(1.0);  // IEEE-754: 0x3FF0000000000000
    CHECK(wf.bytes() == std::vector<uint8_t>{0, 0, 0, 0, 0, 0, 0xF0, 0x3F});
}

TEST_CASE("reader guards") {
    ByteWriter w;
    w.magic("VMSH");
    w.u32(99);
    ByteReader wrong(w.bytes());
    CHECK_THROWS_AS(wrong.magic("VMCK"), ParseError);

    ByteReader truncated(std::vector<uint8_t>{1, 2});
    CHECK_THROWS_AS(truncated.u32(), ParseError);

    ByteReader leftovers(w.bytes());
    leftovers.magic("VMSH");
    CHECK_THROWS_AS(leftovers.expect_done(), ParseError);
}

TEST_CASE("fnv1a64 digest") {
    CHECK(fnv1a64({}) == 0xcbf29ce484222325ull);

    // independent restatement of the fold
    std::vector<uint8_t> data = {'a', 'b', 'c', 0, 255, 17};
    uint64_t expect = 0xcbf29ce484222325ull;
    for (uint8_t b : data) {
        expect ^= b;
        expect *= 0x100000001b3ull;
    }
    CHECK(fnv1a64(data) == expect);
    CHECK(fnv1a64(data) != fnv1a64({}));
}

TEST_CASE("hierarchy round trip is byte identical") {
    SamplingHierarchy h = ico_hierarchy();
    std::string p1 = temp_path("vcmesh_h1.bin");
    std::string p2 = temp_path("vcmesh_h2.bin");
    save_hierarchy(h, p1);
    SamplingHierarchy back = load_hierarchy(p1);
    CHECK(back == h);
    save_hierarchy(back, p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
    CHECK(hierarchy_fingerprint(h) == hierarchy_fingerprint(back));

    SamplingHierarchy other = build_hierarchy(make_icosphere(1).topology, {{2, 2, {}}, {2, 2, {}}}, 8);
    if (!(other == h)) CHECK(hierarchy_fingerprint(other) != hierarchy_fingerprint(h));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("checkpoint round trip restores everything") {
    SamplingHierarchy h = ico_hierarchy();
    MeshDataset data;
    data.topology = make_icosphere(1).topology;
    Rng rng(5);
    for (int i = 0; i < 4; ++i) {
        Tensor t({42, 3});
        for (int64_t k = 0; k < t.numel(); ++k) t(k) = rng.uniform(-1.0, 1.0);
        data.samples.push_back(t);
        data.splits.push_back(Split::Train);
    }

    AutoencoderModel model = build_autoencoder(h, {3, 4, 6, 4, 3});
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.lr = 1e-3;
    cfg.epochs = 2;
    cfg.seed = 3;
    TrainerState state;
    train(model, data, cfg, &state);

    std::string p1 = temp_path("vcmesh_c1.ckpt");
    std::string p2 = temp_path("vcmesh_c2.ckpt");
    save_checkpoint(p1, model, state);

    TrainerState restored_state;
    AutoencoderModel restored = load_checkpoint(p1, h, &restored_state);
    CHECK(restored.param_count() == model.param_count());
    CHECK(restored.channel_plan() == model.channel_plan());
    CHECK(restored.m_plan() == model.m_plan());
    CHECK(restored.use_residual() == model.use_residual());
    CHECK(restored.normalize_basis() == model.normalize_basis());

    std::vector<Parameter*> pa = model.parameters();
    std::vector<Parameter*> pb = restored.parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(pa[i]->value.values() == pb[i]->value.values());
    }

    CHECK(restored_state.epoch == state.epoch);
    CHECK(restored_state.adam.t == state.adam.t);
    REQUIRE(restored_state.adam.m.size() == state.adam.m.size());
    for (size_t i = 0; i < state.adam.m.size(); ++i) {
        CHECK(restored_state.adam.m[i].values() == state.adam.m[i].values());
        CHECK(restored_state.adam.v[i].values() == state.adam.v[i].values());
    }
    CHECK(restored_state.rng.state() == state.rng.state());

    save_checkpoint(p2, restored, restored_state);
    CHECK(file_bytes(p1) == file_bytes(p2));

    // a checkpoint refuses to load over the wrong sampling structure
    SamplingHierarchy other = build_hierarchy(make_icosphere(1).topology, {{2, 1, {}}}, 7);
    CHECK_THROWS_AS(load_checkpoint(p1, other), InputError);

    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("latent code round trip") {
    LatentCode code{Tensor::from({2, 3}, {1, 2, 3, 4.5, -6, 0}), 0xfeedface12345678ull};
    std::string p1 = temp_path("vcmesh_l1.lat");
    std::string p2 = temp_path("vcmesh_l2.lat");
    save_latent(p1, code);
    LatentCode back = load_latent(p1);
    CHECK(back.fingerprint == code.fingerprint);
    CHECK(back.values.shape() == code.values.shape());
    CHECK(back.values.values() == code.values.values());
    save_latent(p2, back);
    CHECK(file_bytes(p1) == file_bytes(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("corrupt files are rejected") {
    std::string p = temp_path("vcmesh_bad.bin");
    {
        std::ofstream out(p, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_hierarchy(p), ParseError);
    CHECK_THROWS_AS(load_latent(p), ParseError);
    CHECK_THROWS(ByteReader::load(temp_path("vcmesh_does_not_exist.bin")));
    std::remove(p.c_str());
}
