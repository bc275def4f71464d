#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "vcmesh/error.hpp"
#include "vcmesh/layers.hpp"
#include "vcmesh/mesh.hpp"
#include "vcmesh/rng.hpp"
#include "vcmesh/sampling.hpp"

using namespace vcmesh;

namespace {

MeshTopology path_graph(int n) {
    std::vector<std::vector<int>> adj(static_cast<size_t>(n));
    for (int i = 0; i + 1 < n; ++i) {
        adj[static_cast<size_t>(i)].push_back(i + 1);
        adj[static_cast<size_t>(i + 1)].push_back(i);
    }
    return MeshTopology(n, std::move(adj));
}

MeshTopology random_graph(int n, double edge_prob, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<int>> adj(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < edge_prob) {
                adj[static_cast<size_t>(i)].push_back(j);
                adj[static_cast<size_t>(j)].push_back(i);
            }
    return MeshTopology(n, std::move(adj));
}

SamplingMap identity_map(int n) {
    std::vector<std::vector<int>> rows(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) rows[static_cast<size_t>(i)] = {i};
    return SamplingMap(MapDirection::Down, 1, 0, n, std::move(rows));
}

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t(i) = rng.uniform(-1.0, 1.0);
    return t;
}

// Direct per-slot evaluation of the weighted-basis convolution, written
// against the formula rather than the layer code.
Tensor conv_oracle(const SamplingMap& map, const Tensor& basis, const Tensor& coeffs,
                   const Tensor& bias, const Tensor& x, bool normalize) {
    int64_t m = basis.dim(0), in = basis.dim(1), out_c = basis.dim(2);
    Tensor b = basis;
    if (normalize) {
        for (int64_t k = 0; k < m; ++k) {
            double norm = 0.0;
            for (int64_t c = 0; c < in; ++c)
                for (int64_t o = 0; o < out_c; ++o) norm += b.at3(k, c, o) * b.at3(k, c, o);
            norm = std::max(std::sqrt(norm), 1e-12);
            for (int64_t c = 0; c < in; ++c)
                for (int64_t o = 0; o < out_c; ++o) b.at3(k, c, o) /= norm;
        }
    }
    Tensor y({map.out_vertices(), out_c});
    int slot = 0;
    for (int i = 0; i < map.out_vertices(); ++i) {
        for (int64_t o = 0; o < out_c; ++o) y(i, o) = bias(o);
        for (int j : map.row(i)) {
            for (int64_t c = 0; c < in; ++c)
                for (int64_t o = 0; o < out_c; ++o) {
                    double w = 0.0;
                    for (int64_t k = 0; k < m; ++k) w += coeffs(slot, k) * b.at3(k, c, o);
                    y(i, o) += w * x(j, c);
                }
            ++slot;
        }
    }
    return y;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::fabs(a(i) - b(i)));
    return worst;
}

Tensor run_vc(VcConvLayer& layer, const Tensor& x) {
    Tape tape;
    Value out = layer.map->direction() == MapDirection::Down
                    ? vc_conv_forward(tape, layer, tape.input(x))
                    : vc_trans_conv_forward(tape, layer, tape.input(x));
    return tape.value(out);
}

}  // namespace

TEST_CASE("identity configuration reproduces the input") {
    SamplingMap map = identity_map(5);
    Rng rng(1);
    VcConvLayer layer("id", map, 3, 3, 1, rng);
    layer.basis.value.fill(0.0);
    for (int64_t c = 0; c < 3; ++c) layer.basis.value.at3(0, c, c) = 1.0;
    layer.coeffs.value.fill(1.0);
    layer.bias.value.fill(0.0);
    Tensor x = random_tensor({5, 3}, rng);
    CHECK(run_vc(layer, x).values() == x.values());
}

TEST_CASE("zero coefficients leave only the bias") {
    MeshTopology t = path_graph(5);
    SamplingMap map = build_down_map(t, {0, 2, 4}, 2, 1);
    Rng rng(2);
    VcConvLayer layer("b", map, 3, 2, 2, rng);
    layer.coeffs.value.fill(0.0);
    layer.bias.value = Tensor::from({2}, {1.0, 2.0});
    Tensor y = run_vc(layer, random_tensor({5, 3}, rng));
    for (int i = 0; i < 3; ++i) {
        CHECK(y(i, 0) == 1.0);
        CHECK(y(i, 1) == 2.0);
    }
}

TEST_CASE("hand-set scalar convolution over the sampled path") {
    MeshTopology t = path_graph(5);
    SamplingMap map = build_down_map(t, {0, 2, 4}, 2, 1);
    REQUIRE(map.total_slots() == 7);
    Rng rng(3);
    VcConvLayer layer("hand", map, 1, 1, 2, rng);
    layer.basis.value = Tensor::from({2, 1, 1}, {0.5, -1.0});
    layer.coeffs.value = Tensor::from({7, 2}, {1, 0, 0, 1, 1, 1, 2, 0, 0, 2, 3, 1, 1, -1});
    layer.bias.value = Tensor::from({1}, {0.25});
    Tensor x = Tensor::from({5, 1}, {1, 2, 3, 4, 5});

    Tensor y = run_vc(layer, x);
    CHECK(y(0, 0) == doctest::Approx(-1.25).epsilon(1e-14));
    CHECK(y(1, 0) == doctest::Approx(-5.75).epsilon(1e-14));
    CHECK(y(2, 0) == doctest::Approx(9.75).epsilon(1e-14));

    Tensor oracle = conv_oracle(map, layer.basis.value, layer.coeffs.value, layer.bias.value, x, false);
    CHECK(max_abs_diff(y, oracle) <= 1e-14);
}

TEST_CASE("transpose convolution broadcasts from a single coarse vertex") {
    std::vector<std::vector<int>> rows(4, std::vector<int>{0});
    SamplingMap up(MapDirection::Up, 2, 2, 1, std::move(rows));
    Rng rng(4);
    VcConvLayer layer("bcast", up, 2, 2, 1, rng);
    layer.basis.value.fill(0.0);
    layer.basis.value.at3(0, 0, 0) = 1.0;
    layer.basis.value.at3(0, 1, 1) = 1.0;
    layer.coeffs.value.fill(1.0);
    layer.bias.value.fill(0.0);
    Tensor z = Tensor::from({1, 2}, {3.0, -7.0});
    Tensor y = run_vc(layer, z);
    for (int i = 0; i < 4; ++i) {
        CHECK(y(i, 0) == 3.0);
        CHECK(y(i, 1) == -7.0);
    }
}

TEST_CASE("transpose convolution on zero input returns the bias") {
    MeshTopology t = path_graph(5);
    SamplingMap up = build_up_map(t, {0, 2, 4}, 2, 1);
    Rng rng(5);
    VcConvLayer layer("z", up, 3, 2, 2, rng);
    layer.bias.value = Tensor::from({2}, {0.5, -0.5});
    Tensor y = run_vc(layer, Tensor::zeros({3, 3}));
    for (int i = 0; i < 5; ++i) {
        CHECK(y(i, 0) == 0.5);
        CHECK(y(i, 1) == -0.5);
    }
}

TEST_CASE("hand-set transpose convolution over the path up map") {
    MeshTopology t = path_graph(5);
    SamplingMap up = build_up_map(t, {0, 2, 4}, 2, 1);
    REQUIRE(up.total_slots() == 7);
    Rng rng(6);
    VcConvLayer layer("tc", up, 1, 1, 1, rng);
    layer.basis.value = Tensor::from({1, 1, 1}, {2.0});
    layer.coeffs.value = Tensor::from({7, 1}, {1, 0.5, -0.5, 2, 1, 1, -1});
    layer.bias.value = Tensor::from({1}, {-1.0});
    Tensor z = Tensor::from({3, 1}, {10, 20, 30});
    Tensor y = run_vc(layer, z);
    CHECK(y(0, 0) == doctest::Approx(19.0).epsilon(1e-14));
    CHECK(y(1, 0) == doctest::Approx(-11.0).epsilon(1e-14));
    CHECK(y(2, 0) == doctest::Approx(79.0).epsilon(1e-14));
    CHECK(y(3, 0) == doctest::Approx(99.0).epsilon(1e-14));
    CHECK(y(4, 0) == doctest::Approx(-61.0).epsilon(1e-14));
    Tensor oracle = conv_oracle(up, layer.basis.value, layer.coeffs.value, layer.bias.value, z, false);
    CHECK(max_abs_diff(y, oracle) <= 1e-14);
}

TEST_CASE("direction guards on the conv entry points") {
    MeshTopology t = path_graph(5);
    SamplingMap down = build_down_map(t, {0, 2, 4}, 2, 1);
    SamplingMap up = build_up_map(t, {0, 2, 4}, 2, 1);
    Rng rng(7);
    VcConvLayer dl("d", down, 1, 1, 1, rng);
    VcConvLayer ul("u", up, 1, 1, 1, rng);
    Tape tape;
    CHECK_THROWS_AS(vc_trans_conv_forward(tape, dl, tape.input(Tensor::zeros({5, 1}))), ConfigError);
    CHECK_THROWS_AS(vc_conv_forward(tape, ul, tape.input(Tensor::zeros({3, 1}))), ConfigError);
}

TEST_CASE("locally connected identity") {
    SamplingMap map = identity_map(4);
    Rng rng(8);
    LcConvLayer layer("lc", map, 3, 3, rng);
    layer.weights.value.fill(0.0);
    for (int64_t s = 0; s < 4; ++s)
        for (int64_t c = 0; c < 3; ++c) layer.weights.value.at3(s, c, c) = 1.0;
    layer.bias.value.fill(0.0);
    Tensor x = random_tensor({4, 3}, rng);
    Tape tape;
    Value y = lc_conv_forward(tape, layer, tape.input(x));
    CHECK(tape.value(y).values() == x.values());
}

TEST_CASE("locally connected convolution against a dense-matrix oracle") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        MeshTopology t = random_graph(12, 0.3, seed);
        std::vector<int> sel = select_vertices(t, 2, {}, seed);
        SamplingMap map = build_down_map(t, sel, 2, 1);
        int in_c = 2, out_c = 3;
        Rng rng(seed + 50);
        LcConvLayer layer("lc", map, in_c, out_c, rng);
        Tensor x = random_tensor({t.num_vertices(), in_c}, rng);

        // assemble the full linear operator: rows index (output vertex, out
        // channel), columns index (input vertex, in channel)
        int n_out = map.out_vertices();
        Tensor a({static_cast<int64_t>(n_out) * out_c, static_cast<int64_t>(t.num_vertices()) * in_c});
        int slot = 0;
        for (int i = 0; i < n_out; ++i)
            for (int j : map.row(i)) {
                for (int c = 0; c < in_c; ++c)
                    for (int o = 0; o < out_c; ++o)
                        a(static_cast<int64_t>(i) * out_c + o,
                          static_cast<int64_t>(j) * in_c + c) += layer.weights.value.at3(slot, c, o);
                ++slot;
            }
        Tensor expect({n_out, out_c});
        for (int i = 0; i < n_out; ++i)
            for (int o = 0; o < out_c; ++o) {
                double acc = layer.bias.value(o);
                for (int64_t col = 0; col < a.cols(); ++col)
                    acc += a(static_cast<int64_t>(i) * out_c + o, col) * x(col / in_c, col % in_c);
                expect(i, o) = acc;
            }

        Tape tape;
        Value y = lc_conv_forward(tape, layer, tape.input(x));
        CHECK(max_abs_diff(tape.value(y), expect) <= 1e-12);
    }
}

TEST_CASE("matrix-unit basis subsumes locally connected layers") {
    Rng pick(123);
    for (int trial = 0; trial < 10; ++trial) {
        int in_c = 1 + static_cast<int>(pick.uniform_int(4));
        int out_c = 1 + static_cast<int>(pick.uniform_int(4));
        int n = 6 + static_cast<int>(pick.uniform_int(15));
        MeshTopology t = random_graph(n, 0.25, static_cast<uint64_t>(trial) * 7 + 1);
        std::vector<int> sel = select_vertices(t, 2, {}, static_cast<uint64_t>(trial));
        SamplingMap map = build_down_map(t, sel, 2, 1);

        Rng rng(static_cast<uint64_t>(trial) + 200);
        LcConvLayer lc("lc", map, in_c, out_c, rng);

        int m = in_c * out_c;
        VcConvLayer vc("vc", map, in_c, out_c, m, rng);
        vc.basis.value.fill(0.0);
        for (int c = 0; c < in_c; ++c)
            for (int o = 0; o < out_c; ++o) vc.basis.value.at3(c * out_c + o, c, o) = 1.0;
        for (int64_t s = 0; s < map.total_slots(); ++s)
            for (int c = 0; c < in_c; ++c)
                for (int o = 0; o < out_c; ++o)
                    vc.coeffs.value(s, c * out_c + o) = lc.weights.value.at3(s, c, o);
        vc.bias.value = lc.bias.value;

        Tensor x = random_tensor({n, in_c}, rng);
        Tape tape;
        Value ylc = lc_conv_forward(tape, lc, tape.input(x));
        Value yvc = vc_conv_forward(tape, vc, tape.input(x));
        CHECK(max_abs_diff(tape.value(ylc), tape.value(yvc)) <= 1e-12);
    }
}

TEST_CASE("density pooling examples") {
    SamplingMap map(MapDirection::Down, 2, 1, 3, {{0, 1, 2}});
    VdWeights vd("vd", map);

    Tape tape;
    Value y = vd_pool_forward(tape, vd, tape.input(Tensor::from({3, 1}, {0, 3, 6})));
    CHECK(tape.value(y)(0, 0) == doctest::Approx(3.0).epsilon(1e-15));  // rho=1: plain average

    SamplingMap pair_map(MapDirection::Down, 2, 1, 2, {{0, 1}});
    VdWeights vd2("vd2", pair_map);
    vd2.rho.value = Tensor::from({2}, {-1.0, 3.0});
    Tape tape2;
    Value y2 = vd_pool_forward(tape2, vd2, tape2.input(Tensor::from({2, 1}, {10, 2})));
    CHECK(tape2.value(y2)(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("density weights are convex and rows sum to one") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
        MeshTopology t = random_graph(20, 0.2, seed);
        std::vector<int> sel = select_vertices(t, 2, {}, seed);
        SamplingMap map = build_down_map(t, sel, 2, 1);
        VdWeights vd("vd", map);
        Rng rng(seed + 10);
        for (int64_t i = 0; i < vd.rho.value.numel(); ++i) vd.rho.value(i) = rng.uniform(-2.0, 2.0);
        Tensor w = vd.normalized();
        int slot = 0;
        for (int i = 0; i < map.out_vertices(); ++i) {
            double sum = 0.0;
            for (int j = 0; j < map.row_size(i); ++j) {
                CHECK(w(slot) >= 0.0);
                sum += w(slot);
                ++slot;
            }
            CHECK(std::fabs(sum - 1.0) <= 1e-12);
        }

        // convexity: pooled values stay inside the per-channel hull
        Tensor x = random_tensor({t.num_vertices(), 2}, rng);
        Tape tape;
        Value y = vd_pool_forward(tape, vd, tape.input(x));
        const Tensor& yv = tape.value(y);
        for (int i = 0; i < map.out_vertices(); ++i)
            for (int c = 0; c < 2; ++c) {
                double lo = 1e30, hi = -1e30;
                for (int j : map.row(i)) {
                    lo = std::min(lo, x(j, c));
                    hi = std::max(hi, x(j, c));
                }
                CHECK(yv(i, c) >= lo - 1e-12);
                CHECK(yv(i, c) <= hi + 1e-12);
            }
    }
}

TEST_CASE("density pooling ignores the scale of rho") {
    MeshTopology t = path_graph(7);
    std::vector<int> sel = select_vertices(t, 2, {0}, 0);
    SamplingMap map = build_down_map(t, sel, 2, 1);
    VdWeights vd("vd", map);
    Rng rng(17);
    for (int64_t i = 0; i < vd.rho.value.numel(); ++i) vd.rho.value(i) = rng.uniform(-2.0, 2.0);
    Tensor x = random_tensor({7, 3}, rng);

    auto pool = [&]() {
        Tape tape;
        return Tensor(tape.value(vd_pool_forward(tape, vd, tape.input(x))));
    };
    Tensor base = pool();
    for (double c : {3.0, -2.0, 0.001}) {
        Tensor saved = vd.rho.value;
        for (int64_t i = 0; i < vd.rho.value.numel(); ++i) vd.rho.value(i) *= c;
        CHECK(max_abs_diff(pool(), base) <= 1e-12);
        vd.rho.value = saved;
    }
}

TEST_CASE("constant signals pass through density pooling") {
    MeshTopology t = path_graph(7);
    std::vector<int> sel = select_vertices(t, 2, {0}, 0);
    SamplingMap down = build_down_map(t, sel, 2, 1);
    SamplingMap up = build_up_map(t, sel, 2, 1);
    VdWeights vdd("d", down);
    VdWeights vdu("u", up);
    Rng rng(18);
    for (int64_t i = 0; i < vdd.rho.value.numel(); ++i) vdd.rho.value(i) = rng.uniform(0.1, 2.0);
    for (int64_t i = 0; i < vdu.rho.value.numel(); ++i) vdu.rho.value(i) = rng.uniform(0.1, 2.0);
    Tensor cst = Tensor::full({7, 2}, 1.25);
    Tensor cst_coarse = Tensor::full({static_cast<int64_t>(sel.size()), 2}, 1.25);
    Tape tape;
    const Tensor& yd = tape.value(vd_pool_forward(tape, vdd, tape.input(cst)));
    const Tensor& yu = tape.value(vd_unpool_forward(tape, vdu, tape.input(cst_coarse)));
    for (int64_t i = 0; i < yd.numel(); ++i) CHECK(yd(i) == doctest::Approx(1.25).epsilon(1e-13));
    for (int64_t i = 0; i < yu.numel(); ++i) CHECK(yu(i) == doctest::Approx(1.25).epsilon(1e-13));
}

TEST_CASE("an all-zero density row falls back to uniform with a warning") {
    SamplingMap map(MapDirection::Down, 2, 1, 3, {{0, 1, 2}});
    VdWeights vd("vd", map);
    vd.rho.value.fill(0.0);
    std::vector<std::string> warnings;
    set_warning_handler([&](const std::string& m) { warnings.push_back(m); });
    Tensor w = vd.normalized();
    set_warning_handler({});
    CHECK(!warnings.empty());
    for (int64_t i = 0; i < 3; ++i) CHECK(w(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("density residual layer maps channels") {
    SamplingMap map = identity_map(3);
    Rng rng(9);
    VdResLayer same("same", map, 2, 2, rng);
    CHECK(!same.channel_map.has_value());
    Tensor x = random_tensor({3, 2}, rng);
    Tape tape;
    Value y = vd_res_forward(tape, same, tape.input(x));
    CHECK(tape.value(y).values() == x.values());  // identity: C=I, rho'=1

    SamplingMap single(MapDirection::Down, 2, 1, 1, {{0}});
    VdResLayer wide("wide", single, 1, 2, rng);
    REQUIRE(wide.channel_map.has_value());
    wide.channel_map->value = Tensor::from({2, 1}, {2.0, 3.0});
    Tape tape2;
    Value y2 = vd_res_forward(tape2, wide, tape2.input(Tensor::from({1, 1}, {5.0})));
    CHECK(tape2.value(y2)(0, 0) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(tape2.value(y2)(0, 1) == doctest::Approx(15.0).epsilon(1e-14));
}

TEST_CASE("multi-neighbor residual layer against brute force") {
    MeshTopology t = path_graph(5);
    SamplingMap map = build_down_map(t, {0, 2, 4}, 2, 1);
    Rng rng(10);
    VdResLayer layer("res", map, 2, 3, rng);
    for (int64_t i = 0; i < layer.vd.rho.value.numel(); ++i)
        layer.vd.rho.value(i) = rng.uniform(-1.5, 1.5);
    Tensor x = random_tensor({5, 2}, rng);

    Tensor w = layer.vd.normalized();
    Tensor expect({3, 3});
    int slot = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j : map.row(i)) {
            for (int o = 0; o < 3; ++o) {
                double cx = 0.0;
                for (int c = 0; c < 2; ++c) cx += layer.channel_map->value(o, c) * x(j, c);
                expect(i, o) += w(slot) * cx;
            }
            ++slot;
        }
    }
    Tape tape;
    Value y = vd_res_forward(tape, layer, tape.input(x));
    CHECK(max_abs_diff(tape.value(y), expect) <= 1e-13);
}

TEST_CASE("average and max pooling") {
    SamplingMap id = identity_map(4);
    Rng rng(11);
    Tensor x = random_tensor({4, 2}, rng);
    Tape tape;
    CHECK(tape.value(avg_pool_forward(tape, id, tape.input(x))).values() == x.values());
    CHECK(tape.value(max_pool_forward(tape, id, tape.input(x))).values() == x.values());

    SamplingMap row3(MapDirection::Down, 2, 1, 3, {{0, 1, 2}});
    Tensor v = Tensor::from({3, 1}, {1, 5, 3});
    Tape tape2;
    CHECK(tape2.value(avg_pool_forward(tape2, row3, tape2.input(v)))(0, 0) == doctest::Approx(3.0));
    CHECK(tape2.value(max_pool_forward(tape2, row3, tape2.input(v)))(0, 0) == 5.0);

    // max routes its gradient to the argmax slot
    Parameter p("p", v);
    Tape tape3;
    tape3.backward(tape3.sum(max_pool_forward(tape3, row3, tape3.param(p))));
    CHECK(p.grad(0) == 0.0);
    CHECK(p.grad(1) == 1.0);
    CHECK(p.grad(2) == 0.0);
}

TEST_CASE("parameter count formulas") {
    // one output vertex per row size 2,3,4,5 over 5 inputs: sum E_i = 14
    SamplingMap map(MapDirection::Down, 2, 2, 5,
                    {{0, 1}, {0, 1, 2}, {0, 1, 2, 3}, {0, 1, 2, 3, 4}});
    REQUIRE(map.total_slots() == 14);
    Rng rng(12);
    VcConvLayer vc("vc", map, 3, 8, 5, rng);
    CHECK(vc.param_count() == 198);  // 3*8*5 + 5*14 + 8
    CHECK(vc_conv_param_count(3, 8, 5, 14) == 198);
    LcConvLayer lc("lc", map, 3, 8, rng);
    CHECK(lc.param_count() == 344);  // 3*8*14 + 8
    CHECK(lc_conv_param_count(3, 8, 14) == 344);

    VdWeights vd("vd", map);
    CHECK(vd.param_count() == 14);
    VdResLayer res_same("rs", map, 4, 4, rng);
    CHECK(res_same.param_count() == 14);  // C is identity, no parameters
    VdResLayer res_diff("rd", map, 3, 4, rng);
    CHECK(res_diff.param_count() == 14 + 12);
}

TEST_CASE("parameter formulas match registered scalars on random configurations") {
    Rng pick(77);
    for (int trial = 0; trial < 24; ++trial) {
        int n = 6 + static_cast<int>(pick.uniform_int(20));
        MeshTopology t = random_graph(n, 0.25, static_cast<uint64_t>(trial) * 13 + 3);
        std::vector<int> sel = select_vertices(t, 2, {}, static_cast<uint64_t>(trial));
        SamplingMap map = build_down_map(t, sel, 2, 1 + static_cast<int>(pick.uniform_int(2)));
        int in_c = 1 + static_cast<int>(pick.uniform_int(5));
        int out_c = 1 + static_cast<int>(pick.uniform_int(5));
        int m = 1 + static_cast<int>(pick.uniform_int(6));
        Rng rng(static_cast<uint64_t>(trial));

        VcConvLayer vc("vc", map, in_c, out_c, m, rng);
        int64_t sum_e = map.total_slots();
        CHECK(vc.param_count() ==
              static_cast<int64_t>(in_c) * out_c * m + static_cast<int64_t>(m) * sum_e + out_c);
        int64_t registered = 0;
        for (Parameter* p : vc.parameters()) registered += p->numel();
        CHECK(vc.param_count() == registered);

        LcConvLayer lc("lc", map, in_c, out_c, rng);
        CHECK(lc.param_count() == static_cast<int64_t>(in_c) * out_c * sum_e + out_c);
        registered = 0;
        for (Parameter* p : lc.parameters()) registered += p->numel();
        CHECK(lc.param_count() == registered);

        VdResLayer res("res", map, in_c, out_c, rng);
        registered = 0;
        for (Parameter* p : res.parameters()) registered += p->numel();
        CHECK(res.param_count() == registered);

        // the claimed savings hold exactly when M is under the crossover
        double crossover = static_cast<double>(in_c) * out_c * static_cast<double>(sum_e) /
                           (static_cast<double>(in_c) * out_c + static_cast<double>(sum_e));
        if (m < crossover) CHECK(vc.param_count() < lc.param_count());
        if (m > crossover) CHECK(vc.param_count() > lc.param_count());
    }
}

TEST_CASE("auto basis size is the rounded mean row size") {
    MeshTopology t = path_graph(5);
    SamplingMap map = build_down_map(t, {0, 2, 4}, 2, 1);  // E = {2,3,2}
    CHECK(auto_basis_size(map) == 2);
    SamplingMap single(MapDirection::Down, 2, 1, 1, {{0}});
    CHECK(auto_basis_size(single) == 1);
}

TEST_CASE("layers with zero bias are homogeneous") {
    MeshTopology t = path_graph(7);
    std::vector<int> sel = select_vertices(t, 2, {0}, 0);
    SamplingMap map = build_down_map(t, sel, 2, 1);
    Rng rng(13);
    VcConvLayer vc("vc", map, 2, 3, 2, rng);
    vc.bias.value.fill(0.0);
    LcConvLayer lc("lc", map, 2, 3, rng);
    lc.bias.value.fill(0.0);
    VdResLayer res("res", map, 2, 3, rng);
    Tensor x = random_tensor({7, 2}, rng);
    Tensor x2 = x;
    for (int64_t i = 0; i < x2.numel(); ++i) x2(i) *= 2.0;  // doubling is exact

    auto doubled = [&](const std::function<Value(Tape&, Value)>& f) {
        Tape ta, tb;
        Tensor ya = ta.value(f(ta, ta.input(x)));
        Tensor yb = tb.value(f(tb, tb.input(x2)));
        for (int64_t i = 0; i < ya.numel(); ++i) CHECK(yb(i) == 2.0 * ya(i));
    };
    doubled([&](Tape& t2, Value v) { return vc_conv_forward(t2, vc, v); });
    doubled([&](Tape& t2, Value v) { return lc_conv_forward(t2, lc, v); });
    doubled([&](Tape& t2, Value v) { return vd_res_forward(t2, res, v); });
    doubled([&](Tape& t2, Value v) { return vd_pool_forward(t2, res.vd, v); });
    doubled([&](Tape& t2, Value v) { return avg_pool_forward(t2, map, v); });
    doubled([&](Tape& t2, Value v) { return max_pool_forward(t2, map, v); });
}

TEST_CASE("basis normalization makes the kernels scale-free") {
    MeshTopology t = path_graph(7);
    std::vector<int> sel = select_vertices(t, 2, {0}, 0);
    SamplingMap map = build_down_map(t, sel, 2, 1);
    Rng rng(14);
    VcConvLayer layer("nb", map, 2, 2, 3, rng, true);
    CHECK(layer.normalize_basis);
    Tensor x = random_tensor({7, 2}, rng);
    Tensor base = run_vc(layer, x);
    for (int64_t i = 0; i < layer.basis.value.numel(); ++i) layer.basis.value(i) *= 7.0;
    CHECK(max_abs_diff(run_vc(layer, x), base) <= 1e-12);
}

TEST_CASE("every layer passes the gradient check") {
    MeshTopology t = random_graph(12, 0.3, 42);
    std::vector<int> sel = select_vertices(t, 2, {}, 1);
    SamplingMap down = build_down_map(t, sel, 2, 2);
    SamplingMap up = build_up_map(t, sel, 2, 2);
    int n = t.num_vertices();
    int nc = static_cast<int>(sel.size());
    Rng rng(15);
    Tensor x = random_tensor({n, 2}, rng);
    Tensor z = random_tensor({nc, 3}, rng);

    auto check = [&](std::vector<Parameter*> params, const std::function<Value(Tape&)>& f) {
        GradCheckReport report = grad_check(params, f, 1e-6, 1e-4);
        CHECK(report.passed);
        CHECK(report.max_rel_error < 1e-4);
    };

    VcConvLayer vc("vc", down, 2, 3, 2, rng);
    check(vc.parameters(), [&](Tape& tp) {
        return tp.sum(tp.elu(vc_conv_forward(tp, vc, tp.input(x))));
    });

    VcConvLayer vcn("vcn", down, 2, 3, 2, rng, true);
    check(vcn.parameters(), [&](Tape& tp) {
        return tp.sum(tp.elu(vc_conv_forward(tp, vcn, tp.input(x))));
    });

    VcConvLayer vct("vct", up, 3, 2, 2, rng);
    check(vct.parameters(), [&](Tape& tp) {
        return tp.sum(tp.elu(vc_trans_conv_forward(tp, vct, tp.input(z))));
    });

    LcConvLayer lc("lc", down, 2, 3, rng);
    check(lc.parameters(), [&](Tape& tp) {
        return tp.sum(tp.elu(lc_conv_forward(tp, lc, tp.input(x))));
    });

    VdWeights vdd("vdd", down);
    Rng jitter(16);
    for (int64_t i = 0; i < vdd.rho.value.numel(); ++i) vdd.rho.value(i) = jitter.uniform(0.2, 2.0);
    Parameter px("px", x);
    check({&vdd.rho, &px}, [&](Tape& tp) {
        return tp.sum(tp.elu(vd_pool_forward(tp, vdd, tp.param(px))));
    });

    VdWeights vdu("vdu", up);
    for (int64_t i = 0; i < vdu.rho.value.numel(); ++i) vdu.rho.value(i) = jitter.uniform(0.2, 2.0);
    check(vdu.parameters(), [&](Tape& tp) {
        return tp.sum(tp.elu(vd_unpool_forward(tp, vdu, tp.input(z))));
    });

    VdResLayer res("res", down, 2, 3, rng);
    for (int64_t i = 0; i < res.vd.rho.value.numel(); ++i) res.vd.rho.value(i) = jitter.uniform(0.2, 2.0);
    check(res.parameters(), [&](Tape& tp) {
        return tp.sum(tp.elu(vd_res_forward(tp, res, tp.input(x))));
    });

    Parameter pool_in("pool_in", x);
    check({&pool_in}, [&](Tape& tp) {
        Value a = avg_pool_forward(tp, down, tp.param(pool_in));
        Value m = max_pool_forward(tp, down, tp.param(pool_in));
        return tp.sum(tp.add(a, m));
    });

    Parameter unpool_in("unpool_in", z);
    check({&unpool_in}, [&](Tape& tp) {
        Value a = avg_unpool_forward(tp, up, tp.param(unpool_in));
        Value m = max_unpool_forward(tp, up, tp.param(unpool_in));
        return tp.sum(tp.add(a, m));
    });
}
