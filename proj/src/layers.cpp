#include "vcmesh/layers.hpp"

#include <cmath>
#include <cstdio>

#include "vcmesh/error.hpp"

namespace vcmesh {

namespace {

std::function<void(const std::string&)>& warning_handler() {
    static std::function<void(const std::string&)> handler = [](const std::string& m) {
        std::fprintf(stderr, "warning: %s\n", m.c_str());
    };
    return handler;
}

void require_direction(const SamplingMap& map, MapDirection want, const char* op) {
    if (map.direction() != want)
        throw ConfigError(std::string(op) + " needs a " +
                          (want == MapDirection::Down ? "down" : "up") + "-sampling map");
}

void require_vertices(const SamplingMap& map, const Tensor& x, const char* op) {
    if (x.rank() != 2)
        throw InputError(std::string(op) + ": features must be a {vertices, channels} matrix");
    if (x.dim(0) != map.in_vertices())
        throw InputError(std::string(op) + ": expected " + std::to_string(map.in_vertices()) +
                         " input vertices, got " + std::to_string(x.dim(0)));
}

void require_features(const SamplingMap& map, const Tensor& x, int channels, const char* op) {
    require_vertices(map, x, op);
    if (x.dim(1) != channels)
        throw InputError(std::string(op) + ": expected " + std::to_string(channels) + " channels");
}

const SamplingMap& checked_map(const SamplingMap& m, int in, int out, int basis, const char* kind) {
    if (in < 1 || out < 1 || basis < 1)
        throw InputError(std::string(kind) + " layer extents must be positive");
    return m;
}

Tensor uniform_tensor(std::vector<int64_t> shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t(i) = rng.uniform(-bound, bound);
    return t;
}

// coefficients are drawn per slot row with a bound tied to the owner's
// neighborhood size
Tensor coeff_init(const SamplingMap& map, int basis_size, Rng& rng) {
    Tensor t({map.total_slots(), basis_size});
    const auto& owners = map.slot_owners();
    for (int64_t q = 0; q < map.total_slots(); ++q) {
        int e = map.row_size(owners[static_cast<size_t>(q)]);
        double bound = std::sqrt(1.0 / (static_cast<double>(e) * basis_size));
        for (int k = 0; k < basis_size; ++k) t(q, k) = rng.uniform(-bound, bound);
    }
    return t;
}

// Eq-form normalized densities with the zero-row fallback; used on and off
// tape so both agree byte for byte.
Tensor density_fill(const SamplingMap& map, const Tensor& rho, bool* had_zero_row) {
    Tensor fill = Tensor::zeros({map.total_slots()});
    const auto& offsets = map.flat_offsets();
    bool any = false;
    for (int i = 0; i < map.out_vertices(); ++i) {
        double mass = 0.0;
        for (int q = offsets[static_cast<size_t>(i)]; q < offsets[static_cast<size_t>(i) + 1]; ++q)
            mass += std::fabs(rho(q));
        if (mass == 0.0) {
            any = true;
            for (int q = offsets[static_cast<size_t>(i)]; q < offsets[static_cast<size_t>(i) + 1]; ++q)
                fill(q) = 1.0;
        }
    }
    if (had_zero_row) *had_zero_row = any;
    return fill;
}

Value normalized_density_value(Tape& tape, VdWeights& vd) {
    const SamplingMap& map = *vd.map;
    bool had_zero_row = false;
    Tensor fill = density_fill(map, vd.rho.value, &had_zero_row);
    if (had_zero_row)
        warn("all-zero density row in " + vd.rho.name + "; using a uniform average for it");
    Value rho = tape.param(vd.rho);
    Value af = tape.add(tape.abs(rho), tape.input(std::move(fill)));
    Value mass = tape.scatter_rows(af, map.slot_owners(), map.out_vertices());
    Value denom = tape.gather_rows(mass, map.slot_owners());
    return tape.div(af, denom);
}

Value conv_core(Tape& tape, VcConvLayer& layer, Value x, const char* op) {
    const SamplingMap& map = *layer.map;
    require_features(map, tape.value(x), layer.in_channels, op);
    int64_t q = map.total_slots();
    int64_t in = layer.in_channels, out = layer.out_channels, m = layer.basis_size;
    Value xg = tape.gather_rows(x, map.flat_indices());
    Value w = layer.kernel_cache;
    if (layer.kernel_serial != tape.serial() || !w.valid()) {
        Value bflat = tape.reshape(tape.param(layer.basis), {m, in * out});
        if (layer.normalize_basis) bflat = tape.normalize_rows(bflat, 1e-12);
        Value wflat = tape.matmul(tape.param(layer.coeffs), bflat);
        w = tape.reshape(wflat, {q, in, out});
        layer.kernel_serial = tape.serial();
        layer.kernel_cache = w;
    }
    Value s = tape.slot_matmul(w, xg);
    Value y = tape.scatter_rows(s, map.slot_owners(), map.out_vertices());
    return tape.add_bias(y, tape.param(layer.bias));
}

Value vd_aggregate(Tape& tape, VdWeights& vd, Value x, const char* op) {
    const SamplingMap& map = *vd.map;
    require_vertices(map, tape.value(x), op);
    Value w = normalized_density_value(tape, vd);
    Value xg = tape.gather_rows(x, map.flat_indices());
    return weighted_scatter_add(tape, xg, w, map.slot_owners(), map.out_vertices());
}

}  // namespace

void set_warning_handler(std::function<void(const std::string&)> handler) {
    warning_handler() = std::move(handler);
}

void warn(const std::string& message) {
    if (warning_handler()) warning_handler()(message);
}

VcConvLayer::VcConvLayer(const std::string& name, const SamplingMap& m, int in, int out,
                         int basis, Rng& rng, bool normalize)
    : map(&checked_map(m, in, out, basis, "conv")),
      in_channels(in),
      out_channels(out),
      basis_size(basis),
      normalize_basis(normalize),
      basis(name + ".basis",
            uniform_tensor({basis, in, out},
                           std::sqrt(6.0 / (static_cast<double>(in) * basis +
                                            static_cast<double>(out) * basis)),
                           rng)),
      coeffs(name + ".coeffs", coeff_init(m, basis, rng)),
      bias(name + ".bias", Tensor::zeros({out})) {}

std::vector<Parameter*> VcConvLayer::parameters() {
    return {&basis, &coeffs, &bias};
}

int64_t VcConvLayer::param_count() const {
    return vc_conv_param_count(in_channels, out_channels, basis_size, map->total_slots());
}

LcConvLayer::LcConvLayer(const std::string& name, const SamplingMap& m, int in, int out, Rng& rng)
    : map(&checked_map(m, in, out, 1, "conv")),
      in_channels(in),
      out_channels(out),
      weights(name + ".weights",
              uniform_tensor({m.total_slots(), in, out}, std::sqrt(6.0 / (in + out)), rng)),
      bias(name + ".bias", Tensor::zeros({out})) {}

std::vector<Parameter*> LcConvLayer::parameters() {
    return {&weights, &bias};
}

int64_t LcConvLayer::param_count() const {
    return lc_conv_param_count(in_channels, out_channels, map->total_slots());
}

VdWeights::VdWeights(const std::string& name, const SamplingMap& m)
    : map(&m), rho(name + ".rho", Tensor::full({m.total_slots()}, 1.0)) {}

Tensor VdWeights::normalized() const {
    bool had_zero_row = false;
    Tensor fill = density_fill(*map, rho.value, &had_zero_row);
    if (had_zero_row)
        warn("all-zero density row in " + rho.name + "; using a uniform average for it");
    Tensor out({map->total_slots()});
    const auto& offsets = map->flat_offsets();
    for (int i = 0; i < map->out_vertices(); ++i) {
        double mass = 0.0;
        for (int q = offsets[static_cast<size_t>(i)]; q < offsets[static_cast<size_t>(i) + 1]; ++q)
            mass += std::fabs(rho.value(q)) + fill(q);
        for (int q = offsets[static_cast<size_t>(i)]; q < offsets[static_cast<size_t>(i) + 1]; ++q)
            out(q) = (std::fabs(rho.value(q)) + fill(q)) / mass;
    }
    return out;
}

std::vector<Parameter*> VdWeights::parameters() {
    return {&rho};
}

int64_t VdWeights::param_count() const {
    return map->total_slots();
}

VdResLayer::VdResLayer(const std::string& name, const SamplingMap& m, int in, int out, Rng& rng)
    : vd(name, checked_map(m, in, out, 1, "residual")), in_channels(in), out_channels(out) {
    if (in != out)
        channel_map.emplace(name + ".channel_map",
                            uniform_tensor({out, in}, std::sqrt(6.0 / (in + out)), rng));
}

std::vector<Parameter*> VdResLayer::parameters() {
    std::vector<Parameter*> ps = vd.parameters();
    if (channel_map) ps.push_back(&*channel_map);
    return ps;
}

int64_t VdResLayer::param_count() const {
    return vd.param_count() + (channel_map ? channel_map->numel() : 0);
}

Value vc_conv_forward(Tape& tape, VcConvLayer& layer, Value x) {
    require_direction(*layer.map, MapDirection::Down, "vc_conv_forward");
    return conv_core(tape, layer, x, "vc_conv_forward");
}

Value vc_trans_conv_forward(Tape& tape, VcConvLayer& layer, Value x) {
    require_direction(*layer.map, MapDirection::Up, "vc_trans_conv_forward");
    return conv_core(tape, layer, x, "vc_trans_conv_forward");
}

Value lc_conv_forward(Tape& tape, LcConvLayer& layer, Value x) {
    require_direction(*layer.map, MapDirection::Down, "lc_conv_forward");
    const SamplingMap& map = *layer.map;
    require_features(map, tape.value(x), layer.in_channels, "lc_conv_forward");
    Value xg = tape.gather_rows(x, map.flat_indices());
    Value s = tape.slot_matmul(tape.param(layer.weights), xg);
    Value y = tape.scatter_rows(s, map.slot_owners(), map.out_vertices());
    return tape.add_bias(y, tape.param(layer.bias));
}

Value vd_pool_forward(Tape& tape, VdWeights& vd, Value x) {
    require_direction(*vd.map, MapDirection::Down, "vd_pool_forward");
    return vd_aggregate(tape, vd, x, "vd_pool_forward");
}

Value vd_unpool_forward(Tape& tape, VdWeights& vd, Value x) {
    require_direction(*vd.map, MapDirection::Up, "vd_unpool_forward");
    return vd_aggregate(tape, vd, x, "vd_unpool_forward");
}

Value vd_res_forward(Tape& tape, VdResLayer& layer, Value x) {
    const Tensor& tx = tape.value(x);
    require_features(*layer.vd.map, tx, layer.in_channels, "vd_res_forward");
    Value pooled = vd_aggregate(tape, layer.vd, x, "vd_res_forward");
    if (!layer.channel_map) return pooled;
    return tape.matmul(pooled, tape.transpose(tape.param(*layer.channel_map)));
}

namespace {

Value mean_pool(Tape& tape, const SamplingMap& map, Value x, const char* op) {
    require_vertices(map, tape.value(x), op);
    Value xg = tape.gather_rows(x, map.flat_indices());
    Value summed = tape.scatter_rows(xg, map.slot_owners(), map.out_vertices());
    Tensor inv({static_cast<int64_t>(map.out_vertices())});
    for (int i = 0; i < map.out_vertices(); ++i) inv(i) = 1.0 / map.row_size(i);
    return tape.scale_rows(summed, tape.input(std::move(inv)));
}

Value peak_pool(Tape& tape, const SamplingMap& map, Value x, const char* op) {
    require_vertices(map, tape.value(x), op);
    Value xg = tape.gather_rows(x, map.flat_indices());
    return tape.segment_max(xg, map.slot_owners(), map.out_vertices());
}

}  // namespace

Value avg_pool_forward(Tape& tape, const SamplingMap& map, Value x) {
    require_direction(map, MapDirection::Down, "avg_pool_forward");
    return mean_pool(tape, map, x, "avg_pool_forward");
}

Value max_pool_forward(Tape& tape, const SamplingMap& map, Value x) {
    require_direction(map, MapDirection::Down, "max_pool_forward");
    return peak_pool(tape, map, x, "max_pool_forward");
}

Value avg_unpool_forward(Tape& tape, const SamplingMap& map, Value x) {
    require_direction(map, MapDirection::Up, "avg_unpool_forward");
    return mean_pool(tape, map, x, "avg_unpool_forward");
}

Value max_unpool_forward(Tape& tape, const SamplingMap& map, Value x) {
    require_direction(map, MapDirection::Up, "max_unpool_forward");
    return peak_pool(tape, map, x, "max_unpool_forward");
}

int64_t vc_conv_param_count(int in_channels, int out_channels, int basis_size, int64_t total_slots) {
    return static_cast<int64_t>(in_channels) * out_channels * basis_size +
           static_cast<int64_t>(basis_size) * total_slots + out_channels;
}

int64_t lc_conv_param_count(int in_channels, int out_channels, int64_t total_slots) {
    return static_cast<int64_t>(in_channels) * out_channels * total_slots + out_channels;
}

int auto_basis_size(const SamplingMap& map) {
    long rounded = std::lround(map.mean_row_size());
    return static_cast<int>(std::max(1l, rounded));
}

}  // namespace vcmesh
