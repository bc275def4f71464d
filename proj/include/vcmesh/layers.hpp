#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vcmesh/autodiff.hpp"
#include "vcmesh/rng.hpp"
#include "vcmesh/sampling.hpp"

namespace vcmesh {

// Sink for non-fatal numerical notices (e.g. an all-zero density row).
// Defaults to stderr; tests may capture.
void set_warning_handler(std::function<void(const std::string&)> handler);
void warn(const std::string& message);

// Convolution whose per-neighbor kernels W(i,j) are mixes of a small shared
// basis of I x O matrices; only the length-M mixing coefficients vary per
// (output vertex, neighbor slot).
struct VcConvLayer {
    const SamplingMap* map = nullptr;
    int in_channels = 0;
    int out_channels = 0;
    int basis_size = 0;
    bool normalize_basis = false;  // scale each basis matrix to unit Frobenius norm per pass
    Parameter basis;   // {M, I, O}
    Parameter coeffs;  // {total_slots, M}, slot order follows the map
    Parameter bias;    // {O}

    // Kernel synthesis depends only on parameters, so one tape needs it once
    // no matter how many samples it processes. Serials are never reused.
    uint64_t kernel_serial = 0;
    Value kernel_cache{};

    VcConvLayer(const std::string& name, const SamplingMap& map, int in_channels,
                int out_channels, int basis_size, Rng& rng, bool normalize_basis = false);

    std::vector<Parameter*> parameters();
    int64_t param_count() const;
};

// Free per-neighbor kernels, the over-parameterized baseline.
struct LcConvLayer {
    const SamplingMap* map = nullptr;
    int in_channels = 0;
    int out_channels = 0;
    Parameter weights;  // {total_slots, I, O}
    Parameter bias;     // {O}

    LcConvLayer(const std::string& name, const SamplingMap& map, int in_channels,
                int out_channels, Rng& rng);

    std::vector<Parameter*> parameters();
    int64_t param_count() const;
};

// Raw per-neighbor densities; |rho| normalized per output vertex gives convex
// aggregation weights.
struct VdWeights {
    const SamplingMap* map = nullptr;
    Parameter rho;  // {total_slots}, initialized to 1 (plain averaging)

    VdWeights(const std::string& name, const SamplingMap& map);

    // Eq-form normalized weights as plain numbers (no tape), zero rows made uniform
    Tensor normalized() const;
    std::vector<Parameter*> parameters();
    int64_t param_count() const;
};

// Density-weighted residual layer: y_i = sum_j rho'(i,j) C x_(i,j); C is the
// identity (and carries no parameters) when channel counts match.
struct VdResLayer {
    VdWeights vd;
    int in_channels = 0;
    int out_channels = 0;
    std::optional<Parameter> channel_map;  // {O, I} iff I != O

    VdResLayer(const std::string& name, const SamplingMap& map, int in_channels,
               int out_channels, Rng& rng);

    std::vector<Parameter*> parameters();
    int64_t param_count() const;
};

Value vc_conv_forward(Tape& tape, VcConvLayer& layer, Value x);        // map must be down
Value vc_trans_conv_forward(Tape& tape, VcConvLayer& layer, Value x);  // map must be up
Value lc_conv_forward(Tape& tape, LcConvLayer& layer, Value x);        // map must be down
Value vd_pool_forward(Tape& tape, VdWeights& vd, Value x);             // map must be down
Value vd_unpool_forward(Tape& tape, VdWeights& vd, Value x);           // map must be up
Value vd_res_forward(Tape& tape, VdResLayer& layer, Value x);          // either direction

Value avg_pool_forward(Tape& tape, const SamplingMap& map, Value x);    // down
Value max_pool_forward(Tape& tape, const SamplingMap& map, Value x);    // down
Value avg_unpool_forward(Tape& tape, const SamplingMap& map, Value x);  // up
Value max_unpool_forward(Tape& tape, const SamplingMap& map, Value x);  // up

int64_t vc_conv_param_count(int in_channels, int out_channels, int basis_size, int64_t total_slots);
int64_t lc_conv_param_count(int in_channels, int out_channels, int64_t total_slots);

// round(mean E_i) of the map, at least 1
int auto_basis_size(const SamplingMap& map);

}  // namespace vcmesh
