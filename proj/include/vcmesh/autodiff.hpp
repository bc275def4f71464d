#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "vcmesh/tensor.hpp"

namespace vcmesh {

// A named tensor with a gradient accumulator. Layers own their parameters;
// tapes borrow them for the duration of a forward/backward pass.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

    void zero_grad() { grad.fill(0.0); }
    int64_t numel() const { return value.numel(); }
};

struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape over dense double tensors. Operations
// record their adjoints as they execute; backward() walks the records in
// reverse and accumulates into every bound Parameter's grad. Reusing a value
// in several places accumulates additively, as it must.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Value input(Tensor t);          // constant leaf
    // Differentiable leaf; grads land in p.grad. Repeated calls on one tape
    // return the same node, so the parameter value is snapshotted at first use.
    Value param(Parameter& p);

    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);    // elementwise
    Value div(Value a, Value b);    // elementwise
    Value scale(Value a, double c);
    Value abs(Value a);             // subgradient 0 at 0
    Value elu(Value a);
    Value sum(Value a);             // -> shape {1}
    Value matmul(Value a, Value b);
    Value transpose(Value a);       // rank-2 only
    Value add_bias(Value rows, Value bias);
    Value reshape(Value a, std::vector<int64_t> shape);
    Value concat_rows(const std::vector<Value>& parts);
    Value gather_rows(Value a, std::vector<int> rows);
    Value scatter_rows(Value a, std::vector<int> owners, int out_rows);  // sum per owner
    Value scale_rows(Value a, Value scales);
    // w has shape {Q, I, O}, x has shape {Q, I}; per-slot product -> {Q, O}
    Value slot_matmul(Value w, Value x);
    // rows scaled to unit euclidean norm; rows with norm <= eps divide by eps
    Value normalize_rows(Value a, double eps);
    // per-owner elementwise max; ties resolve to the lowest slot, empty owners yield 0
    Value segment_max(Value a, std::vector<int> owners, int out_rows);

    const Tensor& value(Value v) const;
    // gradient w.r.t. any node from the last backward(); zeros if unreached
    Tensor gradient(Value v) const;
    void backward(Value loss);
    int size() const { return static_cast<int>(nodes_.size()); }
    // distinct for every tape ever constructed; lets callers key caches to a tape
    uint64_t serial() const { return serial_; }

private:
    struct Node {
        Tensor value;
        std::vector<int> parents;
        std::function<void(Tape&, const Tensor& grad_out)> pull;  // accumulate into parents
        Parameter* bound = nullptr;
    };

    Value push(Tensor value, std::vector<int> parents,
               std::function<void(Tape&, const Tensor&)> pull);
    const Node& node(Value v) const;
    void accumulate(int id, const Tensor& g);

    static uint64_t next_serial();

    std::deque<Node> nodes_;  // deque keeps value() references stable as nodes are added
    std::vector<Tensor> grads_;
    std::vector<uint8_t> has_grad_;
    std::unordered_map<const Parameter*, int> param_nodes_;
    uint64_t serial_ = next_serial();
};

struct GradCheckEntry {
    std::string param;
    int64_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    bool passed = false;
    double max_rel_error = 0.0;
    GradCheckEntry worst;
    int64_t checked = 0;
};

// rows weighted per slot, then summed into their owner rows
Value weighted_scatter_add(Tape& tape, Value rows, Value weights, std::vector<int> owners,
                           int out_rows);

// Central differences against a fresh forward pass per probe. rel error is
// |a - n| / max(1, |a|, |n|). checks_per_param == 0 probes every element,
// otherwise that many per parameter chosen by the seeded rng.
GradCheckReport grad_check(const std::vector<Parameter*>& params,
                           const std::function<Value(Tape&)>& forward, double eps = 1e-6,
                           double tol = 1e-4, int64_t checks_per_param = 0, uint64_t seed = 0);

}  // namespace vcmesh
