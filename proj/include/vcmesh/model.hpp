#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vcmesh/layers.hpp"
#include "vcmesh/mesh.hpp"
#include "vcmesh/serialize.hpp"

namespace vcmesh {

// conv -> elu on the main path, density residual as the shortcut, summed.
// The final decoder block runs the main path linear (no elu).
struct ResidualBlock {
    std::string name;
    VcConvLayer conv;
    std::optional<VdResLayer> res;
    bool transposed = false;
    bool activate = true;

    ResidualBlock(std::string name, const SamplingMap& map, int in_channels, int out_channels,
                  int basis_size, Rng& rng, bool transposed, bool activate, bool with_residual,
                  bool normalize_basis);

    Value forward(Tape& tape, Value x);
    std::vector<Parameter*> parameters();
    int64_t param_count() const;
};

struct LatentCode {
    Tensor values;  // {latent vertices, latent channels}
    uint64_t fingerprint = 0;
};

struct BuildOptions {
    // per-block basis sizes, 2*depth entries; <= 0 entries resolve to
    // round(mean E_i) of that block's map. Empty = all auto.
    std::vector<int> m_plan;
    bool use_residual = true;
    bool normalize_basis = false;
    uint64_t init_seed = 0;
};

// Mirrored fully convolutional autoencoder over a sampling hierarchy: one
// down block per level, then one up block per level in reverse. No dense
// layers anywhere; the latent code keeps one row per coarsest-level vertex.
class AutoencoderModel {
public:
    AutoencoderModel(const AutoencoderModel&) = delete;
    AutoencoderModel& operator=(const AutoencoderModel&) = delete;
    AutoencoderModel(AutoencoderModel&&) = default;
    AutoencoderModel& operator=(AutoencoderModel&&) = default;

    const SamplingHierarchy& hierarchy() const { return *hierarchy_; }
    uint64_t fingerprint() const { return fingerprint_; }
    int depth() const { return static_cast<int>(channel_plan_.size()) / 2; }
    const std::vector<int>& channel_plan() const { return channel_plan_; }
    const std::vector<int>& m_plan() const { return m_plan_; }
    bool use_residual() const { return use_residual_; }
    bool normalize_basis() const { return normalize_basis_; }
    int base_vertices() const { return hierarchy_->base().num_vertices(); }
    int latent_vertices() const { return hierarchy_->coarsest_vertex_count(); }
    int latent_channels() const { return channel_plan_[static_cast<size_t>(depth())]; }
    int in_channels() const { return channel_plan_.front(); }
    int out_channels() const { return channel_plan_.back(); }

    std::vector<ResidualBlock>& encoder() { return encoder_; }
    std::vector<ResidualBlock>& decoder() { return decoder_; }
    const std::vector<ResidualBlock>& encoder() const { return encoder_; }
    const std::vector<ResidualBlock>& decoder() const { return decoder_; }

    // declared checkpoint order: encoder blocks then decoder blocks, inside a
    // block (basis, coeffs, bias, rho, channel map)
    std::vector<Parameter*> parameters();
    int64_t param_count() const;

    Value encode_value(Tape& tape, Value x);
    Value decode_value(Tape& tape, Value code);
    Value reconstruct_value(Tape& tape, Value x);

    LatentCode encode(const Tensor& x);
    Tensor decode(const LatentCode& code);
    Tensor reconstruct(const Tensor& x);

    friend AutoencoderModel build_autoencoder(const SamplingHierarchy& hierarchy,
                                              const std::vector<int>& channel_plan,
                                              const BuildOptions& options);

private:
    AutoencoderModel() = default;

    std::unique_ptr<SamplingHierarchy> hierarchy_;
    uint64_t fingerprint_ = 0;
    std::vector<int> channel_plan_;
    std::vector<int> m_plan_;
    bool use_residual_ = true;
    bool normalize_basis_ = false;
    std::vector<ResidualBlock> encoder_;
    std::vector<ResidualBlock> decoder_;
};

// channel_plan holds 2*depth + 1 entries: encoder widths down to the latent
// width, then decoder widths back out.
AutoencoderModel build_autoencoder(const SamplingHierarchy& hierarchy,
                                   const std::vector<int>& channel_plan,
                                   const BuildOptions& options = {});

Value loss_l1(Tape& tape, Value pred, Value target);
Value loss_laplacian(Tape& tape, Value pred, Value target, const MeshTopology& topology);
double loss_l1(const Tensor& pred, const Tensor& target);
double loss_laplacian(const Tensor& pred, const Tensor& target, const MeshTopology& topology);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    void init(const std::vector<Parameter*>& params);
    bool initialized() const { return !m.empty(); }
};

void adam_step(const std::vector<Parameter*>& params, AdamState& state, double lr);
double lr_schedule(double lr0, double decay, int epoch);

struct TrainConfig {
    int batch_size = 16;
    double lr = 1e-4;
    double decay = 0.9;
    int epochs = 1;
    double l1_weight = 1.0;
    double laplacian_weight = 0.0;
    uint64_t seed = 0;
    int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = final only
    std::string out_dir;       // when set: train_log.tsv + checkpoint.ckpt live here
};

// everything beyond parameters that a checkpoint restores
struct TrainerState {
    AdamState adam;
    int epoch = 0;
    Rng rng;
};

struct TrainResult {
    std::vector<double> epoch_train_l1;
    std::vector<double> epoch_val_l1;  // empty when there is no val split
    std::vector<double> step_loss;     // weighted training objective per step
    std::vector<double> step_l1;       // batch mean L1 per step
    double initial_train_l1 = 0.0;     // dataset mean L1 before the first step of this call
    double final_train_l1 = 0.0;
    int epochs_run = 0;
};

// Runs epochs [state->epoch, config.epochs); passing no state trains from
// scratch with a fresh optimizer seeded by config.seed.
TrainResult train(AutoencoderModel& model, const MeshDataset& data, const TrainConfig& config,
                  TrainerState* state = nullptr);

double mean_dataset_l1(AutoencoderModel& model, const MeshDataset& data,
                       const std::vector<int>& indices);

LatentCode interpolate_latent(const LatentCode& source, const LatentCode& target,
                              const std::vector<int>& subset, double t);
LatentCode mix_latent(const LatentCode& base, const LatentCode& donor,
                      const std::vector<int>& subset);

void save_checkpoint(const std::string& path, const AutoencoderModel& model,
                     const TrainerState& state);
AutoencoderModel load_checkpoint(const std::string& path, const SamplingHierarchy& hierarchy,
                                 TrainerState* state_out = nullptr);

void save_latent(const std::string& path, const LatentCode& code);
LatentCode load_latent(const std::string& path);

}  // namespace vcmesh
