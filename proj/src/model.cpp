#include "vcmesh/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vcmesh/error.hpp"

namespace vcmesh {

ResidualBlock::ResidualBlock(std::string block_name, const SamplingMap& map, int in_channels,
                             int out_channels, int basis_size, Rng& rng, bool is_transposed,
                             bool with_activation, bool with_residual, bool normalize_basis)
    : name(std::move(block_name)),
      conv(name + ".conv", map, in_channels, out_channels, basis_size, rng, normalize_basis),
      transposed(is_transposed),
      activate(with_activation) {
    if (with_residual) res.emplace(name + ".res", map, in_channels, out_channels, rng);
}

Value ResidualBlock::forward(Tape& tape, Value x) {
    Value y = transposed ? vc_trans_conv_forward(tape, conv, x) : vc_conv_forward(tape, conv, x);
    if (activate) y = tape.elu(y);
    if (res) y = tape.add(y, vd_res_forward(tape, *res, x));
    return y;
}

std::vector<Parameter*> ResidualBlock::parameters() {
    std::vector<Parameter*> ps = conv.parameters();
    if (res) {
        for (Parameter* p : res->parameters()) ps.push_back(p);
    }
    return ps;
}

int64_t ResidualBlock::param_count() const {
    return conv.param_count() + (res ? res->param_count() : 0);
}

AutoencoderModel build_autoencoder(const SamplingHierarchy& hierarchy,
                                   const std::vector<int>& channel_plan,
                                   const BuildOptions& options) {
    int depth = hierarchy.depth();
    if (depth < 1) throw ConfigError("autoencoder needs a hierarchy with at least one level");
    if (static_cast<int>(channel_plan.size()) != 2 * depth + 1)
        throw ConfigError("channel plan needs " + std::to_string(2 * depth + 1) +
                          " entries for a depth-" + std::to_string(depth) + " hierarchy, got " +
                          std::to_string(channel_plan.size()));
    for (int c : channel_plan) {
        if (c < 1) throw ConfigError("channel plan entries must be positive");
    }
    std::vector<int> m_plan = options.m_plan;
    if (m_plan.empty()) m_plan.assign(static_cast<size_t>(2 * depth), 0);
    if (static_cast<int>(m_plan.size()) != 2 * depth)
        throw ConfigError("basis plan needs one entry per block (" + std::to_string(2 * depth) +
                          "), got " + std::to_string(m_plan.size()));

    AutoencoderModel model;
    model.hierarchy_ = std::make_unique<SamplingHierarchy>(hierarchy);
    model.fingerprint_ = hierarchy_fingerprint(*model.hierarchy_);
    model.channel_plan_ = channel_plan;
    model.use_residual_ = options.use_residual;
    model.normalize_basis_ = options.normalize_basis;

    Rng rng(options.init_seed);
    for (int i = 0; i < depth; ++i) {
        const SamplingMap& map = model.hierarchy_->level(i).down;
        int m = m_plan[static_cast<size_t>(i)];
        if (m <= 0) m = auto_basis_size(map);
        model.m_plan_.push_back(m);
        model.encoder_.emplace_back("enc" + std::to_string(i), map,
                                    channel_plan[static_cast<size_t>(i)],
                                    channel_plan[static_cast<size_t>(i) + 1], m, rng,
                                    /*is_transposed=*/false, /*with_activation=*/true,
                                    options.use_residual, options.normalize_basis);
    }
    for (int j = 0; j < depth; ++j) {
        int level = depth - 1 - j;
        const SamplingMap& map = model.hierarchy_->level(level).up;
        int m = m_plan[static_cast<size_t>(depth + j)];
        if (m <= 0) m = auto_basis_size(map);
        model.m_plan_.push_back(m);
        bool last = j == depth - 1;
        model.decoder_.emplace_back("dec" + std::to_string(j), map,
                                    channel_plan[static_cast<size_t>(depth + j)],
                                    channel_plan[static_cast<size_t>(depth + j) + 1], m, rng,
                                    /*is_transposed=*/true, /*with_activation=*/!last,
                                    options.use_residual, options.normalize_basis);
    }
    return model;
}

std::vector<Parameter*> AutoencoderModel::parameters() {
    std::vector<Parameter*> ps;
    for (auto& b : encoder_) {
        for (Parameter* p : b.parameters()) ps.push_back(p);
    }
    for (auto& b : decoder_) {
        for (Parameter* p : b.parameters()) ps.push_back(p);
    }
    return ps;
}

int64_t AutoencoderModel::param_count() const {
    int64_t n = 0;
    for (const auto& b : encoder_) n += b.param_count();
    for (const auto& b : decoder_) n += b.param_count();
    return n;
}

Value AutoencoderModel::encode_value(Tape& tape, Value x) {
    Value h = x;
    for (auto& b : encoder_) h = b.forward(tape, h);
    return h;
}

Value AutoencoderModel::decode_value(Tape& tape, Value code) {
    Value h = code;
    for (auto& b : decoder_) h = b.forward(tape, h);
    return h;
}

Value AutoencoderModel::reconstruct_value(Tape& tape, Value x) {
    return decode_value(tape, encode_value(tape, x));
}

LatentCode AutoencoderModel::encode(const Tensor& x) {
    Tape tape;
    Value code = encode_value(tape, tape.input(x));
    return LatentCode{tape.value(code), fingerprint_};
}

Tensor AutoencoderModel::decode(const LatentCode& code) {
    if (code.fingerprint != fingerprint_)
        throw InputError("latent code belongs to a different hierarchy (fingerprint mismatch)");
    if (code.values.rank() != 2 || code.values.dim(0) != latent_vertices() ||
        code.values.dim(1) != latent_channels())
        throw InputError("latent code shape disagrees with the model");
    Tape tape;
    Value out = decode_value(tape, tape.input(code.values));
    return tape.value(out);
}

Tensor AutoencoderModel::reconstruct(const Tensor& x) {
    Tape tape;
    Value out = reconstruct_value(tape, tape.input(x));
    return tape.value(out);
}

Value loss_l1(Tape& tape, Value pred, Value target) {
    const Tensor& tp = tape.value(pred);
    const Tensor& tt = tape.value(target);
    if (!tp.same_shape(tt)) throw InputError("loss_l1 needs matching shapes");
    Value d = tape.abs(tape.sub(pred, target));
    return tape.scale(tape.sum(d), 1.0 / static_cast<double>(tp.numel()));
}

namespace {

// uniform graph differential: x_i - mean of x over adj(i); isolated vertices
// keep x_i
Value laplacian_value(Tape& tape, Value x, const MeshTopology& topology) {
    const Tensor& tx = tape.value(x);
    if (tx.rank() != 2 || tx.dim(0) != topology.num_vertices())
        throw InputError("laplacian needs one feature row per vertex");
    std::vector<int> flat;
    std::vector<int> owners;
    for (int v = 0; v < topology.num_vertices(); ++v) {
        for (int w : topology.neighbors(v)) {
            flat.push_back(w);
            owners.push_back(v);
        }
    }
    Tensor inv_deg({static_cast<int64_t>(topology.num_vertices())});
    for (int v = 0; v < topology.num_vertices(); ++v) {
        int d = topology.degree(v);
        inv_deg(v) = d > 0 ? 1.0 / d : 0.0;
    }
    Value gathered = tape.gather_rows(x, std::move(flat));
    Value sums = tape.scatter_rows(gathered, std::move(owners), topology.num_vertices());
    Value mean = tape.scale_rows(sums, tape.input(std::move(inv_deg)));
    return tape.sub(x, mean);
}

}  // namespace

Value loss_laplacian(Tape& tape, Value pred, Value target, const MeshTopology& topology) {
    const Tensor& tp = tape.value(pred);
    if (!tp.same_shape(tape.value(target))) throw InputError("loss_laplacian needs matching shapes");
    Value dp = laplacian_value(tape, pred, topology);
    Value dt = laplacian_value(tape, target, topology);
    Value d = tape.abs(tape.sub(dp, dt));
    return tape.scale(tape.sum(d), 1.0 / static_cast<double>(tp.numel()));
}

double loss_l1(const Tensor& pred, const Tensor& target) {
    Tape tape;
    return tape.value(loss_l1(tape, tape.input(pred), tape.input(target)))(0);
}

double loss_laplacian(const Tensor& pred, const Tensor& target, const MeshTopology& topology) {
    Tape tape;
    return tape.value(loss_laplacian(tape, tape.input(pred), tape.input(target), topology))(0);
}

void AdamState::init(const std::vector<Parameter*>& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const Parameter* p : params) {
        m.push_back(Tensor::zeros(p->value.shape()));
        v.push_back(Tensor::zeros(p->value.shape()));
    }
}

void adam_step(const std::vector<Parameter*>& params, AdamState& state, double lr) {
    if (!state.initialized()) state.init(params);
    if (state.m.size() != params.size())
        throw InputError("optimizer state does not match the parameter list");
    state.t += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        if (!m.same_shape(p.value))
            throw InputError("optimizer moment shape does not match parameter " + p.name);
        for (int64_t j = 0; j < p.value.numel(); ++j) {
            double g = p.grad(j);
            m(j) = state.beta1 * m(j) + (1.0 - state.beta1) * g;
            v(j) = state.beta2 * v(j) + (1.0 - state.beta2) * g * g;
            double mhat = m(j) / bc1;
            double vhat = v(j) / bc2;
            p.value(j) -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double lr_schedule(double lr0, double decay, int epoch) {
    return lr0 * std::pow(decay, static_cast<double>(epoch));
}

double mean_dataset_l1(AutoencoderModel& model, const MeshDataset& data,
                       const std::vector<int>& indices) {
    if (indices.empty()) return 0.0;
    double total = 0.0;
    for (int i : indices) {
        const Tensor& x = data.samples[static_cast<size_t>(i)];
        total += loss_l1(model.reconstruct(x), x);
    }
    return total / static_cast<double>(indices.size());
}

TrainResult train(AutoencoderModel& model, const MeshDataset& data, const TrainConfig& config,
                  TrainerState* state) {
    if (config.batch_size < 1) throw ConfigError("batch size must be positive");
    if (config.epochs < 0) throw ConfigError("epoch count must be >= 0");
    if (data.topology.num_vertices() != model.base_vertices() ||
        data.topology.adjacency() != model.hierarchy().base().adjacency())
        throw InputError("dataset topology does not match the model's hierarchy base");
    for (const Tensor& s : data.samples) {
        if (s.rank() != 2 || s.dim(0) != model.base_vertices() || s.dim(1) != model.in_channels())
            throw InputError("dataset sample shape does not match the model");
    }
    std::vector<int> train_idx = data.indices_of(Split::Train);
    if (train_idx.empty()) throw InputError("dataset has no training samples");
    std::vector<int> val_idx = data.indices_of(Split::Val);

    TrainerState local;
    if (!state) {
        state = &local;
    }
    if (!state->adam.initialized()) {
        state->adam.init(model.parameters());
        state->rng = Rng(config.seed);
        state->epoch = 0;
    }
    std::vector<Parameter*> params = model.parameters();

    std::ofstream log;
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        std::string log_path = config.out_dir + "/train_log.tsv";
        bool fresh = !std::filesystem::exists(log_path) || std::filesystem::file_size(log_path) == 0;
        log.open(log_path, std::ios::app);
        if (!log) throw InputError("cannot open training log in " + config.out_dir);
        if (fresh) {
            log << "epoch\tlr\ttrain_l1";
            if (!data.indices_of(Split::Val).empty()) log << "\tval_l1";
            log << '\n';
        }
    }

    TrainResult result;
    result.initial_train_l1 = mean_dataset_l1(model, data, train_idx);

    for (int epoch = state->epoch; epoch < config.epochs; ++epoch) {
        double lr = lr_schedule(config.lr, config.decay, epoch);
        std::vector<int> order = train_idx;
        state->rng.shuffle(order);
        double epoch_l1 = 0.0;
        int epoch_steps = 0;
        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
            for (Parameter* p : params) p->zero_grad();
            Tape tape;
            Value total{};
            Value total_l1{};
            for (size_t k = begin; k < end; ++k) {
                const Tensor& x = data.samples[static_cast<size_t>(order[k])];
                Value input = tape.input(x);
                Value pred = model.reconstruct_value(tape, input);
                Value l1 = loss_l1(tape, pred, input);
                Value sample_loss = tape.scale(l1, config.l1_weight);
                if (config.laplacian_weight != 0.0) {
                    Value lap = loss_laplacian(tape, pred, input, data.topology);
                    sample_loss = tape.add(sample_loss, tape.scale(lap, config.laplacian_weight));
                }
                total = total.valid() ? tape.add(total, sample_loss) : sample_loss;
                total_l1 = total_l1.valid() ? tape.add(total_l1, l1) : l1;
            }
            double inv = 1.0 / static_cast<double>(end - begin);
            Value batch_loss = tape.scale(total, inv);
            tape.backward(batch_loss);
            adam_step(params, state->adam, lr);
            result.step_loss.push_back(tape.value(batch_loss)(0));
            result.step_l1.push_back(tape.value(total_l1)(0) * inv);
            epoch_l1 += result.step_l1.back();
            ++epoch_steps;
        }
        double train_l1 = epoch_steps > 0 ? epoch_l1 / epoch_steps : 0.0;
        result.epoch_train_l1.push_back(train_l1);
        double val_l1 = 0.0;
        if (!val_idx.empty()) {
            val_l1 = mean_dataset_l1(model, data, val_idx);
            result.epoch_val_l1.push_back(val_l1);
        }
        if (log.is_open()) {
            char line[160];
            if (!val_idx.empty())
                std::snprintf(line, sizeof line, "%d\t%.17g\t%.17g\t%.17g", epoch, lr, train_l1,
                              val_l1);
            else
                std::snprintf(line, sizeof line, "%d\t%.17g\t%.17g", epoch, lr, train_l1);
            log << line << '\n';
            log.flush();
        }
        state->epoch = epoch + 1;
        ++result.epochs_run;
        if (!config.out_dir.empty() && config.checkpoint_every > 0 &&
            (epoch + 1) % config.checkpoint_every == 0) {
            char tag[64];
            std::snprintf(tag, sizeof tag, "/checkpoint_epoch_%04d.ckpt", epoch + 1);
            save_checkpoint(config.out_dir + tag, model, *state);
        }
    }

    result.final_train_l1 = mean_dataset_l1(model, data, train_idx);
    if (!config.out_dir.empty()) save_checkpoint(config.out_dir + "/checkpoint.ckpt", model, *state);
    return result;
}

LatentCode interpolate_latent(const LatentCode& source, const LatentCode& target,
                              const std::vector<int>& subset, double t) {
    if (source.fingerprint != target.fingerprint)
        throw InputError("latent codes belong to different hierarchies (fingerprint mismatch)");
    if (!source.values.same_shape(target.values))
        throw InputError("latent codes have different shapes");
    LatentCode out = source;
    int64_t rows = source.values.rows();
    for (int r : subset) {
        if (r < 0 || r >= rows) throw InputError("latent vertex index out of range");
        for (int64_t c = 0; c < source.values.cols(); ++c)
            out.values(r, c) = (1.0 - t) * source.values(r, c) + t * target.values(r, c);
    }
    return out;
}

LatentCode mix_latent(const LatentCode& base, const LatentCode& donor,
                      const std::vector<int>& subset) {
    if (base.fingerprint != donor.fingerprint)
        throw InputError("latent codes belong to different hierarchies (fingerprint mismatch)");
    if (!base.values.same_shape(donor.values))
        throw InputError("latent codes have different shapes");
    LatentCode out = base;
    int64_t rows = base.values.rows();
    for (int r : subset) {
        if (r < 0 || r >= rows) throw InputError("latent vertex index out of range");
        for (int64_t c = 0; c < base.values.cols(); ++c) out.values(r, c) = donor.values(r, c);
    }
    return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'V', 'M', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;
constexpr char kLatentMagic[4] = {'V', 'M', 'L', 'C'};
constexpr uint32_t kLatentVersion = 1;

void write_param(ByteWriter& w, const Parameter& p) {
    w.f64_vec(p.value.values());
}

void read_param(ByteReader& r, Parameter& p) {
    std::vector<double> values = r.f64_vec();
    if (static_cast<int64_t>(values.size()) != p.value.numel())
        throw ParseError("checkpoint parameter " + p.name + " has wrong size");
    p.value = Tensor::from(p.value.shape(), std::move(values));
}

}  // namespace

void save_checkpoint(const std::string& path, const AutoencoderModel& model,
                     const TrainerState& state) {
    ByteWriter w;
    w.magic(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u64(model.fingerprint());
    w.i32_vec(model.channel_plan());
    w.i32_vec(model.m_plan());
    w.u8(model.use_residual() ? 1 : 0);
    w.u8(model.normalize_basis() ? 1 : 0);

    std::vector<const Parameter*> params;
    auto write_block = [&](const ResidualBlock& b) {
        write_param(w, b.conv.basis);
        w.i32_vec(b.conv.map->flat_offsets());
        write_param(w, b.conv.coeffs);
        write_param(w, b.conv.bias);
        params.push_back(&b.conv.basis);
        params.push_back(&b.conv.coeffs);
        params.push_back(&b.conv.bias);
        w.u8(b.res ? 1 : 0);
        if (b.res) {
            write_param(w, b.res->vd.rho);
            params.push_back(&b.res->vd.rho);
            w.u8(b.res->channel_map ? 1 : 0);
            if (b.res->channel_map) {
                write_param(w, *b.res->channel_map);
                params.push_back(&*b.res->channel_map);
            }
        }
    };
    for (const auto& b : model.encoder()) write_block(b);
    for (const auto& b : model.decoder()) write_block(b);

    w.u64(static_cast<uint64_t>(state.adam.t));
    if (state.adam.initialized() && state.adam.m.size() != params.size())
        throw InputError("optimizer state does not match the model");
    for (size_t i = 0; i < params.size(); ++i) {
        if (state.adam.initialized()) {
            w.f64_vec(state.adam.m[i].values());
            w.f64_vec(state.adam.v[i].values());
        } else {
            std::vector<double> zeros(static_cast<size_t>(params[i]->numel()), 0.0);
            w.f64_vec(zeros);
            w.f64_vec(zeros);
        }
    }
    w.i32(state.epoch);
    w.str(state.rng.state());
    w.save(path);
}

AutoencoderModel load_checkpoint(const std::string& path, const SamplingHierarchy& hierarchy,
                                 TrainerState* state_out) {
    ByteReader r = ByteReader::load(path);
    r.magic(kCheckpointMagic);
    uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    uint64_t fingerprint = r.u64();
    if (fingerprint != hierarchy_fingerprint(hierarchy))
        throw InputError("checkpoint belongs to a different hierarchy (fingerprint mismatch)");
    std::vector<int> channel_plan = r.i32_vec();
    std::vector<int> m_plan = r.i32_vec();
    BuildOptions options;
    options.m_plan = m_plan;
    options.use_residual = r.u8() != 0;
    options.normalize_basis = r.u8() != 0;
    AutoencoderModel model = build_autoencoder(hierarchy, channel_plan, options);

    auto read_block = [&r](ResidualBlock& b) {
        read_param(r, b.conv.basis);
        std::vector<int> offsets = r.i32_vec();
        if (offsets != b.conv.map->flat_offsets())
            throw ParseError("checkpoint coefficient layout disagrees with the hierarchy");
        read_param(r, b.conv.coeffs);
        read_param(r, b.conv.bias);
        bool has_res = r.u8() != 0;
        if (has_res != b.res.has_value())
            throw ParseError("checkpoint residual layout disagrees with the model");
        if (b.res) {
            read_param(r, b.res->vd.rho);
            bool has_c = r.u8() != 0;
            if (has_c != b.res->channel_map.has_value())
                throw ParseError("checkpoint channel map layout disagrees with the model");
            if (b.res->channel_map) read_param(r, *b.res->channel_map);
        }
    };
    for (auto& b : model.encoder()) read_block(b);
    for (auto& b : model.decoder()) read_block(b);

    TrainerState state;
    state.adam.t = static_cast<int64_t>(r.u64());
    std::vector<Parameter*> params = model.parameters();
    for (Parameter* p : params) {
        std::vector<double> m = r.f64_vec();
        std::vector<double> v = r.f64_vec();
        if (static_cast<int64_t>(m.size()) != p->numel() ||
            static_cast<int64_t>(v.size()) != p->numel())
            throw ParseError("checkpoint optimizer moments have wrong size");
        state.adam.m.push_back(Tensor::from(p->value.shape(), std::move(m)));
        state.adam.v.push_back(Tensor::from(p->value.shape(), std::move(v)));
    }
    state.epoch = r.i32();
    state.rng.set_state(r.str());
    r.expect_done();
    if (state_out) *state_out = std::move(state);
    return model;
}

void save_latent(const std::string& path, const LatentCode& code) {
    ByteWriter w;
    w.magic(kLatentMagic);
    w.u32(kLatentVersion);
    w.u64(code.fingerprint);
    w.i64(code.values.rows());
    w.i64(code.values.cols());
    w.f64_vec(code.values.values());
    w.save(path);
}

LatentCode load_latent(const std::string& path) {
    ByteReader r = ByteReader::load(path);
    r.magic(kLatentMagic);
    uint32_t version = r.u32();
    if (version != kLatentVersion)
        throw ParseError("unsupported latent code version " + std::to_string(version));
    LatentCode code;
    code.fingerprint = r.u64();
    int64_t rows = r.i64();
    int64_t cols = r.i64();
    if (rows < 0 || cols < 0) throw ParseError("negative latent extents");
    std::vector<double> values = r.f64_vec();
    if (static_cast<int64_t>(values.size()) != rows * cols)
        throw ParseError("latent payload size disagrees with extents");
    code.values = Tensor::from({rows, cols}, std::move(values));
    r.expect_done();
    return code;
}

}  // namespace vcmesh
