#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jiif/autograd.hpp"
#include "jiif/data.hpp"
#include "jiif/errors.hpp"
#include "jiif/model.hpp"
#include "jiif/rng.hpp"

namespace jiif {

// ---------------------------------------------------------------------------
// Learning-rate schedule

/// Step decay: the rate drops by `decay` after every `step_epochs` epochs
/// (epochs are 1-based). The product is snapped to 15 significant decimal
/// digits, so decimal-calibrated schedules (1e-4 with factor 0.2) emit their
/// decimal values at every boundary instead of drifting by an ulp per step.
inline double learning_rate(double lr0, double decay, int64_t step_epochs, int64_t epoch) {
    require(epoch >= 1, "learning_rate: epochs are 1-based");
    require(step_epochs >= 1, "learning_rate: step_epochs must be positive");
    require(lr0 > 0.0 && decay > 0.0, "learning_rate: rates must be positive");
    double lr = lr0;
    const int64_t k = (epoch - 1) / step_epochs;
    for (int64_t i = 0; i < k; ++i) lr *= decay;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.14e", lr);
    return std::strtod(buf, nullptr);
}

// ---------------------------------------------------------------------------
// Loss

inline ag::Var l1_loss(const ag::Var& pred, const ag::Var& target) {
    require(pred->value.numel() == target->value.numel(),
            "l1_loss: prediction and target lengths differ");
    return ag::mean_abs(ag::sub(pred, ag::reshape(target, pred->value.shape())));
}

inline ag::Var l1_loss(const ag::Var& pred, const std::vector<double>& target) {
    require(pred->value.numel() == static_cast<int64_t>(target.size()),
            "l1_loss: prediction and target lengths differ");
    return l1_loss(pred, ag::constant(Tensor::from(pred->value.shape(), target)));
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<ag::Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        require(cfg_.lr > 0 && cfg_.eps > 0, "adam: lr and eps must be positive");
        require(cfg_.beta1 >= 0 && cfg_.beta1 < 1 && cfg_.beta2 >= 0 && cfg_.beta2 < 1,
                "adam: betas must lie in [0,1)");
        for (const ag::Var& p : params_) {
            Tensor t = p->value;
            t.fill(0.0);
            m_.push_back(t);
            v_.push_back(t);
        }
    }

    void set_lr(double lr) {
        require(lr > 0, "adam: lr must be positive");
        cfg_.lr = lr;
    }
    double lr() const { return cfg_.lr; }
    int64_t step_count() const { return step_; }

    void step() {
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (size_t i = 0; i < params_.size(); ++i) {
            ag::Var& p = params_[i];
            require(p->grad.numel() == p->value.numel(),
                    "adam: parameter has no gradient; run backward first");
            double* w = p->value.data();
            const double* g = p->grad.data();
            double* m = m_[i].data();
            double* v = v_[i].data();
            const int64_t n = p->value.numel();
            for (int64_t j = 0; j < n; ++j) {
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                w[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
            }
        }
    }

    // Checkpoint plumbing.
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }
    void restore_state(std::vector<Tensor> m, std::vector<Tensor> v, int64_t step) {
        require(m.size() == params_.size() && v.size() == params_.size(),
                "adam: restored state has wrong parameter count");
        for (size_t i = 0; i < params_.size(); ++i)
            require(m[i].numel() == params_[i]->value.numel() &&
                        v[i].numel() == params_[i]->value.numel(),
                    "adam: restored state has wrong tensor sizes");
        m_ = std::move(m);
        v_ = std::move(v);
        step_ = step;
    }

private:
    std::vector<ag::Var> params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    int64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Config serialization (shared by checkpoints and the CLI)

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = nlohmann::json{{"in_channels", c.in_channels},
                       {"feature_dim", c.feature_dim},
                       {"num_blocks", c.num_blocks},
                       {"kernel", c.kernel}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
    j.at("in_channels").get_to(c.in_channels);
    j.at("feature_dim").get_to(c.feature_dim);
    j.at("num_blocks").get_to(c.num_blocks);
    j.at("kernel").get_to(c.kernel);
}

inline void to_json(nlohmann::json& j, const DecoderConfig& c) {
    j = nlohmann::json{{"mode", to_string(c.mode)},
                       {"strategy", to_string(c.strategy)},
                       {"latent_dim", c.latent_dim},
                       {"guide_dim", c.guide_dim},
                       {"hidden", c.hidden}};
}

inline void from_json(const nlohmann::json& j, DecoderConfig& c) {
    c.mode = parse_decoder_mode(j.at("mode").get<std::string>());
    c.strategy = parse_weight_strategy(j.at("strategy").get<std::string>());
    j.at("latent_dim").get_to(c.latent_dim);
    j.at("guide_dim").get_to(c.guide_dim);
    j.at("hidden").get_to(c.hidden);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"depth_encoder", c.depth_encoder},
                       {"guide_encoder", c.guide_encoder},
                       {"decoder", c.decoder},
                       {"use_residual", c.use_residual},
                       {"chunk_size", c.chunk_size}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("depth_encoder").get_to(c.depth_encoder);
    j.at("guide_encoder").get_to(c.guide_encoder);
    j.at("decoder").get_to(c.decoder);
    j.at("use_residual").get_to(c.use_residual);
    j.at("chunk_size").get_to(c.chunk_size);
}

// ---------------------------------------------------------------------------
// Checkpoints

/// Full training state: parameters plus optimizer moments, in parameter order.
struct Checkpoint {
    ModelConfig model;
    uint64_t seed = 0;
    int64_t epoch = 0;
    int64_t adam_step = 0;
    std::vector<std::string> names;
    std::vector<Tensor> values;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

namespace detail_ckpt {

constexpr char kMagic[8] = {'J', 'I', 'I', 'F', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
static_assert(std::endian::native == std::endian::little,
              "checkpoint layout is little-endian; add byte swapping for this platform");

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated checkpoint: " + path);
    return v;
}

}  // namespace detail_ckpt

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    using namespace detail_ckpt;
    require(ckpt.names.size() == ckpt.values.size() && ckpt.names.size() == ckpt.m.size() &&
                ckpt.names.size() == ckpt.v.size(),
            "save_checkpoint: misaligned parameter lists");
    nlohmann::json header;
    header["model"] = ckpt.model;
    header["seed"] = ckpt.seed;
    header["epoch"] = ckpt.epoch;
    header["adam_step"] = ckpt.adam_step;
    nlohmann::json params = nlohmann::json::array();
    for (size_t i = 0; i < ckpt.names.size(); ++i)
        params.push_back({{"name", ckpt.names[i]}, {"shape", ckpt.values[i].shape()}});
    header["params"] = params;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(out, kVersion);
    write_pod<uint64_t>(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (size_t i = 0; i < ckpt.names.size(); ++i) {
        const auto dump = [&](const Tensor& t) {
            require(t.numel() == ckpt.values[i].numel(),
                    "save_checkpoint: moment size mismatch for " + ckpt.names[i]);
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(sizeof(double) * t.numel()));
        };
        dump(ckpt.values[i]);
        dump(ckpt.m[i]);
        dump(ckpt.v[i]);
    }
    if (!out) throw DataError("write failure for checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    using namespace detail_ckpt;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path);
    const uint32_t version = read_pod<uint32_t>(in, path);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    const uint64_t header_len = read_pod<uint64_t>(in, path);
    if (header_len > (1u << 20)) throw DataError("implausible checkpoint header size: " + path);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw DataError("truncated checkpoint: " + path);

    Checkpoint ckpt;
    try {
        const nlohmann::json header = nlohmann::json::parse(header_text);
        ckpt.model = header.at("model").get<ModelConfig>();
        ckpt.seed = header.at("seed").get<uint64_t>();
        ckpt.epoch = header.at("epoch").get<int64_t>();
        ckpt.adam_step = header.at("adam_step").get<int64_t>();
        for (const auto& p : header.at("params")) {
            ckpt.names.push_back(p.at("name").get<std::string>());
            const std::vector<int64_t> shape = p.at("shape").get<std::vector<int64_t>>();
            int64_t n = 1;
            for (int64_t d : shape) n *= d;
            ckpt.values.push_back(Tensor::from(shape, std::vector<double>(static_cast<size_t>(n))));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid checkpoint header in " + path + ": " + e.what());
    }

    for (size_t i = 0; i < ckpt.names.size(); ++i) {
        const auto slurp = [&](Tensor& t) {
            in.read(reinterpret_cast<char*>(t.data()),
                    static_cast<std::streamsize>(sizeof(double) * t.numel()));
            if (!in) throw DataError("truncated checkpoint payload: " + path);
        };
        slurp(ckpt.values[i]);
        Tensor m = ckpt.values[i], v = ckpt.values[i];
        slurp(m);
        slurp(v);
        ckpt.m.push_back(std::move(m));
        ckpt.v.push_back(std::move(v));
    }
    char extra;
    in.read(&extra, 1);
    if (!in.eof()) throw DataError("trailing bytes after checkpoint payload: " + path);
    return ckpt;
}

/// Capture the current model + optimizer state.
inline Checkpoint snapshot(const JIIFModel& model, const Adam& opt, uint64_t seed, int64_t epoch) {
    Checkpoint ckpt;
    ckpt.model = model.config();
    ckpt.seed = seed;
    ckpt.epoch = epoch;
    ckpt.adam_step = opt.step_count();
    for (const auto& [name, p] : model.named_parameters()) {
        ckpt.names.push_back(name);
        ckpt.values.push_back(p->value);
    }
    ckpt.m = opt.first_moments();
    ckpt.v = opt.second_moments();
    return ckpt;
}

/// Copy checkpoint parameters (matched by name) into the model; optionally
/// restore the optimizer moments as well.
inline void restore(JIIFModel& model, Adam* opt, const Checkpoint& ckpt) {
    const auto named = model.named_parameters();
    require(named.size() == ckpt.names.size(), "restore: parameter inventory size mismatch");
    for (size_t i = 0; i < named.size(); ++i) {
        require(named[i].first == ckpt.names[i],
                "restore: parameter name mismatch at index " + std::to_string(i) + ": model has " +
                    named[i].first + ", checkpoint has " + ckpt.names[i]);
        require(named[i].second->value.numel() == ckpt.values[i].numel(),
                "restore: size mismatch for " + ckpt.names[i]);
        named[i].second->value = ckpt.values[i];
    }
    if (opt) opt->restore_state(ckpt.m, ckpt.v, ckpt.adam_step);
}

/// Rebuild a model from a checkpoint (construction seed only sets the
/// immediately-overwritten init).
inline JIIFModel model_from_checkpoint(const Checkpoint& ckpt) {
    JIIFModel model(ckpt.model, ckpt.seed);
    Adam opt(model.parameters(), {});
    restore(model, &opt, ckpt);
    return model;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
    ModelConfig model;
    int64_t epochs = 200;
    int64_t batch_size = 1;  // the pipeline trains one patch at a time
    double lr0 = 1e-4;
    double lr_decay = 0.2;
    int64_t lr_step_epochs = 60;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
    int64_t scale = 8;
    double noise_sigma = 0.0;
    int64_t patch = 256;
    int64_t query_count = 30720;
    bool augment = true;
    int64_t checkpoint_every = 50;  // epochs; final epoch always checkpoints
    std::string run_dir;            // empty keeps everything in memory
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"model", c.model},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"lr0", c.lr0},
                       {"lr_decay", c.lr_decay},
                       {"lr_step_epochs", c.lr_step_epochs},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"eps", c.eps},
                       {"seed", c.seed},
                       {"scale", c.scale},
                       {"noise_sigma", c.noise_sigma},
                       {"patch", c.patch},
                       {"query_count", c.query_count},
                       {"augment", c.augment},
                       {"checkpoint_every", c.checkpoint_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (j.contains("model")) j.at("model").get_to(c.model);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr0 = j.value("lr0", c.lr0);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.lr_step_epochs = j.value("lr_step_epochs", c.lr_step_epochs);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.seed = j.value("seed", c.seed);
    c.scale = j.value("scale", c.scale);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.patch = j.value("patch", c.patch);
    c.query_count = j.value("query_count", c.query_count);
    c.augment = j.value("augment", c.augment);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
}

struct TrainResult {
    std::vector<double> epoch_loss;  // mean L1 per epoch
    double final_loss = 0.0;         // mean L1 of the last epoch
    int64_t steps = 0;
    std::string final_checkpoint;  // path, empty when run_dir was empty
};

/// Run the full optimization. Deterministic given (config, seed): data order,
/// patches, queries, and noise all derive from split streams of cfg.seed.
/// `console` (when set) receives progress lines; the run_dir log contains
/// only deterministic fields so identical runs produce identical logs.
inline TrainResult train_model(JIIFModel& model, const std::vector<RGBDPair>& pairs,
                               const TrainConfig& cfg, std::ostream* console = nullptr) {
    namespace fs = std::filesystem;
    require(!pairs.empty(), "train: empty dataset");
    require(cfg.epochs >= 1, "train: epochs must be positive");
    require(cfg.batch_size == 1, "train: the pipeline is defined for batch_size 1");

    const bool to_disk = !cfg.run_dir.empty();
    std::ofstream log;
    if (to_disk) {
        fs::create_directories(cfg.run_dir);
        log.open(fs::path(cfg.run_dir) / "train_log.txt", std::ios::trunc);
        if (!log) throw DataError("cannot write training log in: " + cfg.run_dir);
    }

    Adam opt(model.parameters(), {cfg.lr0, cfg.beta1, cfg.beta2, cfg.eps});
    const DegradationSpec degrade_spec{cfg.scale, cfg.noise_sigma};
    const int64_t n = static_cast<int64_t>(pairs.size());

    const auto write_ckpt = [&](const std::string& fname, int64_t epoch) -> std::string {
        const std::string path = (fs::path(cfg.run_dir) / fname).string();
        save_checkpoint(snapshot(model, opt, cfg.seed, epoch), path);
        std::ofstream latest(fs::path(cfg.run_dir) / "latest.txt", std::ios::trunc);
        latest << fname << "\n";
        return path;
    };

    TrainResult result;
    int64_t global_step = 0;
    char line[160];
    for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = learning_rate(cfg.lr0, cfg.lr_decay, cfg.lr_step_epochs, epoch);
        opt.set_lr(lr);
        Rng order_rng = Rng(cfg.seed).split("order").split(static_cast<uint64_t>(epoch));
        const std::vector<int64_t> order = sample_without_replacement(n, n, order_rng);

        double epoch_sum = 0.0;
        for (int64_t s = 0; s < n; ++s) {
            ++global_step;
            const uint64_t sample_seed =
                Rng::mix(Rng::mix(cfg.seed, static_cast<uint64_t>(epoch)),
                         static_cast<uint64_t>(global_step));
            const TrainingSample smp =
                sample_training_patch(pairs[static_cast<size_t>(order[static_cast<size_t>(s)])],
                                      degrade_spec, sample_seed, cfg.patch, cfg.query_count,
                                      cfg.augment);
            const ag::Var lr_in = ag::constant(smp.lr_depth.to_tensor());
            const ag::Var hr_in = ag::constant(smp.hr_guide.to_tensor());
            const ag::Var pred = model.predict(lr_in, hr_in, smp.query_coords);
            const ag::Var loss = l1_loss(pred, smp.target_values);
            const double loss_value = loss->value.data()[0];
            if (!std::isfinite(loss_value)) {
                std::string where = "epoch " + std::to_string(epoch) + " step " +
                                    std::to_string(global_step);
                if (to_disk) {
                    const std::string diag = write_ckpt("ckpt_diagnostic.bin", epoch);
                    where += "; diagnostic checkpoint written to " + diag;
                }
                throw NumericError("training loss became non-finite at " + where);
            }
            ag::zero_grad(model.parameters());
            ag::backward(loss);
            opt.step();
            epoch_sum += loss_value;

            if (to_disk) {
                std::snprintf(line, sizeof(line), "epoch=%lld step=%lld lr=%.17g loss=%.17g\n",
                              static_cast<long long>(epoch), static_cast<long long>(global_step),
                              lr, loss_value);
                log << line;
            }
        }
        const double epoch_mean = epoch_sum / static_cast<double>(n);
        result.epoch_loss.push_back(epoch_mean);
        if (console) {
            std::snprintf(line, sizeof(line), "epoch %lld/%lld  lr %.3g  loss %.6f",
                          static_cast<long long>(epoch), static_cast<long long>(cfg.epochs), lr,
                          epoch_mean);
            *console << line << std::endl;
        }
        if (to_disk &&
            (epoch == cfg.epochs || (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0))) {
            const std::string path =
                write_ckpt("ckpt_" + std::to_string(epoch) + ".bin", epoch);
            if (epoch == cfg.epochs) result.final_checkpoint = path;
        }
    }
    result.final_loss = result.epoch_loss.back();
    result.steps = global_step;
    return result;
}

}  // namespace jiif
