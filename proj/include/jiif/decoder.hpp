#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "jiif/autograd.hpp"
#include "jiif/errors.hpp"
#include "jiif/rng.hpp"
#include "jiif/tensor.hpp"

namespace jiif {

/// How the decoder combines value and weight prediction.
///  - joint:      one network emits (value, weight logit) per corner
///  - separate:   independent value and weight networks
///  - value_only: network predicts values, weights come from the strategy
enum class DecoderMode { joint, separate, value_only };

/// Where interpolation weights come from when they are not learned jointly.
enum class WeightStrategy { graph_attention, bilinear, direct_regression };

inline std::string to_string(DecoderMode m) {
    switch (m) {
        case DecoderMode::joint: return "joint";
        case DecoderMode::separate: return "separate";
        case DecoderMode::value_only: return "value_only";
    }
    return "?";
}

inline std::string to_string(WeightStrategy s) {
    switch (s) {
        case WeightStrategy::graph_attention: return "graph_attention";
        case WeightStrategy::bilinear: return "bilinear";
        case WeightStrategy::direct_regression: return "direct_regression";
    }
    return "?";
}

inline DecoderMode parse_decoder_mode(const std::string& s) {
    if (s == "joint") return DecoderMode::joint;
    if (s == "separate") return DecoderMode::separate;
    if (s == "value_only") return DecoderMode::value_only;
    throw ConfigError("unknown decoder mode '" + s + "' (expected joint|separate|value_only)");
}

inline WeightStrategy parse_weight_strategy(const std::string& s) {
    if (s == "graph_attention") return WeightStrategy::graph_attention;
    if (s == "bilinear") return WeightStrategy::bilinear;
    if (s == "direct_regression") return WeightStrategy::direct_regression;
    throw ConfigError("unknown weight strategy '" + s +
                      "' (expected graph_attention|bilinear|direct_regression)");
}

inline bool valid_combo(DecoderMode mode, WeightStrategy strategy) {
    switch (mode) {
        case DecoderMode::joint:
        case DecoderMode::separate:
            return strategy == WeightStrategy::graph_attention;
        case DecoderMode::value_only:
            return strategy == WeightStrategy::bilinear ||
                   strategy == WeightStrategy::direct_regression;
    }
    return false;
}

struct DecoderConfig {
    DecoderMode mode = DecoderMode::joint;
    WeightStrategy strategy = WeightStrategy::graph_attention;
    int64_t latent_dim = 128;  // depth feature channels z
    int64_t guide_dim = 128;   // guide feature channels g
    std::vector<int64_t> hidden = {1024, 512, 256, 128};
};

/// Plain fully connected stack, ReLU between layers, linear output.
class Mlp {
public:
    Mlp() = default;

    Mlp(int64_t in_dim, const std::vector<int64_t>& hidden, int64_t out_dim, Rng& rng)
        : in_dim_(in_dim), out_dim_(out_dim) {
        require(in_dim > 0 && out_dim > 0, "mlp: bad dimensions");
        int64_t prev = in_dim;
        for (int64_t h : hidden) {
            require(h > 0, "mlp: bad hidden width");
            layers_.push_back(make_linear(prev, h, rng));
            prev = h;
        }
        layers_.push_back(make_linear(prev, out_dim, rng));
    }

    ag::Var forward(const ag::Var& x) const {
        require(!layers_.empty(), "mlp: used before construction");
        require(x->value.ndim() == 2 && x->value.dim(1) == in_dim_,
                "mlp: expected [N," + std::to_string(in_dim_) + "], got " + x->value.shape_str());
        ag::Var h = x;
        for (size_t i = 0; i < layers_.size(); ++i) {
            h = ag::add_rowvec(ag::matmul(h, layers_[i].w), layers_[i].b);
            if (i + 1 < layers_.size()) h = ag::relu(h);
        }
        return h;
    }

    /// Single-row evaluation with plain loops; the reference decode path.
    std::vector<double> forward_one(const std::vector<double>& x) const {
        require(!layers_.empty(), "mlp: used before construction");
        require(static_cast<int64_t>(x.size()) == in_dim_, "mlp: input size mismatch");
        std::vector<double> h = x;
        for (size_t li = 0; li < layers_.size(); ++li) {
            const Tensor& w = layers_[li].w->value;
            const Tensor& b = layers_[li].b->value;
            const int64_t in = w.dim(0), out = w.dim(1);
            std::vector<double> y(static_cast<size_t>(out));
            for (int64_t j = 0; j < out; ++j) {
                double acc = 0.0;
                for (int64_t i = 0; i < in; ++i) acc += h[static_cast<size_t>(i)] * w[i * out + j];
                acc += b[j];
                y[static_cast<size_t>(j)] =
                    (li + 1 < layers_.size() && acc < 0.0) ? 0.0 : acc;
            }
            h = std::move(y);
        }
        return h;
    }

    std::vector<std::pair<std::string, ag::Var>> named_parameters(const std::string& prefix) const {
        std::vector<std::pair<std::string, ag::Var>> out;
        for (size_t i = 0; i < layers_.size(); ++i) {
            out.emplace_back(prefix + "l" + std::to_string(i) + ".w", layers_[i].w);
            out.emplace_back(prefix + "l" + std::to_string(i) + ".b", layers_[i].b);
        }
        return out;
    }

    int64_t in_dim() const { return in_dim_; }
    int64_t out_dim() const { return out_dim_; }
    bool empty() const { return layers_.empty(); }

private:
    struct Linear {
        ag::Var w, b;  // w is [in,out]
    };

    static Linear make_linear(int64_t in, int64_t out, Rng& rng) {
        const double bound = std::sqrt(1.0 / static_cast<double>(in));
        Tensor w({in, out});
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
        Tensor b({out});
        for (int64_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-bound, bound);
        return {ag::parameter(std::move(w)), ag::parameter(std::move(b))};
    }

    int64_t in_dim_ = 0, out_dim_ = 0;
    std::vector<Linear> layers_;
};

/// Softmax over the four corner logits.
inline std::array<double, 4> normalize_weights(const std::array<double, 4>& logits) {
    double mx = logits[0];
    for (int i = 1; i < 4; ++i) mx = std::max(mx, logits[i]);
    std::array<double, 4> out{};
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        out[static_cast<size_t>(i)] = std::exp(logits[static_cast<size_t>(i)] - mx);
        sum += out[static_cast<size_t>(i)];
    }
    require(std::isfinite(sum) && sum > 0.0, "normalize_weights: non-finite logit");
    for (double& v : out) v /= sum;
    return out;
}

/// Implicit decoder over corner features. Input layouts per corner row:
///  - joint:      [z_i | g_i | g_q - g_i | x_rel]      -> (value, weight logit)
///  - value net:  [z_i | g_i | x_rel]                  -> value
///  - weight net: [g_i | g_q - g_i]                    -> weight logit
///  - direct:     linear map from g_q                  -> 4 corner logits
class JiifDecoder {
public:
    JiifDecoder(DecoderConfig cfg, Rng rng) : cfg_(cfg) {
        require(valid_combo(cfg.mode, cfg.strategy), "decoder: invalid mode/strategy combo");
        require(cfg.latent_dim > 0 && cfg.guide_dim > 0, "decoder: bad feature dims");
        switch (cfg_.mode) {
            case DecoderMode::joint:
                joint_ = Mlp(joint_input_dim(), cfg_.hidden, 2, rng);
                break;
            case DecoderMode::separate:
                value_ = Mlp(value_input_dim(), cfg_.hidden, 1, rng);
                weight_ = Mlp(weight_input_dim(), cfg_.hidden, 1, rng);
                break;
            case DecoderMode::value_only:
                value_ = Mlp(value_input_dim(), cfg_.hidden, 1, rng);
                if (cfg_.strategy == WeightStrategy::direct_regression) {
                    const double bound = std::sqrt(1.0 / static_cast<double>(cfg_.guide_dim));
                    Tensor w({cfg_.guide_dim, 4});
                    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
                    Tensor b({4});
                    for (int64_t i = 0; i < 4; ++i) b[i] = rng.uniform(-bound, bound);
                    direct_w_ = ag::parameter(std::move(w));
                    direct_b_ = ag::parameter(std::move(b));
                }
                break;
        }
    }

    int64_t joint_input_dim() const { return cfg_.latent_dim + 2 * cfg_.guide_dim + 2; }
    int64_t value_input_dim() const { return cfg_.latent_dim + cfg_.guide_dim + 2; }
    int64_t weight_input_dim() const { return 2 * cfg_.guide_dim; }

    /// [N, joint_input_dim] -> [N, 2] (column 0 value, column 1 weight logit).
    ag::Var decode_joint(const ag::Var& feats) const { return joint_.forward(feats); }

    /// [N, value_input_dim] -> [N, 1]
    ag::Var decode_value(const ag::Var& feats) const { return value_.forward(feats); }

    /// [N, weight_input_dim] -> [N, 1] logit
    ag::Var decode_weight(const ag::Var& feats) const { return weight_.forward(feats); }

    /// [N, guide_dim] -> [N, 4] corner logits
    ag::Var direct_weights(const ag::Var& g_q) const {
        require(direct_w_ != nullptr, "decoder: direct regression head absent");
        return ag::add_rowvec(ag::matmul(g_q, direct_w_), direct_b_);
    }

    std::array<double, 2> decode_joint_one(const std::vector<double>& feats) const {
        auto y = joint_.forward_one(feats);
        return {y[0], y[1]};
    }

    double decode_value_one(const std::vector<double>& feats) const {
        return value_.forward_one(feats)[0];
    }

    double decode_weight_one(const std::vector<double>& feats) const {
        return weight_.forward_one(feats)[0];
    }

    std::array<double, 4> direct_weights_one(const std::vector<double>& g_q) const {
        require(direct_w_ != nullptr, "decoder: direct regression head absent");
        require(static_cast<int64_t>(g_q.size()) == cfg_.guide_dim, "decoder: g_q size mismatch");
        std::array<double, 4> out{};
        const Tensor& w = direct_w_->value;
        for (int64_t j = 0; j < 4; ++j) {
            double acc = direct_b_->value[j];
            for (int64_t i = 0; i < cfg_.guide_dim; ++i)
                acc += g_q[static_cast<size_t>(i)] * w[i * 4 + j];
            out[static_cast<size_t>(j)] = acc;
        }
        return out;
    }

    std::vector<std::pair<std::string, ag::Var>> named_parameters(const std::string& prefix) const {
        std::vector<std::pair<std::string, ag::Var>> out;
        if (!joint_.empty()) {
            auto p = joint_.named_parameters(prefix + "joint.");
            out.insert(out.end(), p.begin(), p.end());
        }
        if (!value_.empty()) {
            auto p = value_.named_parameters(prefix + "value.");
            out.insert(out.end(), p.begin(), p.end());
        }
        if (!weight_.empty()) {
            auto p = weight_.named_parameters(prefix + "weight.");
            out.insert(out.end(), p.begin(), p.end());
        }
        if (direct_w_ != nullptr) {
            out.emplace_back(prefix + "direct.w", direct_w_);
            out.emplace_back(prefix + "direct.b", direct_b_);
        }
        return out;
    }

    std::vector<ag::Var> parameters() const {
        std::vector<ag::Var> out;
        for (auto& [name, v] : named_parameters("")) out.push_back(v);
        return out;
    }

    const DecoderConfig& config() const { return cfg_; }

private:
    DecoderConfig cfg_;
    Mlp joint_, value_, weight_;
    ag::Var direct_w_, direct_b_;
};

}  // namespace jiif
