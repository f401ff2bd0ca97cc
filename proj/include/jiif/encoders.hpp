#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "jiif/autograd.hpp"
#include "jiif/errors.hpp"
#include "jiif/image.hpp"
#include "jiif/latent.hpp"
#include "jiif/rng.hpp"
#include "jiif/tensor.hpp"

namespace jiif {

struct EncoderConfig {
    int64_t in_channels = 1;
    int64_t feature_dim = 128;
    int64_t num_blocks = 16;
    int64_t kernel = 3;
};

namespace detail_enc {

/// Uniform fan-in init, bound sqrt(1/fan_in), for both weights and biases.
inline ag::Var init_conv_weight(int64_t cout, int64_t cin, int64_t k, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(cin * k * k));
    Tensor w({cout, cin * k * k});
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
    return ag::parameter(std::move(w));
}

inline ag::Var init_conv_bias(int64_t cout, int64_t cin, int64_t k, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(cin * k * k));
    Tensor b({cout});
    for (int64_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-bound, bound);
    return ag::parameter(std::move(b));
}

}  // namespace detail_enc

/// Residual convolutional feature extractor. A head conv lifts the input to
/// feature space, a stack of two-conv residual blocks refines it, and a tail
/// conv plus a long skip back to the head output produces the latent map.
/// Every stage keeps full spatial resolution.
class Encoder {
public:
    Encoder(EncoderConfig cfg, Rng rng) : cfg_(cfg) {
        require(cfg.in_channels > 0 && cfg.feature_dim > 0 && cfg.num_blocks >= 0,
                "encoder: bad config");
        require(cfg.kernel % 2 == 1, "encoder: kernel must be odd");
        head_ = make_conv(cfg.feature_dim, cfg.in_channels, rng);
        blocks_.reserve(static_cast<size_t>(cfg.num_blocks));
        for (int64_t i = 0; i < cfg.num_blocks; ++i)
            blocks_.push_back({make_conv(cfg.feature_dim, cfg.feature_dim, rng),
                               make_conv(cfg.feature_dim, cfg.feature_dim, rng)});
        tail_ = make_conv(cfg.feature_dim, cfg.feature_dim, rng);
    }

    /// x is [in_channels, H, W]; the result is [feature_dim, H, W].
    ag::Var forward(const ag::Var& x) const {
        require(x->value.ndim() == 3 && x->value.dim(0) == cfg_.in_channels,
                "encoder: input must be [" + std::to_string(cfg_.in_channels) + ",H,W], got " +
                    x->value.shape_str());
        ag::Var h0 = apply(head_, x);
        ag::Var h = h0;
        for (const auto& blk : blocks_) {
            ag::Var t = apply(blk[1], ag::relu(apply(blk[0], h)));
            h = ag::add(t, h);
        }
        h = apply(tail_, h);
        return ag::add(h, h0);
    }

    /// Inference path: encode a raster into a latent map without a graph.
    LatentCodeMap encode(const RasterImage& image, LatentSource source) const {
        ag::NoGradGuard guard;
        ag::Var x = ag::constant(image.to_tensor());
        ag::Var codes = forward(x);
        return make_latent_map(std::move(codes->value), source);
    }

    std::vector<ag::Var> parameters() const {
        std::vector<ag::Var> out;
        for (auto& [name, v] : named_parameters("")) out.push_back(v);
        return out;
    }

    std::vector<std::pair<std::string, ag::Var>> named_parameters(const std::string& prefix) const {
        std::vector<std::pair<std::string, ag::Var>> out;
        out.emplace_back(prefix + "head.w", head_.w);
        out.emplace_back(prefix + "head.b", head_.b);
        for (size_t i = 0; i < blocks_.size(); ++i) {
            const std::string base = prefix + "block" + std::to_string(i) + ".";
            out.emplace_back(base + "conv0.w", blocks_[i][0].w);
            out.emplace_back(base + "conv0.b", blocks_[i][0].b);
            out.emplace_back(base + "conv1.w", blocks_[i][1].w);
            out.emplace_back(base + "conv1.b", blocks_[i][1].b);
        }
        out.emplace_back(prefix + "tail.w", tail_.w);
        out.emplace_back(prefix + "tail.b", tail_.b);
        return out;
    }

    const EncoderConfig& config() const { return cfg_; }

private:
    struct Conv {
        ag::Var w, b;
    };

    Conv make_conv(int64_t cout, int64_t cin, Rng& rng) const {
        return {detail_enc::init_conv_weight(cout, cin, cfg_.kernel, rng),
                detail_enc::init_conv_bias(cout, cin, cfg_.kernel, rng)};
    }

    ag::Var apply(const Conv& c, const ag::Var& x) const {
        return ag::conv2d(x, c.w, c.b, cfg_.kernel);
    }

    EncoderConfig cfg_;
    Conv head_;
    std::vector<std::array<Conv, 2>> blocks_;
    Conv tail_;
};

}  // namespace jiif
