#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "jiif/autograd.hpp"
#include "jiif/coord.hpp"
#include "jiif/decoder.hpp"
#include "jiif/encoders.hpp"
#include "jiif/errors.hpp"
#include "jiif/image.hpp"
#include "jiif/interpolation.hpp"
#include "jiif/latent.hpp"
#include "jiif/rng.hpp"

namespace jiif {

struct ModelConfig {
    EncoderConfig depth_encoder{/*in_channels=*/1, 128, 16, 3};
    EncoderConfig guide_encoder{/*in_channels=*/3, 128, 16, 3};
    DecoderConfig decoder;
    bool use_residual = true;
    int64_t chunk_size = 30720;
};

/// Two encoders and one implicit decoder assembled into the full upsampler.
/// The same parameters serve any integer scale: resolution enters only
/// through the continuous coordinates.
class JIIFModel {
public:
    JIIFModel(ModelConfig cfg, uint64_t seed)
        : cfg_(cfg),
          depth_enc_(cfg.depth_encoder, Rng(seed).split("depth_encoder")),
          guide_enc_(cfg.guide_encoder, Rng(seed).split("guide_encoder")),
          dec_(cfg.decoder, Rng(seed).split("decoder")) {
        require(cfg.decoder.latent_dim == cfg.depth_encoder.feature_dim,
                "model: decoder latent_dim must match depth encoder feature_dim");
        require(cfg.decoder.guide_dim == cfg.guide_encoder.feature_dim,
                "model: decoder guide_dim must match guide encoder feature_dim");
        require(cfg.chunk_size > 0, "model: chunk_size must be positive");
    }

    // -- differentiable path ------------------------------------------------

    /// Full training-time forward: encode both inputs, decode the queries,
    /// and (optionally) add the bicubic base. lr_depth is [1,h,w] normalized
    /// depth, hr_guide is [guide_channels,H,W]; the result is [Q,1].
    ag::Var predict(const ag::Var& lr_depth, const ag::Var& hr_guide,
                    const std::vector<Vec2>& queries) const {
        check_pair_shapes(lr_depth->value, hr_guide->value);
        ag::Var z = depth_enc_.forward(lr_depth);
        ag::Var g = guide_enc_.forward(hr_guide);
        const int64_t hr_h = hr_guide->value.dim(1), hr_w = hr_guide->value.dim(2);
        return decode_batch(z, g, hr_h, hr_w, queries, lr_depth->value.data());
    }

    /// Decode a query batch against already-encoded feature maps. The base
    /// for the residual branch is sampled from lr_plane (the normalized LR
    /// depth) with the shared bicubic sampler.
    ag::Var decode_batch(const ag::Var& z_map, const ag::Var& g_map, int64_t hr_h,
                         int64_t hr_w, const std::vector<Vec2>& queries,
                         const double* lr_plane) const {
        require(!queries.empty(), "model: empty query batch");
        require(z_map->value.ndim() == 3 && g_map->value.ndim() == 3,
                "model: feature maps must be [C,H,W]");
        const int64_t lr_h = z_map->value.dim(1), lr_w = z_map->value.dim(2);
        const int64_t Q = static_cast<int64_t>(queries.size());
        const int64_t n = 4 * Q;  // query-major rows: the 4 corners of q are adjacent

        // Corner geometry for the whole batch.
        std::vector<int64_t> z_idx(static_cast<size_t>(n));
        std::vector<int64_t> gq_idx(static_cast<size_t>(n));
        std::vector<int64_t> gq_idx_unique(static_cast<size_t>(Q));
        std::vector<int64_t> gi_idx(static_cast<size_t>(n) * 16);
        Tensor gi_w({n, 16});
        Tensor x_rel({n, 2});
        Tensor bil_w({Q, 4});
        Tensor base({Q, 1});
        for (int64_t q = 0; q < Q; ++q) {
            const QueryBundle b = corner_neighbors(queries[static_cast<size_t>(q)], lr_h, lr_w);
            const NearestResult nq = nearest_index(b.query, hr_h, hr_w);
            const int64_t hr_flat = nq.index.row * hr_w + nq.index.col;
            gq_idx_unique[static_cast<size_t>(q)] = hr_flat;
            const std::array<double, 4> bw = bilinear_weights(b);
            for (int c = 0; c < 4; ++c) {
                const int64_t r = q * 4 + c;
                z_idx[static_cast<size_t>(r)] =
                    b.corner_indices[c].row * lr_w + b.corner_indices[c].col;
                gq_idx[static_cast<size_t>(r)] = hr_flat;
                // g_i is sampled at the clamped corner's actual center so it
                // describes the same location as z_i.
                const Vec2 ci{axis_center(b.corner_indices[c].row, lr_h),
                              axis_center(b.corner_indices[c].col, lr_w)};
                const BicubicFootprint fp = bicubic_footprint(ci, hr_h, hr_w);
                for (int t = 0; t < 16; ++t) {
                    gi_idx[static_cast<size_t>(r * 16 + t)] = fp.flat_index[t];
                    gi_w.at(r, t) = fp.weight[t];
                }
                x_rel.at(r, 0) = b.rel_coords[c].y;
                x_rel.at(r, 1) = b.rel_coords[c].x;
                bil_w.at(q, c) = bw[c];
            }
            if (cfg_.use_residual)
                base[q] = bicubic_at(lr_plane, lr_h, lr_w, b.query);
        }

        ag::Var z_i = ag::gather_cols(z_map, std::move(z_idx));
        ag::Var g_i = ag::weighted_gather_cols(g_map, std::move(gi_idx), std::move(gi_w));
        ag::Var values, weights;
        switch (cfg_.decoder.mode) {
            case DecoderMode::joint: {
                ag::Var g_q = ag::gather_cols(g_map, std::move(gq_idx));
                ag::Var feats = ag::concat_cols(
                    {z_i, g_i, ag::sub(g_q, g_i), ag::constant(std::move(x_rel))});
                ag::Var out = dec_.decode_joint(feats);
                values = ag::reshape(ag::slice_cols(out, 0, 1), {Q, 4});
                weights = ag::softmax_rows(ag::reshape(ag::slice_cols(out, 1, 2), {Q, 4}));
                break;
            }
            case DecoderMode::separate: {
                ag::Var g_q = ag::gather_cols(g_map, std::move(gq_idx));
                ag::Var vfeats = ag::concat_cols({z_i, g_i, ag::constant(std::move(x_rel))});
                values = ag::reshape(dec_.decode_value(vfeats), {Q, 4});
                ag::Var wfeats = ag::concat_cols({g_i, ag::sub(g_q, g_i)});
                weights = ag::softmax_rows(ag::reshape(dec_.decode_weight(wfeats), {Q, 4}));
                break;
            }
            case DecoderMode::value_only: {
                ag::Var vfeats = ag::concat_cols({z_i, g_i, ag::constant(std::move(x_rel))});
                values = ag::reshape(dec_.decode_value(vfeats), {Q, 4});
                if (cfg_.decoder.strategy == WeightStrategy::bilinear) {
                    weights = ag::constant(std::move(bil_w));
                } else {
                    ag::Var g_q1 = ag::gather_cols(g_map, std::move(gq_idx_unique));
                    weights = ag::softmax_rows(dec_.direct_weights(g_q1));
                }
                break;
            }
        }
        ag::Var pred = ag::row_sum(ag::mul(weights, values));
        if (cfg_.use_residual) pred = ag::add(pred, ag::constant(std::move(base)));
        return pred;
    }

    // -- reference scalar path ----------------------------------------------

    /// Decoded (pre-residual) value of a single query, assembled step by step
    /// with scalar arithmetic. This is the oracle the batched path is tested
    /// against; keep it free of the ops used there.
    double query_pixel(const LatentCodeMap& z_map, const LatentCodeMap& g_map, Vec2 x_q) const {
        const int64_t lr_h = z_map.height(), lr_w = z_map.width();
        const QueryBundle b = corner_neighbors(x_q, lr_h, lr_w);
        const std::vector<double> g_q =
            sample_latent(g_map, x_q, SampleMode::nearest);

        std::array<double, 4> vals{}, logits{};
        std::array<double, 4> weights{};
        for (int c = 0; c < 4; ++c) {
            const PixelIndex pi = b.corner_indices[c];
            std::vector<double> z_i(static_cast<size_t>(z_map.feature_dim()));
            for (int64_t ch = 0; ch < z_map.feature_dim(); ++ch)
                z_i[static_cast<size_t>(ch)] = z_map.codes.at(ch, pi.row, pi.col);
            const Vec2 ci{axis_center(pi.row, lr_h), axis_center(pi.col, lr_w)};
            const std::vector<double> g_i = sample_latent(g_map, ci, SampleMode::bicubic);

            std::vector<double> feats;
            switch (cfg_.decoder.mode) {
                case DecoderMode::joint: {
                    feats.reserve(z_i.size() + 2 * g_i.size() + 2);
                    feats.insert(feats.end(), z_i.begin(), z_i.end());
                    feats.insert(feats.end(), g_i.begin(), g_i.end());
                    for (size_t k = 0; k < g_i.size(); ++k) feats.push_back(g_q[k] - g_i[k]);
                    feats.push_back(b.rel_coords[c].y);
                    feats.push_back(b.rel_coords[c].x);
                    const std::array<double, 2> out = dec_.decode_joint_one(feats);
                    vals[c] = out[0];
                    logits[c] = out[1];
                    break;
                }
                case DecoderMode::separate: {
                    feats.reserve(z_i.size() + g_i.size() + 2);
                    feats.insert(feats.end(), z_i.begin(), z_i.end());
                    feats.insert(feats.end(), g_i.begin(), g_i.end());
                    feats.push_back(b.rel_coords[c].y);
                    feats.push_back(b.rel_coords[c].x);
                    vals[c] = dec_.decode_value_one(feats);
                    std::vector<double> wfeats;
                    wfeats.reserve(2 * g_i.size());
                    wfeats.insert(wfeats.end(), g_i.begin(), g_i.end());
                    for (size_t k = 0; k < g_i.size(); ++k) wfeats.push_back(g_q[k] - g_i[k]);
                    logits[c] = dec_.decode_weight_one(wfeats);
                    break;
                }
                case DecoderMode::value_only: {
                    feats.reserve(z_i.size() + g_i.size() + 2);
                    feats.insert(feats.end(), z_i.begin(), z_i.end());
                    feats.insert(feats.end(), g_i.begin(), g_i.end());
                    feats.push_back(b.rel_coords[c].y);
                    feats.push_back(b.rel_coords[c].x);
                    vals[c] = dec_.decode_value_one(feats);
                    break;
                }
            }
        }

        switch (cfg_.decoder.strategy) {
            case WeightStrategy::graph_attention:
                weights = normalize_weights(logits);
                break;
            case WeightStrategy::bilinear:
                weights = bilinear_weights(b);
                break;
            case WeightStrategy::direct_regression:
                weights = normalize_weights(dec_.direct_weights_one(g_q));
                break;
        }
        return weights[0] * vals[0] + weights[1] * vals[1] + weights[2] * vals[2] +
               weights[3] * vals[3];
    }

    /// Reference forward for a list of queries, residual included, no graph.
    std::vector<double> forward(const RasterImage& lr_depth, const RasterImage& hr_guide,
                                const std::vector<Vec2>& queries) const {
        check_pair(lr_depth, hr_guide);
        ag::NoGradGuard guard;
        const LatentCodeMap z = depth_enc_.encode(lr_depth, LatentSource::input);
        const LatentCodeMap g = guide_enc_.encode(hr_guide, LatentSource::guide);
        std::vector<double> out;
        out.reserve(queries.size());
        for (const Vec2& q : queries) {
            double v = query_pixel(z, g, q);
            if (cfg_.use_residual)
                v += bicubic_at(lr_depth.plane(0), lr_depth.height, lr_depth.width, q);
            out.push_back(v);
        }
        return out;
    }

    // -- full-image inference -------------------------------------------------

    /// Predict every HR pixel, decoding in chunks. Chunking is pure batching:
    /// the output is identical for any chunk size.
    RasterImage full_inference(const RasterImage& lr_depth, const RasterImage& hr_guide) const {
        check_pair(lr_depth, hr_guide);
        ag::NoGradGuard guard;
        ag::Var z = depth_enc_.forward(ag::constant(lr_depth.to_tensor()));
        ag::Var g = guide_enc_.forward(ag::constant(hr_guide.to_tensor()));
        const int64_t hr_h = hr_guide.height, hr_w = hr_guide.width;
        const CoordGrid grid = make_coord_grid(hr_h, hr_w);

        RasterImage out(hr_h, hr_w, 1);
        out.range_lo = lr_depth.range_lo;
        out.range_hi = lr_depth.range_hi;
        const int64_t total = hr_h * hr_w;
        std::vector<Vec2> chunk;
        chunk.reserve(static_cast<size_t>(std::min(cfg_.chunk_size, total)));
        for (int64_t start = 0; start < total; start += cfg_.chunk_size) {
            const int64_t stop = std::min(start + cfg_.chunk_size, total);
            chunk.clear();
            for (int64_t f = start; f < stop; ++f) chunk.push_back(grid.coord(f / hr_w, f % hr_w));
            ag::Var pred = decode_batch(z, g, hr_h, hr_w, chunk, lr_depth.plane(0));
            for (int64_t f = start; f < stop; ++f) out.data[static_cast<size_t>(f)] = pred->value[f - start];
        }
        return out;
    }

    // -- parameters -----------------------------------------------------------

    std::vector<std::pair<std::string, ag::Var>> named_parameters() const {
        std::vector<std::pair<std::string, ag::Var>> out;
        auto append = [&out](std::vector<std::pair<std::string, ag::Var>> p) {
            out.insert(out.end(), p.begin(), p.end());
        };
        append(depth_enc_.named_parameters("depth_encoder."));
        append(guide_enc_.named_parameters("guide_encoder."));
        append(dec_.named_parameters("decoder."));
        return out;
    }

    std::vector<ag::Var> parameters() const {
        std::vector<ag::Var> out;
        for (auto& [name, v] : named_parameters()) out.push_back(v);
        return out;
    }

    int64_t parameter_count() const {
        int64_t n = 0;
        for (const ag::Var& p : parameters()) n += p->value.numel();
        return n;
    }

    const ModelConfig& config() const { return cfg_; }
    const Encoder& depth_encoder() const { return depth_enc_; }
    const Encoder& guide_encoder() const { return guide_enc_; }
    const JiifDecoder& decoder() const { return dec_; }

private:
    static void check_pair_shapes(const Tensor& lr, const Tensor& hr) {
        require(lr.ndim() == 3 && hr.ndim() == 3, "model: inputs must be [C,H,W]");
        require(hr.dim(1) % lr.dim(1) == 0 && hr.dim(2) % lr.dim(2) == 0 &&
                    hr.dim(1) / lr.dim(1) == hr.dim(2) / lr.dim(2) && hr.dim(1) >= lr.dim(1),
                "model: HR size must be an integer multiple of LR size");
    }

    void check_pair(const RasterImage& lr, const RasterImage& hr) const {
        require(lr.channels == cfg_.depth_encoder.in_channels &&
                    hr.channels == cfg_.guide_encoder.in_channels,
                "model: channel mismatch with encoder configs");
        require(hr.height % lr.height == 0 && hr.width % lr.width == 0 &&
                    hr.height / lr.height == hr.width / lr.width && hr.height >= lr.height,
                "model: HR size must be an integer multiple of LR size");
    }

    ModelConfig cfg_;
    Encoder depth_enc_;
    Encoder guide_enc_;
    JiifDecoder dec_;
};

}  // namespace jiif
