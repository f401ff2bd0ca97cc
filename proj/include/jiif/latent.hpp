#pragma once

#include <cstdint>
#include <vector>

#include "jiif/coord.hpp"
#include "jiif/errors.hpp"
#include "jiif/interpolation.hpp"
#include "jiif/tensor.hpp"

namespace jiif {

enum class LatentSource { input, guide };

enum class SampleMode { nearest, bilinear, bicubic };

/// Encoder output: a [C,H,W] grid of latent codes plus the coordinate grid
/// it lives on. Spatial size always equals the encoded image's size.
struct LatentCodeMap {
    Tensor codes;  // [C, H, W]
    LatentSource source = LatentSource::input;
    CoordGrid grid;

    int64_t feature_dim() const { return codes.numel() ? codes.dim(0) : 0; }
    int64_t height() const { return grid.height; }
    int64_t width() const { return grid.width; }
};

inline LatentCodeMap make_latent_map(Tensor codes, LatentSource source) {
    require(codes.ndim() == 3, "make_latent_map: codes must be [C,H,W]");
    LatentCodeMap m;
    m.grid = make_coord_grid(codes.dim(1), codes.dim(2));
    m.codes = std::move(codes);
    m.source = source;
    return m;
}

/// Channelwise sample of the code grid at a continuous coordinate, under the
/// same (-1,1) convention as the image grids.
inline std::vector<double> sample_latent(const LatentCodeMap& map, Vec2 coord, SampleMode mode) {
    require(map.codes.numel() > 0, "sample_latent: empty map");
    const int64_t C = map.feature_dim();
    const int64_t H = map.height();
    const int64_t W = map.width();
    std::vector<double> out(static_cast<size_t>(C));
    switch (mode) {
        case SampleMode::nearest: {
            const NearestResult n = nearest_index(coord, H, W);
            const int64_t flat = n.index.row * W + n.index.col;
            for (int64_t c = 0; c < C; ++c) out[static_cast<size_t>(c)] = map.codes[c * H * W + flat];
            break;
        }
        case SampleMode::bilinear: {
            for (int64_t c = 0; c < C; ++c)
                out[static_cast<size_t>(c)] = bilinear_at(map.codes.data() + c * H * W, H, W, coord);
            break;
        }
        case SampleMode::bicubic: {
            // Shared taps across channels; identical arithmetic to bicubic_at.
            const AxisTaps ry = cubic_axis_taps(coord.y, H);
            const AxisTaps rx = cubic_axis_taps(coord.x, W);
            for (int64_t c = 0; c < C; ++c) {
                const double* plane = map.codes.data() + c * H * W;
                double acc = 0.0;
                for (int ky = 0; ky < 4; ++ky) {
                    const double* row = plane + ry.index[ky] * W;
                    double racc = 0.0;
                    for (int kx = 0; kx < 4; ++kx) racc += rx.weight[kx] * row[rx.index[kx]];
                    acc += ry.weight[ky] * racc;
                }
                out[static_cast<size_t>(c)] = acc;
            }
            break;
        }
    }
    return out;
}

/// Flattened 16-tap footprint of a bicubic sample, for the batched
/// (differentiable) path. Weights follow the same row-major tap order as
/// `bicubic_at`.
struct BicubicFootprint {
    std::array<int64_t, 16> flat_index;
    std::array<double, 16> weight;
};

inline BicubicFootprint bicubic_footprint(Vec2 coord, int64_t height, int64_t width) {
    const AxisTaps ry = cubic_axis_taps(coord.y, height);
    const AxisTaps rx = cubic_axis_taps(coord.x, width);
    BicubicFootprint f;
    int t = 0;
    for (int ky = 0; ky < 4; ++ky) {
        for (int kx = 0; kx < 4; ++kx) {
            f.flat_index[t] = ry.index[ky] * width + rx.index[kx];
            f.weight[t] = ry.weight[ky] * rx.weight[kx];
            ++t;
        }
    }
    return f;
}

}  // namespace jiif
