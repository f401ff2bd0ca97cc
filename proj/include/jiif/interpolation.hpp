#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "jiif/coord.hpp"
#include "jiif/errors.hpp"
#include "jiif/image.hpp"

namespace jiif {

/// Classic bilinear weights w_i = S_i / S, where S_i is the partial cell area
/// diagonally opposite corner i. Computed from the bundle's virtual corner
/// geometry, so clamped border corners still receive the right share.
inline std::array<double, 4> bilinear_weights(const QueryBundle& b) {
    // Virtual corners span one LR cell; normalize offsets by the cell size.
    const double cell_h = b.corner_coords[2].y - b.corner_coords[0].y;
    const double cell_w = b.corner_coords[1].x - b.corner_coords[0].x;
    const double ty = (b.query.y - b.corner_coords[0].y) / cell_h;
    const double tx = (b.query.x - b.corner_coords[0].x) / cell_w;
    return {(1.0 - ty) * (1.0 - tx), (1.0 - ty) * tx, ty * (1.0 - tx), ty * tx};
}

/// Weighted sum of Eq.-(1) form. Weights are expected to be normalized; that
/// contract is checked in debug builds only.
inline double weighted_interpolate(const std::array<double, 4>& weights,
                                   const std::array<double, 4>& values) {
    JIIF_DASSERT(std::fabs(weights[0] + weights[1] + weights[2] + weights[3] - 1.0) < 1e-6,
                 "weighted_interpolate: weights must sum to 1");
    return weights[0] * values[0] + weights[1] * values[1] +
           weights[2] * values[2] + weights[3] * values[3];
}

/// Reflect an index into [0, n-1], mirroring about the border pixel centers
/// (… 2 1 0 | 0' 1' 2' … pattern without repeating the edge sample).
inline int64_t reflect_index(int64_t i, int64_t n) {
    if (n == 1) return 0;
    const int64_t period = 2 * (n - 1);
    i = std::llabs(i) % period;
    return i < n ? i : period - i;
}

/// Keys cubic convolution kernel with a = -0.5 (Catmull-Rom). Returns the
/// four tap weights for samples at offsets {-1, 0, 1, 2} around the cell,
/// with t in [0,1) the fractional position inside the cell.
inline std::array<double, 4> cubic_tap_weights(double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return {
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    };
}

/// Cubic taps along one axis for continuous coordinate v on an n-pixel axis:
/// four reflected indices plus their kernel weights.
struct AxisTaps {
    std::array<int64_t, 4> index;
    std::array<double, 4> weight;
};

inline AxisTaps cubic_axis_taps(double v, int64_t n) {
    const double p = axis_position(v, n);
    const double base = std::floor(p);
    const double t = p - base;
    const int64_t b = static_cast<int64_t>(base);
    AxisTaps taps;
    taps.weight = cubic_tap_weights(t);
    for (int k = 0; k < 4; ++k) taps.index[k] = reflect_index(b - 1 + k, n);
    return taps;
}

/// Bicubic sample of a single plane at a continuous coordinate. Rows are
/// combined first, then columns; every caller shares this evaluation order so
/// resampling an image and sampling it pointwise agree bit for bit.
inline double bicubic_at(const double* plane, int64_t height, int64_t width, Vec2 c) {
    const AxisTaps ry = cubic_axis_taps(c.y, height);
    const AxisTaps rx = cubic_axis_taps(c.x, width);
    double acc = 0.0;
    for (int ky = 0; ky < 4; ++ky) {
        const double* row = plane + ry.index[ky] * width;
        double racc = 0.0;
        for (int kx = 0; kx < 4; ++kx) racc += rx.weight[kx] * row[rx.index[kx]];
        acc += ry.weight[ky] * racc;
    }
    return acc;
}

/// Bilinear sample of a single plane at a continuous coordinate, using the
/// same corner/weight machinery as the model assembly.
inline double bilinear_at(const double* plane, int64_t height, int64_t width, Vec2 c) {
    const QueryBundle b = corner_neighbors(c, height, width);
    const std::array<double, 4> w = bilinear_weights(b);
    std::array<double, 4> v;
    for (int k = 0; k < 4; ++k)
        v[k] = plane[b.corner_indices[k].row * width + b.corner_indices[k].col];
    return weighted_interpolate(w, v);
}

/// Catmull-Rom resampling under the shared pixel-center convention with
/// reflective padding.
inline RasterImage bicubic_resample(const RasterImage& image, int64_t out_height,
                                    int64_t out_width) {
    require(!image.empty(), "bicubic_resample: empty image");
    require(out_height >= 1 && out_width >= 1, "bicubic_resample: output size must be positive");
    RasterImage out(out_height, out_width, image.channels);
    out.range_lo = image.range_lo;
    out.range_hi = image.range_hi;
    for (int64_t c = 0; c < image.channels; ++c) {
        const double* src = image.plane(c);
        double* dst = out.plane(c);
        for (int64_t i = 0; i < out_height; ++i) {
            const double vy = axis_center(i, out_height);
            for (int64_t j = 0; j < out_width; ++j) {
                dst[i * out_width + j] =
                    bicubic_at(src, image.height, image.width, {vy, axis_center(j, out_width)});
            }
        }
    }
    return out;
}

/// Bilinear up-sampler built from the generic corner/weight/sum engine.
inline RasterImage bilinear_resample(const RasterImage& image, int64_t out_height,
                                     int64_t out_width) {
    require(!image.empty(), "bilinear_resample: empty image");
    require(out_height >= 1 && out_width >= 1, "bilinear_resample: output size must be positive");
    RasterImage out(out_height, out_width, image.channels);
    out.range_lo = image.range_lo;
    out.range_hi = image.range_hi;
    for (int64_t c = 0; c < image.channels; ++c) {
        const double* src = image.plane(c);
        double* dst = out.plane(c);
        for (int64_t i = 0; i < out_height; ++i) {
            const double vy = axis_center(i, out_height);
            for (int64_t j = 0; j < out_width; ++j) {
                dst[i * out_width + j] =
                    bilinear_at(src, image.height, image.width, {vy, axis_center(j, out_width)});
            }
        }
    }
    return out;
}

}  // namespace jiif
