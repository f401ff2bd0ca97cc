#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "jiif/errors.hpp"
#include "jiif/tensor.hpp"

namespace jiif {

/// Planar image: `channels` planes of height x width doubles.
/// `range_lo`/`range_hi` record the nominal value range of the samples
/// (e.g. [0,1] for normalized data, physical units otherwise).
struct RasterImage {
    int64_t height = 0;
    int64_t width = 0;
    int64_t channels = 0;
    std::vector<double> data;
    double range_lo = 0.0;
    double range_hi = 1.0;

    RasterImage() = default;
    RasterImage(int64_t h, int64_t w, int64_t c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h * w * c), fill) {
        require(h >= 1 && w >= 1 && c >= 1, "RasterImage: dimensions must be positive");
    }

    bool empty() const { return data.empty(); }
    int64_t pixels() const { return height * width; }

    double& at(int64_t c, int64_t y, int64_t x) {
        return data[static_cast<size_t>((c * height + y) * width + x)];
    }
    double at(int64_t c, int64_t y, int64_t x) const {
        return data[static_cast<size_t>((c * height + y) * width + x)];
    }

    const double* plane(int64_t c) const { return data.data() + c * height * width; }
    double* plane(int64_t c) { return data.data() + c * height * width; }

    Tensor to_tensor() const {
        return Tensor::from({channels, height, width}, data);
    }

    static RasterImage from_tensor(const Tensor& t, double lo = 0.0, double hi = 1.0) {
        require(t.ndim() == 3, "RasterImage::from_tensor: expected [C,H,W]");
        RasterImage img(t.dim(1), t.dim(2), t.dim(0));
        std::copy(t.data(), t.data() + t.numel(), img.data.begin());
        img.range_lo = lo;
        img.range_hi = hi;
        return img;
    }
};

inline bool same_size(const RasterImage& a, const RasterImage& b) {
    return a.height == b.height && a.width == b.width;
}

inline bool all_finite(const RasterImage& img) {
    for (const double v : img.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace jiif
