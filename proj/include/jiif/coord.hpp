#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "jiif/errors.hpp"

namespace jiif {

/// Continuous image coordinate, (y, x) order, each component in (-1, 1).
struct Vec2 {
    double y = 0.0;
    double x = 0.0;
};

struct PixelIndex {
    int64_t row = 0;
    int64_t col = 0;
    bool operator==(const PixelIndex&) const = default;
};

/// Center of pixel i on an n-pixel axis: -1 + (2i+1)/n.
/// HR and LR grids share the (-1,1) range under this convention.
inline double axis_center(int64_t i, int64_t n) {
    return -1.0 + static_cast<double>(2 * i + 1) / static_cast<double>(n);
}

/// Inverse map: fractional pixel position of coordinate v on an n-pixel axis.
/// axis_position(axis_center(i, n), n) == i exactly for representable centers.
inline double axis_position(double v, int64_t n) {
    return (v + 1.0) * static_cast<double>(n) / 2.0 - 0.5;
}

/// Uniform pixel-center grid over (-1,1)^2.
struct CoordGrid {
    int64_t height = 0;
    int64_t width = 0;

    Vec2 coord(int64_t i, int64_t j) const {
        return {axis_center(i, height), axis_center(j, width)};
    }

    /// Row-major list of all pixel centers.
    std::vector<Vec2> coords() const {
        std::vector<Vec2> out;
        out.reserve(static_cast<size_t>(height * width));
        for (int64_t i = 0; i < height; ++i)
            for (int64_t j = 0; j < width; ++j) out.push_back(coord(i, j));
        return out;
    }
};

inline CoordGrid make_coord_grid(int64_t height, int64_t width) {
    require(height >= 1 && width >= 1, "make_coord_grid: dimensions must be positive");
    return {height, width};
}

struct NearestResult {
    PixelIndex index;
    bool clamped = false;  // true when the coordinate fell outside the grid
};

/// Index of the pixel center closest to `c`. Ties break toward the smaller
/// index; out-of-range coordinates clamp to the border pixel.
inline NearestResult nearest_index(Vec2 c, int64_t height, int64_t width) {
    require(height >= 1 && width >= 1, "nearest_index: dimensions must be positive");
    NearestResult r;
    const auto resolve = [&](double v, int64_t n, int64_t& out) {
        const double p = axis_position(v, n);
        // round-half-down keeps the tie on the smaller index
        int64_t i = static_cast<int64_t>(std::ceil(p - 0.5));
        if (i < 0) {
            i = 0;
            r.clamped = true;
        } else if (i > n - 1) {
            i = n - 1;
            r.clamped = true;
        }
        out = i;
    };
    resolve(c.y, height, r.index.row);
    resolve(c.x, width, r.index.col);
    return r;
}

/// One query against an LR grid: the four cell corners around the query.
/// Corner order is (top-left, top-right, bottom-left, bottom-right).
/// `corner_coords` and `rel_coords` use the pre-clamp virtual centers, so the
/// bilinear geometry stays exact even when border corners collapse onto the
/// same physical pixel.
struct QueryBundle {
    Vec2 query;
    std::array<PixelIndex, 4> corner_indices;
    std::array<Vec2, 4> corner_coords;
    std::array<Vec2, 4> rel_coords;
    std::array<bool, 4> corner_clamped{};
};

inline QueryBundle corner_neighbors(Vec2 query, int64_t lr_height, int64_t lr_width) {
    require(lr_height >= 1 && lr_width >= 1, "corner_neighbors: dimensions must be positive");
    QueryBundle b;
    b.query = query;

    const double py = axis_position(query.y, lr_height);
    const double px = axis_position(query.x, lr_width);
    const int64_t i0 = static_cast<int64_t>(std::floor(py));
    const int64_t j0 = static_cast<int64_t>(std::floor(px));

    const auto clamp_idx = [](int64_t i, int64_t n) {
        return i < 0 ? int64_t{0} : (i > n - 1 ? n - 1 : i);
    };

    int c = 0;
    for (const int64_t di : {int64_t{0}, int64_t{1}}) {
        for (const int64_t dj : {int64_t{0}, int64_t{1}}) {
            const int64_t vi = i0 + di;  // virtual, may be outside the grid
            const int64_t vj = j0 + dj;
            b.corner_coords[c] = {axis_center(vi, lr_height), axis_center(vj, lr_width)};
            b.rel_coords[c] = {query.y - b.corner_coords[c].y, query.x - b.corner_coords[c].x};
            b.corner_indices[c] = {clamp_idx(vi, lr_height), clamp_idx(vj, lr_width)};
            b.corner_clamped[c] = (vi != b.corner_indices[c].row) || (vj != b.corner_indices[c].col);
            ++c;
        }
    }
    return b;
}

}  // namespace jiif
