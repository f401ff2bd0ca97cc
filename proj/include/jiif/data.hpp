#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jiif/coord.hpp"
#include "jiif/errors.hpp"
#include "jiif/image.hpp"
#include "jiif/interpolation.hpp"
#include "jiif/png_io.hpp"
#include "jiif/rng.hpp"

namespace jiif {

enum class ValueKind { depth, disparity };

inline std::string to_string(ValueKind k) {
    return k == ValueKind::depth ? "depth" : "disparity";
}

struct RGBDPair {
    std::string id;
    RasterImage guide;  // 3-channel, [0,1]
    RasterImage depth;  // 1-channel, physical units (cm or raw disparity)
    ValueKind value_kind = ValueKind::depth;
};

struct DegradationSpec {
    int64_t scale = 8;
    double noise_sigma = 0.0;
};

// ---------------------------------------------------------------------------
// Normalization

struct NormalizedDepth {
    RasterImage image;  // values in [0,1] (all zeros when constant)
    double lo = 0.0;
    double hi = 0.0;
    bool constant = false;
};

inline NormalizedDepth normalize_depth(const RasterImage& depth) {
    require(depth.channels == 1 && !depth.empty(), "normalize_depth: need a nonempty depth map");
    NormalizedDepth out;
    out.lo = depth.data[0];
    out.hi = depth.data[0];
    for (double v : depth.data) {
        require(std::isfinite(v), "normalize_depth: non-finite depth value");
        out.lo = std::min(out.lo, v);
        out.hi = std::max(out.hi, v);
    }
    out.image = depth;
    out.image.range_lo = 0.0;
    out.image.range_hi = 1.0;
    if (out.hi == out.lo) {
        out.constant = true;
        for (double& v : out.image.data) v = 0.0;
        return out;
    }
    const double inv = 1.0 / (out.hi - out.lo);
    for (double& v : out.image.data) v = (v - out.lo) * inv;
    return out;
}

inline RasterImage denormalize_depth(const RasterImage& normalized, double lo, double hi) {
    RasterImage out = normalized;
    for (double& v : out.data) v = lo + v * (hi - lo);
    out.range_lo = lo;
    out.range_hi = hi;
    return out;
}

// ---------------------------------------------------------------------------
// Degradation (bicubic down-sampling plus conditional Gaussian noise)

/// One draw of the conditional noise: zero-mean Gaussian whose standard
/// deviation is sigma times the pixel's value proxy x.
inline double conditional_noise(Rng& rng, double sigma, double x) {
    return rng.normal() * sigma * x;
}

struct DegradeResult {
    RasterImage lr;                // physical units, same kind as the input
    std::vector<uint8_t> skipped;  // per-pixel flag: excluded from noising
};

/// Bicubic down-sample by spec.scale, then add noise per pixel. The value
/// proxy x is the normalized depth for depth-kind data (noise is applied in
/// normalized units and scaled back) and the reciprocal 1/d for disparity.
/// Zero-disparity pixels are skipped and flagged; results clamp at 0.
inline DegradeResult degrade(const RGBDPair& pair, const DegradationSpec& spec, uint64_t seed) {
    require(spec.scale >= 1, "degrade: scale must be >= 1");
    require(spec.noise_sigma >= 0.0, "degrade: noise_sigma must be >= 0");
    const RasterImage& depth = pair.depth;
    require(depth.channels == 1, "degrade: depth must be single-channel");
    // Center-crop to the largest scale multiple when not divisible.
    const int64_t ch = (depth.height / spec.scale) * spec.scale;
    const int64_t cw = (depth.width / spec.scale) * spec.scale;
    require(ch >= spec.scale && cw >= spec.scale, "degrade: image smaller than one LR pixel");
    RasterImage cropped(ch, cw, 1);
    const int64_t oy = (depth.height - ch) / 2, ox = (depth.width - cw) / 2;
    for (int64_t y = 0; y < ch; ++y)
        for (int64_t x = 0; x < cw; ++x) cropped.at(0, y, x) = depth.at(0, y + oy, x + ox);
    cropped.range_lo = depth.range_lo;
    cropped.range_hi = depth.range_hi;

    DegradeResult out;
    out.lr = bicubic_resample(cropped, ch / spec.scale, cw / spec.scale);
    out.skipped.assign(out.lr.data.size(), 0);
    if (spec.noise_sigma == 0.0) return out;

    Rng rng(seed);
    if (pair.value_kind == ValueKind::depth) {
        double lo = out.lr.data[0], hi = out.lr.data[0];
        for (double v : out.lr.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = hi - lo;
        for (double& v : out.lr.data) {
            const double x = range > 0.0 ? (v - lo) / range : 0.0;
            v = std::max(0.0, v + conditional_noise(rng, spec.noise_sigma, x) * range);
        }
    } else {
        for (size_t i = 0; i < out.lr.data.size(); ++i) {
            double& d = out.lr.data[i];
            if (d == 0.0) {
                out.skipped[i] = 1;
                continue;
            }
            d = std::max(0.0, d + conditional_noise(rng, spec.noise_sigma, 1.0 / d));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Geometry helpers shared by training and evaluation

inline RasterImage flip_image(const RasterImage& img, bool vertical, bool horizontal) {
    RasterImage out(img.height, img.width, img.channels);
    out.range_lo = img.range_lo;
    out.range_hi = img.range_hi;
    for (int64_t c = 0; c < img.channels; ++c)
        for (int64_t y = 0; y < img.height; ++y)
            for (int64_t x = 0; x < img.width; ++x) {
                const int64_t sy = vertical ? img.height - 1 - y : y;
                const int64_t sx = horizontal ? img.width - 1 - x : x;
                out.at(c, y, x) = img.at(c, sy, sx);
            }
    return out;
}

inline RGBDPair flip_pair(const RGBDPair& pair, bool vertical, bool horizontal) {
    return {pair.id, flip_image(pair.guide, vertical, horizontal),
            flip_image(pair.depth, vertical, horizontal), pair.value_kind};
}

inline RGBDPair center_crop_to_multiple(const RGBDPair& pair, int64_t scale) {
    require(scale >= 1, "center_crop_to_multiple: bad scale");
    const int64_t ch = (pair.depth.height / scale) * scale;
    const int64_t cw = (pair.depth.width / scale) * scale;
    require(ch >= scale && cw >= scale, "center_crop_to_multiple: image smaller than one LR pixel");
    const int64_t oy = (pair.depth.height - ch) / 2, ox = (pair.depth.width - cw) / 2;
    RGBDPair out;
    out.id = pair.id;
    out.value_kind = pair.value_kind;
    out.guide = RasterImage(ch, cw, pair.guide.channels);
    out.depth = RasterImage(ch, cw, 1);
    out.depth.range_lo = pair.depth.range_lo;
    out.depth.range_hi = pair.depth.range_hi;
    for (int64_t c = 0; c < pair.guide.channels; ++c)
        for (int64_t y = 0; y < ch; ++y)
            for (int64_t x = 0; x < cw; ++x) out.guide.at(c, y, x) = pair.guide.at(c, y + oy, x + ox);
    for (int64_t y = 0; y < ch; ++y)
        for (int64_t x = 0; x < cw; ++x) out.depth.at(0, y, x) = pair.depth.at(0, y + oy, x + ox);
    return out;
}

/// Grow an image to at least (min_h, min_w) by mirroring about its border
/// pixels (the same reflection rule the samplers use).
inline RasterImage reflect_pad_to(const RasterImage& img, int64_t min_h, int64_t min_w) {
    if (img.height >= min_h && img.width >= min_w) return img;
    const int64_t h = std::max(img.height, min_h), w = std::max(img.width, min_w);
    RasterImage out(h, w, img.channels);
    out.range_lo = img.range_lo;
    out.range_hi = img.range_hi;
    for (int64_t c = 0; c < img.channels; ++c)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x)
                out.at(c, y, x) = img.at(c, reflect_index(y, img.height), reflect_index(x, img.width));
    return out;
}

// ---------------------------------------------------------------------------
// Training samples

struct TrainingSample {
    RasterImage lr_depth;   // normalized to the patch statistics below
    RasterImage hr_guide;   // [0,1] crop
    std::vector<Vec2> query_coords;     // HR pixel centers inside the patch
    std::vector<double> target_values;  // normalized ground truth at the queries
    std::vector<double> bicubic_base;   // bicubic of lr_depth at the queries
    double lo = 0.0, hi = 0.0;          // normalization statistics (from the LR patch)
};

/// Random patch + degradation + query sampling, fully determined by the seed.
/// Flips apply jointly to guide and depth before degradation (skipped when
/// augment is false). Normalization statistics come from the LR depth so
/// inference needs no ground truth.
inline TrainingSample sample_training_patch(const RGBDPair& pair, const DegradationSpec& spec,
                                            uint64_t seed, int64_t patch = 256,
                                            int64_t query_count = 30720, bool augment = true) {
    require(patch >= spec.scale && patch % spec.scale == 0,
            "sample_training_patch: patch must be a positive multiple of scale");
    require(query_count >= 1, "sample_training_patch: need at least one query");
    require(same_size(pair.guide, pair.depth), "sample_training_patch: guide/depth size mismatch");
    Rng rng(seed);

    RGBDPair padded = pair;
    padded.guide = reflect_pad_to(pair.guide, patch, patch);
    padded.depth = reflect_pad_to(pair.depth, patch, patch);

    const int64_t oy = rng.uniform_int(padded.depth.height - patch + 1);
    const int64_t ox = rng.uniform_int(padded.depth.width - patch + 1);
    RGBDPair crop;
    crop.id = pair.id;
    crop.value_kind = pair.value_kind;
    crop.guide = RasterImage(patch, patch, padded.guide.channels);
    crop.depth = RasterImage(patch, patch, 1);
    for (int64_t c = 0; c < padded.guide.channels; ++c)
        for (int64_t y = 0; y < patch; ++y)
            for (int64_t x = 0; x < patch; ++x)
                crop.guide.at(c, y, x) = padded.guide.at(c, y + oy, x + ox);
    for (int64_t y = 0; y < patch; ++y)
        for (int64_t x = 0; x < patch; ++x) crop.depth.at(0, y, x) = padded.depth.at(0, y + oy, x + ox);

    const bool flip_v = augment && rng.coin();
    const bool flip_h = augment && rng.coin();
    if (flip_v || flip_h) crop = flip_pair(crop, flip_v, flip_h);

    const DegradeResult lr = degrade(crop, spec, rng.next_u64());
    const NormalizedDepth norm = normalize_depth(lr.lr);

    TrainingSample out;
    out.lr_depth = norm.image;
    out.hr_guide = std::move(crop.guide);
    out.lo = norm.lo;
    out.hi = norm.hi;
    const double range = norm.constant ? 1.0 : norm.hi - norm.lo;

    const int64_t pixels = patch * patch;
    const int64_t n = std::min<int64_t>(query_count, pixels);
    const std::vector<int64_t> picks = sample_without_replacement(pixels, n, rng);
    const CoordGrid grid = make_coord_grid(patch, patch);
    out.query_coords.reserve(static_cast<size_t>(n));
    out.target_values.reserve(static_cast<size_t>(n));
    out.bicubic_base.reserve(static_cast<size_t>(n));
    for (int64_t f : picks) {
        const Vec2 c = grid.coord(f / patch, f % patch);
        out.query_coords.push_back(c);
        out.target_values.push_back((crop.depth.data[static_cast<size_t>(f)] - norm.lo) / range);
        out.bicubic_base.push_back(
            bicubic_at(out.lr_depth.plane(0), out.lr_depth.height, out.lr_depth.width, c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
    int64_t count = 4;
    uint64_t seed = 7;
    int64_t size = 128;
};

/// Piecewise-smooth depth (tilted plane + Gaussian bumps + offset rectangles)
/// with an RGB guide that shares the region edges. Outputs are quantized to
/// the on-disk precision (8-bit guide, 0.01 cm depth) so a generated pair and
/// its PNG round trip are identical.
inline RGBDPair generate_synthetic_pair(uint64_t seed, int64_t height, int64_t width) {
    require(height >= 8 && width >= 8, "generate_synthetic_pair: size too small");
    Rng rng(seed);
    RGBDPair out;
    out.value_kind = ValueKind::depth;
    out.depth = RasterImage(height, width, 1);
    out.guide = RasterImage(height, width, 3);

    const double base = rng.uniform(100.0, 200.0);
    const double slope_y = rng.uniform(-30.0, 30.0);
    const double slope_x = rng.uniform(-30.0, 30.0);

    struct Bump {
        double cy, cx, s, amp;
    };
    std::vector<Bump> bumps;
    const int64_t n_bumps = 3 + rng.uniform_int(4);
    for (int64_t i = 0; i < n_bumps; ++i)
        bumps.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.05, 0.25),
                         rng.uniform(-40.0, 40.0)});

    struct Region {
        int64_t y0, y1, x0, x1;
        double offset;
        double color[3];
    };
    std::vector<Region> regions;
    const int64_t n_regions = 2 + rng.uniform_int(3);
    for (int64_t i = 0; i < n_regions; ++i) {
        const int64_t ry0 = rng.uniform_int(height - 4);
        const int64_t rx0 = rng.uniform_int(width - 4);
        const int64_t ry1 = std::min<int64_t>(height, ry0 + 4 + rng.uniform_int(height / 2));
        const int64_t rx1 = std::min<int64_t>(width, rx0 + 4 + rng.uniform_int(width / 2));
        Region r{ry0, ry1, rx0, rx1, (rng.coin() ? 1.0 : -1.0) * rng.uniform(25.0, 70.0), {}};
        for (double& c : r.color) c = rng.uniform(0.15, 0.9);
        regions.push_back(r);
    }
    double bg_color[3];
    for (double& c : bg_color) c = rng.uniform(0.15, 0.9);
    const double tex_freq = rng.uniform(2.0, 6.0);
    const double tex_angle = rng.uniform(0.0, 3.14159);

    double dmin = 1e300, dmax = -1e300;
    std::vector<int> region_of(static_cast<size_t>(height * width), -1);
    for (int64_t y = 0; y < height; ++y) {
        const double fy = (y + 0.5) / static_cast<double>(height);
        for (int64_t x = 0; x < width; ++x) {
            const double fx = (x + 0.5) / static_cast<double>(width);
            double d = base + slope_y * fy + slope_x * fx;
            for (const Bump& b : bumps) {
                const double dy = fy - b.cy, dx = fx - b.cx;
                d += b.amp * std::exp(-(dy * dy + dx * dx) / (2.0 * b.s * b.s));
            }
            for (size_t r = 0; r < regions.size(); ++r) {
                const Region& rg = regions[r];
                if (y >= rg.y0 && y < rg.y1 && x >= rg.x0 && x < rg.x1) {
                    d += rg.offset;
                    region_of[static_cast<size_t>(y * width + x)] = static_cast<int>(r);
                }
            }
            d = std::max(1.0, d);
            out.depth.at(0, y, x) = d;
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
        }
    }

    const double drange = std::max(1e-9, dmax - dmin);
    for (int64_t y = 0; y < height; ++y) {
        const double fy = (y + 0.5) / static_cast<double>(height);
        for (int64_t x = 0; x < width; ++x) {
            const double fx = (x + 0.5) / static_cast<double>(width);
            const int r = region_of[static_cast<size_t>(y * width + x)];
            const double* col = r >= 0 ? regions[static_cast<size_t>(r)].color : bg_color;
            const double shade = 0.2 * (out.depth.at(0, y, x) - dmin) / drange;
            const double tex = 0.08 * std::sin(2.0 * 3.14159 * tex_freq *
                                               (fx * std::cos(tex_angle) + fy * std::sin(tex_angle)));
            for (int64_t c = 0; c < 3; ++c)
                out.guide.at(c, y, x) = std::clamp(col[c] + shade + tex, 0.0, 1.0);
        }
    }

    // Quantize to the storage precision: guide 1/255 steps, depth 0.01 steps.
    // The depth product mirrors the loader's counts * depth_scale arithmetic
    // so a written-and-reloaded pair is bitwise identical to this one.
    for (double& v : out.guide.data) v = std::round(v * 255.0) / 255.0;
    for (double& v : out.depth.data) v = std::round(v * 100.0) * 0.01;
    out.depth.range_lo = 0.0;
    out.depth.range_hi = 655.35;
    return out;
}

// ---------------------------------------------------------------------------
// Dataset loading and writing

namespace detail_data {

/// PNG count -> physical value factor (0.01 stores centimeters at 655 m max,
/// and disparity at 1/100 precision).
constexpr double kDepthStoreScale = 0.01;

struct DatasetMeta {
    ValueKind value_kind = ValueKind::depth;
    double depth_scale = kDepthStoreScale;
};

inline DatasetMeta read_meta(const std::filesystem::path& dir) {
    const std::filesystem::path path = dir / "meta.json";
    std::ifstream in(path);
    if (!in) throw DataError("missing dataset metadata: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid dataset metadata " + path.string() + ": " + e.what());
    }
    DatasetMeta meta;
    const std::string kind = j.value("value_kind", "depth");
    if (kind == "depth")
        meta.value_kind = ValueKind::depth;
    else if (kind == "disparity")
        meta.value_kind = ValueKind::disparity;
    else
        throw DataError("unknown value_kind '" + kind + "' in " + path.string());
    meta.depth_scale = j.value("depth_scale", kDepthStoreScale);
    require(meta.depth_scale > 0.0, "dataset metadata: depth_scale must be positive");
    return meta;
}

inline void write_meta(const std::filesystem::path& dir, const DatasetMeta& meta) {
    nlohmann::json j;
    j["value_kind"] = to_string(meta.value_kind);
    j["depth_scale"] = meta.depth_scale;
    std::ofstream out(dir / "meta.json");
    if (!out) throw DataError("cannot write dataset metadata in: " + dir.string());
    out << j.dump(2) << "\n";
}

}  // namespace detail_data

/// A full split of synthetic pairs. Distinct streams per split name keep
/// train and test disjoint.
inline std::vector<RGBDPair> generate_synthetic_dataset(const std::string& split,
                                                        const SyntheticSpec& spec) {
    require(spec.count >= 1, "generate_synthetic_dataset: count must be positive");
    std::vector<RGBDPair> out;
    Rng base = Rng(spec.seed).split(split);
    for (int64_t i = 0; i < spec.count; ++i) {
        RGBDPair p = generate_synthetic_pair(base.next_u64(), spec.size, spec.size);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(i));
        p.id = buf;
        out.push_back(std::move(p));
    }
    return out;
}

/// Load every pair under `<root>/<dataset>/<split>/` in sorted id order.
/// The synthetic dataset is generated procedurally when no directory exists,
/// so the pipeline runs without any downloads.
inline std::vector<RGBDPair> load_dataset(const std::string& name, const std::string& split,
                                          const std::string& root,
                                          const SyntheticSpec& synth = {}) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(root) / name / split;
    if (!fs::exists(dir)) {
        if (name == "synthetic") return generate_synthetic_dataset(split, synth);
        throw DataError("dataset directory not found: " + dir.string());
    }

    const detail_data::DatasetMeta meta = detail_data::read_meta(dir);
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string fname = entry.path().filename().string();
        const std::string suffix = "_rgb.png";
        if (fname.size() > suffix.size() &&
            fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) == 0)
            ids.push_back(fname.substr(0, fname.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw DataError("no pairs found under: " + dir.string());

    std::vector<RGBDPair> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        const fs::path rgb = dir / (id + "_rgb.png");
        const fs::path dep = dir / (id + "_depth.png");
        if (!fs::exists(dep)) throw DataError("missing depth file: " + dep.string());
        RGBDPair p;
        p.id = id;
        p.value_kind = meta.value_kind;
        p.guide = read_rgb8(rgb.string());
        p.depth = read_gray16(dep.string());
        for (double& v : p.depth.data) v *= meta.depth_scale;
        p.depth.range_lo = 0.0;
        p.depth.range_hi = 65535.0 * meta.depth_scale;
        require(same_size(p.guide, p.depth),
                "guide/depth size mismatch for id " + id + " in " + dir.string());
        out.push_back(std::move(p));
    }
    return out;
}

/// Stored-value scale of an on-disk split (physical value = PNG count * scale).
/// Synthetic splits that only exist procedurally use the default scale.
inline double dataset_depth_scale(const std::string& name, const std::string& split,
                                  const std::string& root) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(root) / name / split;
    if (!fs::exists(dir)) return detail_data::kDepthStoreScale;
    return detail_data::read_meta(dir).depth_scale;
}

/// Materialize pairs to the documented on-disk layout. `depth_scale` trades
/// range for resolution: counts span [0, 65535] so physical values above
/// 65535 * depth_scale would clamp.
inline void write_dataset(const std::vector<RGBDPair>& pairs, const std::string& name,
                          const std::string& split, const std::string& root,
                          double depth_scale = detail_data::kDepthStoreScale) {
    namespace fs = std::filesystem;
    require(!pairs.empty(), "write_dataset: nothing to write");
    require(depth_scale > 0.0, "write_dataset: depth_scale must be positive");
    const fs::path dir = fs::path(root) / name / split;
    fs::create_directories(dir);
    detail_data::DatasetMeta meta;
    meta.value_kind = pairs[0].value_kind;
    meta.depth_scale = depth_scale;
    detail_data::write_meta(dir, meta);
    for (const RGBDPair& p : pairs) {
        write_rgb8(p.guide, (dir / (p.id + "_rgb.png")).string());
        RasterImage counts = p.depth;
        for (double& v : counts.data) v /= meta.depth_scale;
        write_gray16(counts, (dir / (p.id + "_depth.png")).string());
    }
}

}  // namespace jiif
