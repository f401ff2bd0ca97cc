#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "jiif/data.hpp"
#include "jiif/errors.hpp"
#include "jiif/image.hpp"
#include "jiif/interpolation.hpp"
#include "jiif/model.hpp"
#include "jiif/png_io.hpp"
#include "jiif/training.hpp"

namespace jiif {

// ---------------------------------------------------------------------------
// Metric

/// Root-mean-square error over all pixels, optionally ignoring a border of
/// `border_crop` pixels on every side (off by default; the flag exists to
/// match codebases that crop).
inline double rmse(const RasterImage& pred, const RasterImage& gt, int64_t border_crop = 0) {
    require(same_size(pred, gt) && pred.channels == gt.channels,
            "rmse: image sizes/channels differ");
    require(border_crop >= 0, "rmse: border_crop must be >= 0");
    const int64_t h = pred.height, w = pred.width;
    require(2 * border_crop < h && 2 * border_crop < w, "rmse: border_crop leaves no pixels");
    double sum = 0.0;
    int64_t count = 0;
    for (int64_t c = 0; c < pred.channels; ++c)
        for (int64_t y = border_crop; y < h - border_crop; ++y)
            for (int64_t x = border_crop; x < w - border_crop; ++x) {
                const double d = pred.at(c, y, x) - gt.at(c, y, x);
                sum += d * d;
                ++count;
            }
    return std::sqrt(sum / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// Error-map artifacts

/// Write `<prefix>_error.png` (false-color absolute error, scaled to the map's
/// own maximum) and `<prefix>_pred.png` (raw prediction as 16-bit counts).
inline void save_error_map(const RasterImage& pred, const RasterImage& gt,
                           const std::string& prefix) {
    require(same_size(pred, gt) && pred.channels == 1 && gt.channels == 1,
            "save_error_map: need matching single-channel images");
    const int64_t h = pred.height, w = pred.width;
    RasterImage err(h, w, 1);
    double max_err = 0.0;
    for (size_t i = 0; i < err.data.size(); ++i) {
        err.data[i] = std::abs(pred.data[i] - gt.data[i]);
        max_err = std::max(max_err, err.data[i]);
    }
    RasterImage color(h, w, 3);
    const auto band = [](double t) { return std::clamp(t, 0.0, 1.0); };
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const double t = max_err > 0.0 ? err.at(0, y, x) / max_err : 0.0;
            color.at(0, y, x) = band(1.5 - std::abs(4.0 * t - 3.0));
            color.at(1, y, x) = band(1.5 - std::abs(4.0 * t - 2.0));
            color.at(2, y, x) = band(1.5 - std::abs(4.0 * t - 1.0));
        }
    write_rgb8(color, prefix + "_error.png");

    RasterImage counts = pred;
    for (double& v : counts.data) v = v / detail_data::kDepthStoreScale;
    counts.range_lo = 0.0;
    counts.range_hi = 65535.0;
    write_gray16(counts, prefix + "_pred.png");
}

// ---------------------------------------------------------------------------
// Benchmark

struct ImageResult {
    std::string id;
    int64_t scale = 0;
    double rmse = 0.0;
};

struct ScaleAverage {
    int64_t scale = 0;
    double rmse = 0.0;
};

struct BenchmarkReport {
    std::string dataset;
    std::string method;  // "bicubic" or "jiif/<mode>+<strategy>"
    std::string unit;    // "cm" for depth, "disparity" otherwise
    double noise_sigma = 0.0;
    int64_t border_crop = 0;
    std::vector<ImageResult> per_image;
    std::vector<ScaleAverage> averages;
};

/// Degrade, reconstruct, and score every pair at every scale. A null model
/// runs the closed-form bicubic baseline. Average RMSE is the arithmetic mean
/// of the per-image values. When maps_dir is nonempty, error maps and raw
/// predictions are written there per image and scale.
inline BenchmarkReport run_benchmark(const JIIFModel* model, const std::vector<RGBDPair>& pairs,
                                     const std::string& dataset_name,
                                     const std::vector<int64_t>& scales, double noise_sigma,
                                     uint64_t seed, int64_t border_crop = 0,
                                     const std::string& maps_dir = "",
                                     std::ostream* console = nullptr) {
    require(!pairs.empty(), "run_benchmark: no test pairs");
    require(!scales.empty(), "run_benchmark: no scales requested");
    BenchmarkReport report;
    report.dataset = dataset_name;
    report.method = model ? "jiif/" + to_string(model->config().decoder.mode) + "+" +
                                to_string(model->config().decoder.strategy)
                          : "bicubic";
    report.unit = pairs[0].value_kind == ValueKind::depth ? "cm" : "disparity";
    report.noise_sigma = noise_sigma;
    report.border_crop = border_crop;
    if (!maps_dir.empty()) std::filesystem::create_directories(maps_dir);

    for (int64_t scale : scales) {
        double sum = 0.0;
        for (size_t i = 0; i < pairs.size(); ++i) {
            const RGBDPair cropped = center_crop_to_multiple(pairs[i], scale);
            const uint64_t deg_seed =
                Rng::mix(Rng::mix(seed, static_cast<uint64_t>(scale)), static_cast<uint64_t>(i));
            const DegradeResult dr = degrade(cropped, {scale, noise_sigma}, deg_seed);

            RasterImage pred;
            if (model) {
                const NormalizedDepth norm = normalize_depth(dr.lr);
                pred = denormalize_depth(model->full_inference(norm.image, cropped.guide),
                                         norm.lo, norm.hi);
            } else {
                pred = bicubic_resample(dr.lr, cropped.depth.height, cropped.depth.width);
            }
            const double r = rmse(pred, cropped.depth, border_crop);
            require(std::isfinite(r), "run_benchmark: non-finite RMSE for id " + cropped.id);
            report.per_image.push_back({cropped.id, scale, r});
            sum += r;
            if (!maps_dir.empty()) {
                const std::string prefix =
                    (std::filesystem::path(maps_dir) /
                     (cropped.id + "_x" + std::to_string(scale)))
                        .string();
                save_error_map(pred, cropped.depth, prefix);
            }
            if (console)
                *console << "  [" << dataset_name << " x" << scale << "] " << cropped.id
                         << "  rmse " << r << std::endl;
        }
        report.averages.push_back({scale, sum / static_cast<double>(pairs.size())});
    }
    return report;
}

/// Line-oriented key-value records followed by a rendered table.
inline std::string render_report(const BenchmarkReport& report) {
    std::ostringstream out;
    char buf[160];
    out << "method=" << report.method << "\n";
    out << "dataset=" << report.dataset << "\n";
    out << "unit=" << report.unit << "\n";
    std::snprintf(buf, sizeof(buf), "noise_sigma=%.17g\n", report.noise_sigma);
    out << buf;
    out << "border_crop=" << report.border_crop << "\n";
    for (const ImageResult& r : report.per_image) {
        std::snprintf(buf, sizeof(buf), "image scale=%lld id=%s rmse=%.17g\n",
                      static_cast<long long>(r.scale), r.id.c_str(), r.rmse);
        out << buf;
    }
    for (const ScaleAverage& a : report.averages) {
        std::snprintf(buf, sizeof(buf), "average scale=%lld rmse=%.17g\n",
                      static_cast<long long>(a.scale), a.rmse);
        out << buf;
    }
    out << "\n";
    out << "dataset      method                          ";
    for (const ScaleAverage& a : report.averages) {
        std::snprintf(buf, sizeof(buf), "x%-10lld", static_cast<long long>(a.scale));
        out << buf;
    }
    out << "\n";
    std::snprintf(buf, sizeof(buf), "%-12s %-31s", report.dataset.c_str(), report.method.c_str());
    out << buf;
    for (const ScaleAverage& a : report.averages) {
        std::snprintf(buf, sizeof(buf), "%-11.4f", a.rmse);
        out << buf;
    }
    out << "\n";
    return out.str();
}

inline void write_report(const BenchmarkReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write report: " + path);
    out << render_report(report);
}

// ---------------------------------------------------------------------------
// Ablation harness

struct AblationRow {
    std::string table;  // "modules" or "weights"
    std::string label;
    DecoderMode mode;
    WeightStrategy strategy;
    bool residual;
    double rmse = 0.0;
};

/// The 4 module configurations (joint repr. x residual over the separate-DIF
/// baseline) plus the 3 weight-learning strategies, in table order.
inline std::vector<AblationRow> ablation_grid() {
    return {
        {"modules", "baseline", DecoderMode::separate, WeightStrategy::graph_attention, false},
        {"modules", "+joint", DecoderMode::joint, WeightStrategy::graph_attention, false},
        {"modules", "+residual", DecoderMode::separate, WeightStrategy::graph_attention, true},
        {"modules", "+joint +residual (full)", DecoderMode::joint, WeightStrategy::graph_attention,
         true},
        {"weights", "bilinear", DecoderMode::value_only, WeightStrategy::bilinear, true},
        {"weights", "direct regression", DecoderMode::value_only,
         WeightStrategy::direct_regression, true},
        {"weights", "graph attention (full)", DecoderMode::joint, WeightStrategy::graph_attention,
         true},
    };
}

/// Train and evaluate all seven configurations from one call, differing only
/// in the decoder mode, weight strategy, and residual flags.
inline std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                             const std::vector<RGBDPair>& train_pairs,
                                             const std::vector<RGBDPair>& test_pairs,
                                             std::ostream* console = nullptr) {
    std::vector<AblationRow> rows = ablation_grid();
    for (AblationRow& row : rows) {
        TrainConfig cfg = base;
        cfg.model.decoder.mode = row.mode;
        cfg.model.decoder.strategy = row.strategy;
        cfg.model.use_residual = row.residual;
        if (!base.run_dir.empty()) {
            std::string slug = row.table + "_" + row.label;
            for (char& c : slug)
                if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
            cfg.run_dir = (std::filesystem::path(base.run_dir) / slug).string();
        }
        if (console) *console << "[ablate] " << row.table << " / " << row.label << std::endl;
        JIIFModel model(cfg.model, cfg.seed);
        train_model(model, train_pairs, cfg, console);
        const BenchmarkReport report =
            run_benchmark(&model, test_pairs, "synthetic", {cfg.scale}, cfg.noise_sigma, cfg.seed);
        row.rmse = report.averages.at(0).rmse;
    }
    return rows;
}

/// Tables shaped like the module and weight-strategy studies.
inline std::string render_ablation(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    char buf[160];
    for (const AblationRow& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "row table=%s label=\"%s\" mode=%s strategy=%s residual=%d rmse=%.17g\n",
                      r.table.c_str(), r.label.c_str(), to_string(r.mode).c_str(),
                      to_string(r.strategy).c_str(), r.residual ? 1 : 0, r.rmse);
        out << buf;
    }
    out << "\nmodules ablation\n";
    out << "baseline   joint      residual   rmse\n";
    for (const AblationRow& r : rows) {
        if (r.table != "modules") continue;
        std::snprintf(buf, sizeof(buf), "%-10s %-10s %-10s %.4f\n", "x",
                      r.mode == DecoderMode::joint ? "x" : "", r.residual ? "x" : "", r.rmse);
        out << buf;
    }
    out << "\nweights ablation\n";
    out << "method                     rmse\n";
    for (const AblationRow& r : rows) {
        if (r.table != "weights") continue;
        std::snprintf(buf, sizeof(buf), "%-26s %.4f\n", r.label.c_str(), r.rmse);
        out << buf;
    }
    return out.str();
}

}  // namespace jiif
