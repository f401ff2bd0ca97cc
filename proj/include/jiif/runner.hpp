#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jiif/data.hpp"
#include "jiif/errors.hpp"
#include "jiif/evaluation.hpp"
#include "jiif/model.hpp"
#include "jiif/png_io.hpp"
#include "jiif/training.hpp"

namespace jiif {

// ---------------------------------------------------------------------------
// Shared command plumbing
//
// Each run_* function is the full implementation of one CLI subcommand,
// callable in-process. They throw ConfigError / DataError / NumericError;
// the CLI maps those to exit codes 2 / 3 / 4.

/// Where a command reads its pairs from.
struct DataOptions {
    std::string root = "data";
    std::string dataset = "synthetic";
    std::string split = "test";
    SyntheticSpec synth;
};

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"count", s.count}, {"seed", s.seed}, {"size", s.size}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s.count = j.value("count", s.count);
    s.seed = j.value("seed", s.seed);
    s.size = j.value("size", s.size);
}

inline void to_json(nlohmann::json& j, const DataOptions& d) {
    j = nlohmann::json{
        {"root", d.root}, {"dataset", d.dataset}, {"split", d.split}, {"synth", d.synth}};
}

inline void from_json(const nlohmann::json& j, DataOptions& d) {
    d.root = j.value("root", d.root);
    d.dataset = j.value("dataset", d.dataset);
    d.split = j.value("split", d.split);
    if (j.contains("synth")) j.at("synth").get_to(d.synth);
}

inline std::vector<RGBDPair> load_pairs(const DataOptions& d) {
    return load_dataset(d.dataset, d.split, d.root, d.synth);
}

namespace detail_run {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write: " + path.string());
    out << text;
}

/// Persist the fully resolved command configuration into the run directory
/// so every run is reproducible from its own artifacts.
inline void echo_config(const std::filesystem::path& dir, const nlohmann::json& cfg) {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.json", cfg.dump(2) + "\n");
}

}  // namespace detail_run

// ---------------------------------------------------------------------------
// Desk-scale presets
//
// The stock defaults (feature dim 128, 16 blocks, 256x256 patches, 30720
// queries, 200 epochs) are sized for GPU runs on full datasets. The desk
// preset keeps the same architecture family at widths a single CPU core can
// train in minutes; every pipeline behaviour is identical.

inline ModelConfig desk_model_config() {
    ModelConfig cfg;
    cfg.depth_encoder = EncoderConfig{1, 24, 2, 3};
    cfg.guide_encoder = EncoderConfig{3, 24, 2, 3};
    cfg.decoder.latent_dim = 24;
    cfg.decoder.guide_dim = 24;
    cfg.decoder.hidden = {128, 64, 32};
    return cfg;
}

inline TrainConfig desk_train_config() {
    TrainConfig cfg;
    cfg.model = desk_model_config();
    cfg.epochs = 100;
    cfg.scale = 4;
    cfg.patch = 48;
    cfg.query_count = 1024;
    cfg.checkpoint_every = 50;
    return cfg;
}

// ---------------------------------------------------------------------------
// prepare-data

struct PrepareCommand {
    std::string mode = "synth";  // "synth" | "import"
    std::string root = "data";
    std::string dataset = "synthetic";
    std::vector<std::string> splits = {"train", "test"};
    SyntheticSpec synth;
    std::string src_root;  // import: root holding an existing layout
};

inline void to_json(nlohmann::json& j, const PrepareCommand& c) {
    j = nlohmann::json{{"mode", c.mode},     {"root", c.root},   {"dataset", c.dataset},
                       {"splits", c.splits}, {"synth", c.synth}, {"src_root", c.src_root}};
}

/// Materialize datasets into the on-disk layout the other commands read.
inline void run_prepare(const PrepareCommand& cmd, std::ostream* console = nullptr) {
    require(!cmd.splits.empty(), "prepare-data: no splits requested");
    for (const std::string& split : cmd.splits) {
        std::vector<RGBDPair> pairs;
        double scale = detail_data::kDepthStoreScale;
        if (cmd.mode == "synth") {
            pairs = generate_synthetic_dataset(split, cmd.synth);
        } else if (cmd.mode == "import") {
            require(!cmd.src_root.empty(), "prepare-data import: --src-root is required");
            pairs = load_dataset(cmd.dataset, split, cmd.src_root);
            scale = dataset_depth_scale(cmd.dataset, split, cmd.src_root);
        } else {
            throw ConfigError("prepare-data: unknown mode '" + cmd.mode +
                              "' (valid: synth, import)");
        }
        write_dataset(pairs, cmd.dataset, split, cmd.root, scale);
        if (console)
            *console << "wrote " << pairs.size() << " pairs to "
                     << (std::filesystem::path(cmd.root) / cmd.dataset / split).string() << "\n";
    }
}

// ---------------------------------------------------------------------------
// train

struct TrainCommand {
    TrainConfig train;
    DataOptions data{.root = "data", .dataset = "synthetic", .split = "train", .synth = {}};
    std::string run_dir = "runs/train";
};

inline void to_json(nlohmann::json& j, const TrainCommand& c) {
    j = nlohmann::json{{"train", c.train}, {"data", c.data}, {"run_dir", c.run_dir}};
}

inline TrainResult run_train(const TrainCommand& cmd, std::ostream* console = nullptr) {
    require(!cmd.run_dir.empty(), "train: run directory must not be empty");
    TrainConfig cfg = cmd.train;
    cfg.run_dir = cmd.run_dir;
    detail_run::echo_config(cfg.run_dir, nlohmann::json(cmd));
    const std::vector<RGBDPair> pairs = load_pairs(cmd.data);
    JIIFModel model(cfg.model, cfg.seed);
    return train_model(model, pairs, cfg, console);
}

// ---------------------------------------------------------------------------
// eval

struct EvalCommand {
    DataOptions data{.root = "data", .dataset = "synthetic", .split = "test", .synth = {}};
    std::vector<int64_t> scales = {4, 8, 16};
    double noise_sigma = 0.0;
    int64_t border_crop = 0;
    std::string checkpoint;  // model under test; empty requires a baseline
    std::string baseline;    // "bicubic" evaluates the closed-form baseline
    bool save_maps = false;
    std::string out_dir = "runs/eval";
    uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const EvalCommand& c) {
    j = nlohmann::json{{"data", c.data},
                       {"scales", c.scales},
                       {"noise_sigma", c.noise_sigma},
                       {"border_crop", c.border_crop},
                       {"checkpoint", c.checkpoint},
                       {"baseline", c.baseline},
                       {"save_maps", c.save_maps},
                       {"out_dir", c.out_dir},
                       {"seed", c.seed}};
}

inline BenchmarkReport run_eval(const EvalCommand& cmd, std::ostream* console = nullptr) {
    namespace fs = std::filesystem;
    if (cmd.checkpoint.empty() && cmd.baseline.empty())
        throw ConfigError("eval: provide --checkpoint or --baseline bicubic");
    if (!cmd.baseline.empty() && cmd.baseline != "bicubic")
        throw ConfigError("eval: unknown baseline '" + cmd.baseline + "' (valid: bicubic)");
    if (!cmd.checkpoint.empty() && !cmd.baseline.empty())
        throw ConfigError("eval: --checkpoint and --baseline are mutually exclusive");
    require(!cmd.out_dir.empty(), "eval: output directory must not be empty");

    detail_run::echo_config(cmd.out_dir, nlohmann::json(cmd));
    const std::vector<RGBDPair> pairs = load_pairs(cmd.data);

    std::optional<JIIFModel> model;
    if (!cmd.checkpoint.empty()) model = model_from_checkpoint(load_checkpoint(cmd.checkpoint));

    std::string maps_dir;
    if (cmd.save_maps) {
        maps_dir = (fs::path(cmd.out_dir) / "maps").string();
        fs::create_directories(maps_dir);
    }
    BenchmarkReport report =
        run_benchmark(model ? &*model : nullptr, pairs, cmd.data.dataset, cmd.scales,
                      cmd.noise_sigma, cmd.seed, cmd.border_crop, maps_dir, console);
    write_report(report, (fs::path(cmd.out_dir) / "report.txt").string());
    if (console) *console << render_report(report);
    return report;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateCommand {
    TrainConfig base;
    DataOptions train_data{.root = "data", .dataset = "synthetic", .split = "train", .synth = {}};
    DataOptions test_data{.root = "data", .dataset = "synthetic", .split = "test", .synth = {}};
    std::string out_dir = "runs/ablate";
};

inline void to_json(nlohmann::json& j, const AblateCommand& c) {
    j = nlohmann::json{{"base", c.base},
                       {"train_data", c.train_data},
                       {"test_data", c.test_data},
                       {"out_dir", c.out_dir}};
}

inline std::vector<AblationRow> run_ablate(const AblateCommand& cmd,
                                           std::ostream* console = nullptr) {
    require(!cmd.out_dir.empty(), "ablate: output directory must not be empty");
    detail_run::echo_config(cmd.out_dir, nlohmann::json(cmd));
    TrainConfig base = cmd.base;
    base.run_dir = cmd.out_dir;
    const std::vector<RGBDPair> train_pairs = load_pairs(cmd.train_data);
    const std::vector<RGBDPair> test_pairs = load_pairs(cmd.test_data);
    const std::vector<AblationRow> rows = run_ablation(base, train_pairs, test_pairs, console);
    const std::string rendered = render_ablation(rows);
    detail_run::write_text(std::filesystem::path(cmd.out_dir) / "ablation.txt", rendered);
    if (console) *console << rendered;
    return rows;
}

// ---------------------------------------------------------------------------
// infer

struct InferCommand {
    std::string checkpoint;   // empty with bicubic=true runs the baseline
    std::string guide_png;    // 8-bit RGB guide at the target resolution
    std::string depth_png;    // 16-bit grayscale low-resolution depth
    double depth_scale = detail_data::kDepthStoreScale;
    bool bicubic = false;
    std::string out_prefix = "pred";
};

inline void to_json(nlohmann::json& j, const InferCommand& c) {
    j = nlohmann::json{{"checkpoint", c.checkpoint}, {"guide_png", c.guide_png},
                       {"depth_png", c.depth_png},   {"depth_scale", c.depth_scale},
                       {"bicubic", c.bicubic},       {"out_prefix", c.out_prefix}};
}

/// Up-sample one depth map to the guide's resolution and write
/// `<out_prefix>_pred.png` (16-bit counts at `depth_scale`).
inline RasterImage run_infer(const InferCommand& cmd, std::ostream* console = nullptr) {
    if (cmd.checkpoint.empty() && !cmd.bicubic)
        throw ConfigError("infer: provide --checkpoint or --bicubic");
    if (!cmd.checkpoint.empty() && cmd.bicubic)
        throw ConfigError("infer: --checkpoint and --bicubic are mutually exclusive");
    require(!cmd.guide_png.empty() && !cmd.depth_png.empty(),
            "infer: --guide and --depth are required");
    require(cmd.depth_scale > 0.0, "infer: depth scale must be positive");

    const RasterImage guide = read_rgb8(cmd.guide_png);
    RasterImage lr = read_gray16(cmd.depth_png);
    for (double& v : lr.data) v *= cmd.depth_scale;
    require(guide.height % lr.height == 0 && guide.width % lr.width == 0 &&
                guide.height / lr.height == guide.width / lr.width && guide.height >= lr.height,
            "infer: guide size must be an integer multiple of the depth size");

    RasterImage pred;
    if (cmd.bicubic) {
        pred = bicubic_resample(lr, guide.height, guide.width);
    } else {
        const JIIFModel model = model_from_checkpoint(load_checkpoint(cmd.checkpoint));
        const NormalizedDepth norm = normalize_depth(lr);
        pred = denormalize_depth(model.full_inference(norm.image, guide), norm.lo, norm.hi);
    }
    if (!all_finite(pred)) throw NumericError("infer: non-finite prediction");

    RasterImage counts = pred;
    for (double& v : counts.data) v = std::max(0.0, v) / cmd.depth_scale;
    write_gray16(counts, cmd.out_prefix + "_pred.png");
    if (console) {
        double lo = pred.data[0], hi = pred.data[0];
        for (const double v : pred.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "wrote %s_pred.png (%lldx%lld, values %.6g..%.6g)\n",
                      cmd.out_prefix.c_str(), static_cast<long long>(pred.height),
                      static_cast<long long>(pred.width), lo, hi);
        *console << buf;
    }
    return pred;
}

// ---------------------------------------------------------------------------
// demo

struct DemoCommand {
    std::string out_dir = "runs/demo";
    uint64_t seed = 7;
    int64_t epochs = 120;
    int64_t scale = 8;
    int64_t size = 64;  // synthetic image side
};

inline void to_json(nlohmann::json& j, const DemoCommand& c) {
    j = nlohmann::json{{"out_dir", c.out_dir},
                       {"seed", c.seed},
                       {"epochs", c.epochs},
                       {"scale", c.scale},
                       {"size", c.size}};
}

/// Self-contained showcase: generate synthetic data, train a small model,
/// and benchmark it against the bicubic baseline, saving every artifact.
inline void run_demo(const DemoCommand& cmd, std::ostream* console = nullptr) {
    namespace fs = std::filesystem;
    require(cmd.epochs >= 1 && cmd.scale >= 2 && cmd.size >= 16, "demo: invalid parameters");
    detail_run::echo_config(cmd.out_dir, nlohmann::json(cmd));

    SyntheticSpec spec;
    spec.count = 1;
    spec.seed = cmd.seed;
    spec.size = cmd.size;
    const std::vector<RGBDPair> train_pairs = generate_synthetic_dataset("train", spec);
    const std::vector<RGBDPair> test_pairs = generate_synthetic_dataset("test", spec);

    TrainConfig cfg;
    cfg.model.depth_encoder = EncoderConfig{1, 16, 2, 3};
    cfg.model.guide_encoder = EncoderConfig{3, 16, 2, 3};
    cfg.model.decoder.latent_dim = 16;
    cfg.model.decoder.guide_dim = 16;
    cfg.model.decoder.hidden = {64, 32};
    cfg.epochs = cmd.epochs;
    cfg.seed = cmd.seed;
    cfg.scale = cmd.scale;
    cfg.patch = cmd.size;
    cfg.query_count = 1024;
    cfg.checkpoint_every = cmd.epochs;
    cfg.run_dir = (fs::path(cmd.out_dir) / "train").string();

    if (console) *console << "training " << cfg.epochs << " epochs on 1 synthetic pair...\n";
    JIIFModel model(cfg.model, cfg.seed);
    train_model(model, train_pairs, cfg, nullptr);

    const std::vector<int64_t> scales = {cmd.scale};
    auto bench = [&](const std::vector<RGBDPair>& pairs, const JIIFModel* m,
                     const std::string& tag) {
        const std::string maps = (fs::path(cmd.out_dir) / "maps" / tag).string();
        BenchmarkReport rep =
            run_benchmark(m, pairs, "synthetic", scales, 0.0, cmd.seed, 0, maps);
        write_report(rep, (fs::path(cmd.out_dir) / ("report_" + tag + ".txt")).string());
        return rep.averages[0].rmse;
    };
    const double train_base = bench(train_pairs, nullptr, "train_bicubic");
    const double train_ours = bench(train_pairs, &model, "train_jiif");
    const double test_base = bench(test_pairs, nullptr, "test_bicubic");
    const double test_ours = bench(test_pairs, &model, "test_jiif");

    if (console) {
        char buf[300];
        std::snprintf(buf, sizeof(buf),
                      "x%lld rmse:\n"
                      "  training pair (reconstruction):  bicubic %.6g   jiif %.6g\n"
                      "  held-out pair (generalization):  bicubic %.6g   jiif %.6g\n"
                      "artifacts in %s\n",
                      static_cast<long long>(cmd.scale), train_base, train_ours, test_base,
                      test_ours, cmd.out_dir.c_str());
        *console << buf;
    }
}

}  // namespace jiif
