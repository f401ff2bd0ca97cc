// jiif: guided depth super-resolution with a joint implicit image function.
//
// Subcommands: prepare-data, train, eval, ablate, infer, demo (and
// convert-nyu when built with HDF5). Config precedence is built-in defaults
// < --config file < command-line flags; every run directory receives the
// fully resolved configuration (config.json + config_resolved.ini).
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <jiif/runner.hpp>
#ifdef JIIF_WITH_HDF5
#include <jiif/nyu_hdf5.hpp>
#endif

namespace {

using namespace jiif;

/// Flags shared by every command that reads a dataset.
void add_data_options(CLI::App* sub, DataOptions* d, const std::string& prefix = "") {
    const std::string g = prefix.empty() ? "Data" : prefix + " data";
    auto name = [&](const std::string& flag) {
        return prefix.empty() ? "--" + flag : "--" + prefix + "-" + flag;
    };
    sub->add_option(name("root"), d->root, "Dataset root directory")
        ->capture_default_str()
        ->group(g);
    sub->add_option(name("dataset"), d->dataset, "Dataset name (synthetic|nyu_v2|...)")
        ->capture_default_str()
        ->group(g);
    sub->add_option(name("split"), d->split, "Dataset split to read")
        ->capture_default_str()
        ->group(g);
    sub->add_option(name("synth-count"), d->synth.count, "Synthetic pairs per split")
        ->capture_default_str()
        ->group(g);
    sub->add_option(name("synth-seed"), d->synth.seed, "Synthetic generator seed")
        ->capture_default_str()
        ->group(g);
    sub->add_option(name("synth-size"), d->synth.size, "Synthetic image side length")
        ->capture_default_str()
        ->group(g);
}

/// Model/optimizer/schedule flags shared by train and ablate. Defaults are
/// whatever `cfg` holds when the options are registered, so train shows the
/// stock recipe and ablate shows the desk preset.
struct ModelFlags {
    int64_t feature_dim = 0;
    int64_t num_blocks = 0;
    std::vector<int64_t> hidden;
    std::string mode;
    std::string strategy;
};

void add_train_options(CLI::App* sub, TrainConfig* cfg, ModelFlags* mf) {
    mf->feature_dim = cfg->model.depth_encoder.feature_dim;
    mf->num_blocks = cfg->model.depth_encoder.num_blocks;
    mf->hidden = cfg->model.decoder.hidden;
    mf->mode = to_string(cfg->model.decoder.mode);
    mf->strategy = to_string(cfg->model.decoder.strategy);

    const std::string gs = "Schedule";
    sub->add_option("--epochs", cfg->epochs, "Training epochs")->capture_default_str()->group(gs);
    sub->add_option("--lr0", cfg->lr0, "Initial learning rate")->capture_default_str()->group(gs);
    sub->add_option("--lr-decay", cfg->lr_decay, "Learning-rate decay factor")
        ->capture_default_str()
        ->group(gs);
    sub->add_option("--lr-step-epochs", cfg->lr_step_epochs, "Epochs between decays")
        ->capture_default_str()
        ->group(gs);
    sub->add_option("--beta1", cfg->beta1, "Adam beta1")->capture_default_str()->group(gs);
    sub->add_option("--beta2", cfg->beta2, "Adam beta2")->capture_default_str()->group(gs);
    sub->add_option("--eps", cfg->eps, "Adam epsilon")->capture_default_str()->group(gs);
    sub->add_option("--batch-size", cfg->batch_size, "Patches per step (pipeline uses 1)")
        ->capture_default_str()
        ->group(gs);

    const std::string gp = "Pipeline";
    sub->add_option("--seed", cfg->seed, "Root random seed")->capture_default_str()->group(gp);
    sub->add_option("--scale", cfg->scale, "Down-sampling factor")
        ->capture_default_str()
        ->group(gp);
    sub->add_option("--noise-sigma", cfg->noise_sigma, "Conditional noise level (0 disables)")
        ->capture_default_str()
        ->group(gp);
    sub->add_option("--patch", cfg->patch, "HR training patch side")
        ->capture_default_str()
        ->group(gp);
    sub->add_option("--query-count", cfg->query_count, "Query pixels per patch")
        ->capture_default_str()
        ->group(gp);
    sub->add_flag("--augment,!--no-augment", cfg->augment, "Random flip augmentation")
        ->default_str("true")  // echoed configs must preserve the on-default
        ->group(gp);
    sub->add_option("--checkpoint-every", cfg->checkpoint_every,
                    "Checkpoint cadence in epochs (the final epoch always checkpoints)")
        ->capture_default_str()
        ->group(gp);

    const std::string gm = "Model";
    sub->add_option("--mode", mf->mode, "Decoder mode: joint|separate|value_only")
        ->capture_default_str()
        ->group(gm);
    sub->add_option("--strategy", mf->strategy,
                    "Weight strategy: graph_attention|bilinear|direct_regression")
        ->capture_default_str()
        ->group(gm);
    sub->add_flag("--residual,!--no-residual", cfg->model.use_residual,
                  "Predict a correction to the bicubic up-sample")
        ->default_str("true")  // echoed configs must preserve the on-default
        ->group(gm);
    sub->add_option("--feature-dim", mf->feature_dim,
                    "Encoder feature channels (also the decoder latent/guide dims)")
        ->capture_default_str()
        ->group(gm);
    sub->add_option("--num-blocks", mf->num_blocks, "Residual blocks per encoder")
        ->capture_default_str()
        ->group(gm);
    sub->add_option("--hidden", mf->hidden, "Decoder MLP hidden widths")
        ->capture_default_str()
        ->delimiter(',')
        ->group(gm);
    sub->add_option("--chunk-size", cfg->model.chunk_size,
                    "Decoder batching chunk (output-invariant)")
        ->capture_default_str()
        ->group(gm);
}

/// Fold the string/size flags back into the model config. `--strategy
/// bilinear|direct_regression` without an explicit --mode implies the
/// value-only decoder those strategies are defined for.
void resolve_model_flags(const CLI::App* sub, const ModelFlags& mf, ModelConfig* model) {
    WeightStrategy strategy = parse_weight_strategy(mf.strategy);
    std::string mode_str = mf.mode;
    if (sub->count("--mode") == 0 && sub->count("--strategy") > 0 &&
        strategy != WeightStrategy::graph_attention)
        mode_str = "value_only";
    model->decoder.mode = parse_decoder_mode(mode_str);
    model->decoder.strategy = strategy;
    if (!valid_combo(model->decoder.mode, model->decoder.strategy))
        throw ConfigError("invalid --mode/--strategy combination: " + mode_str + " with " +
                          mf.strategy);
    model->depth_encoder.feature_dim = mf.feature_dim;
    model->guide_encoder.feature_dim = mf.feature_dim;
    model->decoder.latent_dim = mf.feature_dim;
    model->decoder.guide_dim = mf.feature_dim;
    model->depth_encoder.num_blocks = mf.num_blocks;
    model->guide_encoder.num_blocks = mf.num_blocks;
    model->decoder.hidden = mf.hidden;
}

/// Persist the CLI's view of every resolved option (defaults merged with the
/// config file and flags) so a run can be reproduced with
/// `jiif --config <run_dir>/config_resolved.ini <command>`.
void echo_resolved_ini(const CLI::App* root, const std::string& dir) {
    std::filesystem::create_directories(dir);
    detail_run::write_text(std::filesystem::path(dir) / "config_resolved.ini",
                           root->config_to_str(true, true));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"jiif: guided depth map super-resolution via a joint implicit image function"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "jiif 1.0.0");
    app.fallthrough();  // lets `jiif <command> --config file` reach the global option
    app.set_config("--config", "",
                   "Key=value config file; flags override it, defaults fill the rest");
    std::ostream* console = &std::cout;

    // ---- prepare-data -----------------------------------------------------
    auto* prep = app.add_subcommand(
        "prepare-data", "Materialize a dataset into the on-disk layout (synthesize or import)");
    PrepareCommand prep_cmd;
    prep->add_option("--mode", prep_cmd.mode, "synth|import")->capture_default_str();
    prep->add_option("--root", prep_cmd.root, "Output dataset root")->capture_default_str();
    prep->add_option("--dataset", prep_cmd.dataset, "Dataset name")->capture_default_str();
    prep->add_option("--splits", prep_cmd.splits, "Splits to materialize")
        ->capture_default_str()
        ->delimiter(',');
    prep->add_option("--count", prep_cmd.synth.count, "Synthetic pairs per split")
        ->capture_default_str();
    prep->add_option("--seed", prep_cmd.synth.seed, "Synthetic generator seed")
        ->capture_default_str();
    prep->add_option("--size", prep_cmd.synth.size, "Synthetic image side length")
        ->capture_default_str();
    prep->add_option("--src-root", prep_cmd.src_root, "Source root for --mode import")
        ->capture_default_str();
    prep->callback([&] { run_prepare(prep_cmd, console); });

    // ---- convert-nyu ------------------------------------------------------
#ifdef JIIF_WITH_HDF5
    auto* nyu = app.add_subcommand(
        "convert-nyu", "Convert the labeled NYU v2 archive (.mat, HDF5) into train/test splits");
    NyuConvertCommand nyu_cmd;
    nyu->add_option("--mat", nyu_cmd.mat_path, "Path to nyu_depth_v2_labeled.mat")->required();
    nyu->add_option("--root", nyu_cmd.root, "Output dataset root")->capture_default_str();
    nyu->add_option("--dataset", nyu_cmd.dataset, "Output dataset name")->capture_default_str();
    nyu->add_option("--train-count", nyu_cmd.train_count, "Leading pairs for the train split")
        ->capture_default_str();
    nyu->add_option("--test-count", nyu_cmd.test_count, "Trailing pairs for the test split")
        ->capture_default_str();
    nyu->add_option("--depth-scale", nyu_cmd.depth_scale, "Stored centimeters per PNG count")
        ->capture_default_str();
    nyu->callback([&] { run_convert_nyu(nyu_cmd, console); });
#endif

    // ---- train ------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train a model (stock recipe by default)");
    TrainCommand train_cmd;
    train_cmd.data.split = "train";
    ModelFlags train_mf;
    add_data_options(train, &train_cmd.data);
    add_train_options(train, &train_cmd.train, &train_mf);
    train->add_option("--run-dir", train_cmd.run_dir, "Run directory for logs and checkpoints")
        ->capture_default_str();
    train->callback([&] {
        resolve_model_flags(train, train_mf, &train_cmd.train.model);
        echo_resolved_ini(&app, train_cmd.run_dir);
        const TrainResult r = run_train(train_cmd, console);
        *console << "final loss " << r.final_loss << " after " << r.steps << " steps; checkpoint "
                 << r.final_checkpoint << "\n";
    });

    // ---- eval ---------------------------------------------------------------
    auto* eval = app.add_subcommand(
        "eval", "Benchmark a checkpoint or the bicubic baseline (average RMSE per scale)");
    EvalCommand eval_cmd;
    add_data_options(eval, &eval_cmd.data);
    eval->add_option("--scales", eval_cmd.scales, "Up-sampling factors to evaluate")
        ->capture_default_str()
        ->delimiter(',');
    eval->add_option("--noise-sigma", eval_cmd.noise_sigma,
                     "Conditional degradation noise (651 reproduces the noisy protocol)")
        ->capture_default_str();
    eval->add_option("--border-crop", eval_cmd.border_crop, "Pixels ignored at each border")
        ->capture_default_str();
    eval->add_option("--checkpoint", eval_cmd.checkpoint, "Checkpoint to evaluate")
        ->capture_default_str();
    eval->add_option("--baseline", eval_cmd.baseline, "Closed-form baseline (bicubic)")
        ->capture_default_str();
    eval->add_flag("--save-maps", eval_cmd.save_maps, "Write prediction and error-map PNGs")
        ->capture_default_str();
    eval->add_option("--out-dir", eval_cmd.out_dir, "Report directory")->capture_default_str();
    eval->add_option("--seed", eval_cmd.seed, "Degradation seed")->capture_default_str();
    eval->callback([&] {
        echo_resolved_ini(&app, eval_cmd.out_dir);
        run_eval(eval_cmd, console);
    });

    // ---- ablate -------------------------------------------------------------
    auto* ablate = app.add_subcommand(
        "ablate", "Train and evaluate the 4 module and 3 weight-strategy configurations");
    AblateCommand ablate_cmd;
    ablate_cmd.base = desk_train_config();
    ablate_cmd.base.scale = 8;  // the ablation protocol evaluates at x8
    ablate_cmd.base.epochs = 20;
    ModelFlags ablate_mf;
    add_data_options(ablate, &ablate_cmd.train_data, "train");
    add_data_options(ablate, &ablate_cmd.test_data, "test");
    add_train_options(ablate, &ablate_cmd.base, &ablate_mf);
    ablate->add_option("--out-dir", ablate_cmd.out_dir, "Output directory")
        ->capture_default_str();
    ablate->callback([&] {
        resolve_model_flags(ablate, ablate_mf, &ablate_cmd.base.model);
        echo_resolved_ini(&app, ablate_cmd.out_dir);
        run_ablate(ablate_cmd, console);
    });

    // ---- infer --------------------------------------------------------------
    auto* infer = app.add_subcommand(
        "infer", "Up-sample one depth PNG to its RGB guide's resolution");
    InferCommand infer_cmd;
    infer->add_option("--checkpoint", infer_cmd.checkpoint, "Checkpoint to run")
        ->capture_default_str();
    infer->add_option("--guide", infer_cmd.guide_png, "High-resolution RGB guide PNG")
        ->required();
    infer->add_option("--depth", infer_cmd.depth_png, "Low-resolution 16-bit depth PNG")
        ->required();
    infer->add_option("--depth-scale", infer_cmd.depth_scale, "Physical units per PNG count")
        ->capture_default_str();
    infer->add_flag("--bicubic", infer_cmd.bicubic, "Run the bicubic baseline instead")
        ->capture_default_str();
    infer->add_option("--out-prefix", infer_cmd.out_prefix, "Output path prefix")
        ->capture_default_str();
    infer->callback([&] { run_infer(infer_cmd, console); });

    // ---- demo ---------------------------------------------------------------
    auto* demo = app.add_subcommand(
        "demo", "Self-contained synthetic showcase: train, benchmark vs bicubic, save maps");
    DemoCommand demo_cmd;
    demo->add_option("--out-dir", demo_cmd.out_dir, "Output directory")->capture_default_str();
    demo->add_option("--seed", demo_cmd.seed, "Root seed")->capture_default_str();
    demo->add_option("--epochs", demo_cmd.epochs, "Training epochs")->capture_default_str();
    demo->add_option("--scale", demo_cmd.scale, "Up-sampling factor")->capture_default_str();
    demo->add_option("--size", demo_cmd.size, "Synthetic image side length")
        ->capture_default_str();
    demo->callback([&] {
        echo_resolved_ini(&app, demo_cmd.out_dir);
        run_demo(demo_cmd, console);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
