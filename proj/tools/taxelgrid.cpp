// taxelgrid command-line tool: dataset synthesis, image conversion,
// cross-validation and holdout experiments, gradient checks, rendering.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "taxelgrid/taxelgrid.hpp"

namespace fs = std::filesystem;
using namespace taxelgrid;

namespace {

struct ExperimentFlags {
    std::string config_path;
    std::string dataset;
    std::string layout;
    std::string fill;
    std::string compose;
    std::string model;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    bool augment = false;
    std::size_t epochs = 0;
    std::size_t n_unknown = 0;
    std::size_t repetitions = 0;
    std::size_t threads = 0;
    std::string out = "taxelgrid-run";

    CLI::Option* k_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* augment_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* n_unknown_opt = nullptr;
    CLI::Option* repetitions_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

void add_pipeline_flags(CLI::App* cmd, std::string& layout, std::string& fill, std::string& compose) {
    cmd->add_option("--layout", layout, "Sensor layout: d1, d2, d3 or a layout file");
    cmd->add_option("--fill", fill, "Empty-pixel fill: min or mean");
    cmd->add_option("--compose", compose, "Finger composition: h, v or c");
}

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f, bool holdout) {
    cmd->add_option("--config", f.config_path, "JSON experiment config; flags override its values");
    cmd->add_option("--dataset", f.dataset, "Dataset CSV");
    add_pipeline_flags(cmd, f.layout, f.fill, f.compose);
    cmd->add_option("--model", f.model, "cnn0, cnn1, cnn2, cnn3, rf, svm or mlp");
    f.seed_opt = cmd->add_option("--seed", f.seed, "Master seed");
    f.epochs_opt = cmd->add_option("--epochs", f.epochs, "Training epochs for network models");
    f.threads_opt = cmd->add_option("--threads", f.threads, "Worker threads (default: TAXELGRID_THREADS or all cores)");
    cmd->add_option("--out", f.out, "Directory for the report and per-fold artifacts")->capture_default_str();
    if (holdout) {
        f.augment_opt = cmd->add_flag("--augment", f.augment, "Augment the training portion four-fold");
        f.n_unknown_opt = cmd->add_option("--n-unknown", f.n_unknown, "Objects held out as unknown");
        f.repetitions_opt = cmd->add_option("--repetitions", f.repetitions, "Training repetitions");
    } else {
        f.k_opt = cmd->add_option("--k", f.k, "Number of folds");
        f.augment_opt = cmd->add_flag("--augment", f.augment, "Augment each training portion four-fold");
    }
}

ExperimentConfig effective_config(const ExperimentFlags& f, Protocol protocol) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) cfg = config_from_json(read_json_file(f.config_path));
    cfg.protocol = protocol;
    if (!f.dataset.empty()) cfg.dataset = f.dataset;
    if (!f.layout.empty()) cfg.layout = f.layout;
    if (!f.fill.empty()) cfg.fill = parse_fill(f.fill);
    if (!f.compose.empty()) cfg.composition = parse_composition(f.compose);
    if (!f.model.empty()) cfg.model = parse_model_kind(f.model);
    if (f.k_opt && f.k_opt->count()) cfg.k = f.k;
    if (f.seed_opt->count()) cfg.seed = f.seed;
    if (f.augment_opt->count()) cfg.augment = f.augment;
    if (f.epochs_opt->count()) cfg.train.epochs = f.epochs;
    if (f.threads_opt->count()) cfg.threads = f.threads;
    if (f.n_unknown_opt && f.n_unknown_opt->count()) cfg.n_unknown = f.n_unknown;
    if (f.repetitions_opt && f.repetitions_opt->count()) cfg.repetitions = f.repetitions;
    if (cfg.dataset.empty()) throw Error(Errc::config_invalid, "no dataset given (use --dataset or the config file)");
    cfg.validate();
    return cfg;
}

void run_protocol(const ExperimentFlags& f, Protocol protocol) {
    const auto cfg = effective_config(f, protocol);
    const auto samples = load_dataset(cfg.dataset);
    const auto report = run_experiment(cfg, samples);
    write_report_artifacts(report, f.out);
    if (protocol == Protocol::holdout) {
        std::cout << "unknown objects:";
        for (const auto& o : report.unknown_objects) std::cout << ' ' << o;
        std::cout << "\nknown samples " << report.known_samples << ", unknown samples " << report.unknown_samples
                  << ", training samples per repetition " << report.folds.front().train_samples << "\n";
    }
    std::cout << table_row(report) << "\n";
    std::cout << "report written to " << (fs::path(f.out) / "report.json").string() << "\n";
}

// Places the channels of a multi-channel image side by side so it can be
// written as one grayscale file.
TactileImage tile_channels(const TactileImage& img) {
    if (img.channels == 1) return img;
    TactileImage out(img.rows, img.cols * img.channels, 1);
    for (std::size_t ch = 0; ch < img.channels; ++ch)
        for (std::size_t r = 0; r < img.rows; ++r)
            for (std::size_t c = 0; c < img.cols; ++c) out.at(r, ch * img.cols + c) = img.at(r, c, ch);
    return out;
}

std::string single_line(std::string s) {
    for (auto& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tactile-image grasp stability toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic grasp dataset");
    SynthConfig synth_cfg;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output CSV")->required();
    synth->add_option("--objects", synth_cfg.n_objects, "Number of objects")->capture_default_str();
    synth->add_option("--per-object", synth_cfg.samples_per_object, "Samples per object")->capture_default_str();
    synth->add_option("--separation", synth_cfg.class_separation, "Class separation (0 gives chance level)")
        ->capture_default_str();
    synth->add_option("--noise", synth_cfg.noise_std, "Per-electrode noise std")->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed, "Seed")->capture_default_str();

    // convert
    auto* convert = app.add_subcommand("convert", "Write one tactile image per dataset sample");
    std::string conv_dataset, conv_out, conv_layout = "d1", conv_fill = "mean", conv_compose = "c", conv_format = "bin";
    convert->add_option("--dataset", conv_dataset, "Dataset CSV")->required();
    convert->add_option("--out", conv_out, "Output directory")->required();
    add_pipeline_flags(convert, conv_layout, conv_fill, conv_compose);
    convert->add_option("--format", conv_format, "bin (exact doubles) or pgm (8-bit preview)")
        ->check(CLI::IsMember({"bin", "pgm"}))
        ->capture_default_str();

    // cv / holdout
    ExperimentFlags cv_flags, holdout_flags;
    auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
    add_experiment_flags(cv, cv_flags, false);
    auto* holdout = app.add_subcommand("holdout", "Unknown-object holdout experiment");
    add_experiment_flags(holdout, holdout_flags, true);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Compare backpropagation against finite differences");
    std::string gc_model = "cnn0", gc_spec;
    double gc_tol = 1e-4;
    std::uint64_t gc_seed = 0;
    bool gc_full = false;
    gradcheck->add_option("--model", gc_model, "Preset whose reduced variant is checked")->capture_default_str();
    gradcheck->add_option("--spec", gc_spec, "Model spec JSON to check instead of a preset");
    gradcheck->add_option("--tol", gc_tol, "Maximum relative error")->capture_default_str();
    gradcheck->add_option("--seed", gc_seed, "Seed")->capture_default_str();
    gradcheck->add_flag("--full", gc_full, "Check the preset at full size (small inputs only)");

    // render
    auto* render = app.add_subcommand("render", "Render a binary tactile image as PGM");
    std::string render_in, render_out;
    render->add_option("image", render_in, "Binary image file")->required();
    render->add_option("out", render_out, "Output .pgm")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "taxelgrid: " << single_line(e.what()) << "\n";
        return e.get_exit_code();
    }

    try {
        if (*synth) {
            const auto samples = generate_synthetic(synth_cfg);
            save_dataset(samples, synth_out);
            std::cout << "wrote " << samples.size() << " samples to " << synth_out << "\n";
        } else if (*convert) {
            const PipelineConfig pipeline{resolve_layout(conv_layout), parse_fill(conv_fill),
                                          parse_composition(conv_compose)};
            const auto samples = load_dataset(conv_dataset);
            fs::create_directories(conv_out);
            for (const auto& s : samples) {
                const auto img = preprocess_image(s, pipeline);
                const auto path = fs::path(conv_out) / (s.sample_id + "." + conv_format);
                if (conv_format == "pgm") write_pgm_file(tile_channels(img), path.string());
                else save_image(img, path.string());
            }
            std::cout << "wrote " << samples.size() << " images to " << conv_out << "\n";
        } else if (*cv) {
            run_protocol(cv_flags, Protocol::kfold);
        } else if (*holdout) {
            run_protocol(holdout_flags, Protocol::holdout);
        } else if (*gradcheck) {
            nn::ModelSpec spec;
            if (!gc_spec.empty()) {
                spec = nn::spec_from_json(read_json_file(gc_spec));
            } else {
                const auto kind = parse_model_kind(gc_model);
                if (!is_network(kind)) throw Error(Errc::config_invalid, gc_model + " is not a network model");
                spec = kind == ModelKind::mlp ? mlp_preset() : nn::cnn_preset(gc_model);
                if (!gc_full) spec = nn::small_variant(std::move(spec));
            }
            const auto report = nn::gradient_check(spec, gc_tol, gc_seed);
            for (const auto& e : report.entries)
                std::cout << e.name << ": max relative error " << e.max_rel_error << " (" << e.checked
                          << " checked, " << e.skipped << " skipped)\n";
            std::cout << spec.name << ": max relative error " << report.max_rel_error() << ", tolerance " << gc_tol
                      << (report.passed() ? ", PASS" : ", FAIL") << "\n";
            if (!report.passed()) {
                std::cerr << "taxelgrid: gradient check failed for " << spec.name << "\n";
                return 1;
            }
        } else if (*render) {
            write_pgm_file(tile_channels(load_image(render_in)), render_out);
            std::cout << "wrote " << render_out << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "taxelgrid: " << single_line(e.what()) << "\n";
        return e.code() == Errc::config_invalid ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "taxelgrid: " << single_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
