#include "selfhdr/data.hpp"
#include "selfhdr/error.hpp"
#include "selfhdr/metrics.hpp"
#include "selfhdr/models.hpp"
#include "selfhdr/supervision.hpp"
#include "selfhdr/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace selfhdr;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct ConfigFlags {
    std::string path;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
};

TrainConfig resolve_config(const ConfigFlags& flags, const std::string& section)
{
    TrainConfig cfg = flags.path.empty() ? TrainConfig::desk() : load_train_config(flags.path, section);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.epochs) cfg.epochs = *flags.epochs;
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out || !(out << text << '\n')) throw DataError("cannot write " + path.string());
}

std::vector<fs::path> require_scenes(const fs::path& root)
{
    if (!fs::is_directory(root)) throw DataError("data directory not found: " + root.string());
    auto dirs = list_scene_dirs(root);
    if (dirs.empty()) throw DataError("no scenes under " + root.string());
    return dirs;
}

void make_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
    std::string out;
    int scenes = 1;
    int size = 64;
    std::string motion = "rect";
    double max_displacement = 5.0;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a)
{
    if (a.scenes <= 0 || a.size < 16) throw InputError("--scenes must be positive and --size at least 16");
    const MotionKind kind = parse_motion_kind(a.motion);
    make_dir(a.out);
    for (int i = 0; i < a.scenes; ++i) {
        const auto spec = random_synthetic_spec(kind, a.size, a.max_displacement, a.seed * 1000003ULL + i);
        Scene scene = synthesize_scene(spec);
        char name[32];
        std::snprintf(name, sizeof name, "scene_%03d", i);
        scene.id = name;
        save_scene(fs::path(a.out) / name, scene);
        std::cout << (fs::path(a.out) / name).string() << '\n';
    }
    return kOk;
}

// --- build-supervision ---------------------------------------------------

struct SupervisionArgs {
    std::string data;
    std::string out;
    ConfigFlags config;
    std::string with_structure;
    bool viz = false;
};

int cmd_build_supervision(const SupervisionArgs& a)
{
    const TrainConfig cfg = resolve_config(a.config, "build-supervision");
    const auto dirs = require_scenes(a.data);
    std::optional<Model> structure;
    if (!a.with_structure.empty()) structure = load_params(a.with_structure, cfg.model);
    const auto estimator = make_flow_estimator(cfg.flow);
    make_dir(a.out);
    for (const auto& dir : dirs) {
        const Scene scene = load_scene(dir);
        SceneSupervision sup = build_scene_supervision(scene, *estimator, cfg.thresholds, cfg.radiometry);
        if (structure) attach_structure_component(sup, *structure, cfg.thresholds, cfg.radiometry);
        const fs::path target = fs::path(a.out) / dir.filename();
        save_supervision(target, sup, a.viz);
        std::cout << target.string() << '\n';
    }
    return kOk;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
    std::string phase;
    std::string data;
    std::string supervision;
    std::string validation;
    ConfigFlags config;
    std::string out;
    std::string report;
};

int cmd_train(const TrainArgs& a)
{
    const TrainConfig cfg = resolve_config(a.config, "train");
    const auto dirs = require_scenes(a.data);
    std::vector<SceneSupervision> dataset;
    for (const auto& dir : dirs) {
        const fs::path sup_dir = fs::path(a.supervision) / dir.filename();
        if (!fs::is_directory(sup_dir)) throw DataError("no supervision artifacts for " + dir.filename().string());
        dataset.push_back(load_supervision(sup_dir, load_scene(dir), cfg.radiometry));
    }
    std::vector<Scene> validation;
    if (!a.validation.empty()) {
        for (const auto& dir : require_scenes(a.validation)) validation.push_back(load_scene(dir));
    }

    auto [model, report] = a.phase == "structure" ? train_structure_phase(dataset, cfg, validation)
                                                  : train_reconstruction_phase(dataset, cfg, validation);
    const fs::path ckpt(a.out);
    if (ckpt.has_parent_path()) make_dir(ckpt.parent_path());
    save_params(model, ckpt);
    report.checkpoint = ckpt.string();
    const fs::path report_path = a.report.empty() ? fs::path(ckpt.string() + ".json") : fs::path(a.report);
    write_text(report_path, report.to_json());
    std::cout << ckpt.string() << '\n' << report_path.string() << '\n';
    return kOk;
}

// --- infer ---------------------------------------------------------------

struct InferArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    ConfigFlags config;
};

int cmd_infer(const InferArgs& a)
{
    const TrainConfig cfg = resolve_config(a.config, "infer");
    const Model model = a.config.path.empty() ? load_params(a.checkpoint) : load_params(a.checkpoint, cfg.model);
    const auto dirs = require_scenes(a.data);
    make_dir(a.out);
    for (const auto& dir : dirs) {
        const Scene scene = load_scene(dir);
        const HdrImage pred = infer(model, scene.frames, cfg.radiometry);
        const fs::path base = fs::path(a.out) / dir.filename();
        save_hdr_native(base.string() + ".shdr", pred.pixels);
        write_png8(base.string() + ".png", tonemap(clamp(pred.pixels, 0.0, 1.0), cfg.radiometry));
        std::cout << base.string() << ".shdr\n";
    }
    return kOk;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string predictions;
    std::string data;
    std::string out;
    std::string name = "SelfHDR";
    ConfigFlags config;
};

int cmd_eval(const EvalArgs& a)
{
    const TrainConfig cfg = resolve_config(a.config, "eval");
    const auto dirs = require_scenes(a.data);
    std::vector<SceneMetrics> rows;
    for (const auto& dir : dirs) {
        const Scene scene = load_scene(dir);
        if (!scene.ground_truth) throw DataError("scene " + dir.filename().string() + " has no ground truth");
        const fs::path pred_path = fs::path(a.predictions) / (dir.filename().string() + ".shdr");
        if (!fs::exists(pred_path)) throw DataError("missing prediction " + pred_path.string());
        const Image pred = load_hdr_native(pred_path);
        rows.push_back(evaluate_scene(dir.filename().string(), pred, scene.ground_truth->pixels, cfg.radiometry));
    }
    const MetricReport report = MetricReport::from_scenes(std::move(rows));
    if (!a.out.empty()) write_text(a.out, report.to_json());
    std::cout << report.table_row(a.name) << '\n';
    return kOk;
}

void add_config_flags(CLI::App* cmd, ConfigFlags& flags)
{
    cmd->add_option("--config", flags.path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", flags.seed, "Override the config seed");
    cmd->add_option("--epochs", flags.epochs, "Override the config epoch count");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Self-supervised HDR reconstruction from dynamic multi-exposure stacks"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Render synthetic scenes with ground truth");
    c_synth->add_option("--out", synth.out, "Output directory")->required();
    c_synth->add_option("--scenes", synth.scenes, "Number of scenes");
    c_synth->add_option("--size", synth.size, "Image height and width");
    c_synth->add_option("--motion", synth.motion, "none | shift | rect");
    c_synth->add_option("--max-displacement", synth.max_displacement, "Largest displacement in pixels");
    c_synth->add_option("--seed", synth.seed, "Random seed");

    SupervisionArgs sup;
    auto* c_sup = app.add_subcommand("build-supervision", "Build Y_color, masks and aligned stacks");
    c_sup->add_option("--data", sup.data, "Scene root")->required();
    c_sup->add_option("--out", sup.out, "Output directory")->required();
    c_sup->add_option("--with-structure", sup.with_structure, "Structure checkpoint; adds Y_stru and M_color")
        ->check(CLI::ExistingFile);
    c_sup->add_flag("--viz", sup.viz, "Also write mask PNGs");
    add_config_flags(c_sup, sup.config);

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "Train the structure or reconstruction network");
    c_train->add_option("--phase", train.phase, "structure | recon")
        ->required()
        ->check(CLI::IsMember({"structure", "recon"}));
    c_train->add_option("--data", train.data, "Scene root")->required();
    c_train->add_option("--supervision", train.supervision, "Supervision root")->required();
    c_train->add_option("--validation", train.validation, "Held-out scene root with ground truth");
    c_train->add_option("--out", train.out, "Checkpoint path")->required();
    c_train->add_option("--report", train.report, "Phase report path (default: <out>.json)");
    add_config_flags(c_train, train.config);

    InferArgs inf;
    auto* c_infer = app.add_subcommand("infer", "Run a reconstruction checkpoint on raw stacks");
    c_infer->add_option("--checkpoint", inf.checkpoint, "Checkpoint")->required();
    c_infer->add_option("--data", inf.data, "Scene root")->required();
    c_infer->add_option("--out", inf.out, "Output directory")->required();
    add_config_flags(c_infer, inf.config);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Score predictions against ground truth");
    c_eval->add_option("--pred", ev.predictions, "Directory of <scene>.shdr predictions")->required();
    c_eval->add_option("--data", ev.data, "Scene root")->required();
    c_eval->add_option("--out", ev.out, "Metric report JSON path");
    c_eval->add_option("--name", ev.name, "Row label");
    add_config_flags(c_eval, ev.config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (c_synth->parsed()) return cmd_synth(synth);
        if (c_sup->parsed()) return cmd_build_supervision(sup);
        if (c_train->parsed()) return cmd_train(train);
        if (c_infer->parsed()) return cmd_infer(inf);
        if (c_eval->parsed()) return cmd_eval(ev);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const InputError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
