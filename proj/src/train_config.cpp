#include "selfhdr/training.hpp"

#include "selfhdr/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace selfhdr {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out)
{
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(std::string("config key '") + key + "': " + e.what());
    }
}

void apply_keys(const json& j, TrainConfig& cfg)
{
    if (!j.is_object()) throw InputError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (value.is_object()) continue; // command section
        const char* k = key.c_str();
        if (key == "preset") continue;
        else if (key == "patch_size") read_field(j, k, cfg.patch_size);
        else if (key == "batch_size") read_field(j, k, cfg.batch_size);
        else if (key == "epochs") read_field(j, k, cfg.epochs);
        else if (key == "epoch_repeats") read_field(j, k, cfg.epoch_repeats);
        else if (key == "lr0") read_field(j, k, cfg.lr0);
        else if (key == "lr_halving_period") read_field(j, k, cfg.lr_halving_period);
        else if (key == "beta1") read_field(j, k, cfg.beta1);
        else if (key == "beta2") read_field(j, k, cfg.beta2);
        else if (key == "adam_eps") read_field(j, k, cfg.adam_eps);
        else if (key == "seed") read_field(j, k, cfg.seed);
        else if (key == "augment") read_field(j, k, cfg.augment);
        else if (key == "use_mask_sp") read_field(j, k, cfg.use_mask_sp);
        else if (key == "use_mask_se") read_field(j, k, cfg.use_mask_se);
        else if (key == "use_mask_color") read_field(j, k, cfg.use_mask_color);
        else if (key == "lambda_sp") read_field(j, k, cfg.loss.lambda_sp);
        else if (key == "lambda_stru") read_field(j, k, cfg.loss.lambda_stru);
        else if (key == "perceptual_layers") read_field(j, k, cfg.loss.perceptual_layers);
        else if (key == "perceptual_seed") read_field(j, k, cfg.loss.perceptual_seed);
        else if (key == "sigma_se") read_field(j, k, cfg.thresholds.sigma_se);
        else if (key == "sigma_color") read_field(j, k, cfg.thresholds.sigma_color);
        else if (key == "gamma") read_field(j, k, cfg.radiometry.gamma);
        else if (key == "mu") read_field(j, k, cfg.radiometry.mu);
        else if (key == "triangle_peak") read_field(j, k, cfg.radiometry.triangle_peak);
        else if (key == "architecture") read_field(j, k, cfg.model.architecture);
        else if (key == "model_width") read_field(j, k, cfg.model.width);
        else if (key == "model_blocks") read_field(j, k, cfg.model.blocks);
        else if (key == "model_attention") read_field(j, k, cfg.model.attention);
        else if (key == "model_reference_skip") read_field(j, k, cfg.model.reference_skip);
        else if (key == "output_mu") read_field(j, k, cfg.model.output_mu);
        else if (key == "flow_algorithm") read_field(j, k, cfg.flow.algorithm);
        else if (key == "flow_levels") read_field(j, k, cfg.flow.levels);
        else if (key == "flow_iterations") read_field(j, k, cfg.flow.iterations);
        else if (key == "flow_smoothness") read_field(j, k, cfg.flow.smoothness);
        else if (key == "flow_window_radius") read_field(j, k, cfg.flow.window_radius);
        else throw InputError("unknown config key '" + key + "'");
    }
}

} // namespace

TrainConfig train_config_from_json(const std::string& text, const std::string& section)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InputError("config must be a JSON object");

    TrainConfig cfg = TrainConfig::desk();
    if (j.contains("preset")) {
        const auto preset = j["preset"].is_string() ? j["preset"].get<std::string>() : "";
        if (preset == "desk") cfg = TrainConfig::desk();
        else if (preset == "paper") cfg = TrainConfig::paper();
        else throw InputError("preset must be \"desk\" or \"paper\"");
    }
    apply_keys(j, cfg);
    if (!section.empty() && j.contains(section)) apply_keys(j[section], cfg);
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path, const std::string& section)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return train_config_from_json(ss.str(), section);
}

std::string train_config_to_json(const TrainConfig& cfg)
{
    json j;
    j["patch_size"] = cfg.patch_size;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["epoch_repeats"] = cfg.epoch_repeats;
    j["lr0"] = cfg.lr0;
    j["lr_halving_period"] = cfg.lr_halving_period;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["adam_eps"] = cfg.adam_eps;
    j["seed"] = cfg.seed;
    j["augment"] = cfg.augment;
    j["use_mask_sp"] = cfg.use_mask_sp;
    j["use_mask_se"] = cfg.use_mask_se;
    j["use_mask_color"] = cfg.use_mask_color;
    j["lambda_sp"] = cfg.loss.lambda_sp;
    j["lambda_stru"] = cfg.loss.lambda_stru;
    j["perceptual_layers"] = cfg.loss.perceptual_layers;
    j["perceptual_seed"] = cfg.loss.perceptual_seed;
    j["sigma_se"] = cfg.thresholds.sigma_se;
    j["sigma_color"] = cfg.thresholds.sigma_color;
    j["gamma"] = cfg.radiometry.gamma;
    j["mu"] = cfg.radiometry.mu;
    j["triangle_peak"] = cfg.radiometry.triangle_peak;
    j["architecture"] = cfg.model.architecture;
    j["model_width"] = cfg.model.width;
    j["model_blocks"] = cfg.model.blocks;
    j["model_attention"] = cfg.model.attention;
    j["model_reference_skip"] = cfg.model.reference_skip;
    j["output_mu"] = cfg.model.output_mu;
    j["flow_algorithm"] = cfg.flow.algorithm;
    j["flow_levels"] = cfg.flow.levels;
    j["flow_iterations"] = cfg.flow.iterations;
    j["flow_smoothness"] = cfg.flow.smoothness;
    j["flow_window_radius"] = cfg.flow.window_radius;
    return j.dump(2);
}

std::string PhaseReport::to_json() const
{
    json j;
    j["phase"] = phase;
    j["loss_curve"] = loss_curve;
    j["validation"] = validation ? json::parse(validation->to_json()) : json(nullptr);
    j["checkpoint"] = checkpoint;
    j["wall_time_s"] = wall_time_s;
    return j.dump(2);
}

PhaseReport PhaseReport::from_json(const std::string& text)
{
    try {
        const json j = json::parse(text);
        PhaseReport r;
        r.phase = j.at("phase").get<std::string>();
        r.loss_curve = j.at("loss_curve").get<std::vector<double>>();
        if (j.contains("validation") && !j["validation"].is_null())
            r.validation = MetricReport::from_json(j["validation"].dump());
        r.checkpoint = j.value("checkpoint", "");
        r.wall_time_s = j.value("wall_time_s", 0.0);
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed phase report: ") + e.what());
    }
}

} // namespace selfhdr
