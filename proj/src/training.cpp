#include "selfhdr/training.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace selfhdr {

TrainConfig TrainConfig::paper()
{
    TrainConfig cfg;
    cfg.model.width = 64;
    cfg.model.blocks = 3;
    return cfg;
}

TrainConfig TrainConfig::desk()
{
    TrainConfig cfg;
    cfg.patch_size = 64;
    cfg.batch_size = 4;
    cfg.epochs = 30;
    cfg.epoch_repeats = 4;
    cfg.lr0 = 1e-3;
    cfg.lr_halving_period = 10;
    cfg.model.width = 8;
    cfg.model.blocks = 2;
    return cfg;
}

void TrainConfig::validate() const
{
    if (patch_size <= 0 || batch_size <= 0 || epochs <= 0 || epoch_repeats <= 0 || lr_halving_period <= 0)
        throw InputError("patch_size, batch_size, epochs, epoch_repeats and lr_halving_period must be positive");
    if (!(lr0 > 0.0)) throw InputError("lr0 must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw InputError("Adam betas must be in [0,1)");
    if (!(adam_eps > 0.0)) throw InputError("adam_eps must be positive");
    loss.validate();
    thresholds.validate();
    radiometry.validate();
    model.validate();
    flow.validate();
}

double lr_schedule(int epoch, const TrainConfig& cfg)
{
    if (epoch < 0 || epoch >= cfg.epochs) throw InputError("epoch out of range");
    return cfg.lr0 * std::pow(0.5, epoch / cfg.lr_halving_period);
}

PatchSampler::PatchSampler(int height, int width, int patch) : max_y_(height - patch), max_x_(width - patch)
{
    if (patch <= 0) throw InputError("patch size must be positive");
    if (max_y_ < 0 || max_x_ < 0) throw InputError("patch size exceeds image size");
}

std::pair<int, int> PatchSampler::draw(std::mt19937_64& rng) const
{
    std::uniform_int_distribution<int> dy(0, max_y_);
    std::uniform_int_distribution<int> dx(0, max_x_);
    const int y = dy(rng);
    const int x = dx(rng);
    return {y, x};
}

namespace {

using Clock = std::chrono::steady_clock;

// One of the eight flips / transposes of a square patch, applied identically
// to inputs, targets and masks.
Image dihedral(const Image& img, int op)
{
    if (op == 0) return img;
    const bool transpose = (op & 4) != 0;
    const bool flip_y = (op & 2) != 0;
    const bool flip_x = (op & 1) != 0;
    const int h = transpose ? img.width() : img.height();
    const int w = transpose ? img.height() : img.width();
    Image out(h, w, img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                int sy = flip_y ? h - 1 - y : y;
                int sx = flip_x ? w - 1 - x : x;
                if (transpose) std::swap(sy, sx);
                out.at(c, y, x) = img.at(c, sy, sx);
            }
        }
    }
    return out;
}

NetworkInput dihedral(const NetworkInput& in, int op)
{
    NetworkInput out;
    for (int i = 0; i < 3; ++i) out.frames[i] = dihedral(in.frames[i], op);
    return out;
}

// A training sample: network input plus the images the objective needs, all
// at full resolution.
struct Sample {
    NetworkInput input;
    std::vector<Image> targets;
};

struct Crop {
    NetworkInput input;
    std::vector<Image> targets;
};

Crop crop_sample(const Sample& s, int y0, int x0, int patch, int op)
{
    Crop out;
    out.input = dihedral(s.input.crop(y0, x0, patch, patch), op);
    out.targets.reserve(s.targets.size());
    for (const auto& t : s.targets) out.targets.push_back(dihedral(t.crop(y0, x0, patch, patch), op));
    return out;
}

template <typename Objective>
PhaseReport run_phase(Model& model, const std::vector<Sample>& samples, const TrainConfig& cfg,
                      std::uint64_t stream, Objective objective)
{
    if (samples.empty()) throw InputError("training set is empty");
    PhaseReport report;
    const auto start = Clock::now();

    nn::Adam opt(model.parameters(), cfg.beta1, cfg.beta2, cfg.adam_eps);
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + stream);
    std::uniform_int_distribution<int> op_dist(0, 7);

    std::vector<std::size_t> order(samples.size() * static_cast<std::size_t>(cfg.epoch_repeats));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i % samples.size();
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
            const double scale = 1.0 / static_cast<double>(b1 - b0);
            model.zero_grad();
            for (std::size_t k = b0; k < b1; ++k) {
                const Sample& s = samples[order[k]];
                const PatchSampler sampler(s.input.height(), s.input.width(), cfg.patch_size);
                const auto [y0, x0] = sampler.draw(rng);
                const int op = cfg.augment ? op_dist(rng) : 0;
                const Crop crop = crop_sample(s, y0, x0, cfg.patch_size, op);

                Model::Trace trace;
                const Image y_hat = model.forward(crop.input, trace);
                LossValue loss = objective(y_hat, crop.targets);
                if (!std::isfinite(loss.value)) throw NumericError("training loss is not finite");
                for (double& g : loss.grad.data()) g *= scale;
                model.backward(trace, loss.grad);
                epoch_loss += loss.value;
            }
            opt.step(lr);
        }
        report.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    for (const auto* p : std::as_const(model).parameters()) {
        for (double v : p->value)
            if (!std::isfinite(v)) throw NumericError("model parameters diverged");
    }
    report.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    return report;
}

Image mask_or_ones(const Mask& m, bool enabled)
{
    return enabled ? m.values : Image(m.values.height(), m.values.width(), m.values.channels(), 1.0);
}

void check_patch(const SceneSupervision& s, const TrainConfig& cfg)
{
    const int h = s.stack[1].pixels.height();
    const int w = s.stack[1].pixels.width();
    if (cfg.patch_size > std::min(h, w))
        throw InputError("patch_size " + std::to_string(cfg.patch_size) + " exceeds scene " + s.id);
}

ModelSpec seeded(ModelSpec spec, const TrainConfig& cfg, std::uint64_t stream)
{
    spec.seed = cfg.seed * 2 + stream;
    return spec;
}

} // namespace

std::pair<Model, PhaseReport> train_structure_phase(std::span<const SceneSupervision> dataset, const TrainConfig& cfg,
                                                    std::span<const Scene> validation)
{
    cfg.validate();
    std::vector<Sample> samples;
    for (const auto& s : dataset) {
        if (s.y_color.pixels.empty() || s.m_se.values.empty() || s.m_sp.values.empty() ||
            s.aligned.linear[1].pixels.empty())
            throw DataError("scene " + s.id + " is missing Y_color, M_se or M_sp");
        check_patch(s, cfg);
        Sample sample;
        sample.input = NetworkInput::from_stack(s.stack, cfg.radiometry);
        sample.targets = {s.y_color.pixels, s.aligned.linear[1].pixels, mask_or_ones(s.m_se, cfg.use_mask_se),
                          mask_or_ones(s.m_sp, cfg.use_mask_sp)};
        samples.push_back(std::move(sample));
    }

    Model model(seeded(cfg.model, cfg, 0));
    PhaseReport report = run_phase(model, samples, cfg, 1, [&](const Image& y_hat, const std::vector<Image>& t) {
        return objective_structure(y_hat, t[0], t[1], t[2], t[3], cfg.loss, cfg.radiometry);
    });
    report.phase = "structure";
    if (!validation.empty()) report.validation = evaluate_model(model, validation, cfg.radiometry);
    return {std::move(model), std::move(report)};
}

std::pair<Model, PhaseReport> train_reconstruction_phase(std::span<const SceneSupervision> dataset,
                                                         const TrainConfig& cfg, std::span<const Scene> validation)
{
    cfg.validate();
    std::vector<Sample> samples;
    for (const auto& s : dataset) {
        if (s.y_color.pixels.empty()) throw DataError("scene " + s.id + " is missing Y_color");
        if (!s.y_stru || !s.m_color)
            throw DataError("scene " + s.id + " is missing Y_stru / M_color; train the structure phase first");
        check_patch(s, cfg);
        Sample sample;
        sample.input = NetworkInput::from_stack(s.stack, cfg.radiometry);
        sample.targets = {s.y_color.pixels, s.y_stru->pixels, mask_or_ones(*s.m_color, cfg.use_mask_color)};
        samples.push_back(std::move(sample));
    }

    const PerceptualExtractor extractor = PerceptualExtractor::random(cfg.loss.perceptual_seed);
    Model model(seeded(cfg.model, cfg, 1));
    PhaseReport report = run_phase(model, samples, cfg, 2, [&](const Image& y_hat, const std::vector<Image>& t) {
        return objective_reconstruction(y_hat, t[0], t[1], t[2], extractor, cfg.loss, cfg.radiometry);
    });
    report.phase = "reconstruction";
    if (!validation.empty()) report.validation = evaluate_model(model, validation, cfg.radiometry);
    return {std::move(model), std::move(report)};
}

std::pair<Model, PhaseReport> train_reconstruction_phase(std::vector<SceneSupervision>& dataset,
                                                         const Model& structure_net, const TrainConfig& cfg,
                                                         std::span<const Scene> validation)
{
    for (auto& s : dataset) attach_structure_component(s, structure_net, cfg.thresholds, cfg.radiometry);
    return train_reconstruction_phase(std::span<const SceneSupervision>(dataset), cfg, validation);
}

HdrImage infer(const Model& model, const std::array<ExposureImage, 3>& stack, const RadiometryConfig& cfg)
{
    const NetworkInput x = NetworkInput::from_stack(stack, cfg);
    return HdrImage{model.forward(x), HdrRole::prediction};
}

MetricReport evaluate_model(const Model& model, std::span<const Scene> scenes, const RadiometryConfig& cfg)
{
    std::vector<SceneMetrics> rows;
    for (const auto& scene : scenes) {
        if (!scene.ground_truth) throw DataError("scene " + scene.id + " has no ground truth");
        const HdrImage pred = infer(model, scene.frames, cfg);
        rows.push_back(evaluate_scene(scene.id, pred.pixels, scene.ground_truth->pixels, cfg));
    }
    return MetricReport::from_scenes(std::move(rows));
}

MetricReport evaluate_color_component(std::span<const Scene> scenes, const FlowEstimatorSpec& flow,
                                      const RadiometryConfig& cfg)
{
    const auto estimator = make_flow_estimator(flow);
    std::vector<SceneMetrics> rows;
    for (const auto& scene : scenes) {
        if (!scene.ground_truth) throw DataError("scene " + scene.id + " has no ground truth");
        const ColorComponent cc = build_color_component(scene.frames, *estimator, cfg);
        rows.push_back(evaluate_scene(scene.id, cc.y_color.pixels, scene.ground_truth->pixels, cfg));
    }
    return MetricReport::from_scenes(std::move(rows));
}

PipelineResult run_pipeline(std::span<const Scene> train, std::span<const Scene> test, const TrainConfig& cfg)
{
    cfg.validate();
    const auto estimator = make_flow_estimator(cfg.flow);
    std::vector<SceneSupervision> dataset;
    dataset.reserve(train.size());
    for (const auto& scene : train)
        dataset.push_back(build_scene_supervision(scene, *estimator, cfg.thresholds, cfg.radiometry));

    auto [s_net, s_report] = train_structure_phase(dataset, cfg, test);
    auto [r_net, r_report] = train_reconstruction_phase(dataset, s_net, cfg, test);

    PipelineResult out{std::move(s_net), std::move(r_net), std::move(s_report), std::move(r_report), {}, {}, {}};
    if (!test.empty()) {
        out.final_metrics = evaluate_model(out.reconstruction_net, test, cfg.radiometry);
        out.y_color_metrics = evaluate_color_component(test, cfg.flow, cfg.radiometry);
        FlowEstimatorSpec none = cfg.flow;
        none.algorithm = "zero";
        out.no_flow_metrics = evaluate_color_component(test, none, cfg.radiometry);
    }
    return out;
}

} // namespace selfhdr
