#pragma once

#include "selfhdr/alignment.hpp"
#include "selfhdr/losses.hpp"
#include "selfhdr/metrics.hpp"
#include "selfhdr/models.hpp"
#include "selfhdr/radiometry.hpp"
#include "selfhdr/supervision.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace selfhdr {

struct TrainConfig {
    int patch_size = 128;
    int batch_size = 16;
    int epochs = 150;
    /// Passes over the training scenes per epoch.
    int epoch_repeats = 1;
    double lr0 = 1e-4;
    int lr_halving_period = 50;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    /// Random flips and transposes of training patches.
    bool augment = false;

    // Ablation switches: a disabled mask is replaced by ones.
    bool use_mask_sp = true;
    bool use_mask_se = true;
    bool use_mask_color = true;

    LossConfig loss;
    ThresholdConfig thresholds;
    RadiometryConfig radiometry;
    ModelSpec model;
    FlowEstimatorSpec flow;

    /// Full-size protocol: 128 px patches, batch 16, 150 epochs, lr 1e-4 halved every 50.
    static TrainConfig paper();
    /// Desk-scale protocol used by the test suite: 64 px patches, width-8 model, 30 epochs.
    static TrainConfig desk();

    void validate() const;
};

struct PhaseReport {
    std::string phase;
    std::vector<double> loss_curve;
    std::optional<MetricReport> validation;
    std::string checkpoint;
    double wall_time_s = 0.0;

    std::string to_json() const;
    static PhaseReport from_json(const std::string& text);
};

/// lr0 * 0.5^floor(epoch / lr_halving_period).
double lr_schedule(int epoch, const TrainConfig& cfg);

/// Uniform top-left corners of `patch` x `patch` windows.
class PatchSampler {
public:
    PatchSampler(int height, int width, int patch);
    std::pair<int, int> draw(std::mt19937_64& rng) const;

private:
    int max_y_;
    int max_x_;
};

/// Phase 1: the structure-focused network on the original (unaligned) stacks.
std::pair<Model, PhaseReport> train_structure_phase(std::span<const SceneSupervision> dataset, const TrainConfig& cfg,
                                                    std::span<const Scene> validation = {});

/// Phase 2: the reconstruction network. Every scene needs Y_stru and M_color.
std::pair<Model, PhaseReport> train_reconstruction_phase(std::span<const SceneSupervision> dataset,
                                                         const TrainConfig& cfg,
                                                         std::span<const Scene> validation = {});

/// Generates Y_stru / M_color with `structure_net`, then runs phase 2.
std::pair<Model, PhaseReport> train_reconstruction_phase(std::vector<SceneSupervision>& dataset,
                                                         const Model& structure_net, const TrainConfig& cfg,
                                                         std::span<const Scene> validation = {});

/// Single forward pass on the raw stack; no alignment at test time.
HdrImage infer(const Model& model, const std::array<ExposureImage, 3>& stack, const RadiometryConfig& cfg = {});

MetricReport evaluate_model(const Model& model, std::span<const Scene> scenes, const RadiometryConfig& cfg = {});

/// PSNR/SSIM of Y_color against ground truth; a "zero" flow spec gives the no-flow merge.
MetricReport evaluate_color_component(std::span<const Scene> scenes, const FlowEstimatorSpec& flow,
                                      const RadiometryConfig& cfg = {});

struct PipelineResult {
    Model structure_net;
    Model reconstruction_net;
    PhaseReport structure;
    PhaseReport reconstruction;
    /// On the test split: the reconstruction network, Y_color and the no-flow merge.
    MetricReport final_metrics;
    MetricReport y_color_metrics;
    MetricReport no_flow_metrics;
};

/// Supervision, both training phases and evaluation on `test` (which needs ground truth).
PipelineResult run_pipeline(std::span<const Scene> train, std::span<const Scene> test, const TrainConfig& cfg);

// --- configuration files ------------------------------------------------------

/// Flat JSON object keyed by TrainConfig field names. A "preset" key ("desk" or
/// "paper") selects the base; an object under `section` overrides the flat keys.
TrainConfig train_config_from_json(const std::string& text, const std::string& section = "");
TrainConfig load_train_config(const std::filesystem::path& path, const std::string& section = "");
std::string train_config_to_json(const TrainConfig& cfg);

} // namespace selfhdr
