#pragma once

#include "selfhdr/image.hpp"
#include "selfhdr/nn.hpp"
#include "selfhdr/radiometry.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace selfhdr {

struct LossConfig {
    double lambda_sp = 4.0;
    double lambda_stru = 1.0;
    /// Which extractor taps (0, 1, 2) contribute to the perceptual term.
    std::vector<int> perceptual_layers{0, 1, 2};
    std::uint64_t perceptual_seed = 1234;

    void validate() const;
};

/// Scalar loss and its gradient with respect to the prediction.
struct LossValue {
    double value = 0.0;
    Image grad;
};

/// Frozen three-scale convolutional feature pyramid. Each tap is the output of
/// conv3x3 + ReLU, with 2x2 average pooling between scales.
class PerceptualExtractor {
public:
    /// Deterministic random weights drawn from `seed`.
    static PerceptualExtractor random(std::uint64_t seed);
    /// Weights stored with save(); layer shapes must match.
    static PerceptualExtractor load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    static constexpr int kTaps = 3;

    struct Trace {
        std::vector<Image> inputs;
        std::vector<Image> pre;
        std::vector<Image> taps;
    };

    std::vector<Image> features(const Image& x) const;
    std::vector<Image> features(const Image& x, Trace& trace) const;
    /// Gradient w.r.t. the input for per-tap output gradients (empty image = zero).
    Image backward(const Trace& trace, const std::vector<Image>& tap_grads) const;

    std::uint64_t parameter_hash() const;

private:
    PerceptualExtractor();
    std::vector<nn::Conv2d> convs_;
};

/// mean |(T(y_hat) - T(target)) * mask| over every element; y_hat clipped to [0,1] first.
LossValue masked_tonemapped_l1(const Image& y_hat, const Image& target, const Image& mask, const RadiometryConfig& cfg);

LossValue loss_sp(const Image& y_hat, const Image& h2, const Image& m_sp, const RadiometryConfig& cfg = {});
LossValue loss_se(const Image& y_hat, const Image& y_color, const Image& m_se, const RadiometryConfig& cfg = {});
LossValue loss_color(const Image& y_hat, const Image& y_color, const Image& m_color, const RadiometryConfig& cfg = {});

/// Sum over taps of mean |phi_k(T(y_hat)) - phi_k(T(y_stru))|.
LossValue loss_stru(const Image& y_hat, const Image& y_stru, const PerceptualExtractor& extractor,
                    const LossConfig& loss_cfg = {}, const RadiometryConfig& cfg = {});

/// loss_se + lambda_sp * loss_sp.
LossValue objective_structure(const Image& y_hat, const Image& y_color, const Image& h2, const Image& m_se,
                              const Image& m_sp, const LossConfig& loss_cfg = {}, const RadiometryConfig& cfg = {});

/// loss_color + lambda_stru * loss_stru.
LossValue objective_reconstruction(const Image& y_hat, const Image& y_color, const Image& y_stru,
                                   const Image& m_color, const PerceptualExtractor& extractor,
                                   const LossConfig& loss_cfg = {}, const RadiometryConfig& cfg = {});

} // namespace selfhdr
