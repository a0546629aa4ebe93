#pragma once

#include "selfhdr/alignment.hpp"
#include "selfhdr/data.hpp"
#include "selfhdr/image.hpp"
#include "selfhdr/models.hpp"
#include "selfhdr/radiometry.hpp"

#include <filesystem>
#include <optional>

namespace selfhdr {

enum class MaskKind { binary, soft };

/// Per-pixel, per-channel supervision mask.
struct Mask {
    Image values;
    MaskKind kind = MaskKind::binary;

    static Mask ones(int height, int width, int channels = 3);
    /// Fraction of zero entries.
    double zero_fraction() const;
};

struct ThresholdConfig {
    double sigma_se = 5.0 / 255.0;
    double sigma_color = 10.0 / 255.0;

    void validate() const;
};

struct ColorComponent {
    HdrImage y_color;
    AlignedStack aligned;
};

/// Aligns frames 1 and 3 to frame 2 and merges them into Y_color.
ColorComponent build_color_component(const std::array<ExposureImage, 3>& stack, const FlowEstimator& estimator,
                                     const RadiometryConfig& cfg = {});

/// Soft mask Lambda_2(I_2).
Mask mask_sp(const ExposureImage& i2, const RadiometryConfig& cfg = {});

/// 1 where |(T(Y_color) - T(H_2)) * Lambda_2(I_2)| < sigma_se in every channel.
Mask mask_se(const HdrImage& y_color, const LinearImage& h2, const ExposureImage& i2,
             const ThresholdConfig& thresholds = {}, const RadiometryConfig& cfg = {});

/// 1 where |T(Y_color) - T(Y_stru)| < sigma_color in every channel.
Mask mask_color(const HdrImage& y_color, const HdrImage& y_stru, const ThresholdConfig& thresholds = {},
                const RadiometryConfig& cfg = {});

/// Y_stru = S(X~1, X2, X~3).
HdrImage build_structure_component(const Model& structure_net, const AlignedStack& aligned);

/// M_color * Y_color + (1 - M_color) * Y_stru.
HdrImage fuse_components_baseline(const HdrImage& y_color, const HdrImage& y_stru,
                                  const ThresholdConfig& thresholds = {}, const RadiometryConfig& cfg = {});

/// Everything the two training phases need for one scene, precomputed at full resolution.
struct SceneSupervision {
    std::string id;
    std::array<ExposureImage, 3> stack;
    HdrImage y_color;
    AlignedStack aligned;
    Mask m_sp;
    Mask m_se;
    std::optional<HdrImage> y_stru;
    std::optional<Mask> m_color;
    std::optional<HdrImage> ground_truth;
};

SceneSupervision build_scene_supervision(const Scene& scene, const FlowEstimator& estimator,
                                         const ThresholdConfig& thresholds = {}, const RadiometryConfig& cfg = {});

/// Adds Y_stru and M_color using a trained structure-focused network.
void attach_structure_component(SceneSupervision& sup, const Model& structure_net,
                                const ThresholdConfig& thresholds = {}, const RadiometryConfig& cfg = {});

/// Writes y_color.shdr, m_sp.shdr, m_se.shdr, aligned_{1,3}.shdr, flow_{1,3}.shdr
/// and, when present, y_stru.shdr and m_color.shdr. With `visualize`, also
/// 8-bit PNGs of the masks.
void save_supervision(const std::filesystem::path& dir, const SceneSupervision& sup, bool visualize = false);

/// Reads artifacts written by save_supervision; the stack comes from `scene`.
SceneSupervision load_supervision(const std::filesystem::path& dir, const Scene& scene,
                                  const RadiometryConfig& cfg = {});

} // namespace selfhdr
