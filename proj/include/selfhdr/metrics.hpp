#pragma once

#include "selfhdr/image.hpp"
#include "selfhdr/radiometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace selfhdr {

/// PSNR in dB for data range `data_range`; +infinity when the images are identical.
double psnr(const Image& a, const Image& b, double data_range = 1.0);
/// PSNR after mu-law tone mapping of both inputs.
double psnr_u(const Image& a, const Image& b, const RadiometryConfig& cfg = {});
double psnr_l(const Image& a, const Image& b);

/// Mean SSIM of the channel-mean grayscale images (11x11 Gaussian window,
/// sigma 1.5, K1 = 0.01, K2 = 0.03, data range 1, valid windows only).
double ssim(const Image& a, const Image& b);
double ssim_u(const Image& a, const Image& b, const RadiometryConfig& cfg = {});

struct SceneMetrics {
    std::string id;
    double psnr_l = 0.0;
    double psnr_u = 0.0;
    double ssim_l = 0.0;
    double ssim_u = 0.0;
};

SceneMetrics evaluate_scene(const std::string& id, const Image& prediction, const Image& ground_truth,
                            const RadiometryConfig& cfg = {});

struct MetricReport {
    std::vector<SceneMetrics> scenes;
    SceneMetrics mean;
    /// Reserved; HDR-VDP-2 needs an external model and is never computed here.
    std::optional<double> hdr_vdp2;

    static MetricReport from_scenes(std::vector<SceneMetrics> scenes);
    std::string to_json() const;
    static MetricReport from_json(const std::string& text);
    /// "name | PSNR-u | SSIM-u | PSNR-l | SSIM-l" in the usual table layout.
    std::string table_row(const std::string& name) const;
};

} // namespace selfhdr
