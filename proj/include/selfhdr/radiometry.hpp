#pragma once

#include "selfhdr/image.hpp"

#include <array>

namespace selfhdr {

/// Gamma and mu-law constants shared by every radiometric transform.
struct RadiometryConfig {
    double gamma = 2.2;
    double mu = 5000.0;
    /// Pixel value at which the triangle blending weights switch ramps.
    double triangle_peak = 0.5;

    void validate() const;
};

/// An LDR frame with values in [0,1] and its exposure value in stops.
struct ExposureImage {
    Image pixels;
    double ev = 0.0;
    int bit_depth = 8;

    void validate() const;
};

/// Linear radiance, normalized so that the frame at `reference_ev` has t = 1.
struct LinearImage {
    Image pixels;
    double reference_ev = 0.0;
};

enum class HdrRole { color_component, structure_component, prediction, ground_truth };

/// Linear HDR radiance in the normalized [0,1] domain.
struct HdrImage {
    Image pixels;
    HdrRole role = HdrRole::prediction;
};

struct WeightMap {
    Image values;
};

/// Exposure time ratio of a frame relative to the reference, 2^(ev - reference_ev).
double exposure_ratio(double ev, double reference_ev);

LinearImage linearize(const ExposureImage& img, double reference_ev, const RadiometryConfig& cfg);

ExposureImage delinearize(const LinearImage& h, double target_ev, const RadiometryConfig& cfg);

/// Scalar mu-law: log(1 + mu x) / log(1 + mu).
double tonemap_value(double x, double mu);
/// Derivative of tonemap_value with respect to x.
double tonemap_derivative(double x, double mu);
/// Inverse of tonemap_value: ((1 + mu)^s - 1) / mu.
double inverse_tonemap_value(double s, double mu);

/// Elementwise mu-law tone mapping. Pixels outside [0,1] are rejected.
Image tonemap(const Image& h, const RadiometryConfig& cfg);

/// Lambda_1..3 evaluated at one pixel value.
std::array<double, 3> triangle_lambdas(double z, double peak = 0.5);

/// Lambda_1, Lambda_2, Lambda_3 over the reference frame, per channel.
std::array<WeightMap, 3> triangle_weights(const ExposureImage& i2, const RadiometryConfig& cfg = {});

/// Fusion weights A_1 = 1 - Lambda_1, A_2 = Lambda_2, A_3 = 1 - Lambda_3.
std::array<WeightMap, 3> fusion_weights(const ExposureImage& i2, const RadiometryConfig& cfg = {});

/// Weighted merge of aligned linear frames, clipped to [0,1].
HdrImage fuse_color(const LinearImage& h1, const LinearImage& h2, const LinearImage& h3,
                    const ExposureImage& i2, const RadiometryConfig& cfg = {});

} // namespace selfhdr
