#include "selfhdr/radiometry.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <cmath>

namespace selfhdr {

void RadiometryConfig::validate() const
{
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be > 0");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw InputError("mu must be > 0");
    if (!(triangle_peak > 0.0 && triangle_peak < 1.0)) {
        throw InputError("triangle_peak must lie in (0, 1)");
    }
}

void ExposureImage::validate() const
{
    if (pixels.height() < 1 || pixels.width() < 1) throw InputError("exposure image is empty");
    if (!std::isfinite(ev)) throw InputError("exposure value must be finite");
    for (double v : pixels.data()) {
        if (!std::isfinite(v)) throw InputError("exposure image has non-finite pixels");
        if (v < 0.0 || v > 1.0) throw InputError("exposure image pixels must lie in [0,1]");
    }
}

double exposure_ratio(double ev, double reference_ev)
{
    return std::exp2(ev - reference_ev);
}

LinearImage linearize(const ExposureImage& img, double reference_ev, const RadiometryConfig& cfg)
{
    img.validate();
    cfg.validate();
    const double t = exposure_ratio(img.ev, reference_ev);
    if (!(t > 0.0) || !std::isfinite(t)) throw InputError("exposure ratio must be positive");
    LinearImage out{img.pixels, reference_ev};
    for (double& v : out.pixels.data()) v = std::pow(v, cfg.gamma) / t;
    return out;
}

ExposureImage delinearize(const LinearImage& h, double target_ev, const RadiometryConfig& cfg)
{
    cfg.validate();
    if (!h.pixels.all_finite()) throw InputError("linear image has non-finite pixels");
    if (h.pixels.min_value() < 0.0) throw InputError("linear image has negative pixels");
    const double t = exposure_ratio(target_ev, h.reference_ev);
    ExposureImage out{h.pixels, target_ev, 8};
    const double inv_gamma = 1.0 / cfg.gamma;
    for (double& v : out.pixels.data()) v = std::pow(std::clamp(v * t, 0.0, 1.0), inv_gamma);
    return out;
}

double tonemap_value(double x, double mu)
{
    return std::log1p(mu * x) / std::log1p(mu);
}

double tonemap_derivative(double x, double mu)
{
    return mu / ((1.0 + mu * x) * std::log1p(mu));
}

double inverse_tonemap_value(double s, double mu)
{
    return std::expm1(s * std::log1p(mu)) / mu;
}

Image tonemap(const Image& h, const RadiometryConfig& cfg)
{
    cfg.validate();
    Image out = h;
    for (double& v : out.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("tonemap input must lie in [0,1]");
        v = tonemap_value(v, cfg.mu);
    }
    return out;
}

std::array<double, 3> triangle_lambdas(double z, double peak)
{
    if (z <= peak) {
        const double rise = z / peak;
        return {1.0, rise, rise};
    }
    const double fall = (1.0 - z) / (1.0 - peak);
    return {fall, fall, 1.0};
}

namespace {

template <typename Fn>
std::array<WeightMap, 3> per_pixel_weights(const ExposureImage& i2, const RadiometryConfig& cfg, Fn fn)
{
    i2.validate();
    cfg.validate();
    std::array<WeightMap, 3> maps;
    for (auto& m : maps) m.values = Image(i2.pixels.height(), i2.pixels.width(), i2.pixels.channels());
    const auto& src = i2.pixels.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const auto w = fn(triangle_lambdas(src[i], cfg.triangle_peak));
        for (int k = 0; k < 3; ++k) maps[k].values.data()[i] = w[k];
    }
    return maps;
}

} // namespace

std::array<WeightMap, 3> triangle_weights(const ExposureImage& i2, const RadiometryConfig& cfg)
{
    return per_pixel_weights(i2, cfg, [](const std::array<double, 3>& l) { return l; });
}

std::array<WeightMap, 3> fusion_weights(const ExposureImage& i2, const RadiometryConfig& cfg)
{
    return per_pixel_weights(i2, cfg, [](const std::array<double, 3>& l) {
        return std::array<double, 3>{1.0 - l[0], l[1], 1.0 - l[2]};
    });
}

HdrImage fuse_color(const LinearImage& h1, const LinearImage& h2, const LinearImage& h3,
                    const ExposureImage& i2, const RadiometryConfig& cfg)
{
    require_same_shape(h1.pixels, h2.pixels, "fuse_color(h1, h2)");
    require_same_shape(h3.pixels, h2.pixels, "fuse_color(h3, h2)");
    require_same_shape(i2.pixels, h2.pixels, "fuse_color(i2, h2)");
    const auto a = fusion_weights(i2, cfg);

    HdrImage out{Image(h2.pixels.height(), h2.pixels.width(), h2.pixels.channels()),
                 HdrRole::color_component};
    auto& dst = out.pixels.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double w1 = a[0].values.data()[i];
        const double w2 = a[1].values.data()[i];
        const double w3 = a[2].values.data()[i];
        const double num = w1 * h1.pixels.data()[i] + w2 * h2.pixels.data()[i] + w3 * h3.pixels.data()[i];
        dst[i] = std::clamp(num / (w1 + w2 + w3), 0.0, 1.0);
    }
    return out;
}

} // namespace selfhdr
