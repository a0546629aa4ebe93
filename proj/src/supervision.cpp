#include "selfhdr/supervision.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <cmath>

namespace selfhdr {

namespace fs = std::filesystem;

Mask Mask::ones(int height, int width, int channels)
{
    return Mask{Image(height, width, channels, 1.0), MaskKind::binary};
}

double Mask::zero_fraction() const
{
    if (values.empty()) return 0.0;
    const auto zeros = std::count(values.data().begin(), values.data().end(), 0.0);
    return static_cast<double>(zeros) / static_cast<double>(values.size());
}

void ThresholdConfig::validate() const
{
    if (!(sigma_se > 0.0) || !(sigma_color > 0.0)) throw InputError("mask thresholds must be > 0");
}

ColorComponent build_color_component(const std::array<ExposureImage, 3>& stack, const FlowEstimator& estimator,
                                     const RadiometryConfig& cfg)
{
    ColorComponent out;
    out.aligned = align_stack(stack, estimator, cfg);
    out.y_color = fuse_color(out.aligned.linear[0], out.aligned.linear[1], out.aligned.linear[2], stack[1], cfg);
    return out;
}

Mask mask_sp(const ExposureImage& i2, const RadiometryConfig& cfg)
{
    auto lambdas = triangle_weights(i2, cfg);
    return Mask{std::move(lambdas[1].values), MaskKind::soft};
}

namespace {

// Binary mask from a per-element error map: a pixel passes only if every
// channel is below the threshold.
Mask threshold_all_channels(const Image& error, double sigma)
{
    Mask out{Image(error.height(), error.width(), error.channels(), 1.0), MaskKind::binary};
    for (int y = 0; y < error.height(); ++y) {
        for (int x = 0; x < error.width(); ++x) {
            bool valid = true;
            for (int c = 0; c < error.channels(); ++c) valid = valid && error.at(c, y, x) < sigma;
            if (!valid) {
                for (int c = 0; c < error.channels(); ++c) out.values.at(c, y, x) = 0.0;
            }
        }
    }
    return out;
}

} // namespace

Mask mask_se(const HdrImage& y_color, const LinearImage& h2, const ExposureImage& i2,
             const ThresholdConfig& thresholds, const RadiometryConfig& cfg)
{
    thresholds.validate();
    require_same_shape(y_color.pixels, h2.pixels, "mask_se(y_color, h2)");
    require_same_shape(i2.pixels, h2.pixels, "mask_se(i2, h2)");
    const Image ty = tonemap(y_color.pixels, cfg);
    const Image th = tonemap(clamp(h2.pixels, 0.0, 1.0), cfg);
    const Mask lambda2 = mask_sp(i2, cfg);
    Image error = ty;
    for (std::size_t i = 0; i < error.size(); ++i) {
        error.data()[i] = std::abs((ty.data()[i] - th.data()[i]) * lambda2.values.data()[i]);
    }
    return threshold_all_channels(error, thresholds.sigma_se);
}

Mask mask_color(const HdrImage& y_color, const HdrImage& y_stru, const ThresholdConfig& thresholds,
                const RadiometryConfig& cfg)
{
    thresholds.validate();
    require_same_shape(y_color.pixels, y_stru.pixels, "mask_color");
    const Image tc = tonemap(y_color.pixels, cfg);
    const Image ts = tonemap(y_stru.pixels, cfg);
    Image error = tc;
    for (std::size_t i = 0; i < error.size(); ++i) error.data()[i] = std::abs(tc.data()[i] - ts.data()[i]);
    return threshold_all_channels(error, thresholds.sigma_color);
}

HdrImage build_structure_component(const Model& structure_net, const AlignedStack& aligned)
{
    return HdrImage{structure_net.forward(NetworkInput::from_aligned(aligned)), HdrRole::structure_component};
}

HdrImage fuse_components_baseline(const HdrImage& y_color, const HdrImage& y_stru, const ThresholdConfig& thresholds,
                                  const RadiometryConfig& cfg)
{
    const Mask m = mask_color(y_color, y_stru, thresholds, cfg);
    HdrImage out{y_color.pixels, HdrRole::prediction};
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const double w = m.values.data()[i];
        out.pixels.data()[i] = w * y_color.pixels.data()[i] + (1.0 - w) * y_stru.pixels.data()[i];
    }
    return out;
}

SceneSupervision build_scene_supervision(const Scene& scene, const FlowEstimator& estimator,
                                         const ThresholdConfig& thresholds, const RadiometryConfig& cfg)
{
    scene.validate();
    SceneSupervision sup;
    sup.id = scene.id;
    sup.stack = scene.frames;
    ColorComponent color = build_color_component(scene.frames, estimator, cfg);
    sup.y_color = std::move(color.y_color);
    sup.aligned = std::move(color.aligned);
    sup.m_sp = mask_sp(scene.frames[1], cfg);
    sup.m_se = mask_se(sup.y_color, sup.aligned.linear[1], scene.frames[1], thresholds, cfg);
    sup.ground_truth = scene.ground_truth;
    return sup;
}

void attach_structure_component(SceneSupervision& sup, const Model& structure_net, const ThresholdConfig& thresholds,
                                const RadiometryConfig& cfg)
{
    sup.y_stru = build_structure_component(structure_net, sup.aligned);
    sup.m_color = mask_color(sup.y_color, *sup.y_stru, thresholds, cfg);
}

void save_supervision(const fs::path& dir, const SceneSupervision& sup, bool visualize)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());

    save_hdr_native(dir / "y_color.shdr", sup.y_color.pixels);
    save_hdr_native(dir / "m_sp.shdr", sup.m_sp.values);
    save_hdr_native(dir / "m_se.shdr", sup.m_se.values);
    for (int k : {0, 2}) {
        const std::string n = std::to_string(k + 1);
        const std::array<Image, 2> parts{sup.aligned.ldr[k].pixels, sup.aligned.linear[k].pixels};
        save_hdr_native(dir / ("aligned_" + n + ".shdr"), concat_channels(parts));
        save_hdr_native(dir / ("flow_" + n + ".shdr"), sup.aligned.flows[k == 0 ? 0 : 1].vectors);
    }
    if (sup.y_stru) save_hdr_native(dir / "y_stru.shdr", sup.y_stru->pixels);
    if (sup.m_color) save_hdr_native(dir / "m_color.shdr", sup.m_color->values);

    if (visualize) {
        write_png8(dir / "m_sp.png", sup.m_sp.values.slice_channels(0, 1));
        write_png8(dir / "m_se.png", sup.m_se.values.slice_channels(0, 1));
        if (sup.m_color) write_png8(dir / "m_color.png", sup.m_color->values.slice_channels(0, 1));
    }
}

SceneSupervision load_supervision(const fs::path& dir, const Scene& scene, const RadiometryConfig& cfg)
{
    if (!fs::is_directory(dir)) throw DataError("missing supervision directory: " + dir.string());
    auto need = [&](const char* name) {
        const fs::path p = dir / name;
        if (!fs::exists(p)) throw DataError("missing supervision artifact: " + p.string());
        return load_hdr_native(p);
    };

    SceneSupervision sup;
    sup.id = scene.id;
    sup.stack = scene.frames;
    sup.ground_truth = scene.ground_truth;
    sup.y_color = HdrImage{need("y_color.shdr"), HdrRole::color_component};
    sup.m_sp = Mask{need("m_sp.shdr"), MaskKind::soft};
    sup.m_se = Mask{need("m_se.shdr"), MaskKind::binary};

    const double ref_ev = scene.frames[1].ev;
    sup.aligned.ldr[1] = scene.frames[1];
    sup.aligned.linear[1] = linearize(scene.frames[1], ref_ev, cfg);
    for (int k : {0, 2}) {
        const std::string n = std::to_string(k + 1);
        const Image packed = need(("aligned_" + n + ".shdr").c_str());
        if (packed.channels() != 6) throw DataError("aligned stack artifact must have 6 channels: " + dir.string());
        sup.aligned.ldr[k] = ExposureImage{packed.slice_channels(0, 3), scene.frames[k].ev, scene.frames[k].bit_depth};
        sup.aligned.linear[k] = LinearImage{packed.slice_channels(3, 3), ref_ev};
        sup.aligned.flows[k == 0 ? 0 : 1] = FlowField{need(("flow_" + n + ".shdr").c_str())};
    }
    if (fs::exists(dir / "y_stru.shdr")) {
        sup.y_stru = HdrImage{load_hdr_native(dir / "y_stru.shdr"), HdrRole::structure_component};
    }
    if (fs::exists(dir / "m_color.shdr")) sup.m_color = Mask{load_hdr_native(dir / "m_color.shdr"), MaskKind::binary};

    if (!sup.y_color.pixels.same_shape(scene.frames[1].pixels)) {
        throw DataError("supervision artifacts in " + dir.string() + " do not match the scene size");
    }
    return sup;
}

} // namespace selfhdr
