#include "selfhdr/losses.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace selfhdr {

void LossConfig::validate() const
{
    if (!(lambda_sp >= 0.0) || !(lambda_stru >= 0.0)) throw InputError("loss weights must be >= 0");
    if (perceptual_layers.empty()) throw InputError("perceptual layer set must not be empty");
    for (int l : perceptual_layers) {
        if (l < 0 || l >= PerceptualExtractor::kTaps) throw InputError("perceptual layer id out of range");
    }
}

namespace {

// T(clip(x)) and dT/dx (zero where the clip is active).
void tonemap_clipped(const Image& x, double mu, Image& value, Image& slope)
{
    value = Image(x.height(), x.width(), x.channels());
    slope = Image(x.height(), x.width(), x.channels());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        const double c = std::clamp(v, 0.0, 1.0);
        value.data()[i] = tonemap_value(c, mu);
        slope.data()[i] = (v >= 0.0 && v <= 1.0) ? tonemap_derivative(c, mu) : 0.0;
    }
}

Image tonemap_clip(const Image& x, double mu)
{
    Image out = x;
    for (double& v : out.data()) v = tonemap_value(std::clamp(v, 0.0, 1.0), mu);
    return out;
}

double sign(double v)
{
    return static_cast<double>((v > 0.0) - (v < 0.0));
}

void check_finite(const Image& y_hat)
{
    if (!y_hat.all_finite()) throw NumericError("loss input contains non-finite values");
}

} // namespace

LossValue masked_tonemapped_l1(const Image& y_hat, const Image& target, const Image& mask, const RadiometryConfig& cfg)
{
    require_same_shape(y_hat, target, "loss(prediction, target)");
    require_same_shape(mask, target, "loss(mask, target)");
    check_finite(y_hat);
    Image ty, slope;
    tonemap_clipped(y_hat, cfg.mu, ty, slope);
    const Image tt = tonemap_clip(target, cfg.mu);

    const double n = static_cast<double>(y_hat.size());
    LossValue out{0.0, Image(y_hat.height(), y_hat.width(), y_hat.channels())};
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        const double d = ty.data()[i] - tt.data()[i];
        const double m = mask.data()[i];
        out.value += std::abs(d * m);
        out.grad.data()[i] = sign(d) * std::abs(m) * slope.data()[i] / n;
    }
    out.value /= n;
    return out;
}

LossValue loss_sp(const Image& y_hat, const Image& h2, const Image& m_sp, const RadiometryConfig& cfg)
{
    return masked_tonemapped_l1(y_hat, h2, m_sp, cfg);
}

LossValue loss_se(const Image& y_hat, const Image& y_color, const Image& m_se, const RadiometryConfig& cfg)
{
    return masked_tonemapped_l1(y_hat, y_color, m_se, cfg);
}

LossValue loss_color(const Image& y_hat, const Image& y_color, const Image& m_color, const RadiometryConfig& cfg)
{
    return masked_tonemapped_l1(y_hat, y_color, m_color, cfg);
}

// --- perceptual extractor -----------------------------------------------------

PerceptualExtractor::PerceptualExtractor()
{
    convs_.emplace_back("phi0", 3, 8);
    convs_.emplace_back("phi1", 8, 16);
    convs_.emplace_back("phi2", 16, 32);
}

PerceptualExtractor PerceptualExtractor::random(std::uint64_t seed)
{
    PerceptualExtractor ex;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> small(-0.05, 0.05);
    for (nn::Conv2d& c : ex.convs_) {
        c.init(rng);
        for (double& b : c.bias.value) b = small(rng);
    }
    return ex;
}

void PerceptualExtractor::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write("SHPX", 4);
    for (const nn::Conv2d& c : convs_) {
        out.write(reinterpret_cast<const char*>(c.weight.value.data()),
                  static_cast<std::streamsize>(c.weight.value.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(c.bias.value.data()),
                  static_cast<std::streamsize>(c.bias.value.size() * sizeof(double)));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

PerceptualExtractor PerceptualExtractor::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    if (!in || !in.read(magic, 4) || std::string(magic, 4) != "SHPX") {
        throw DataError("not a perceptual extractor file: " + path.string());
    }
    PerceptualExtractor ex;
    for (nn::Conv2d& c : ex.convs_) {
        for (auto* p : {&c.weight, &c.bias}) {
            if (!in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)))) {
                throw DataError("truncated perceptual extractor file: " + path.string());
            }
        }
    }
    return ex;
}

std::vector<Image> PerceptualExtractor::features(const Image& x) const
{
    Trace trace;
    return features(x, trace);
}

std::vector<Image> PerceptualExtractor::features(const Image& x, Trace& t) const
{
    if (x.channels() != 3) throw InputError("perceptual extractor expects 3 channels");
    t = Trace{};
    Image h = x;
    for (int k = 0; k < kTaps; ++k) {
        if (k > 0) h = nn::avg_pool2(h);
        if (h.height() < 1 || h.width() < 1) throw InputError("input too small for the perceptual extractor");
        t.inputs.push_back(h);
        t.pre.push_back(convs_[k].forward(h));
        h = nn::leaky_relu(t.pre.back(), 0.0);
        t.taps.push_back(h);
    }
    return t.taps;
}

Image PerceptualExtractor::backward(const Trace& t, const std::vector<Image>& tap_grads) const
{
    Image g;
    for (int k = kTaps - 1; k >= 0; --k) {
        Image gk = t.taps[k];
        std::fill(gk.data().begin(), gk.data().end(), 0.0);
        if (!g.empty()) gk = g;
        if (k < static_cast<int>(tap_grads.size()) && !tap_grads[k].empty()) nn::add_inplace(gk, tap_grads[k]);
        gk = nn::leaky_relu_backward(t.pre[k], gk, 0.0);
        g = convs_[k].backward_input(t.inputs[k], gk);
        if (k > 0) g = nn::avg_pool2_backward(g, t.taps[k - 1].height(), t.taps[k - 1].width());
    }
    return g;
}

std::uint64_t PerceptualExtractor::parameter_hash() const
{
    std::vector<const nn::Parameter*> params;
    for (const nn::Conv2d& c : convs_) {
        params.push_back(&c.weight);
        params.push_back(&c.bias);
    }
    return nn::hash_parameters(params);
}

LossValue loss_stru(const Image& y_hat, const Image& y_stru, const PerceptualExtractor& extractor,
                    const LossConfig& loss_cfg, const RadiometryConfig& cfg)
{
    require_same_shape(y_hat, y_stru, "loss_stru");
    if (y_hat.channels() != 3) throw InputError("loss_stru: extractor expects 3-channel inputs");
    loss_cfg.validate();
    check_finite(y_hat);

    Image ty, slope;
    tonemap_clipped(y_hat, cfg.mu, ty, slope);
    PerceptualExtractor::Trace trace;
    const auto fy = extractor.features(ty, trace);
    const auto ft = extractor.features(tonemap_clip(y_stru, cfg.mu));

    LossValue out;
    std::vector<Image> tap_grads(PerceptualExtractor::kTaps);
    for (int k : loss_cfg.perceptual_layers) {
        const double n = static_cast<double>(fy[k].size());
        Image g(fy[k].height(), fy[k].width(), fy[k].channels());
        double sum = 0.0;
        for (std::size_t i = 0; i < fy[k].size(); ++i) {
            const double d = fy[k].data()[i] - ft[k].data()[i];
            sum += std::abs(d);
            g.data()[i] = sign(d) / n;
        }
        out.value += sum / n;
        if (tap_grads[k].empty()) {
            tap_grads[k] = std::move(g);
        } else {
            nn::add_inplace(tap_grads[k], g);
        }
    }
    out.grad = extractor.backward(trace, tap_grads);
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.data()[i] *= slope.data()[i];
    return out;
}

LossValue objective_structure(const Image& y_hat, const Image& y_color, const Image& h2, const Image& m_se,
                              const Image& m_sp, const LossConfig& loss_cfg, const RadiometryConfig& cfg)
{
    loss_cfg.validate();
    LossValue se = loss_se(y_hat, y_color, m_se, cfg);
    const LossValue sp = loss_sp(y_hat, h2, m_sp, cfg);
    se.value += loss_cfg.lambda_sp * sp.value;
    for (std::size_t i = 0; i < se.grad.size(); ++i) se.grad.data()[i] += loss_cfg.lambda_sp * sp.grad.data()[i];
    return se;
}

LossValue objective_reconstruction(const Image& y_hat, const Image& y_color, const Image& y_stru,
                                   const Image& m_color, const PerceptualExtractor& extractor,
                                   const LossConfig& loss_cfg, const RadiometryConfig& cfg)
{
    LossValue color = loss_color(y_hat, y_color, m_color, cfg);
    if (loss_cfg.lambda_stru == 0.0) return color;
    const LossValue stru = loss_stru(y_hat, y_stru, extractor, loss_cfg, cfg);
    color.value += loss_cfg.lambda_stru * stru.value;
    for (std::size_t i = 0; i < color.grad.size(); ++i) color.grad.data()[i] += loss_cfg.lambda_stru * stru.grad.data()[i];
    return color;
}

} // namespace selfhdr
