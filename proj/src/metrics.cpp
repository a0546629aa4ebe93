#include "selfhdr/metrics.hpp"

#include "selfhdr/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>

namespace selfhdr {

double psnr(const Image& a, const Image& b, double data_range)
{
    require_same_shape(a, b, "psnr");
    if (a.empty()) throw InputError("psnr of empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double psnr_u(const Image& a, const Image& b, const RadiometryConfig& cfg)
{
    return psnr(tonemap(clamp(a, 0.0, 1.0), cfg), tonemap(clamp(b, 0.0, 1.0), cfg));
}

double psnr_l(const Image& a, const Image& b)
{
    return psnr(clamp(a, 0.0, 1.0), clamp(b, 0.0, 1.0));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps()
{
    std::array<double, kWindow> taps{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Separable Gaussian filter over valid positions only.
std::vector<double> filter_valid(const std::vector<double>& v, int h, int w)
{
    static const auto taps = gaussian_taps();
    const int oh = h - kWindow + 1;
    const int ow = w - kWindow + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * v[static_cast<std::size_t>(y) * w + x + k];
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

} // namespace

double ssim(const Image& a, const Image& b)
{
    require_same_shape(a, b, "ssim");
    const int h = a.height();
    const int w = a.width();
    if (h < kWindow || w < kWindow) throw InputError("ssim needs images of at least 11x11 pixels");

    const Image ga = a.channel_mean();
    const Image gb = b.channel_mean();
    const auto& x = ga.data();
    const auto& y = gb.data();
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w);
    const auto my = filter_valid(y, h, w);
    const auto sxx = filter_valid(xx, h, w);
    const auto syy = filter_valid(yy, h, w);
    const auto sxy = filter_valid(xy, h, w);

    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cov = sxy[i] - mx[i] * my[i];
        total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

double ssim_u(const Image& a, const Image& b, const RadiometryConfig& cfg)
{
    return ssim(tonemap(clamp(a, 0.0, 1.0), cfg), tonemap(clamp(b, 0.0, 1.0), cfg));
}

SceneMetrics evaluate_scene(const std::string& id, const Image& prediction, const Image& ground_truth,
                            const RadiometryConfig& cfg)
{
    SceneMetrics m;
    m.id = id;
    m.psnr_l = psnr_l(prediction, ground_truth);
    m.psnr_u = psnr_u(prediction, ground_truth, cfg);
    m.ssim_l = ssim(clamp(prediction, 0.0, 1.0), clamp(ground_truth, 0.0, 1.0));
    m.ssim_u = ssim_u(prediction, ground_truth, cfg);
    return m;
}

MetricReport MetricReport::from_scenes(std::vector<SceneMetrics> scenes)
{
    MetricReport r;
    r.scenes = std::move(scenes);
    r.mean.id = "mean";
    if (r.scenes.empty()) return r;
    for (const auto& s : r.scenes) {
        r.mean.psnr_l += s.psnr_l;
        r.mean.psnr_u += s.psnr_u;
        r.mean.ssim_l += s.ssim_l;
        r.mean.ssim_u += s.ssim_u;
    }
    const double n = static_cast<double>(r.scenes.size());
    r.mean.psnr_l /= n;
    r.mean.psnr_u /= n;
    r.mean.ssim_l /= n;
    r.mean.ssim_u /= n;
    return r;
}

namespace {

// JSON has no infinity; identical images are recorded as the string "inf".
nlohmann::json encode_db(double v)
{
    if (std::isinf(v) && v > 0) return "inf";
    return v;
}

double decode_db(const nlohmann::json& j)
{
    if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

nlohmann::json to_json_value(const SceneMetrics& m)
{
    return {{"id", m.id},
            {"psnr_l", encode_db(m.psnr_l)},
            {"psnr_u", encode_db(m.psnr_u)},
            {"ssim_l", m.ssim_l},
            {"ssim_u", m.ssim_u}};
}

SceneMetrics from_json_value(const nlohmann::json& j)
{
    SceneMetrics m;
    m.id = j.at("id").get<std::string>();
    m.psnr_l = decode_db(j.at("psnr_l"));
    m.psnr_u = decode_db(j.at("psnr_u"));
    m.ssim_l = j.at("ssim_l").get<double>();
    m.ssim_u = j.at("ssim_u").get<double>();
    return m;
}

} // namespace

std::string MetricReport::to_json() const
{
    nlohmann::json j;
    j["scenes"] = nlohmann::json::array();
    for (const auto& s : scenes) j["scenes"].push_back(to_json_value(s));
    j["mean"] = to_json_value(mean);
    j["hdr_vdp2"] = hdr_vdp2 ? nlohmann::json(*hdr_vdp2) : nlohmann::json(nullptr);
    return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text)
{
    try {
        const auto j = nlohmann::json::parse(text);
        MetricReport r;
        for (const auto& s : j.at("scenes")) r.scenes.push_back(from_json_value(s));
        r.mean = from_json_value(j.at("mean"));
        if (j.contains("hdr_vdp2") && !j["hdr_vdp2"].is_null()) r.hdr_vdp2 = j["hdr_vdp2"].get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed metric report: ") + e.what());
    }
}

std::string MetricReport::table_row(const std::string& name) const
{
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-24s | %7.2f | %6.4f | %7.2f | %6.4f", name.c_str(), mean.psnr_u, mean.ssim_u,
                  mean.psnr_l, mean.ssim_l);
    return buf;
}

} // namespace selfhdr
