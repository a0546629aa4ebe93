#include "selfhdr/alignment.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace selfhdr {

FlowField FlowField::zeros(int height, int width)
{
    return {Image(height, width, 2, 0.0)};
}

FlowField FlowField::constant(int height, int width, double dx, double dy)
{
    FlowField f = zeros(height, width);
    std::fill(f.vectors.plane(0).begin(), f.vectors.plane(0).end(), dx);
    std::fill(f.vectors.plane(1).begin(), f.vectors.plane(1).end(), dy);
    return f;
}

void FlowEstimatorSpec::validate() const
{
    if (algorithm != "pyramidal_lk" && algorithm != "zero") {
        throw InputError("unknown flow algorithm '" + algorithm + "'");
    }
    if (levels < 1) throw InputError("flow pyramid levels must be >= 1");
    if (iterations < 1) throw InputError("flow iterations must be >= 1");
    if (!(smoothness >= 0.0)) throw InputError("flow smoothness must be >= 0");
    if (window_radius < 1) throw InputError("flow window radius must be >= 1");
}

std::unique_ptr<FlowEstimator> make_flow_estimator(const FlowEstimatorSpec& spec)
{
    spec.validate();
    if (spec.algorithm == "zero") return std::make_unique<ZeroFlow>();
    return std::make_unique<PyramidalLucasKanade>(spec);
}

double sample_bilinear(const Image& img, int c, double y, double x)
{
    const int h = img.height();
    const int w = img.width();
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double fy = y - y0;
    const double fx = x - x0;
    return (1.0 - fy) * ((1.0 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
           fy * ((1.0 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
}

Image warp(const Image& src, const FlowField& flow)
{
    if (!src.same_spatial(flow.vectors) || flow.vectors.channels() != 2) {
        throw InputError("warp: flow and source must share the spatial size");
    }
    if (!flow.vectors.all_finite()) throw InputError("warp: non-finite flow");
    Image out(src.height(), src.width(), src.channels());
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            const double sy = y + flow.dy(y, x);
            const double sx = x + flow.dx(y, x);
            for (int c = 0; c < src.channels(); ++c) out.at(c, y, x) = sample_bilinear(src, c, sy, sx);
        }
    }
    return out;
}

namespace {

// Separable binomial [1 4 6 4 1] / 16 blur with replicated borders.
Image binomial_blur(const Image& img)
{
    static constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    const int h = img.height();
    const int w = img.width();
    Image tmp(h, w, img.channels());
    Image out(h, w, img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * img.at(c, y, std::clamp(x + k, 0, w - 1));
                tmp.at(c, y, x) = acc;
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * tmp.at(c, std::clamp(y + k, 0, h - 1), x);
                out.at(c, y, x) = acc;
            }
        }
    }
    return out;
}

Image downsample(const Image& img)
{
    const Image blurred = binomial_blur(img);
    const int h = (img.height() + 1) / 2;
    const int w = (img.width() + 1) / 2;
    Image out(h, w, img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) out.at(c, y, x) = blurred.at(c, 2 * y, 2 * x);
        }
    }
    return out;
}

// Resamples a coarse flow onto a finer grid and rescales the vectors.
FlowField upsample_flow(const FlowField& coarse, int height, int width)
{
    FlowField out = FlowField::zeros(height, width);
    const double sy = static_cast<double>(coarse.height()) / height;
    const double sx = static_cast<double>(coarse.width()) / width;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double cy = (y + 0.5) * sy - 0.5;
            const double cx = (x + 0.5) * sx - 0.5;
            out.vectors.at(0, y, x) = sample_bilinear(coarse.vectors, 0, cy, cx) / sx;
            out.vectors.at(1, y, x) = sample_bilinear(coarse.vectors, 1, cy, cx) / sy;
        }
    }
    return out;
}

// Box sum over a (2r+1)^2 window via integral image, replicated borders.
std::vector<double> box_sum(const std::vector<double>& v, int h, int w, int r)
{
    std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
    auto idx = [w](int y, int x) { return static_cast<std::size_t>(y) * (w + 1) + x; };
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
            row += v[static_cast<std::size_t>(y) * w + x];
            integral[idx(y + 1, x + 1)] = integral[idx(y, x + 1)] + row;
        }
    }
    std::vector<double> out(v.size());
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r);
        const int y1 = std::min(h - 1, y + r);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - r);
            const int x1 = std::min(w - 1, x + r);
            out[static_cast<std::size_t>(y) * w + x] =
                integral[idx(y1 + 1, x1 + 1)] - integral[idx(y0, x1 + 1)] - integral[idx(y1 + 1, x0)] +
                integral[idx(y0, x0)];
        }
    }
    return out;
}

void median_filter_flow(FlowField& flow)
{
    const int h = flow.height();
    const int w = flow.width();
    const Image src = flow.vectors;
    std::array<double, 9> window{};
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        window[n++] = src.at(c, std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1));
                    }
                }
                std::nth_element(window.begin(), window.begin() + 4, window.end());
                flow.vectors.at(c, y, x) = window[4];
            }
        }
    }
}

// Blends each vector with a confidence-weighted neighbourhood average so that
// well-textured estimates fill in flat or noisy regions.
void propagate_confident(FlowField& flow, const Image& confidence, double smoothness)
{
    const int h = flow.height();
    const int w = flow.width();
    double mean_conf = 0.0;
    for (double c : confidence.data()) mean_conf += c;
    mean_conf /= static_cast<double>(confidence.size());
    if (!(mean_conf > 0.0)) return;

    Image weighted(h, w, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double c = confidence.at(0, y, x);
            weighted.at(0, y, x) = c * flow.vectors.at(0, y, x);
            weighted.at(1, y, x) = c * flow.vectors.at(1, y, x);
            weighted.at(2, y, x) = c;
        }
    }
    for (int pass = 0; pass < 3; ++pass) weighted = binomial_blur(weighted);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double norm = weighted.at(2, y, x);
            if (!(norm > 0.0)) continue;
            const double local = confidence.at(0, y, x) / (confidence.at(0, y, x) + smoothness * mean_conf);
            for (int c = 0; c < 2; ++c) {
                const double avg = weighted.at(c, y, x) / norm;
                flow.vectors.at(c, y, x) = local * flow.vectors.at(c, y, x) + (1.0 - local) * avg;
            }
        }
    }
}

void refine_level(const Image& ref, const Image& src, FlowField& flow, const FlowEstimatorSpec& spec)
{
    const int h = ref.height();
    const int w = ref.width();
    const std::size_t n = ref.pixel_count();
    const int r = spec.window_radius;
    const double area = (2.0 * r + 1) * (2.0 * r + 1);
    const double reg = 1e-6 * area;
    const double max_mag = std::max(h, w);

    std::vector<double> ixx(n), ixy(n), iyy(n), ixt(n), iyt(n);
    for (int it = 0; it < spec.iterations; ++it) {
        const Image warped = warp(src, flow);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
                const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
                // Gradient of the mean of both frames keeps the update symmetric.
                const double gx = 0.25 * (warped.at(0, y, xp) - warped.at(0, y, xm) + ref.at(0, y, xp) - ref.at(0, y, xm));
                const double gy = 0.25 * (warped.at(0, yp, x) - warped.at(0, ym, x) + ref.at(0, yp, x) - ref.at(0, ym, x));
                const double gt = warped.at(0, y, x) - ref.at(0, y, x);
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                // Samples that fall outside the source carry replicated borders, not content.
                const double sy = y + flow.dy(y, x);
                const double sx = x + flow.dx(y, x);
                if (sy < 0.0 || sy > h - 1.0 || sx < 0.0 || sx > w - 1.0) {
                    ixx[i] = ixy[i] = iyy[i] = ixt[i] = iyt[i] = 0.0;
                    continue;
                }
                ixx[i] = gx * gx;
                ixy[i] = gx * gy;
                iyy[i] = gy * gy;
                ixt[i] = gx * gt;
                iyt[i] = gy * gt;
            }
        }
        const auto sxx = box_sum(ixx, h, w, r);
        const auto sxy = box_sum(ixy, h, w, r);
        const auto syy = box_sum(iyy, h, w, r);
        const auto sxt = box_sum(ixt, h, w, r);
        const auto syt = box_sum(iyt, h, w, r);
        Image confidence(h, w, 1);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double a = sxx[i] + reg;
                const double b = sxy[i];
                const double d = syy[i] + reg;
                const double det = a * d - b * b;
                double du = -(d * sxt[i] - b * syt[i]) / det;
                double dv = -(a * syt[i] - b * sxt[i]) / det;
                const double step = std::hypot(du, dv);
                if (step > 1.0) {
                    du /= step;
                    dv /= step;
                }
                flow.vectors.at(0, y, x) = std::clamp(flow.vectors.at(0, y, x) + du, -max_mag, max_mag);
                flow.vectors.at(1, y, x) = std::clamp(flow.vectors.at(1, y, x) + dv, -max_mag, max_mag);
                // Smaller eigenvalue of the structure tensor.
                const double half_trace = 0.5 * (a + d);
                confidence.at(0, y, x) = half_trace - std::sqrt(std::max(0.0, half_trace * half_trace - det));
            }
        }
        median_filter_flow(flow);
        if (spec.smoothness > 0.0) propagate_confident(flow, confidence, spec.smoothness);
    }
}

// Integer translation minimizing the mean absolute difference over a fixed central window.
FlowField global_initialization(const Image& ref, const Image& src, int radius)
{
    const int h = ref.height();
    const int w = ref.width();
    double best = std::numeric_limits<double>::infinity();
    int best_dx = 0;
    int best_dy = 0;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            double sad = 0.0;
            int n = 0;
            for (int y = radius; y < h - radius; ++y) {
                for (int x = radius; x < w - radius; ++x) {
                    sad += std::abs(src.at(0, y + dy, x + dx) - ref.at(0, y, x));
                    ++n;
                }
            }
            if (n == 0) continue;
            sad /= n;
            // Prefer the smaller displacement on ties.
            if (sad < best - 1e-12 || (sad <= best + 1e-12 && dx * dx + dy * dy < best_dx * best_dx + best_dy * best_dy)) {
                best = std::min(best, sad);
                best_dx = dx;
                best_dy = dy;
            }
        }
    }
    return FlowField::constant(h, w, best_dx, best_dy);
}

} // namespace

PyramidalLucasKanade::PyramidalLucasKanade(FlowEstimatorSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
}

FlowField PyramidalLucasKanade::estimate(const Image& ref, const Image& src) const
{
    if (!ref.same_shape(src)) throw InputError("estimate_flow: reference and source shapes differ");
    if (ref.empty()) throw InputError("estimate_flow: empty image");

    std::vector<Image> ref_pyr{binomial_blur(ref.channel_mean())};
    std::vector<Image> src_pyr{binomial_blur(src.channel_mean())};
    while (static_cast<int>(ref_pyr.size()) < spec_.levels &&
           std::min(ref_pyr.back().height(), ref_pyr.back().width()) >= 32) {
        ref_pyr.push_back(downsample(ref_pyr.back()));
        src_pyr.push_back(downsample(src_pyr.back()));
    }

    const int search = std::clamp(std::min(ref.height(), ref.width()) / 8, 1, 8);
    const FlowField init = global_initialization(ref_pyr.front(), src_pyr.front(), search);
    const double scale = std::ldexp(1.0, -(static_cast<int>(ref_pyr.size()) - 1));
    FlowField flow = FlowField::constant(ref_pyr.back().height(), ref_pyr.back().width(), init.dx(0, 0) * scale,
                                         init.dy(0, 0) * scale);
    for (int level = static_cast<int>(ref_pyr.size()) - 1; level >= 0; --level) {
        const Image& r = ref_pyr[level];
        if (flow.height() != r.height() || flow.width() != r.width()) {
            flow = upsample_flow(flow, r.height(), r.width());
        }
        refine_level(r, src_pyr[level], flow, spec_);
    }
    return flow;
}

FlowField ZeroFlow::estimate(const Image& ref, const Image& src) const
{
    if (!ref.same_shape(src)) throw InputError("estimate_flow: reference and source shapes differ");
    return FlowField::zeros(ref.height(), ref.width());
}

ExposureImage exposure_compensate(const ExposureImage& src, double target_ev, const RadiometryConfig& cfg)
{
    ExposureImage out = delinearize(linearize(src, src.ev, cfg), target_ev, cfg);
    out.bit_depth = src.bit_depth;
    return out;
}

FlowField estimate_flow(const ExposureImage& ref, const ExposureImage& src, const FlowEstimatorSpec& spec)
{
    ref.validate();
    src.validate();
    return make_flow_estimator(spec)->estimate(ref.pixels, src.pixels);
}

AlignedStack align_stack(const std::array<ExposureImage, 3>& stack, const FlowEstimator& estimator,
                         const RadiometryConfig& cfg)
{
    const ExposureImage& ref = stack[1];
    for (const auto& f : stack) {
        f.validate();
        require_same_shape(f.pixels, ref.pixels, "align_stack");
    }
    if (!(stack[0].ev < stack[1].ev && stack[1].ev < stack[2].ev)) {
        throw InputError("align_stack: exposures must be strictly increasing");
    }

    AlignedStack out;
    out.ldr[1] = ref;
    out.linear[1] = linearize(ref, ref.ev, cfg);
    for (int k : {0, 2}) {
        const ExposureImage& frame = stack[k];
        const ExposureImage compensated = exposure_compensate(frame, ref.ev, cfg);
        // A brighter frame clips earlier than the reference; clip the reference the
        // same way so both sides of the brightness-constancy term agree.
        const ExposureImage target =
            frame.ev > ref.ev ? exposure_compensate(exposure_compensate(ref, frame.ev, cfg), ref.ev, cfg) : ref;
        FlowField flow = estimator.estimate(target.pixels, compensated.pixels);

        out.ldr[k] = ExposureImage{warp(frame.pixels, flow), frame.ev, frame.bit_depth};
        const LinearImage lin = linearize(frame, ref.ev, cfg);
        out.linear[k] = LinearImage{warp(lin.pixels, flow), ref.ev};
        out.flows[k == 0 ? 0 : 1] = std::move(flow);
    }
    return out;
}

} // namespace selfhdr
