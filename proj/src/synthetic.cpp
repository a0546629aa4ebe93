#include "selfhdr/data.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace selfhdr {

MotionKind parse_motion_kind(const std::string& name)
{
    if (name == "none") return MotionKind::none;
    if (name == "shift" || name == "global_shift") return MotionKind::global_shift;
    if (name == "rect" || name == "moving_rect") return MotionKind::moving_rect;
    throw InputError("unknown motion model '" + name + "' (expected none, shift or rect)");
}

std::string to_string(MotionKind kind)
{
    switch (kind) {
    case MotionKind::none: return "none";
    case MotionKind::global_shift: return "shift";
    case MotionKind::moving_rect: return "rect";
    }
    return "none";
}

void SyntheticSpec::validate() const
{
    if (height < 8 || width < 8) throw InputError("synthetic scenes must be at least 8x8");
    if (!(evs[0] < evs[1] && evs[1] < evs[2])) throw InputError("synthetic evs must be strictly increasing");
    if (bit_depth != 8 && bit_depth != 16) throw InputError("bit depth must be 8 or 16");
    for (const Vec2& d : {displacement1, displacement3}) {
        if (std::hypot(d.x, d.y) > 10.0) throw InputError("synthetic displacements are limited to 10 px");
    }
    if (motion == MotionKind::moving_rect && rect_w > 0.0 &&
        (rect_w < 2.0 || rect_h < 2.0 || rect_x < 0.0 || rect_y < 0.0 || rect_x + rect_w > width ||
         rect_y + rect_h > height)) {
        throw InputError("moving rectangle must lie inside the image");
    }
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Wave {
    double fx, fy, phase, amplitude;
};

struct Disc {
    double cx, cy, radius, offset;
    std::array<double, 3> tint;
};

// Analytic log2-radiance field; sampled at continuous positions so that
// shifted frames are exact.
class SceneModel {
public:
    SceneModel(const SyntheticSpec& spec, std::mt19937_64& rng) : height_(spec.height), width_(spec.width)
    {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double angle = unit(rng) * kTwoPi;
        ramp_x_ = std::cos(angle);
        ramp_y_ = std::sin(angle);
        for (int k = 0; k < 3; ++k) {
            const double period = 5.0 + 11.0 * unit(rng);
            const double dir = unit(rng) * kTwoPi;
            waves_.push_back({std::cos(dir) / period, std::sin(dir) / period, unit(rng) * kTwoPi,
                              0.25 + 0.3 * unit(rng)});
        }
        for (double& t : tint_) t = -0.35 + 0.7 * unit(rng);
        for (int k = 0; k < 5; ++k) {
            Disc d{};
            d.cx = unit(rng) * width_;
            d.cy = unit(rng) * height_;
            d.radius = 0.08 * width_ + 0.12 * width_ * unit(rng);
            d.offset = -2.0 + 4.0 * unit(rng);
            for (double& t : d.tint) t = -0.5 + unit(rng);
            discs_.push_back(d);
        }
        object_level_ = -5.5 + 4.5 * unit(rng);
        for (double& t : object_tint_) t = -0.5 + unit(rng);
        object_period_ = 4.0 + 4.0 * unit(rng);
        shadow_.cx = (0.25 + 0.5 * unit(rng)) * width_;
        shadow_.cy = (0.25 + 0.5 * unit(rng)) * height_;
        shadow_.radius = 0.2 * width_;
    }

    double background(int c, double x, double y) const
    {
        // Diagonal ramp spanning about ten stops between the corners.
        const double u = (x / width_ - 0.5) * ramp_x_ + (y / height_ - 0.5) * ramp_y_;
        double l = -5.0 + 7.5 * u;
        for (const Wave& w : waves_) l += w.amplitude * std::sin(kTwoPi * (w.fx * x + w.fy * y) + w.phase);
        for (const Disc& d : discs_) {
            if (std::hypot(x - d.cx, y - d.cy) < d.radius) l += d.offset + d.tint[c];
        }
        // Deep shadow that renders near-black in the short exposure.
        if (std::hypot(x - shadow_.cx, y - shadow_.cy) < shadow_.radius) l = -15.0 + 0.5 * (l + 5.0) / 7.5;
        return to_radiance(l + tint_[c]);
    }

    // Object texture in object-local coordinates.
    double object(int c, double u, double v) const
    {
        const double check = std::sin(kTwoPi * u / object_period_) * std::sin(kTwoPi * v / object_period_);
        const double l = object_level_ + 1.2 * check + object_tint_[c];
        return to_radiance(l);
    }

private:
    static double to_radiance(double log2_value)
    {
        return std::exp2(std::clamp(log2_value, -16.0, 0.0));
    }

    int height_;
    int width_;
    double ramp_x_ = 1.0;
    double ramp_y_ = 0.0;
    std::vector<Wave> waves_;
    std::array<double, 3> tint_{};
    std::vector<Disc> discs_;
    Disc shadow_{};
    double object_level_ = -3.0;
    std::array<double, 3> object_tint_{};
    double object_period_ = 6.0;
};

double quantize(double v, int bit_depth)
{
    const double levels = bit_depth == 16 ? 65535.0 : 255.0;
    return std::round(std::clamp(v, 0.0, 1.0) * levels) / levels;
}

bool inside(double x, double y, double rx, double ry, double rw, double rh)
{
    return x >= rx && x < rx + rw && y >= ry && y < ry + rh;
}

} // namespace

Scene synthesize_scene(const SyntheticSpec& spec_in, const RadiometryConfig& cfg)
{
    spec_in.validate();
    cfg.validate();
    SyntheticSpec spec = spec_in;
    std::mt19937_64 rng(spec.seed);
    const SceneModel model(spec, rng);

    if (spec.motion == MotionKind::moving_rect && spec.rect_w <= 0.0) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        spec.rect_w = std::round(spec.width * (0.22 + 0.12 * unit(rng)));
        spec.rect_h = std::round(spec.height * (0.22 + 0.12 * unit(rng)));
        const double margin = 10.0;
        spec.rect_x = std::round(margin + unit(rng) * std::max(0.0, spec.width - spec.rect_w - 2 * margin));
        spec.rect_y = std::round(margin + unit(rng) * std::max(0.0, spec.height - spec.rect_h - 2 * margin));
    }

    const int h = spec.height;
    const int w = spec.width;
    const std::array<Vec2, 3> disp{spec.displacement1, Vec2{}, spec.displacement3};

    // Radiance seen at pixel (x, y) of frame k.
    auto radiance = [&](int k, int c, double x, double y) {
        const Vec2 d = spec.motion == MotionKind::none ? Vec2{} : disp[k];
        switch (spec.motion) {
        case MotionKind::global_shift: return model.background(c, x - d.x, y - d.y);
        case MotionKind::moving_rect:
            if (inside(x - d.x, y - d.y, spec.rect_x, spec.rect_y, spec.rect_w, spec.rect_h)) {
                return model.object(c, x - d.x - spec.rect_x, y - d.y - spec.rect_y);
            }
            return model.background(c, x, y);
        case MotionKind::none: break;
        }
        return model.background(c, x, y);
    };

    Scene scene;
    scene.id = "synthetic_" + std::to_string(spec.seed);
    Image gt(h, w, 3);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) gt.at(c, y, x) = std::clamp(radiance(1, c, x, y), 0.0, 1.0);
        }
    }
    for (int k = 0; k < 3; ++k) {
        const double t = exposure_ratio(spec.evs[k], spec.evs[1]);
        Image frame(h, w, 3);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double v = std::pow(std::clamp(radiance(k, c, x, y) * t, 0.0, 1.0), 1.0 / cfg.gamma);
                    frame.at(c, y, x) = quantize(v, spec.bit_depth);
                }
            }
        }
        scene.frames[k] = ExposureImage{std::move(frame), spec.evs[k], spec.bit_depth};
    }
    scene.ground_truth = HdrImage{std::move(gt), HdrRole::ground_truth};

    std::array<FlowField, 2> flows{FlowField::zeros(h, w), FlowField::zeros(h, w)};
    Image motion(h, w, 1, 0.0);
    for (int f = 0; f < 2; ++f) {
        const Vec2 d = disp[f == 0 ? 0 : 2];
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                bool moves = false;
                if (spec.motion == MotionKind::global_shift) {
                    moves = true;
                } else if (spec.motion == MotionKind::moving_rect) {
                    const bool in_ref = inside(x, y, spec.rect_x, spec.rect_y, spec.rect_w, spec.rect_h);
                    const bool in_frame =
                        inside(x - d.x, y - d.y, spec.rect_x, spec.rect_y, spec.rect_w, spec.rect_h);
                    moves = in_ref;
                    if (in_ref || in_frame) motion.at(0, y, x) = 1.0;
                }
                if (moves) {
                    flows[f].vectors.at(0, y, x) = d.x;
                    flows[f].vectors.at(1, y, x) = d.y;
                }
            }
        }
    }
    if (spec.motion == MotionKind::global_shift) std::fill(motion.data().begin(), motion.data().end(), 1.0);
    scene.true_flows = std::move(flows);
    scene.motion_mask = std::move(motion);
    return scene;
}

SyntheticSpec random_synthetic_spec(MotionKind kind, int size, double max_displacement, std::uint64_t seed)
{
    SyntheticSpec spec;
    spec.height = size;
    spec.width = size;
    spec.motion = kind;
    spec.seed = seed;
    if (kind == MotionKind::none) return spec;

    // Separate stream so the scene content does not depend on the motion draw.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double limit = std::min(max_displacement, 10.0);
    auto draw = [&](double min_mag) {
        const double mag = min_mag + (limit - min_mag) * unit(rng);
        const double dir = unit(rng) * kTwoPi;
        return Vec2{mag * std::cos(dir), mag * std::sin(dir)};
    };
    if (kind == MotionKind::global_shift) {
        spec.displacement1 = draw(std::min(1.0, limit));
        spec.displacement3 = draw(std::min(1.0, limit));
    } else {
        spec.displacement1 = draw(0.5 * limit);
        spec.displacement3 = Vec2{-spec.displacement1.x, -spec.displacement1.y};
    }
    return spec;
}

void Scene::validate() const
{
    for (const auto& f : frames) {
        f.validate();
        require_same_shape(f.pixels, frames[1].pixels, "scene '" + id + "'");
    }
    if (!(frames[0].ev < frames[1].ev && frames[1].ev < frames[2].ev)) {
        throw DataError("scene '" + id + "': exposure values must be strictly increasing");
    }
    if (ground_truth && !ground_truth->pixels.same_shape(frames[1].pixels)) {
        throw DataError("scene '" + id + "': ground truth shape differs from the frames");
    }
}

} // namespace selfhdr
