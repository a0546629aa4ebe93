#include "oracles.hpp"

#include "selfhdr/alignment.hpp"
#include "selfhdr/data.hpp"
#include "selfhdr/error.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace selfhdr;

namespace {

double mean_epe(const FlowField& f, double dx, double dy, int margin)
{
    double sum = 0.0;
    int n = 0;
    for (int y = margin; y < f.height() - margin; ++y) {
        for (int x = margin; x < f.width() - margin; ++x) {
            sum += std::hypot(f.dx(y, x) - dx, f.dy(y, x) - dy);
            ++n;
        }
    }
    return sum / n;
}

// Reference frame of a textured static synthetic scene.
ExposureImage textured_reference(std::uint64_t seed)
{
    return synthesize_scene(random_synthetic_spec(MotionKind::none, 64, 0.0, seed)).frames[1];
}

// Content moved by (dx, dy): out(p) = ref(p - d), borders replicated.
ExposureImage translated(const ExposureImage& ref, double dx, double dy)
{
    ExposureImage out = ref;
    out.pixels = warp(ref.pixels, FlowField::constant(ref.pixels.height(), ref.pixels.width(), -dx, -dy));
    return out;
}

} // namespace

TEST(Warp, ZeroFlowIsBitExactIdentity)
{
    const Image src = oracle::random_image(9, 7, 3, 1);
    const Image out = warp(src, FlowField::zeros(9, 7));
    EXPECT_EQ(out.data(), src.data());
}

TEST(Warp, IntegerFlowShiftsColumnsWithReplicatedBorder)
{
    const Image src = oracle::random_image(5, 6, 2, 2);
    const Image out = warp(src, FlowField::constant(5, 6, 1.0, 0.0));
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 6; ++x) EXPECT_EQ(out.at(c, y, x), src.at(c, y, std::min(x + 1, 5)));
}

TEST(Warp, HalfPixelFlowAveragesColumns)
{
    Image src(1, 2, 1);
    src.at(0, 0, 0) = 0.2;
    src.at(0, 0, 1) = 0.6;
    const Image out = warp(src, FlowField::constant(1, 2, 0.5, 0.0));
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0), 0.4);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 1), 0.6);
}

TEST(Warp, LinearInSource)
{
    const Image u = oracle::random_image(8, 8, 3, 3);
    const Image v = oracle::random_image(8, 8, 3, 4);
    FlowField f{oracle::random_image(8, 8, 2, 5, -3.0, 3.0)};
    Image mix(8, 8, 3);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = 2.0 * u.data()[i] - 0.5 * v.data()[i];
    const Image wu = warp(u, f);
    const Image wv = warp(v, f);
    const Image wm = warp(mix, f);
    for (std::size_t i = 0; i < mix.size(); ++i)
        EXPECT_NEAR(wm.data()[i], 2.0 * wu.data()[i] - 0.5 * wv.data()[i], 1e-6);
}

TEST(Warp, ShapeMismatchThrows)
{
    EXPECT_THROW((void)warp(Image(4, 4, 3), FlowField::zeros(4, 5)), InputError);
}

TEST(ExposureCompensate, Examples)
{
    const auto src = oracle::exposure(oracle::random_image(4, 4, 3, 6, 0.0, 0.5), -2.0);
    const auto same = exposure_compensate(src, -2.0, {});
    for (std::size_t i = 0; i < src.pixels.size(); ++i) EXPECT_NEAR(same.pixels.data()[i], src.pixels.data()[i], 1e-12);

    const auto bright = exposure_compensate(oracle::exposure(Image(2, 2, 3, 0.532617), -2.0), 0.0, {});
    EXPECT_NEAR(bright.pixels.at(0, 0, 0), 1.0, 1e-5);
    EXPECT_EQ(bright.ev, 0.0);

    const auto black = exposure_compensate(oracle::exposure(Image(2, 2, 3, 0.0), -2.0), 0.0, {});
    EXPECT_EQ(black.pixels.max_value(), 0.0);
}

TEST(EstimateFlow, IdenticalFramesGiveZeroFlow)
{
    const auto ref = textured_reference(11);
    const FlowField f = estimate_flow(ref, ref, {});
    EXPECT_LT(mean_epe(f, 0.0, 0.0, 0), 0.05);
}

TEST(EstimateFlow, RecoversThreePixelShift)
{
    const auto ref = textured_reference(12);
    const FlowField f = estimate_flow(ref, translated(ref, 3.0, 0.0), {});
    EXPECT_LT(mean_epe(f, 3.0, 0.0, 8), 0.5);
}

TEST(EstimateFlow, CompensatedDarkFrameNoWorseThanTwiceEqualBrightness)
{
    const RadiometryConfig cfg;
    const auto ref = textured_reference(13);
    const auto moved = translated(ref, 3.0, 0.0);
    const double base = mean_epe(estimate_flow(ref, moved, {}), 3.0, 0.0, 8);

    const ExposureImage dark = delinearize(linearize(moved, 0.0, cfg), -2.0, cfg);
    const auto compensated = exposure_compensate(dark, 0.0, cfg);
    const double scaled = mean_epe(estimate_flow(ref, compensated, {}), 3.0, 0.0, 8);
    EXPECT_LE(scaled, 2.0 * base + 1e-9) << "equal-brightness EPE " << base;
}

TEST(EstimateFlow, RequantizedDarkFrameStaysSubPixel)
{
    const RadiometryConfig cfg;
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const auto ref = textured_reference(seed);
        ExposureImage dark = delinearize(linearize(translated(ref, 3.0, 0.0), 0.0, cfg), -2.0, cfg);
        for (double& v : dark.pixels.data()) v = std::round(v * 255.0) / 255.0;
        const auto compensated = exposure_compensate(dark, 0.0, cfg);
        EXPECT_LT(mean_epe(estimate_flow(ref, compensated, {}), 3.0, 0.0, 8), 0.1) << "seed " << seed;
    }
}

TEST(EstimateFlow, Deterministic)
{
    const auto ref = textured_reference(14);
    const auto src = translated(ref, 1.5, -2.0);
    EXPECT_EQ(estimate_flow(ref, src, {}).vectors.data(), estimate_flow(ref, src, {}).vectors.data());
}

TEST(EstimateFlow, GlobalShiftsUpToFivePixels)
{
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::global_shift, 64, 5.0, 300 + seed));
        const auto est = make_flow_estimator({});
        const AlignedStack a = align_stack(s.frames, *est, {});
        for (int k = 0; k < 2; ++k) {
            const auto& truth = (*s.true_flows)[k];
            EXPECT_LT(mean_epe(a.flows[k], truth.dx(0, 0), truth.dy(0, 0), 8), 0.5) << "seed " << seed << " frame " << k;
        }
    }
}

TEST(AlignStack, StaticStackNearlyUnchanged)
{
    const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::none, 64, 0.0, 21));
    const auto est = make_flow_estimator({});
    const RadiometryConfig cfg;
    const AlignedStack a = align_stack(s.frames, *est, cfg);
    for (int k : {0, 2}) {
        const auto h = linearize(s.frames[k], s.frames[1].ev, cfg);
        double mad = 0.0;
        for (std::size_t i = 0; i < h.pixels.size(); ++i) mad += std::abs(h.pixels.data()[i] - a.linear[k].pixels.data()[i]);
        EXPECT_LT(mad / h.pixels.size(), 0.01);
    }
}

TEST(AlignStack, ReferenceUntouchedAndShapesPreserved)
{
    const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::moving_rect, 48, 4.0, 22));
    const auto est = make_flow_estimator({});
    const AlignedStack a = align_stack(s.frames, *est, {});
    EXPECT_EQ(a.ldr[1].pixels.data(), s.frames[1].pixels.data());
    for (int k = 0; k < 3; ++k) {
        EXPECT_TRUE(a.ldr[k].pixels.same_shape(s.frames[k].pixels));
        EXPECT_TRUE(a.linear[k].pixels.same_shape(s.frames[k].pixels));
    }
}

TEST(AlignStack, ReducesMisalignmentFiveFold)
{
    const RadiometryConfig cfg;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        SyntheticSpec spec = random_synthetic_spec(MotionKind::global_shift, 64, 5.0, 400 + seed);
        spec.displacement1 = {3.0, 0.0};
        const Scene moving = synthesize_scene(spec);
        spec.motion = MotionKind::none;
        const Scene still = synthesize_scene(spec);
        const auto est = make_flow_estimator({});
        const AlignedStack a = align_stack(moving.frames, *est, cfg);
        const auto target = linearize(still.frames[0], 0.0, cfg).pixels;
        const auto before = linearize(moving.frames[0], 0.0, cfg).pixels;
        double mae_before = 0.0;
        double mae_after = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) {
            mae_before += std::abs(before.data()[i] - target.data()[i]);
            mae_after += std::abs(a.linear[0].pixels.data()[i] - target.data()[i]);
        }
        EXPECT_GE(mae_before, 5.0 * mae_after) << "seed " << seed;
    }
}

TEST(FlowEstimatorSpec, Validation)
{
    FlowEstimatorSpec spec;
    spec.levels = 0;
    EXPECT_THROW(spec.validate(), InputError);
    spec = {};
    spec.algorithm = "farneback";
    EXPECT_THROW((void)make_flow_estimator(spec), InputError);
    spec = {};
    spec.smoothness = -1.0;
    EXPECT_THROW(spec.validate(), InputError);
}
