#include "oracles.hpp"

#include "selfhdr/data.hpp"
#include "selfhdr/error.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace selfhdr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name)
{
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST(Exposures, ParsesPlainAndUnicodeMinus)
{
    EXPECT_EQ(parse_exposures("-2 0 2"), (std::vector<double>{-2.0, 0.0, 2.0}));
    EXPECT_EQ(parse_exposures("\xE2\x88\x92" "2 0 2"), (std::vector<double>{-2.0, 0.0, 2.0}));
    EXPECT_EQ(parse_exposures("-3\n0\n3\n"), (std::vector<double>{-3.0, 0.0, 3.0}));
    EXPECT_THROW((void)parse_exposures("-2 zero 2"), DataError);
}

TEST(Synthetic, ExposureTimes)
{
    const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::none, 32, 0.0, 1));
    EXPECT_EQ(exposure_ratio(s.frames[0].ev, s.frames[1].ev), 0.25);
    EXPECT_EQ(exposure_ratio(s.frames[1].ev, s.frames[1].ev), 1.0);
    EXPECT_EQ(exposure_ratio(s.frames[2].ev, s.frames[1].ev), 4.0);
}

TEST(Synthetic, SameSeedIdenticalScene)
{
    const auto spec = random_synthetic_spec(MotionKind::moving_rect, 48, 5.0, 9);
    const Scene a = synthesize_scene(spec);
    const Scene b = synthesize_scene(spec);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(a.frames[k].pixels.data(), b.frames[k].pixels.data());
    EXPECT_EQ(a.ground_truth->pixels.data(), b.ground_truth->pixels.data());
}

TEST(Synthetic, ClippingStructureReproduced)
{
    const RadiometryConfig cfg;
    for (MotionKind kind : {MotionKind::none, MotionKind::global_shift, MotionKind::moving_rect}) {
        const Scene s = synthesize_scene(random_synthetic_spec(kind, 64, 4.0, 3));
        const Image& gt = s.ground_truth->pixels;
        const auto h2 = linearize(s.frames[1], 0.0, cfg);
        const double q = 1.0 / 255.0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            // Quantization error of I maps through d(I^gamma) <= gamma * q.
            EXPECT_NEAR(h2.pixels.data()[i], std::min(gt.data()[i], 1.0), cfg.gamma * q);
        }
        if (kind == MotionKind::none) {
            for (int k : {0, 2}) {
                const double t = exposure_ratio(s.frames[k].ev, 0.0);
                const auto h = linearize(s.frames[k], 0.0, cfg);
                for (std::size_t i = 0; i < gt.size(); ++i)
                    EXPECT_NEAR(h.pixels.data()[i], std::min(gt.data()[i] * t, 1.0) / t, cfg.gamma * q / t);
            }
        }
    }
}

TEST(Synthetic, NonTrivialSaturationAndDarkSupport)
{
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::moving_rect, 64, 5.0, seed));
        const Image& f1 = s.frames[0].pixels;
        const Image& f3 = s.frames[2].pixels;
        long saturated = 0;
        long dark = 0;
        for (std::size_t i = 0; i < f3.size(); ++i) {
            saturated += f3.data()[i] >= 1.0 ? 1 : 0;
            dark += f1.data()[i] <= 2.0 / 255.0 ? 1 : 0;
        }
        EXPECT_GE(static_cast<double>(saturated) / f3.size(), 0.05) << "seed " << seed;
        EXPECT_GE(static_cast<double>(dark) / f1.size(), 0.05) << "seed " << seed;
    }
}

TEST(Synthetic, SpansFourStops)
{
    const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::none, 64, 0.0, 4));
    const Image& gt = s.ground_truth->pixels;
    double lo = 1.0;
    for (double v : gt.data())
        if (v > 0.0) lo = std::min(lo, v);
    EXPECT_GE(std::log2(gt.max_value() / lo), 4.0);
}

TEST(Synthetic, StaticFusionReconstructsGroundTruth)
{
    const RadiometryConfig cfg;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::none, 64, 0.0, 20 + seed));
        std::array<LinearImage, 3> h;
        for (int k = 0; k < 3; ++k) h[k] = linearize(s.frames[k], s.frames[1].ev, cfg);
        const HdrImage y = fuse_color(h[0], h[1], h[2], s.frames[1], cfg);
        double mae = 0.0;
        for (std::size_t i = 0; i < y.pixels.size(); ++i)
            mae += std::abs(tonemap_value(y.pixels.data()[i], cfg.mu) - tonemap_value(s.ground_truth->pixels.data()[i], cfg.mu));
        EXPECT_LE(mae / y.pixels.size(), 2.0 / 255.0);
    }
}

TEST(Synthetic, DisplacementsRecorded)
{
    SyntheticSpec spec = random_synthetic_spec(MotionKind::global_shift, 32, 5.0, 5);
    const Scene s = synthesize_scene(spec);
    ASSERT_TRUE(s.true_flows.has_value());
    EXPECT_DOUBLE_EQ((*s.true_flows)[0].dx(3, 3), spec.displacement1.x);
    EXPECT_DOUBLE_EQ((*s.true_flows)[1].dy(3, 3), spec.displacement3.y);
    spec.displacement1 = {11.0, 0.0};
    EXPECT_THROW((void)synthesize_scene(spec), InputError);
}

TEST(SceneIo, RoundTripWithinQuantization)
{
    const fs::path dir = fresh_dir("selfhdr_scene_rt");
    Scene s = synthesize_scene(random_synthetic_spec(MotionKind::moving_rect, 32, 3.0, 6));
    s.id = "scene_rt";
    save_scene(dir / "scene_rt", s);
    const Scene back = load_scene(dir / "scene_rt");
    for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(back.frames[k].ev, s.frames[k].ev);
        for (std::size_t i = 0; i < s.frames[k].pixels.size(); ++i)
            EXPECT_NEAR(back.frames[k].pixels.data()[i], s.frames[k].pixels.data()[i], 0.5 / 255.0 + 1e-12);
    }
    ASSERT_TRUE(back.ground_truth && back.true_flows && back.motion_mask);
    for (std::size_t i = 0; i < s.ground_truth->pixels.size(); ++i)
        EXPECT_EQ(back.ground_truth->pixels.data()[i], static_cast<double>(static_cast<float>(s.ground_truth->pixels.data()[i])));
    EXPECT_EQ(list_scene_dirs(dir).size(), 1u);
    fs::remove_all(dir);
}

TEST(SceneIo, MissingFrameNamesTheFile)
{
    const fs::path dir = fresh_dir("selfhdr_scene_missing");
    save_scene(dir, synthesize_scene(random_synthetic_spec(MotionKind::none, 16, 0.0, 7)));
    fs::remove(dir / "ldr_3.png");
    try {
        (void)load_scene(dir);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("ldr_3"), std::string::npos) << e.what();
    }
    fs::remove_all(dir);
}

TEST(SceneIo, NonMonotoneExposuresRejected)
{
    const fs::path dir = fresh_dir("selfhdr_scene_evs");
    save_scene(dir, synthesize_scene(random_synthetic_spec(MotionKind::none, 16, 0.0, 8)));
    std::ofstream(dir / "exposures.txt") << "0\n-2\n2\n";
    EXPECT_THROW((void)load_scene(dir), DataError);
    fs::remove_all(dir);
}

TEST(SceneIo, SixteenBitFrames)
{
    const fs::path dir = fresh_dir("selfhdr_ldr16");
    const Image px = oracle::random_image(8, 8, 3, 9);
    write_ldr(dir / "f.png", px, 16);
    const ExposureImage back = read_ldr(dir / "f.png");
    EXPECT_EQ(back.bit_depth, 16);
    for (std::size_t i = 0; i < px.size(); ++i) EXPECT_NEAR(back.pixels.data()[i], px.data()[i], 0.5 / 65535.0 + 1e-12);
    write_ldr(dir / "f.tif", px, 16);
    EXPECT_EQ(read_ldr(dir / "f.tif").pixels.data(), back.pixels.data());
    fs::remove_all(dir);
}

TEST(Rgbe, DecodeExamples)
{
    const auto zero = decode_rgbe({0, 0, 0, 0});
    EXPECT_EQ(zero, (std::array<double, 3>{0.0, 0.0, 0.0}));
    const auto v = decode_rgbe({128, 64, 32, 129});
    EXPECT_EQ(v, (std::array<double, 3>{1.0, 0.5, 0.25}));
}

TEST(Rgbe, DecodeMonotoneInMantissa)
{
    double prev = -1.0;
    for (int m = 0; m < 256; ++m) {
        const double v = decode_rgbe({static_cast<std::uint8_t>(m), 0, 0, 140})[0];
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(Rgbe, FileRoundTripWithinOnePercent)
{
    const fs::path dir = fresh_dir("selfhdr_rgbe");
    Image img(4, 40, 3);
    for (int x = 0; x < 40; ++x) {
        const double v = std::pow(10.0, -3.0 + 6.0 * (x + 0.5) / 40.0);
        for (int y = 0; y < 4; ++y)
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = v * (y == 0 ? 1.0 : 1.0 + 0.01 * c * y);
    }
    write_rgbe(dir / "x.hdr", img);
    const Image back = read_rgbe(dir / "x.hdr");
    ASSERT_TRUE(back.same_shape(img));
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 40; ++x) {
            // The largest channel sets the shared exponent and is kept to 1%.
            const double ref = img.at(2, y, x);
            EXPECT_LE(std::abs(back.at(2, y, x) - ref) / ref, 0.01);
            if (y == 0) EXPECT_LE(std::abs(back.at(0, y, x) - ref) / ref, 0.01);
        }
    }
    fs::remove_all(dir);
}

TEST(Rgbe, RejectsBadMagicAndTruncation)
{
    const fs::path dir = fresh_dir("selfhdr_rgbe_bad");
    std::ofstream(dir / "bad.hdr") << "#?NOTRADIANCE\n\n-Y 1 +X 1\n";
    EXPECT_THROW((void)read_rgbe(dir / "bad.hdr"), DataError);
    write_rgbe(dir / "t.hdr", Image(4, 4, 3, 0.5));
    fs::resize_file(dir / "t.hdr", fs::file_size(dir / "t.hdr") - 10);
    EXPECT_THROW((void)read_rgbe(dir / "t.hdr"), DataError);
    fs::remove_all(dir);
}

TEST(NativeHdr, BitExactRoundTrip)
{
    const fs::path dir = fresh_dir("selfhdr_shdr");
    Image img = oracle::random_image(5, 7, 3, 10, -2.0, 100.0);
    for (double& v : img.data()) v = static_cast<float>(v);
    save_hdr_native(dir / "x.shdr", img);
    EXPECT_EQ(load_hdr_native(dir / "x.shdr").data(), img.data());
    fs::remove_all(dir);
}

TEST(NativeHdr, MinimalFileSizeAndLayout)
{
    const fs::path dir = fresh_dir("selfhdr_shdr_min");
    Image img(1, 1, 3);
    img.at(0, 0, 0) = 1.0;
    img.at(1, 0, 0) = 2.0;
    img.at(2, 0, 0) = 3.0;
    save_hdr_native(dir / "px.shdr", img);
    EXPECT_EQ(fs::file_size(dir / "px.shdr"), 32u);
    std::ifstream in(dir / "px.shdr", std::ios::binary);
    char bytes[32];
    in.read(bytes, 32);
    EXPECT_EQ(std::string(bytes, 4), "SHDR");
    float g;
    std::memcpy(&g, bytes + 24, 4);
    EXPECT_EQ(g, 2.0f);
    fs::remove_all(dir);
}

TEST(NativeHdr, CorruptMagicAndVersionRejected)
{
    const fs::path dir = fresh_dir("selfhdr_shdr_bad");
    save_hdr_native(dir / "x.shdr", Image(2, 2, 3, 0.5));
    {
        std::fstream f(dir / "x.shdr", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XHDR", 4);
    }
    EXPECT_THROW((void)load_hdr_native(dir / "x.shdr"), DataError);
    save_hdr_native(dir / "y.shdr", Image(2, 2, 3, 0.5));
    {
        std::fstream f(dir / "y.shdr", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const char v[4] = {9, 0, 0, 0};
        f.write(v, 4);
    }
    EXPECT_THROW((void)load_hdr_native(dir / "y.shdr"), DataError);
    fs::remove_all(dir);
}
