#include "oracles.hpp"

#include "selfhdr/error.hpp"
#include "selfhdr/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace selfhdr;

TEST(Psnr, IdenticalIsInfinite)
{
    const Image a = oracle::random_image(8, 8, 3, 1);
    EXPECT_TRUE(std::isinf(psnr(a, a)));
    EXPECT_TRUE(std::isinf(psnr_u(a, a)));
}

TEST(Psnr, ConstantOffsetIsTwentyDb)
{
    const Image a(8, 8, 3, 0.3);
    const Image b(8, 8, 3, 0.4);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Psnr, Symmetric)
{
    const Image a = oracle::random_image(8, 8, 3, 2);
    const Image b = oracle::random_image(8, 8, 3, 3);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
    EXPECT_EQ(psnr_u(a, b), psnr_u(b, a));
}

TEST(Psnr, MatchesOracle)
{
    for (std::uint64_t s = 0; s < 50; ++s) {
        const Image a = oracle::random_image(8, 8, 3, s);
        const Image b = oracle::random_image(8, 8, 3, s + 500);
        EXPECT_NEAR(psnr_l(a, b), oracle::psnr(a, b), 1e-9);
        EXPECT_NEAR(psnr_u(a, b), oracle::psnr_u(a, b, 5000.0), 1e-9);
    }
}

TEST(Psnr, ToneMappedDiffersFromLinear)
{
    const Image a = oracle::random_image(16, 16, 3, 4);
    const Image b = oracle::random_image(16, 16, 3, 5);
    EXPECT_GT(std::abs(psnr_u(a, b) - psnr_l(a, b)), 0.1);
}

TEST(Psnr, MonotoneInNoiseLevel)
{
    const Image gt = oracle::random_image(32, 32, 3, 6, 0.05, 0.95);
    const Image noise = oracle::random_image(32, 32, 3, 7, -1.0, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double level : {0.001, 0.005, 0.01, 0.02, 0.05}) {
        Image noisy = gt;
        for (std::size_t i = 0; i < gt.size(); ++i) noisy.data()[i] = gt.data()[i] + level * noise.data()[i];
        const double p = psnr_u(noisy, gt);
        EXPECT_LE(p, prev);
        prev = p;
    }
}

TEST(Psnr, ShapeMismatch)
{
    EXPECT_THROW((void)psnr(Image(4, 4, 3), Image(4, 4, 1)), InputError);
}

TEST(Ssim, IdenticalIsOne)
{
    const Image a = oracle::random_image(32, 32, 3, 8);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, InvertedImageIsDissimilar)
{
    const Image a = oracle::random_image(32, 32, 3, 9);
    Image inv = a;
    for (double& v : inv.data()) v = 1.0 - v;
    EXPECT_LT(ssim(a, inv), 0.5);
}

TEST(Ssim, NearlyInvariantToCommonOffset)
{
    const Image a = oracle::random_image(32, 32, 3, 10, 0.0, 0.9);
    const Image b = oracle::random_image(32, 32, 3, 11, 0.0, 0.9);
    Image a2 = a;
    Image b2 = b;
    for (double& v : a2.data()) v += 0.05;
    for (double& v : b2.data()) v += 0.05;
    EXPECT_LT(std::abs(ssim(a, b) - ssim(a2, b2)), 1e-3);
}

TEST(Ssim, RangeAndSmallInputs)
{
    const double s = ssim(oracle::random_image(16, 16, 3, 12), oracle::random_image(16, 16, 3, 13));
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    EXPECT_THROW((void)ssim(Image(8, 8, 3), Image(8, 8, 3)), InputError);
}

TEST(MetricReport, MeansAndJsonRoundTrip)
{
    const Image gt = oracle::random_image(16, 16, 3, 14);
    const Image p = oracle::random_image(16, 16, 3, 15);
    auto r = MetricReport::from_scenes({evaluate_scene("a", p, gt), evaluate_scene("b", gt, gt)});
    EXPECT_TRUE(std::isinf(r.scenes[1].psnr_u));
    EXPECT_NEAR(r.mean.ssim_u, (r.scenes[0].ssim_u + 1.0) / 2.0, 1e-12);
    const MetricReport back = MetricReport::from_json(r.to_json());
    ASSERT_EQ(back.scenes.size(), 2u);
    EXPECT_EQ(back.scenes[0].psnr_l, r.scenes[0].psnr_l);
    EXPECT_TRUE(std::isinf(back.scenes[1].psnr_u));
    EXPECT_FALSE(back.hdr_vdp2.has_value());
    EXPECT_NE(r.table_row("Ours").find("Ours"), std::string::npos);
}
