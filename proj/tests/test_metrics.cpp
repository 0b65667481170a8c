#include "lfr/error.hpp"
#include "lfr/image_io.hpp"
#include "lfr/metrics.hpp"
#include "lfr/sampling.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

namespace lfr {
namespace {

TEST(Psnr, IdenticalImagesAreCappedAndExact) {
    const Image a = test::random_image(8, 9, 1);
    const PsnrResult r = psnr(a, a);
    EXPECT_EQ(r.db, kPsnrCap);
    EXPECT_TRUE(r.exact);
}

TEST(Psnr, UniformDifferenceClosedForm) {
    const Image a = test::solid_image(16, 16, 0.5f, 0.25f, 0.75f);
    const Image b = test::solid_image(16, 16, 0.5f + 16.f / 255.f, 0.25f - 16.f / 255.f, 0.75f + 16.f / 255.f);
    const PsnrResult r = psnr(a, b);
    EXPECT_FALSE(r.exact);
    EXPECT_NEAR(r.db, 24.05, 0.01);
    EXPECT_NEAR(r.db, 10.0 * std::log10(255.0 * 255.0 / 256.0), 1e-4);
}

TEST(Psnr, CheckerboardAgainstBlack) {
    Image a(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (auto& c : a.channel) c(y, x) = float((x + y) % 2);
    EXPECT_NEAR(psnr(a, Image(8, 8)).db, 10.0 * std::log10(2.0), 1e-12);
}

TEST(Psnr, SymmetricAndPeak) {
    const Image a = test::random_image(10, 12, 2);
    const Image b = test::random_image(10, 12, 3);
    EXPECT_EQ(psnr(a, b).db, psnr(b, a).db);
    EXPECT_NEAR(psnr(a, b, 2.0).db - psnr(a, b).db, 20.0 * std::log10(2.0), 1e-9);
    EXPECT_THROW(psnr(a, Image(10, 11)), InvalidArgument);
    EXPECT_THROW(psnr(a, b, 0.0), InvalidArgument);
}

TEST(Ssim, IdentityIsExactlyOne) {
    for (std::uint64_t seed : {4u, 5u, 6u}) {
        const Image a = test::random_image(20, 31, seed);
        EXPECT_EQ(ssim(a, a), 1.0);
    }
}

TEST(Ssim, InvertedBinaryImageIsNegative) {
    Image a(24, 24);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            for (auto& c : a.channel) c(y, x) = float(((x / 3) + (y / 2)) % 2);
    Image b = a;
    for (auto& c : b.channel) c = (1.f - c.array()).matrix();
    EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, ConstantImagesLuminanceTermOnly) {
    const double m1 = 0.3, m2 = 0.6;
    const Image a = test::solid_image(16, 16, float(m1), float(m1), float(m1));
    const Image b = test::solid_image(16, 16, float(m2), float(m2), float(m2));
    const double c1 = 0.01 * 0.01;
    const double mu1 = double(float(m1)), mu2 = double(float(m2));
    EXPECT_NEAR(ssim(a, b), (2 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1), 1e-9);
}

TEST(Ssim, SymmetricBoundedAndSizeChecked) {
    const Image a = test::random_image(15, 40, 7);
    const Image b = test::random_image(15, 40, 8);
    const double s = ssim(a, b);
    EXPECT_DOUBLE_EQ(s, ssim(b, a));
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    EXPECT_THROW(ssim(Image(10, 40), Image(10, 40)), InvalidArgument);
    EXPECT_THROW(ssim(a, Image(15, 41)), InvalidArgument);
}

// Reference SSIM computed directly from the definition over every 11x11
// window, with explicit Gaussian weights.
TEST(Ssim, MatchesDirectDefinition) {
    const Image a = test::random_image(13, 14, 9);
    const Image b = test::random_image(13, 14, 10);
    auto luma = [](const Image& im, int y, int x) {
        return 0.299 * im.channel[0](y, x) + 0.587 * im.channel[1](y, x) + 0.114 * im.channel[2](y, x);
    };
    double wsum = 0.0;
    double w[11][11];
    for (int i = 0; i < 11; ++i)
        for (int k = 0; k < 11; ++k) wsum += w[i][k] = std::exp(-((i - 5) * (i - 5) + (k - 5) * (k - 5)) / 4.5);
    double total = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + 11 <= 13; ++y0)
        for (int x0 = 0; x0 + 11 <= 14; ++x0) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int i = 0; i < 11; ++i)
                for (int k = 0; k < 11; ++k) {
                    const double g = w[i][k] / wsum;
                    const double x = luma(a, y0 + i, x0 + k), y = luma(b, y0 + i, x0 + k);
                    mx += g * x;
                    my += g * y;
                    xx += g * x * x;
                    yy += g * y * y;
                    xy += g * x * y;
                }
            const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
            const double c1 = 1e-4, c2 = 9e-4;
            total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    EXPECT_NEAR(ssim(a, b), total / count, 1e-10);
}

TEST(L1Map, Examples) {
    const Image a = test::random_image(6, 7, 11);
    const L1ErrorMap same = l1_error_map(a, a);
    EXPECT_TRUE((same.map.array() == 0.f).all());
    EXPECT_EQ(same.stats.max, 0.0);

    Image b = a;
    b.channel[1](2, 3) += 0.3f;
    const L1ErrorMap one = l1_error_map(a, b);
    EXPECT_NEAR(one.map(2, 3), 0.1, 1e-6);
    EXPECT_EQ(one.map.cwiseAbs().sum(), one.map(2, 3));
    EXPECT_NEAR(one.stats.max, 0.1, 1e-6);

    const Image c = test::random_image(6, 7, 12);
    const L1ErrorMap diff = l1_error_map(a, c);
    double global = 0.0;
    for (int ch = 0; ch < 3; ++ch) global += (a.channel[ch] - c.channel[ch]).cwiseAbs().cast<double>().sum();
    EXPECT_NEAR(diff.stats.mean, global / (3.0 * 42.0), 1e-7);
    EXPECT_THROW(l1_error_map(a, Image(6, 6)), InvalidArgument);
}

TEST(L1Map, NearestRankPercentile) {
    Image a(1, 20), b(1, 20);
    for (int x = 0; x < 20; ++x) a.channel[0](0, x) = 0.03f * float(x + 1);   // map = 0.01 * (x + 1)
    const L1ErrorMap m = l1_error_map(a, b);
    EXPECT_NEAR(m.stats.p95, 0.19, 1e-6);   // rank ceil(0.95 * 20) = 19
    EXPECT_NEAR(m.stats.max, 0.20, 1e-6);
}

LightField smooth_field(int nu, std::uint64_t seed) { return test::random_lightfield({nu, 1, 16, 12}, seed); }

TEST(Evaluate, PerfectReconstruction) {
    const LightField truth = smooth_field(36, 13);
    const auto mask = apply_pattern(truth, SamplingPattern::from_name("A")).reconstructed_view_mask();
    const EvalReport r = evaluate_reconstruction(truth, truth, mask);
    EXPECT_EQ(r.views.size(), 18u);
    EXPECT_EQ(r.exact_views, 18);
    EXPECT_EQ(r.mean_psnr, kPsnrCap);
    EXPECT_EQ(r.mean_ssim, 1.0);
    EXPECT_EQ(r.mean_l1, 0.0);
}

TEST(Evaluate, MeansAreMeansOfReportedViews) {
    const LightField truth = smooth_field(45, 14);
    const LightField recon = smooth_field(45, 15);
    const auto mask = apply_pattern(truth, SamplingPattern::from_name("B")).reconstructed_view_mask();
    const EvalReport r = evaluate_reconstruction(recon, truth, mask, {2, "test", "B"});
    ASSERT_EQ(r.views.size(), 27u);
    double p = 0, s = 0, l = 0;
    for (const auto& v : r.views) {
        EXPECT_EQ(mask[std::size_t(v.u)], 1);
        p += v.psnr.db;
        s += v.ssim;
        l += v.l1.mean;
    }
    EXPECT_NEAR(r.mean_psnr, p / 27, 1e-12);
    EXPECT_NEAR(r.mean_ssim, s / 27, 1e-12);
    EXPECT_NEAR(r.mean_l1, l / 27, 1e-12);
}

TEST(Evaluate, MarginExcludesBoundaryColumns) {
    const LightField truth = smooth_field(36, 16);
    LightField recon = truth;
    for (int u = 0; u < 36; ++u) recon(u, 0, 0, 5, 1) = 1.f - truth(u, 0, 0, 5, 1);
    const auto mask = apply_pattern(truth, SamplingPattern::from_name("A")).reconstructed_view_mask();
    EXPECT_EQ(evaluate_reconstruction(recon, truth, mask).exact_views, 0);
    EXPECT_EQ(evaluate_reconstruction(recon, truth, mask, {1}).exact_views, 18);
    EXPECT_THROW(evaluate_reconstruction(recon, truth, mask, {8}), InvalidArgument);
}

TEST(Evaluate, Errors) {
    const LightField truth = smooth_field(36, 17);
    const std::vector<std::uint8_t> empty(36, 0);
    EXPECT_THROW(evaluate_reconstruction(truth, truth, empty), InvalidArgument);
    const auto mask = apply_pattern(truth, SamplingPattern::from_name("A")).reconstructed_view_mask();
    EXPECT_THROW(evaluate_reconstruction(smooth_field(45, 18), truth, mask), InvalidArgument);
    EXPECT_THROW(evaluate_reconstruction(truth, truth, std::vector<std::uint8_t>(5, 1)), InvalidArgument);
}

TEST(Report, CsvAndTextRecordVariants) {
    test::TempDir dir("report");
    const LightField truth = smooth_field(36, 19);
    const LightField recon = smooth_field(36, 20);
    const auto mask = apply_pattern(truth, SamplingPattern::from_name("A")).reconstructed_view_mask();
    const EvalReport r = evaluate_reconstruction(recon, truth, mask, {0, "shear", "A"});
    r.write_csv(dir / "r.csv");
    std::ifstream in(dir / "r.csv");
    std::string header, columns;
    std::getline(in, header);
    std::getline(in, columns);
    EXPECT_NE(header.find("method=shear"), std::string::npos);
    EXPECT_NE(header.find("psnr_peak=1.0"), std::string::npos);
    EXPECT_NE(header.find("ssim=gaussian11_sigma1.5_luma"), std::string::npos);
    EXPECT_EQ(columns, "u,v,psnr_db,exact,ssim,l1_mean,l1_max,l1_p95");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    EXPECT_EQ(lines, 19);   // 18 views + mean
    EXPECT_NE(r.to_text().find("pattern: A"), std::string::npos);

    export_error_maps(recon, truth, mask, dir / "maps");
    int maps = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "maps")) {
        ++maps;
        EXPECT_EQ(read_png(e.path()).cols(), 16);
    }
    EXPECT_EQ(maps, 18);
}

} // namespace
} // namespace lfr
