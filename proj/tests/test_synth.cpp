#include "lfr/error.hpp"
#include "lfr/synth.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <limits>

namespace lfr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(Project, OriginMapsToCentre) {
    const Projection p = project({1, 1}, {0, 0, 1}, 0, 0);
    EXPECT_DOUBLE_EQ(p.s, 0.0);
    EXPECT_DOUBLE_EQ(p.t, 0.0);
    EXPECT_DOUBLE_EQ(p.d, 1.0);
}

TEST(Project, OffAxisPoint) {
    const Projection p = project({1, 1}, {2, 0, 2}, 0, 0);
    EXPECT_DOUBLE_EQ(p.s, 1.0);
    EXPECT_DOUBLE_EQ(p.t, 0.0);
    EXPECT_DOUBLE_EQ(p.d, 0.5);
}

TEST(Project, UnitViewStepShiftsByMinusFOverZ) {
    const ScenePoint p{2, 0, 2};
    EXPECT_DOUBLE_EQ(project({1, 1}, p, 1, 0).s - project({1, 1}, p, 0, 0).s, -0.5);
}

// s + (f/B) d u is the same for every view: the light-ray constraint.
TEST(Project, RayConstraintHolds) {
    const CameraModel cam{1.7, 0.6};
    const ScenePoint p{0.3, -1.2, 3.1};
    const Projection p0 = project(cam, p, 0, 0);
    for (double u : {-2.0, 0.5, 4.0}) {
        const Projection pu = project(cam, p, u, 0);
        EXPECT_NEAR(pu.s + cam.f / cam.B * pu.d * u, p0.s, 1e-12);
        EXPECT_DOUBLE_EQ(pu.d, p0.d);
    }
}

TEST(Project, RejectsNonPositiveDepth) {
    EXPECT_THROW(project({1, 1}, {0, 0, 0}, 0, 0), InvalidArgument);
    EXPECT_THROW(project({1, 1}, {0, 0, -1}, 0, 0), InvalidArgument);
}

TEST(AnalyticSlope, Values) {
    EXPECT_DOUBLE_EQ(analytic_slope({2, 1}, 4), -0.5);
    EXPECT_EQ(analytic_slope({1, 1}, kInf), 0.0);
    EXPECT_DOUBLE_EQ(slope_from_disparity({1, 1}, 1.5), -1.5);
    EXPECT_DOUBLE_EQ(analytic_slope({3, 2}, 5), slope_from_disparity({3, 2}, disparity_from_depth({3, 2}, 5)));
    EXPECT_THROW(analytic_slope({1, 1}, 0), InvalidArgument);
    EXPECT_THROW(analytic_slope({1, 1}, -2), InvalidArgument);
}

TEST(Render, PlaneAtInfinityGivesIdenticalViews) {
    const auto scene = test::single_plane(kInf, procedural_texture(12, 20, 1, 4));
    const LightField lf = render_dense_lightfield(scene, {1, 1}, {7, 3, 20, 12}, 1.0);
    for (int u = 0; u < 7; ++u)
        for (int v = 0; v < 3; ++v) EXPECT_TRUE(lf.view(u, v) == lf.view(0, 0));
    const Epi epi = extract_epi(lf, 1, 5);
    for (int c = 0; c < 3; ++c)
        for (int s = 0; s < 20; ++s) EXPECT_TRUE((epi.pixels.channel[c].col(s).array() == epi.pixels.channel[c](0, s)).all());
}

TEST(Render, IntegerSlopeShiftsTextureRows) {
    constexpr int ns = 16, nt = 6, nu = 6;
    const Image tex = test::random_image(nt, ns + 10, 2);
    const LightField lf = render_dense_lightfield(test::single_plane(1.0, tex), {1, 1}, {nu, 1, ns, nt}, 1.0);
    // Texture column of pixel s in view u: s + u + (W - ns) / 2.
    for (int u = 0; u < nu; ++u)
        for (int t = 0; t < nt; ++t)
            for (int s = 0; s < ns; ++s)
                for (int c = 0; c < 3; ++c) ASSERT_EQ(lf(u, 0, s, t, c), tex.channel[c](t, s + u + 5));
}

TEST(Render, NearSquareOccludesFarPlane) {
    constexpr int ns = 16, nt = 8, nu = 9;
    SceneSpec scene;
    Layer far;
    far.depth = 2.0;
    far.texture = test::solid_image(nt, 64, 0.2f, 0.4f, 0.6f);
    Layer near;
    near.depth = 1.0;
    near.texture = test::solid_image(nt, 8, 0.9f, 0.1f, 0.3f);
    scene.layers = {far, near};
    const LightField lf = render_dense_lightfield(scene, {1, 1}, {nu, 1, ns, nt}, 1.0);
    const Epi epi = extract_epi(lf, 0, 3);
    for (int u = 0; u < nu; ++u) {
        int covered = 0;
        for (int s = 0; s < ns; ++s) {
            // Near texture column s + u + 3.5 - 7.5 must fall inside [0, 8).
            const int col = s + u - 4;
            const bool near_wins = col >= 0 && col < 8;
            covered += near_wins;
            EXPECT_EQ(epi.pixels.channel[0](u, s), near_wins ? 0.9f : 0.2f) << "u=" << u << " s=" << s;
            EXPECT_EQ(epi.pixels.channel[2](u, s), near_wins ? 0.3f : 0.6f);
        }
        EXPECT_EQ(covered, std::min(8, std::max(0, 12 - u) - std::max(0, 4 - u)));
    }
}

TEST(Render, OutsideTextureIsBackground) {
    SceneSpec scene = test::single_plane(1.0, test::solid_image(2, 2, 1, 1, 1));
    scene.background = {0.25f, 0.5f, 0.75f};
    const LightField lf = render_dense_lightfield(scene, {1, 1}, {1, 1, 10, 10}, 1.0);
    EXPECT_EQ(lf(0, 0, 0, 0, 0), 0.25f);
    EXPECT_EQ(lf(0, 0, 9, 9, 2), 0.75f);
    EXPECT_EQ(lf(0, 0, 5, 5, 1), 1.0f);
}

TEST(Render, RejectsEmptyOrUnorderedScene) {
    EXPECT_THROW(render_dense_lightfield(SceneSpec{}, {1, 1}, {1, 1, 4, 4}, 1.0), InvalidArgument);
    SceneSpec scene;
    Layer a;
    a.depth = 1.0;
    a.texture = test::solid_image(2, 2, 0, 0, 0);
    Layer b = a;
    b.depth = 2.0;
    scene.layers = {a, b};
    EXPECT_THROW(render_dense_lightfield(scene, {1, 1}, {1, 1, 4, 4}, 1.0), InvalidArgument);
}

TEST(Render, FittedSlopeMatchesAnalytic) {
    const CameraModel cam{1, 1};
    for (double depth : {1.0, 1.5, 2.0, 4.0, 8.0}) {
        const auto scene = test::single_plane(depth, test::stripe_texture(4, 128, 63.5, 1.5));
        const LightField lf = render_dense_lightfield(scene, cam, {33, 1, 96, 4}, 1.0, {-16.0, 0.0});
        const double slope = test::fitted_slope(extract_epi(lf, 0, 1), lf.du());
        EXPECT_NEAR(slope / analytic_slope(cam, depth), 1.0, 0.01) << "depth " << depth;
    }
}

// Moving the view plane by tx resamples every EPI row by (f/Z) tx. Integer
// shifts are checked on a random texture; fractional ones on a linear ramp,
// where resampling an interpolated row is itself exact.
void check_translation(const Image& texture, double depth, double tx, float tol) {
    const CameraModel cam{1.3, 1};
    constexpr int ns = 48;
    const auto scene = test::single_plane(depth, texture);
    const LightField base = render_dense_lightfield(scene, cam, {9, 1, ns, 4}, 1.0);
    const LightField moved = render_dense_lightfield(scene, cam, {9, 1, ns, 4}, 1.0, {tx, 0});
    const double shift = cam.f / depth * tx;
    const Epi e0 = extract_epi(base, 0, 2);
    const Epi e1 = extract_epi(moved, 0, 2);
    float worst = 0.f;
    for (int u = 0; u < 9; ++u)
        for (int s = 0; s + int(std::ceil(shift)) < ns; ++s)
            for (int c = 0; c < 3; ++c)
                worst = std::max(worst, std::abs(e1.pixels.channel[c](u, s) -
                                                 test::lerp_row(e0.pixels.channel[c], u, s + shift)));
    EXPECT_LE(worst, tol) << "depth " << depth << " tx " << tx;
}

TEST(Render, TranslationConsistency) {
    const Image random = procedural_texture(4, 160, 3, 6);
    check_translation(random, 1.3, 1.0, 1e-6f);
    check_translation(random, 1.3, 2.0, 1e-6f);
    check_translation(random, 2.6, 2.0, 1e-6f);
    Image ramp(4, 160);
    for (int x = 0; x < 160; ++x)
        for (auto& c : ramp.channel) c.col(x).setConstant(float(x) / 159.f);
    for (double depth : {1.0, 2.6})
        for (double tx : {0.4, 1.0, 2.3}) check_translation(ramp, depth, tx, 1e-5f);
}

TEST(Render, OccludingLayerWinsOnRandomScenes) {
    RandomSceneOptions o;
    o.nu = 18;
    o.ns = 32;
    o.nt = 8;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SceneSpec scene = random_scene(seed, o);
        ASSERT_GE(scene.layers.size(), 2u);
        // Give the nearest layer a unique colour and check it is never
        // covered by anything else wherever its mask is opaque.
        Layer& near = scene.layers.back();
        near.texture = test::solid_image(int(near.texture.rows()), int(near.texture.cols()), 1.f, 0.f, 1.f);
        const LightField lf = render_dense_lightfield(scene, o.camera, {o.nu, 1, o.ns, o.nt}, 1.0);
        const double scale = o.camera.f / near.depth;
        for (int u = 0; u < o.nu; ++u)
            for (int t = 0; t < o.nt; ++t)
                for (int s = 0; s < o.ns; ++s) {
                    const double col = s + (u - near.offset_x) * scale + 0.5 * (near.texture.cols() - 1) - 0.5 * (o.ns - 1);
                    const double row = t + (0 - near.offset_y) * scale + 0.5 * (near.texture.rows() - 1) - 0.5 * (o.nt - 1);
                    const int r = int(std::floor(row)), c = int(std::floor(col));
                    bool solid = true;
                    for (int dr = 0; dr < 2; ++dr)
                        for (int dc = 0; dc < 2; ++dc) {
                            const int rr = r + dr, cc = c + dc;
                            solid = solid && rr >= 0 && cc >= 0 && rr < near.texture.rows() &&
                                    cc < near.texture.cols() && near.opacity(rr, cc) == 1.f;
                        }
                    if (!solid) continue;
                    ASSERT_EQ(lf(u, 0, s, t, 0), 1.f);
                    ASSERT_EQ(lf(u, 0, s, t, 1), 0.f);
                }
    }
}

TEST(RandomScene, DeterministicAndCovering) {
    RandomSceneOptions o;
    o.nu = 27;
    o.ns = 32;
    o.nt = 16;
    const SceneSpec a = random_scene(7, o);
    const SceneSpec b = random_scene(7, o);
    const LightField la = render_dense_lightfield(a, o.camera, {o.nu, 1, o.ns, o.nt}, 1.0);
    EXPECT_TRUE(la == render_dense_lightfield(b, o.camera, {o.nu, 1, o.ns, o.nt}, 1.0));
    // The background plane covers every view, so the flat background colour
    // never shows through.
    for (int u = 0; u < o.nu; ++u) {
        const Image view = la.view(u, 0);
        EXPECT_FALSE(((view.channel[0].array() == 0.5f) && (view.channel[1].array() == 0.5f) &&
                      (view.channel[2].array() == 0.5f))
                         .any());
    }
    for (const auto& layer : a.layers) {
        const double slope = -analytic_slope(o.camera, layer.depth);
        EXPECT_GE(slope, o.min_slope - 1e-12);
        EXPECT_LE(slope, o.max_slope + 1e-12);
    }
}

TEST(LoadScene, ParsesLayersAndSortsByDepth) {
    test::TempDir dir("scene");
    std::ofstream(dir / "scene.json") << R"({
        "background": [0.1, 0.2, 0.3],
        "layers": [
            {"depth": 1.0, "texture": {"solid": [1, 0, 0], "rows": 4, "cols": 4}, "mask": {"rect": [1, 1, 3, 3]}},
            {"depth": "inf", "texture": {"procedural": {"rows": 8, "cols": 8, "seed": 3}}, "offset": [0.5, 0]}
        ]})";
    const SceneSpec scene = load_scene(dir / "scene.json");
    ASSERT_EQ(scene.layers.size(), 2u);
    EXPECT_TRUE(std::isinf(scene.layers[0].depth));
    EXPECT_EQ(scene.layers[0].offset_x, 0.5);
    EXPECT_EQ(scene.layers[1].depth, 1.0);
    EXPECT_EQ(scene.layers[1].opacity.sum(), 4.f);
    EXPECT_EQ(scene.background[2], 0.3f);
}

TEST(LoadScene, Errors) {
    test::TempDir dir("scene_err");
    EXPECT_THROW(load_scene(dir / "absent.json"), IoError);
    std::ofstream(dir / "bad.json") << R"({"layers": [{"depth": 1.0}]})";
    EXPECT_THROW(load_scene(dir / "bad.json"), FormatError);
    std::ofstream(dir / "neg.json") << R"({"layers": [{"depth": -1.0, "texture": {"solid": [1,1,1], "rows": 2, "cols": 2}}]})";
    EXPECT_THROW(load_scene(dir / "neg.json"), InvalidArgument);
}

} // namespace
} // namespace lfr
