#pragma once

#include "lfr/core.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lfr {

struct ScenePoint {
    double X = 0.0;
    double Y = 0.0;
    double Z = 1.0;
};

// Image-plane position and disparity of a point seen from view (u, v).
struct Projection {
    double s = 0.0;
    double t = 0.0;
    double d = 0.0;
};

// Lateral offset of a view plane; the rig never moves along Z.
struct Translation {
    double tx = 0.0;
    double ty = 0.0;
};

// Pinhole projection normalised by the homogeneous scale (which equals Z):
// s = f (X - u) / Z, t = f (Y - v) / Z, d = B / Z.
Projection project(const CameraModel& camera, const ScenePoint& p, double u, double v);

// EPI line slope ds/du of a point at depth Z, i.e. -f / Z. Z may be +inf.
double analytic_slope(const CameraModel& camera, double depth);
// Same slope written in terms of disparity: -(f / B) d.
double slope_from_disparity(const CameraModel& camera, double disparity);
double disparity_from_depth(const CameraModel& camera, double depth);

// Fronto-parallel textured plane. Texel (row, col) of the texture sits at
// world offset ((col - (W-1)/2) Z / f + X0, (row - (H-1)/2) Z / f + Y0), so
// the reference view at the origin sees it at one texel per pixel.
struct Layer {
    double depth = 1.0;        // world units, +inf for a plane at infinity
    Image texture;
    MatrixX<float> opacity;    // empty means fully opaque
    double offset_x = 0.0;
    double offset_y = 0.0;
};

// Layers are ordered far to near (nearest last) for painter's compositing.
struct SceneSpec {
    std::vector<Layer> layers;
    std::array<float, 3> background{0.f, 0.f, 0.f};

    void validate() const;
};

// Renders every view (u, v) of a grid whose view plane sits at `origin`
// and steps by `du` in both u and v. Pixels not covered by any layer take
// the background colour.
LightField render_dense_lightfield(const SceneSpec& scene, const CameraModel& camera, const LightFieldDims& grid,
                                   double du, Translation origin = {});

// Scene config file (JSON): background colour and a list of layers, each
// with depth, texture (PNG path or procedural recipe), offset and mask.
SceneSpec load_scene(const std::filesystem::path& path);

// Smooth multi-octave colour noise with values in roughly [0.05, 0.95].
Image procedural_texture(int rows, int cols, std::uint64_t seed, double feature_size);

struct RandomSceneOptions {
    int ns = 64;
    int nt = 64;
    int nu = 99;
    int nv = 1;
    double du = 1.0;
    CameraModel camera;
    double min_slope = 0.15;   // |EPI slope| in pixels per view
    double max_slope = 1.0;
    int min_foreground = 1;
    int max_foreground = 3;
    double feature_size = 12.0;
};

// Background plane plus a few opaque foreground patches at random depths,
// sized so that every view of the requested grid is covered.
SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& options);

} // namespace lfr
