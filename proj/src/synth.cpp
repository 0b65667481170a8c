#include "lfr/synth.hpp"

#include "lfr/detail/parallel.hpp"
#include "lfr/error.hpp"
#include "lfr/image_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace lfr {
namespace {

double inverse_depth(double depth) { return std::isinf(depth) ? 0.0 : 1.0 / depth; }

void check_depth(double depth) {
    if (!(depth > 0.0)) throw InvalidArgument("depth must be > 0");
}

// Premultiplied RGBA sample of a layer; texels outside the texture are
// transparent.
struct Rgba {
    float r = 0.f, g = 0.f, b = 0.f, a = 0.f;
};

Rgba fetch(const Layer& layer, Eigen::Index row, Eigen::Index col) {
    const auto& tex = layer.texture;
    if (row < 0 || col < 0 || row >= tex.rows() || col >= tex.cols()) return {};
    const float a = layer.opacity.size() ? layer.opacity(row, col) : 1.f;
    return {tex.channel[0](row, col) * a, tex.channel[1](row, col) * a, tex.channel[2](row, col) * a, a};
}

Rgba sample_bilinear(const Layer& layer, double row, double col) {
    const double r0 = std::floor(row);
    const double c0 = std::floor(col);
    const float fr = float(row - r0);
    const float fc = float(col - c0);
    const auto ir = Eigen::Index(r0);
    const auto ic = Eigen::Index(c0);

    auto lerp = [](const Rgba& a, const Rgba& b, float w) {
        if (w == 0.f) return a;
        return Rgba{a.r + (b.r - a.r) * w, a.g + (b.g - a.g) * w, a.b + (b.b - a.b) * w, a.a + (b.a - a.a) * w};
    };
    const Rgba top = lerp(fetch(layer, ir, ic), fc == 0.f ? Rgba{} : fetch(layer, ir, ic + 1), fc);
    if (fr == 0.f) return top;
    const Rgba bottom = lerp(fetch(layer, ir + 1, ic), fc == 0.f ? Rgba{} : fetch(layer, ir + 1, ic + 1), fc);
    return lerp(top, bottom, fr);
}

Image solid_texture(int rows, int cols, const std::array<float, 3>& color) {
    Image image(rows, cols);
    for (int c = 0; c < 3; ++c) image.channel[c].setConstant(color[std::size_t(c)]);
    return image;
}

double read_depth(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw FormatError("depth must be a number or \"inf\"");
    }
    return j.get<double>();
}

Layer read_layer(const nlohmann::json& j, const std::filesystem::path& base) {
    Layer layer;
    layer.depth = read_depth(j.at("depth"));
    if (j.contains("offset")) {
        const auto off = j.at("offset").get<std::vector<double>>();
        if (off.size() != 2) throw FormatError("layer offset must be [x, y]");
        layer.offset_x = off[0];
        layer.offset_y = off[1];
    }

    const auto& tex = j.at("texture");
    if (tex.is_string()) {
        layer.texture = read_png(base / tex.get<std::string>());
    } else if (tex.contains("procedural")) {
        const auto& p = tex.at("procedural");
        layer.texture = procedural_texture(p.at("rows").get<int>(), p.at("cols").get<int>(),
                                           p.at("seed").get<std::uint64_t>(), p.value("feature_size", 12.0));
    } else if (tex.contains("solid")) {
        layer.texture = solid_texture(tex.at("rows").get<int>(), tex.at("cols").get<int>(),
                                      tex.at("solid").get<std::array<float, 3>>());
    } else {
        throw FormatError("layer texture must be a PNG path, {procedural: ...} or {solid: ...}");
    }

    if (j.contains("mask")) {
        const auto& mask = j.at("mask");
        if (mask.is_string()) {
            const Image m = read_png(base / mask.get<std::string>());
            if (m.rows() != layer.texture.rows() || m.cols() != layer.texture.cols())
                throw FormatError("mask size differs from texture size");
            layer.opacity = m.channel[0];
        } else {
            const auto rect = mask.at("rect").get<std::array<int, 4>>();
            layer.opacity = MatrixX<float>::Zero(layer.texture.rows(), layer.texture.cols());
            for (int r = std::max(rect[0], 0); r < std::min<int>(rect[2], int(layer.texture.rows())); ++r)
                for (int c = std::max(rect[1], 0); c < std::min<int>(rect[3], int(layer.texture.cols())); ++c)
                    layer.opacity(r, c) = 1.f;
        }
    }
    return layer;
}

} // namespace

Projection project(const CameraModel& camera, const ScenePoint& p, double u, double v) {
    camera.validate();
    if (!(p.Z > 0.0)) throw InvalidArgument("scene point must have Z > 0");
    return {camera.f * (p.X - u) / p.Z, camera.f * (p.Y - v) / p.Z, camera.B / p.Z};
}

double analytic_slope(const CameraModel& camera, double depth) {
    camera.validate();
    check_depth(depth);
    return -camera.f * inverse_depth(depth);
}

double slope_from_disparity(const CameraModel& camera, double disparity) {
    camera.validate();
    return -(camera.f / camera.B) * disparity;
}

double disparity_from_depth(const CameraModel& camera, double depth) {
    camera.validate();
    check_depth(depth);
    return camera.B * inverse_depth(depth);
}

void SceneSpec::validate() const {
    if (layers.empty()) throw InvalidArgument("scene has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (!(l.depth > 0.0)) throw InvalidArgument("layer " + std::to_string(i) + " has depth <= 0");
        if (l.texture.rows() < 1 || l.texture.cols() < 1)
            throw InvalidArgument("layer " + std::to_string(i) + " has an empty texture");
        if (l.opacity.size() && (l.opacity.rows() != l.texture.rows() || l.opacity.cols() != l.texture.cols()))
            throw InvalidArgument("layer " + std::to_string(i) + " opacity mask does not match its texture");
        if (i > 0 && l.depth > layers[i - 1].depth)
            throw InvalidArgument("layers must be ordered far to near");
    }
}

LightField render_dense_lightfield(const SceneSpec& scene, const CameraModel& camera, const LightFieldDims& grid,
                                   double du, Translation origin) {
    scene.validate();
    LightField lf(grid, du, camera);
    const double s_center = 0.5 * (grid.ns - 1);
    const double t_center = 0.5 * (grid.nt - 1);

    detail::parallel_for(int(grid.view_count()), [&](int view) {
        const int u = view / grid.nv;
        const int v = view % grid.nv;
        const double uw = origin.tx + u * du;
        const double vw = origin.ty + v * du;
        auto r = lf.view_channel(u, v, 0);
        auto g = lf.view_channel(u, v, 1);
        auto b = lf.view_channel(u, v, 2);
        r.setConstant(scene.background[0]);
        g.setConstant(scene.background[1]);
        b.setConstant(scene.background[2]);

        for (const auto& layer : scene.layers) {
            const double scale = camera.f * inverse_depth(layer.depth);
            const double col_shift = (uw - layer.offset_x) * scale + 0.5 * (layer.texture.cols() - 1) - s_center;
            const double row_shift = (vw - layer.offset_y) * scale + 0.5 * (layer.texture.rows() - 1) - t_center;
            for (int t = 0; t < grid.nt; ++t)
                for (int s = 0; s < grid.ns; ++s) {
                    const Rgba px = sample_bilinear(layer, t + row_shift, s + col_shift);
                    if (px.a == 0.f) continue;
                    const float keep = 1.f - px.a;
                    r(t, s) = px.r + keep * r(t, s);
                    g(t, s) = px.g + keep * g(t, s);
                    b(t, s) = px.b + keep * b(t, s);
                }
        }
    });
    return lf;
}

SceneSpec load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scene config '" + path.string() + "'");
    SceneSpec scene;
    try {
        nlohmann::json j;
        in >> j;
        if (j.contains("background")) scene.background = j.at("background").get<std::array<float, 3>>();
        for (const auto& layer : j.at("layers")) scene.layers.push_back(read_layer(layer, path.parent_path()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed scene config '" + path.string() + "': " + e.what());
    }
    std::stable_sort(scene.layers.begin(), scene.layers.end(),
                     [](const Layer& a, const Layer& b) { return a.depth > b.depth; });
    scene.validate();
    return scene;
}

Image procedural_texture(int rows, int cols, std::uint64_t seed, double feature_size) {
    if (rows < 1 || cols < 1) throw InvalidArgument("texture size must be positive");
    if (!(feature_size >= 1.0)) throw InvalidArgument("feature size must be >= 1 pixel");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> unit(0.f, 1.f);

    // Three octaves of bilinearly interpolated lattice noise per channel,
    // then a random colour mix so the channels stay correlated.
    std::array<MatrixX<float>, 3> noise;
    for (auto& n : noise) {
        n = MatrixX<float>::Zero(rows, cols);
        double cell = feature_size;
        float amplitude = 1.f;
        for (int octave = 0; octave < 3; ++octave) {
            const int lr = int(std::ceil(rows / cell)) + 2;
            const int lc = int(std::ceil(cols / cell)) + 2;
            MatrixX<float> lattice(lr, lc);
            for (int i = 0; i < lr; ++i)
                for (int k = 0; k < lc; ++k) lattice(i, k) = unit(rng) - 0.5f;
            for (int y = 0; y < rows; ++y) {
                const double fy = y / cell;
                const int y0 = int(fy);
                const float wy = float(fy - y0);
                for (int x = 0; x < cols; ++x) {
                    const double fx = x / cell;
                    const int x0 = int(fx);
                    const float wx = float(fx - x0);
                    const float top = lattice(y0, x0) * (1 - wx) + lattice(y0, x0 + 1) * wx;
                    const float bot = lattice(y0 + 1, x0) * (1 - wx) + lattice(y0 + 1, x0 + 1) * wx;
                    n(y, x) += amplitude * (top * (1 - wy) + bot * wy);
                }
            }
            cell = std::max(1.0, cell / 2.0);
            amplitude *= 0.5f;
        }
    }

    Eigen::Matrix3f mix;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) mix(i, k) = (i == k ? 0.6f : 0.f) + 0.4f * unit(rng);
    Eigen::Vector3f base;
    for (int i = 0; i < 3; ++i) base(i) = 0.3f + 0.4f * unit(rng);

    Image image(rows, cols);
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
            const Eigen::Vector3f n(noise[0](y, x), noise[1](y, x), noise[2](y, x));
            const Eigen::Vector3f color = base + 0.8f * (mix * n) / mix.rowwise().sum().maxCoeff();
            for (int c = 0; c < 3; ++c) image.channel[c](y, x) = std::clamp(color(c), 0.05f, 0.95f);
        }
    return image;
}

SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& o) {
    if (!(o.min_slope > 0.0) || o.max_slope < o.min_slope) throw InvalidArgument("invalid slope range");
    if (o.min_foreground < 0 || o.max_foreground < o.min_foreground)
        throw InvalidArgument("invalid foreground count range");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double f = o.camera.f;
    const double mid_u = 0.5 * (o.nu - 1) * o.du;
    const double mid_v = 0.5 * (o.nv - 1) * o.du;
    const int fg_count =
        o.min_foreground + int(unit(rng) * (o.max_foreground - o.min_foreground + 1) * 0.9999);

    // Background slope from the lower part of the range, foreground patches
    // strictly nearer.
    const double split = o.min_slope + 0.4 * (o.max_slope - o.min_slope);
    const double bg_slope = o.min_slope + unit(rng) * (split - o.min_slope);
    std::vector<double> fg_slopes;
    for (int i = 0; i < fg_count; ++i) fg_slopes.push_back(split + unit(rng) * (o.max_slope - split));
    std::sort(fg_slopes.begin(), fg_slopes.end());

    SceneSpec scene;
    scene.background = {0.5f, 0.5f, 0.5f};

    auto extent = [](int pixels, int views, double slope) {
        int size = pixels + int(std::ceil((views - 1) * slope)) + 8;
        if ((size - pixels) % 2) ++size;
        return size;
    };

    Layer bg;
    bg.depth = f * o.du / bg_slope;
    bg.offset_x = mid_u;
    bg.offset_y = mid_v;
    bg.texture = procedural_texture(extent(o.nt, o.nv, bg_slope), extent(o.ns, o.nu, bg_slope), rng(),
                                    o.feature_size);
    scene.layers.push_back(std::move(bg));

    for (double slope : fg_slopes) {
        Layer fg;
        fg.depth = f * o.du / slope;
        const int h = std::max(4, int(o.nt * (0.25 + 0.35 * unit(rng))));
        const int w = std::max(4, int(o.ns * (0.2 + 0.3 * unit(rng))));
        const double px = (unit(rng) - 0.5) * 0.6 * o.ns;
        const double py = (unit(rng) - 0.5) * 0.6 * o.nt;
        fg.offset_x = mid_u + px * fg.depth / f;
        fg.offset_y = mid_v + py * fg.depth / f;
        fg.texture = procedural_texture(h, w, rng(), o.feature_size * 0.75);
        fg.opacity = MatrixX<float>::Zero(h, w);
        const bool ellipse = unit(rng) < 0.5;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double ny = (y + 0.5) / h * 2.0 - 1.0;
                const double nx = (x + 0.5) / w * 2.0 - 1.0;
                fg.opacity(y, x) = (!ellipse || nx * nx + ny * ny <= 1.0) ? 1.f : 0.f;
            }
        scene.layers.push_back(std::move(fg));
    }
    // fg_slopes ascending means depths descending: already far to near.
    scene.validate();
    return scene;
}

} // namespace lfr
