#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lfr {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Planar RGB image. Channel matrices share one shape.
template <typename Scalar>
struct BasicImage {
    std::array<MatrixX<Scalar>, 3> channel;

    BasicImage() = default;
    BasicImage(Eigen::Index rows, Eigen::Index cols) {
        for (auto& c : channel) c = MatrixX<Scalar>::Zero(rows, cols);
    }

    Eigen::Index rows() const { return channel[0].rows(); }
    Eigen::Index cols() const { return channel[0].cols(); }

    template <typename Other>
    BasicImage<Other> cast() const {
        BasicImage<Other> out;
        for (int c = 0; c < 3; ++c) out.channel[c] = channel[c].template cast<Other>();
        return out;
    }

    friend bool operator==(const BasicImage& a, const BasicImage& b) {
        if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
        for (int c = 0; c < 3; ++c)
            if (a.channel[c] != b.channel[c]) return false;
        return true;
    }
};

using Image = BasicImage<float>;

// Pinhole rig parameters. f maps world offsets at unit depth to pixels;
// B scales inverse depth to disparity (d = B / Z).
struct CameraModel {
    double f = 1.0;
    double B = 1.0;

    void validate() const;
    friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

struct LightFieldDims {
    int nu = 1;
    int nv = 1;
    int ns = 1;
    int nt = 1;

    std::size_t view_count() const { return std::size_t(nu) * std::size_t(nv); }
    friend bool operator==(const LightFieldDims&, const LightFieldDims&) = default;
};

// Samples L(u, v, s, t) of an RGB light field with values in [0, 1].
//
// Each view (u, v) is stored as three contiguous nt x ns planes, so a view
// image is cheap to address. Views along u carry a validity flag: sparse
// fields mark missing views invalid and keep their samples at zero.
class LightField {
public:
    using ChannelMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstChannelMap =
        Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    LightField() = default;
    LightField(LightFieldDims dims, double du, CameraModel camera);

    const LightFieldDims& dims() const { return dims_; }
    double du() const { return du_; }
    const CameraModel& camera() const { return camera_; }

    float& operator()(int u, int v, int s, int t, int c) { return data_[index(u, v, s, t, c)]; }
    float operator()(int u, int v, int s, int t, int c) const { return data_[index(u, v, s, t, c)]; }

    // nt x ns plane of one colour channel of view (u, v).
    ChannelMap view_channel(int u, int v, int c);
    ConstChannelMap view_channel(int u, int v, int c) const;

    Image view(int u, int v) const;
    void set_view(int u, int v, const Image& image);

    bool view_valid(int u) const { return valid_u_[std::size_t(u)] != 0; }
    void set_view_valid(int u, bool valid) { valid_u_[std::size_t(u)] = valid ? 1 : 0; }
    const std::vector<std::uint8_t>& valid_mask() const { return valid_u_; }

    const Eigen::ArrayXf& data() const { return data_; }
    Eigen::ArrayXf& data() { return data_; }

    friend bool operator==(const LightField&, const LightField&);

private:
    std::size_t index(int u, int v, int s, int t, int c) const {
        const std::size_t plane = std::size_t(dims_.ns) * std::size_t(dims_.nt);
        return ((std::size_t(u) * dims_.nv + v) * 3 + c) * plane + std::size_t(t) * dims_.ns + s;
    }

    LightFieldDims dims_;
    double du_ = 1.0;
    CameraModel camera_;
    Eigen::ArrayXf data_;
    std::vector<std::uint8_t> valid_u_;
};

// Horizontal epipolar plane image of one (v, t) fiber: rows are u-views,
// columns are s-pixels. Rows flagged invalid belong to a blank band and hold
// zeros.
struct Epi {
    Image pixels;
    std::vector<std::uint8_t> row_valid;

    Epi() = default;
    Epi(int rows, int cols) : pixels(rows, cols), row_valid(std::size_t(rows), 1) {}

    int rows() const { return int(pixels.rows()); }
    int cols() const { return int(pixels.cols()); }
    bool valid(int row) const { return row_valid[std::size_t(row)] != 0; }

    friend bool operator==(const Epi&, const Epi&) = default;
};

// EPIs of a whole light field, indexed by (v, t). Entries may be missing
// while the grid is being filled.
class EpiGrid {
public:
    EpiGrid(int nv, int nt) : nv_(nv), nt_(nt), epis_(std::size_t(nv) * std::size_t(nt)) {}

    int nv() const { return nv_; }
    int nt() const { return nt_; }

    void set(int v, int t, Epi epi) { epis_[slot(v, t)] = std::move(epi); }
    const std::optional<Epi>& at(int v, int t) const { return epis_[slot(v, t)]; }

private:
    std::size_t slot(int v, int t) const { return std::size_t(v) * std::size_t(nt_) + std::size_t(t); }

    int nv_;
    int nt_;
    std::vector<std::optional<Epi>> epis_;
};

// On-disk description of a light field: one PNG per view plus metadata.
struct Manifest {
    LightFieldDims dims;
    double du = 1.0;
    CameraModel camera;
    std::vector<std::string> views;       // row-major in (u, v)
    std::vector<std::uint8_t> valid_u;    // one flag per u

    static constexpr const char* kFileName = "manifest.json";

    const std::string& view_file(int u, int v) const { return views[std::size_t(u) * dims.nv + v]; }
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Accepts either a manifest file or a directory containing manifest.json.
LightField load_lightfield(const std::filesystem::path& manifest_path);
Manifest save_lightfield(const LightField& lf, const std::filesystem::path& dir);

// Rounds every sample to the nearest 8-bit level, as a save/load would.
LightField quantize8(const LightField& lf);

Epi extract_epi(const LightField& lf, int v, int t);
EpiGrid extract_all_epis(const LightField& lf);
LightField assemble_lightfield(const EpiGrid& epis, double du, const CameraModel& camera);

// Concatenates fields along u, averaging the `overlap` views shared by each
// adjacent pair.
LightField merge_lightfields(std::span<const LightField> chain, int overlap);

} // namespace lfr
