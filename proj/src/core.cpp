#include "lfr/core.hpp"

#include "lfr/error.hpp"
#include "lfr/image_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace lfr {
namespace {

std::string view_label(int u, int v) {
    return "(" + std::to_string(u) + "," + std::to_string(v) + ")";
}

void check_dims(const LightFieldDims& d) {
    if (d.nu < 1 || d.nv < 1 || d.ns < 1 || d.nt < 1)
        throw InvalidArgument("light field dimensions must all be >= 1");
}

std::string view_file_name(int u, int v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "view_%03d_%03d.png", u, v);
    return buf;
}

} // namespace

void CameraModel::validate() const {
    if (!(f > 0.0) || !(B > 0.0) || !std::isfinite(f) || !std::isfinite(B))
        throw InvalidArgument("camera model requires f > 0 and B > 0");
}

LightField::LightField(LightFieldDims dims, double du, CameraModel camera)
    : dims_(dims), du_(du), camera_(camera) {
    check_dims(dims);
    if (!(du > 0.0)) throw InvalidArgument("view step du must be > 0");
    camera.validate();
    data_ = Eigen::ArrayXf::Zero(Eigen::Index(dims.view_count() * 3 * std::size_t(dims.ns) * dims.nt));
    valid_u_.assign(std::size_t(dims.nu), 1);
}

LightField::ChannelMap LightField::view_channel(int u, int v, int c) {
    return ChannelMap(data_.data() + index(u, v, 0, 0, c), dims_.nt, dims_.ns);
}

LightField::ConstChannelMap LightField::view_channel(int u, int v, int c) const {
    return ConstChannelMap(data_.data() + index(u, v, 0, 0, c), dims_.nt, dims_.ns);
}

Image LightField::view(int u, int v) const {
    Image image;
    for (int c = 0; c < 3; ++c) image.channel[c] = view_channel(u, v, c);
    return image;
}

void LightField::set_view(int u, int v, const Image& image) {
    if (image.rows() != dims_.nt || image.cols() != dims_.ns)
        throw InvalidArgument("view " + view_label(u, v) + " has the wrong size");
    for (int c = 0; c < 3; ++c) view_channel(u, v, c) = image.channel[c];
}

bool operator==(const LightField& a, const LightField& b) {
    return a.dims_ == b.dims_ && a.du_ == b.du_ && a.camera_ == b.camera_ && a.valid_u_ == b.valid_u_ &&
           (a.data_ == b.data_).all();
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed manifest '" + path.string() + "': " + e.what());
    }

    Manifest m;
    try {
        m.dims = {j.at("nu").get<int>(), j.at("nv").get<int>(), j.at("ns").get<int>(), j.at("nt").get<int>()};
        m.du = j.at("du").get<double>();
        m.camera = {j.at("f").get<double>(), j.at("B").get<double>()};
        const auto& views = j.at("views");
        if (!views.is_array()) throw FormatError("'views' must be an array");
        m.views.assign(m.dims.view_count(), {});
        std::vector<std::uint8_t> seen(m.dims.view_count(), 0);
        for (const auto& entry : views) {
            const int u = entry.at("u").get<int>();
            const int v = entry.at("v").get<int>();
            if (u < 0 || u >= m.dims.nu || v < 0 || v >= m.dims.nv)
                throw FormatError("view " + view_label(u, v) + " lies outside the declared grid");
            const std::size_t slot = std::size_t(u) * m.dims.nv + v;
            if (seen[slot]) throw FormatError("view " + view_label(u, v) + " listed twice");
            seen[slot] = 1;
            m.views[slot] = entry.at("file").get<std::string>();
        }
        for (int u = 0; u < m.dims.nu; ++u)
            for (int v = 0; v < m.dims.nv; ++v)
                if (!seen[std::size_t(u) * m.dims.nv + v])
                    throw FormatError("manifest is missing view " + view_label(u, v));
        if (j.contains("valid_u")) {
            m.valid_u = j.at("valid_u").get<std::vector<std::uint8_t>>();
            if (m.valid_u.size() != std::size_t(m.dims.nu)) throw FormatError("'valid_u' must have nu entries");
        } else {
            m.valid_u.assign(std::size_t(m.dims.nu), 1);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed manifest '" + path.string() + "': " + e.what());
    }
    check_dims(m.dims);
    return m;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "lfr-lightfield";
    j["version"] = 1;
    j["nu"] = m.dims.nu;
    j["nv"] = m.dims.nv;
    j["ns"] = m.dims.ns;
    j["nt"] = m.dims.nt;
    j["du"] = m.du;
    j["f"] = m.camera.f;
    j["B"] = m.camera.B;
    j["valid_u"] = m.valid_u;
    auto views = nlohmann::json::array();
    for (int u = 0; u < m.dims.nu; ++u)
        for (int v = 0; v < m.dims.nv; ++v) views.push_back({{"u", u}, {"v", v}, {"file", m.view_file(u, v)}});
    j["views"] = std::move(views);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing manifest '" + path.string() + "'");
}

LightField load_lightfield(const std::filesystem::path& manifest_path) {
    std::filesystem::path path = manifest_path;
    if (std::filesystem::is_directory(path)) path /= Manifest::kFileName;
    const Manifest m = read_manifest(path);
    const auto base = path.parent_path();

    LightField lf(m.dims, m.du, m.camera);
    for (int u = 0; u < m.dims.nu; ++u) {
        lf.set_view_valid(u, m.valid_u[std::size_t(u)] != 0);
        for (int v = 0; v < m.dims.nv; ++v) {
            const auto file = base / m.view_file(u, v);
            if (!std::filesystem::exists(file))
                throw IoError("view " + view_label(u, v) + ": missing file '" + file.string() + "'");
            Image image;
            try {
                image = read_png(file);
            } catch (const Error& e) {
                throw FormatError("view " + view_label(u, v) + ": " + e.what());
            }
            if (image.rows() != m.dims.nt || image.cols() != m.dims.ns) {
                std::ostringstream msg;
                msg << "view " << view_label(u, v) << ": image is " << image.cols() << "x" << image.rows()
                    << " but the manifest declares " << m.dims.ns << "x" << m.dims.nt;
                throw FormatError(msg.str());
            }
            lf.set_view(u, v, image);
        }
    }
    return lf;
}

Manifest save_lightfield(const LightField& lf, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

    Manifest m;
    m.dims = lf.dims();
    m.du = lf.du();
    m.camera = lf.camera();
    m.valid_u = lf.valid_mask();
    for (int u = 0; u < m.dims.nu; ++u)
        for (int v = 0; v < m.dims.nv; ++v) {
            m.views.push_back(view_file_name(u, v));
            write_png(dir / m.views.back(), lf.view(u, v));
        }
    write_manifest(m, dir / Manifest::kFileName);
    return m;
}

LightField quantize8(const LightField& lf) {
    LightField out = lf;
    out.data() = lf.data().unaryExpr([](float x) { return from_byte(to_byte(x)); });
    return out;
}

Epi extract_epi(const LightField& lf, int v, int t) {
    const auto& d = lf.dims();
    if (v < 0 || v >= d.nv || t < 0 || t >= d.nt)
        throw InvalidArgument("EPI index (v=" + std::to_string(v) + ", t=" + std::to_string(t) + ") out of range");
    Epi epi(d.nu, d.ns);
    for (int u = 0; u < d.nu; ++u) {
        epi.row_valid[std::size_t(u)] = lf.view_valid(u) ? 1 : 0;
        for (int c = 0; c < 3; ++c) epi.pixels.channel[c].row(u) = lf.view_channel(u, v, c).row(t);
    }
    return epi;
}

EpiGrid extract_all_epis(const LightField& lf) {
    EpiGrid grid(lf.dims().nv, lf.dims().nt);
    for (int v = 0; v < lf.dims().nv; ++v)
        for (int t = 0; t < lf.dims().nt; ++t) grid.set(v, t, extract_epi(lf, v, t));
    return grid;
}

LightField assemble_lightfield(const EpiGrid& epis, double du, const CameraModel& camera) {
    if (epis.nv() < 1 || epis.nt() < 1) throw InvalidArgument("EPI grid is empty");
    const auto& first = epis.at(0, 0);
    if (!first) throw InvalidArgument("EPI grid is missing entry (v=0, t=0)");
    const int nu = first->rows();
    const int ns = first->cols();

    LightField lf({nu, epis.nv(), ns, epis.nt()}, du, camera);
    for (int u = 0; u < nu; ++u) lf.set_view_valid(u, first->valid(u));
    for (int v = 0; v < epis.nv(); ++v)
        for (int t = 0; t < epis.nt(); ++t) {
            const auto& epi = epis.at(v, t);
            const std::string where = "(v=" + std::to_string(v) + ", t=" + std::to_string(t) + ")";
            if (!epi) throw InvalidArgument("EPI grid is missing entry " + where);
            if (epi->rows() != nu || epi->cols() != ns) throw InvalidArgument("EPI " + where + " has a ragged size");
            if (epi->row_valid != first->row_valid)
                throw InvalidArgument("EPI " + where + " disagrees on the row validity mask");
            for (int u = 0; u < nu; ++u)
                for (int c = 0; c < 3; ++c) lf.view_channel(u, v, c).row(t) = epi->pixels.channel[c].row(u);
        }
    return lf;
}

LightField merge_lightfields(std::span<const LightField> chain, int overlap) {
    if (chain.empty()) throw InvalidArgument("merge needs at least one light field");
    if (overlap < 0) throw InvalidArgument("overlap must be >= 0");
    const auto& ref = chain.front().dims();
    int total = 0;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const auto& lf = chain[i];
        const auto& d = lf.dims();
        if (d.nv != ref.nv || d.ns != ref.ns || d.nt != ref.nt || lf.du() != chain.front().du() ||
            !(lf.camera() == chain.front().camera()))
            throw InvalidArgument("light field " + std::to_string(i) + " is incompatible with the chain");
        if (overlap >= d.nu)
            throw InvalidArgument("overlap " + std::to_string(overlap) + " >= nu of light field " + std::to_string(i));
        total += d.nu;
    }
    total -= overlap * int(chain.size() - 1);

    // Overlaps can involve more than two fields when overlap > nu / 2. Views
    // are fused with a running mean, which leaves equal contributions exact.
    LightField merged({total, ref.nv, ref.ns, ref.nt}, chain.front().du(), chain.front().camera());
    std::vector<int> count(std::size_t(total), 0);
    std::vector<std::uint8_t> valid(std::size_t(total), 0);
    int offset = 0;
    for (const auto& lf : chain) {
        for (int u = 0; u < lf.dims().nu; ++u) {
            const int dst = offset + u;
            const float n = float(++count[std::size_t(dst)]);
            for (int v = 0; v < ref.nv; ++v)
                for (int c = 0; c < 3; ++c) {
                    auto acc = merged.view_channel(dst, v, c);
                    acc += (lf.view_channel(u, v, c) - acc) / n;
                }
            valid[std::size_t(dst)] |= lf.view_valid(u) ? 1 : 0;
        }
        offset += lf.dims().nu - overlap;
    }
    for (int u = 0; u < total; ++u) merged.set_view_valid(u, valid[std::size_t(u)] != 0);
    return merged;
}

} // namespace lfr
