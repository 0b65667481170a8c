#include "lfr/error.hpp"
#include "lfr/network.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace lfr {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

constexpr std::array<char, 4> kMagic{'L', 'F', 'R', 'W'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kActivationElu = 1;

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return value;
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw IoError("cannot write weights '" + path.string() + "'");
    }
    void u32(std::uint32_t v) { raw(to_little(v)); }
    void f32(float v) { raw(to_little(v)); }
    void bytes(const char* data, std::size_t n) { out_.write(data, std::streamsize(n)); }
    void finish() {
        out_.flush();
        if (!out_) throw IoError("failed writing weights '" + path_.string() + "'");
    }

private:
    template <typename T>
    void raw(T v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    std::ofstream out_;
    std::filesystem::path path_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IoError("cannot open weights '" + path.string() + "'");
    }
    std::uint32_t u32() { return to_little(raw<std::uint32_t>()); }
    float f32() { return to_little(raw<float>()); }
    void bytes(char* data, std::size_t n) {
        in_.read(data, std::streamsize(n));
        if (!in_) truncated();
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    template <typename T>
    T raw() {
        T v;
        in_.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in_) truncated();
        return v;
    }
    [[noreturn]] void truncated() { throw FormatError("weights file '" + path_.string() + "' is truncated"); }
    std::ifstream in_;
    std::filesystem::path path_;
};

} // namespace

// Layout (all integers uint32, all tensors float32, little-endian):
//   "LFRW" version sections blocks_per_section activation
//   filters[sections] kernels[sections] layer_count
//   per layer: role in out kernel weight[(in*k*k) x out, column-major] bias[out]
void save_weights(const Parameters<float>& params, const std::filesystem::path& path) {
    Writer w(path);
    const auto& cfg = params.config;
    w.bytes(kMagic.data(), kMagic.size());
    w.u32(kVersion);
    w.u32(std::uint32_t(cfg.sections()));
    w.u32(std::uint32_t(cfg.blocks_per_section));
    w.u32(kActivationElu);
    for (int f : cfg.filters) w.u32(std::uint32_t(f));
    for (int k : cfg.kernels) w.u32(std::uint32_t(k));
    w.u32(std::uint32_t(params.layers.size()));
    for (const auto& l : params.layers) {
        w.u32(std::uint32_t(l.role));
        w.u32(std::uint32_t(l.in_channels));
        w.u32(std::uint32_t(l.out_channels));
        w.u32(std::uint32_t(l.kernel));
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) w.f32(l.weight.data()[i]);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) w.f32(l.bias.data()[i]);
    }
    w.finish();
}

Parameters<float> load_weights(const std::filesystem::path& path) {
    Reader r(path);
    std::array<char, 4> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != kMagic) throw FormatError("'" + path.string() + "' is not a weights file");
    if (const auto version = r.u32(); version != kVersion)
        throw FormatError("unsupported weights version " + std::to_string(version));

    NetworkConfig cfg;
    const std::uint32_t sections = r.u32();
    if (sections == 0 || sections > 64) throw FormatError("implausible section count in weights header");
    cfg.blocks_per_section = int(r.u32());
    if (r.u32() != kActivationElu) throw FormatError("unknown activation in weights header");
    cfg.filters.resize(sections);
    cfg.kernels.resize(sections);
    for (auto& f : cfg.filters) f = int(r.u32());
    for (auto& k : cfg.kernels) k = int(r.u32());
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("invalid network config in weights header: ") + e.what());
    }

    // Rebuild the architecture to check every stored tensor against it.
    Parameters<float> params = build_network<float>(cfg, 0).zeros_like();
    if (r.u32() != params.layers.size()) throw FormatError("layer count does not match the network config");
    for (auto& l : params.layers) {
        const auto role = r.u32();
        const auto in = r.u32();
        const auto out = r.u32();
        const auto k = r.u32();
        if (role != std::uint32_t(l.role) || in != std::uint32_t(l.in_channels) ||
            out != std::uint32_t(l.out_channels) || k != std::uint32_t(l.kernel))
            throw FormatError("layer header does not match the network config");
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = r.f32();
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = r.f32();
    }
    if (!r.at_end()) throw FormatError("trailing bytes after the last tensor in '" + path.string() + "'");
    return params;
}

} // namespace lfr
