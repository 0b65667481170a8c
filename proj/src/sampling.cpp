#include "lfr/sampling.hpp"

#include "lfr/error.hpp"
#include "lfr/detail/parallel.hpp"
#include "lfr/image_io.hpp"

#include <json.hpp>

#include <fstream>

namespace lfr {
namespace {

constexpr int kViews = SamplingPattern::kSubfieldViews;

std::vector<int> kept_indices(int subfields, const SamplingPattern& pattern) {
    std::vector<int> kept;
    for (int i = 0; i < subfields; i += pattern.period()) kept.push_back(i);
    return kept;
}

int subfield_count(int nu) {
    if (nu % kViews != 0)
        throw InvalidArgument("nu = " + std::to_string(nu) + " is not a multiple of " + std::to_string(kViews));
    return nu / kViews;
}

Epi slice_rows(const Epi& epi, int first_row, int rows, int first_col, int cols) {
    Epi out;
    for (int c = 0; c < 3; ++c) out.pixels.channel[c] = epi.pixels.channel[c].block(first_row, first_col, rows, cols);
    out.row_valid.assign(epi.row_valid.begin() + first_row, epi.row_valid.begin() + first_row + rows);
    return out;
}

void check_mask(const Epi& epi, const SamplingPattern& pattern, const std::vector<int>& kept) {
    const int n = subfield_count(epi.rows());
    std::vector<std::uint8_t> is_kept(std::size_t(n), 0);
    for (int k : kept) is_kept[std::size_t(k)] = 1;
    for (int sub = 0; sub < n; ++sub)
        for (int r = sub * kViews; r < (sub + 1) * kViews; ++r)
            if (epi.valid(r) != bool(is_kept[std::size_t(sub)]))
                throw InvalidArgument("row mask is inconsistent with pattern " + pattern.name() + " at row " +
                                      std::to_string(r));
}

std::vector<EpiWindow> cut_windows(const Epi& epi, const SamplingPattern& pattern, const std::vector<int>& kept) {
    std::vector<EpiWindow> out;
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
        EpiWindow w;
        w.first_row = kept[i] * kViews;
        w.gap_index = int(i);
        w.epi = slice_rows(epi, w.first_row, pattern.window_rows(), 0, epi.cols());
        out.push_back(std::move(w));
    }
    return out;
}

EpiWindow crop(const EpiWindow& w, int first_col, int width) {
    EpiWindow out;
    out.epi = slice_rows(w.epi, 0, w.epi.rows(), first_col, width);
    out.first_row = w.first_row;
    out.first_col = w.first_col + first_col;
    out.gap_index = w.gap_index;
    return out;
}

} // namespace

SamplingPattern SamplingPattern::from_name(const std::string& name) {
    if (name == "A") return {2};
    if (name == "B") return {3};
    if (name == "C") return {4};
    throw InvalidArgument("unknown sampling pattern '" + name + "' (expected A, B or C)");
}

std::string SamplingPattern::name() const {
    switch (gap) {
    case 2: return "A";
    case 3: return "B";
    case 4: return "C";
    default: return "gap" + std::to_string(gap);
    }
}

void SamplingPattern::validate() const {
    if (gap < 2 || gap > 4) throw InvalidArgument("sampling gap must be 2, 3 or 4");
}

std::vector<std::uint8_t> SparseLightField::reconstructed_view_mask() const {
    std::vector<std::uint8_t> mask(std::size_t(field.dims().nu), 0);
    for (int sub : reconstructed_subfields)
        for (int r = sub * kViews; r < (sub + 1) * kViews; ++r) mask[std::size_t(r)] = 1;
    return mask;
}

SparseLightField apply_pattern(const LightField& dense, const SamplingPattern& pattern) {
    pattern.validate();
    const int n = subfield_count(dense.dims().nu);

    SparseLightField out{dense, kept_indices(n, pattern), {}, {}};
    const int last_kept = out.kept_subfields.back();
    for (int sub = 0; sub < n; ++sub) {
        if (sub % pattern.period() == 0) continue;
        (sub < last_kept ? out.reconstructed_subfields : out.excluded_subfields).push_back(sub);
        for (int u = sub * kViews; u < (sub + 1) * kViews; ++u) {
            out.field.set_view_valid(u, false);
            for (int v = 0; v < dense.dims().nv; ++v)
                for (int c = 0; c < 3; ++c) out.field.view_channel(u, v, c).setZero();
        }
    }
    return out;
}

SparseLightField sparse_from_mask(const LightField& sparse, const SamplingPattern& pattern) {
    pattern.validate();
    const int n = subfield_count(sparse.dims().nu);
    SparseLightField out{sparse, kept_indices(n, pattern), {}, {}};
    const int last_kept = out.kept_subfields.back();
    for (int sub = 0; sub < n; ++sub) {
        const bool kept = sub % pattern.period() == 0;
        for (int u = sub * kViews; u < (sub + 1) * kViews; ++u)
            if (sparse.view_valid(u) != kept)
                throw InvalidArgument("view mask is inconsistent with pattern " + pattern.name() + " at u = " +
                                      std::to_string(u));
        if (!kept) (sub < last_kept ? out.reconstructed_subfields : out.excluded_subfields).push_back(sub);
    }
    return out;
}

std::vector<EpiWindow> windows(const Epi& sparse_epi, const SamplingPattern& pattern) {
    pattern.validate();
    const auto kept = kept_indices(subfield_count(sparse_epi.rows()), pattern);
    check_mask(sparse_epi, pattern, kept);
    return cut_windows(sparse_epi, pattern, kept);
}

std::vector<EpiWindow> dense_windows(const Epi& dense_epi, const SamplingPattern& pattern, int subfields) {
    pattern.validate();
    if (subfields * kViews != dense_epi.rows()) throw InvalidArgument("sub-light-field count does not match EPI");
    return cut_windows(dense_epi, pattern, kept_indices(subfields, pattern));
}

LightField fill_blank_bands(const SparseLightField& sparse, const SamplingPattern& pattern, const WindowFill& fill) {
    LightField out = sparse.field;
    const auto& d = out.dims();
    detail::parallel_for(d.nv * d.nt, [&](int fiber) {
        const int v = fiber / d.nt;
        const int t = fiber % d.nt;
        for (const auto& w : windows(extract_epi(sparse.field, v, t), pattern)) {
            const Epi filled = fill(w, v, t);
            if (filled.rows() != w.epi.rows() || filled.cols() != w.epi.cols())
                throw InvalidArgument("window fill changed the window shape");
            for (int r = 0; r < w.epi.rows(); ++r) {
                if (w.epi.valid(r)) continue;
                for (int c = 0; c < 3; ++c)
                    for (int s = 0; s < d.ns; ++s) out(w.first_row + r, v, s, t, c) = filled.pixels.channel[c](r, s);
            }
        }
    });
    for (int sub : sparse.reconstructed_subfields)
        for (int u = sub * kViews; u < (sub + 1) * kViews; ++u) out.set_view_valid(u, true);
    return out;
}

std::vector<TrainingPair> build_training_set(std::span<const LightField> dense_fields, const SamplingPattern& pattern,
                                             const CropOptions& crop_options) {
    pattern.validate();
    if (crop_options.width < 1 || crop_options.stride < 1) throw InvalidArgument("crop width and stride must be >= 1");
    std::vector<TrainingPair> pairs;
    for (const auto& dense : dense_fields) {
        const auto& d = dense.dims();
        if (crop_options.width > d.ns)
            throw InvalidArgument("crop width " + std::to_string(crop_options.width) + " exceeds ns = " +
                                  std::to_string(d.ns));
        const auto sparse = apply_pattern(dense, pattern);
        const int n = subfield_count(d.nu);
        for (int v = 0; v < d.nv; ++v)
            for (int t = 0; t < d.nt; ++t) {
                const auto incomplete = windows(extract_epi(sparse.field, v, t), pattern);
                const auto intact = dense_windows(extract_epi(dense, v, t), pattern, n);
                for (std::size_t w = 0; w < incomplete.size(); ++w)
                    for (int x = 0; x + crop_options.width <= d.ns; x += crop_options.stride)
                        pairs.push_back({crop(incomplete[w], x, crop_options.width), crop(intact[w], x, crop_options.width)});
            }
    }
    return pairs;
}

void save_training_set(const std::vector<TrainingPair>& pairs, const SamplingPattern& pattern,
                       const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    nlohmann::json index;
    index["format"] = "lfr-epi-pairs";
    index["version"] = 1;
    index["pattern"] = pattern.name();
    auto entries = nlohmann::json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        char in_name[48], gt_name[48];
        std::snprintf(in_name, sizeof in_name, "pair_%06zu_in.png", i);
        std::snprintf(gt_name, sizeof gt_name, "pair_%06zu_gt.png", i);
        write_png(dir / in_name, pairs[i].incomplete.epi.pixels);
        write_png(dir / gt_name, pairs[i].intact.epi.pixels);
        entries.push_back({{"incomplete", in_name},
                           {"intact", gt_name},
                           {"row_valid", pairs[i].incomplete.epi.row_valid},
                           {"first_row", pairs[i].incomplete.first_row},
                           {"first_col", pairs[i].incomplete.first_col},
                           {"gap_index", pairs[i].incomplete.gap_index}});
    }
    index["pairs"] = std::move(entries);
    std::ofstream out(dir / "index.json");
    if (!out) throw IoError("cannot write dataset index in '" + dir.string() + "'");
    out << index.dump(1) << '\n';
}

std::vector<TrainingPair> load_training_set(const std::filesystem::path& dir, SamplingPattern* pattern) {
    std::ifstream in(dir / "index.json");
    if (!in) throw IoError("cannot open dataset index in '" + dir.string() + "'");
    std::vector<TrainingPair> pairs;
    try {
        nlohmann::json index;
        in >> index;
        if (pattern) *pattern = SamplingPattern::from_name(index.at("pattern").get<std::string>());
        for (const auto& e : index.at("pairs")) {
            TrainingPair p;
            p.incomplete.epi.pixels = read_png(dir / e.at("incomplete").get<std::string>());
            p.incomplete.epi.row_valid = e.at("row_valid").get<std::vector<std::uint8_t>>();
            p.intact.epi.pixels = read_png(dir / e.at("intact").get<std::string>());
            p.intact.epi.row_valid.assign(std::size_t(p.intact.epi.rows()), 1);
            if (p.incomplete.epi.row_valid.size() != std::size_t(p.incomplete.epi.rows()) ||
                p.incomplete.epi.rows() != p.intact.epi.rows() || p.incomplete.epi.cols() != p.intact.epi.cols())
                throw FormatError("dataset pair has inconsistent sizes");
            p.incomplete.first_row = p.intact.first_row = e.at("first_row").get<int>();
            p.incomplete.first_col = p.intact.first_col = e.at("first_col").get<int>();
            p.incomplete.gap_index = p.intact.gap_index = e.at("gap_index").get<int>();
            pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed dataset index in '" + dir.string() + "': " + e.what());
    }
    return pairs;
}

} // namespace lfr
