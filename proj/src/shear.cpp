#include "lfr/shear.hpp"

#include "lfr/error.hpp"

#include <cmath>

namespace lfr {

DisparityMap DisparityMap::constant(double d) {
    DisparityMap m;
    m.value_ = d;
    return m;
}

DisparityMap DisparityMap::per_pixel(MatrixX<float> map) {
    DisparityMap m;
    m.constant_ = false;
    m.map_ = std::move(map);
    return m;
}

void DisparityMap::validate() const {
    if (constant_ ? !std::isfinite(value_) : !map_.allFinite()) throw InvalidArgument("disparity must be finite");
}

ShearResult shear_reconstruct(const EpiWindow& window, const DisparityMap& disparity, const CameraModel& camera,
                              int t) {
    disparity.validate();
    camera.validate();
    const Epi& src = window.epi;
    const int rows = src.rows();
    const int cols = src.cols();

    std::vector<int> valid_rows;
    for (int r = 0; r < rows; ++r)
        if (src.valid(r)) valid_rows.push_back(r);
    if (valid_rows.empty()) throw InvalidArgument("window has no valid rows to shear from");

    ShearResult out{window, decltype(ShearResult::inside)::Ones(rows, cols)};
    const double gain = camera.f / camera.B;
    for (int m = 0; m < rows; ++m) {
        if (src.valid(m)) continue;
        int source = valid_rows.front();
        for (int r : valid_rows)
            if (std::abs(r - m) < std::abs(source - m)) source = r;   // strict: ties stay with the upper row

        for (int s = 0; s < cols; ++s) {
            const double x = s + gain * disparity.at(window.first_col + s, t) * (m - source);
            const double x0 = std::floor(x);
            const float w = float(x - x0);
            const int i0 = int(x0);
            const bool inside = x >= 0.0 && x <= cols - 1;
            for (int c = 0; c < 3; ++c) {
                const auto& row = src.pixels.channel[c];
                float value;
                if (!inside) {
                    value = row(source, x < 0.0 ? 0 : cols - 1);
                } else if (w == 0.f) {
                    value = row(source, i0);
                } else {
                    value = (1.f - w) * row(source, i0) + w * row(source, i0 + 1);
                }
                out.window.epi.pixels.channel[c](m, s) = value;
            }
            out.inside(m, s) = inside ? 1 : 0;
        }
        out.window.epi.row_valid[std::size_t(m)] = 1;
    }
    return out;
}

LightField shear_reconstruct_lightfield(const SparseLightField& sparse, const SamplingPattern& pattern,
                                        const DisparityMap& disparity) {
    disparity.validate();
    const CameraModel camera = sparse.field.camera();
    return fill_blank_bands(sparse, pattern, [&](const EpiWindow& w, int, int t) {
        return shear_reconstruct(w, disparity, camera, t).window.epi;
    });
}

LightField zero_fill_lightfield(const SparseLightField& sparse) {
    LightField out = sparse.field;
    for (int sub : sparse.reconstructed_subfields)
        for (int u = sub * SamplingPattern::kSubfieldViews; u < (sub + 1) * SamplingPattern::kSubfieldViews; ++u)
            out.set_view_valid(u, true);
    return out;
}

} // namespace lfr
