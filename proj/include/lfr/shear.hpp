#pragma once

#include "lfr/core.hpp"
#include "lfr/sampling.hpp"

namespace lfr {

// Disparity per pixel, or a single value for the whole field. Values are
// expressed per view step: a point with disparity d moves (f / B) d pixels
// between adjacent views, towards smaller s as u grows.
class DisparityMap {
public:
    static DisparityMap constant(double d);
    // rows = t, cols = s
    static DisparityMap per_pixel(MatrixX<float> map);

    bool is_constant() const { return constant_; }
    double at(int s, int t) const { return constant_ ? value_ : double(map_(t, s)); }
    void validate() const;

private:
    bool constant_ = true;
    double value_ = 0.0;
    MatrixX<float> map_;
};

struct ShearResult {
    EpiWindow window;
    // 1 where the filled sample came from inside the source row, 0 in the
    // boundary region where the source column fell outside [0, ns).
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> inside;
};

// Fills each blank row from the nearest valid row (ties go to the top) by
// linear resampling along the EPI line through each pixel. `t` selects the
// disparity row used for this window's fiber.
ShearResult shear_reconstruct(const EpiWindow& window, const DisparityMap& disparity, const CameraModel& camera,
                              int t = 0);

// Applies shear_reconstruct to every gap of every (v, t) fiber.
LightField shear_reconstruct_lightfield(const SparseLightField& sparse, const SamplingPattern& pattern,
                                        const DisparityMap& disparity);

// Keeps input views, leaves gap views at zero but marks them filled.
LightField zero_fill_lightfield(const SparseLightField& sparse);

} // namespace lfr
