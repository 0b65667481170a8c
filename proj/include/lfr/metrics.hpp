#pragma once

#include "lfr/core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lfr {

// Exact matches are reported at this value with `exact` set.
inline constexpr double kPsnrCap = 99.0;

struct PsnrResult {
    double db = 0.0;
    bool exact = false;
};

// 10 log10(peak^2 / MSE), MSE over all RGB samples.
PsnrResult psnr(const Image& a, const Image& b, double peak = 1.0);

// Mean SSIM on luma (Rec. 601 weights), 11x11 Gaussian window with
// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1. Only positions where the
// window fits entirely inside the image are averaged.
double ssim(const Image& a, const Image& b);
inline constexpr int kSsimWindow = 11;

struct L1Stats {
    double mean = 0.0;
    double max = 0.0;
    double p95 = 0.0;
};

struct L1ErrorMap {
    MatrixX<float> map;   // mean over channels of |a - b|
    L1Stats stats;
};

L1ErrorMap l1_error_map(const Image& a, const Image& b);

struct ViewMetrics {
    int u = 0;
    int v = 0;
    PsnrResult psnr;
    double ssim = 0.0;
    L1Stats l1;
};

struct EvalOptions {
    // Columns excluded on each side of every view (boundary region).
    int margin_columns = 0;
    std::string method = "unknown";
    std::string pattern = "-";
};

struct EvalReport {
    std::string method;
    std::string pattern;
    int margin_columns = 0;
    std::vector<ViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_l1 = 0.0;
    int exact_views = 0;

    void write_csv(const std::filesystem::path& path) const;
    std::string to_text() const;
};

// Metrics over the views (u, v) with reconstructed_view_mask[u] set.
EvalReport evaluate_reconstruction(const LightField& recon, const LightField& truth,
                                   const std::vector<std::uint8_t>& reconstructed_view_mask,
                                   const EvalOptions& options = {});

// Grayscale PNG per masked view, named error_UUU_VVV.png.
void export_error_maps(const LightField& recon, const LightField& truth,
                       const std::vector<std::uint8_t>& reconstructed_view_mask, const std::filesystem::path& dir,
                       int margin_columns = 0);

} // namespace lfr
