#include "lfr/metrics.hpp"

#include "lfr/error.hpp"
#include "lfr/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lfr {
namespace {

void check_same_shape(const Image& a, const Image& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InvalidArgument(std::string(what) + ": image shapes differ");
}

MatrixX<double> luma(const Image& image) {
    return 0.299 * image.channel[0].cast<double>() + 0.587 * image.channel[1].cast<double>() +
           0.114 * image.channel[2].cast<double>();
}

Eigen::VectorXd gaussian_kernel() {
    constexpr double sigma = 1.5;
    Eigen::VectorXd k(kSsimWindow);
    const int half = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) k(i) = std::exp(-double((i - half) * (i - half)) / (2 * sigma * sigma));
    return k / k.sum();
}

// Separable "valid" filtering: output is (rows - 10) x (cols - 10).
MatrixX<double> filter_valid(const MatrixX<double>& x, const Eigen::VectorXd& k) {
    const Eigen::Index n = k.size();
    const Eigen::Index out_rows = x.rows() - n + 1;
    const Eigen::Index out_cols = x.cols() - n + 1;
    MatrixX<double> tmp = MatrixX<double>::Zero(out_rows, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) tmp += k(i) * x.middleRows(i, out_rows);
    MatrixX<double> out = MatrixX<double>::Zero(out_rows, out_cols);
    for (Eigen::Index i = 0; i < n; ++i) out += k(i) * tmp.middleCols(i, out_cols);
    return out;
}

Image crop_columns(const Image& image, int margin) {
    if (margin == 0) return image;
    const Eigen::Index width = image.cols() - 2 * margin;
    if (width < 1) throw InvalidArgument("margin leaves no columns to evaluate");
    Image out;
    for (int c = 0; c < 3; ++c) out.channel[c] = image.channel[c].middleCols(margin, width);
    return out;
}

void check_eval_inputs(const LightField& recon, const LightField& truth, const std::vector<std::uint8_t>& mask) {
    if (!(recon.dims() == truth.dims())) throw InvalidArgument("evaluate: light field dimensions differ");
    if (mask.size() != std::size_t(truth.dims().nu)) throw InvalidArgument("evaluate: mask must have nu entries");
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
        throw InvalidArgument("evaluate: reconstructed-view mask is empty");
}

} // namespace

PsnrResult psnr(const Image& a, const Image& b, double peak) {
    check_same_shape(a, b, "psnr");
    if (!(peak > 0.0)) throw InvalidArgument("psnr: peak must be > 0");
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) sum += (a.channel[c].cast<double>() - b.channel[c].cast<double>()).squaredNorm();
    const double mse = sum / (3.0 * double(a.rows() * a.cols()));
    if (mse == 0.0) return {kPsnrCap, true};
    return {std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse)), false};
}

double ssim(const Image& a, const Image& b) {
    check_same_shape(a, b, "ssim");
    if (a.rows() < kSsimWindow || a.cols() < kSsimWindow)
        throw InvalidArgument("ssim: image is smaller than the 11x11 window");
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const auto k = gaussian_kernel();
    const MatrixX<double> x = luma(a);
    const MatrixX<double> y = luma(b);

    const Eigen::ArrayXXd mx = filter_valid(x, k).array();
    const Eigen::ArrayXXd my = filter_valid(y, k).array();
    const Eigen::ArrayXXd sxx = filter_valid(x.cwiseProduct(x), k).array() - mx * mx;
    const Eigen::ArrayXXd syy = filter_valid(y.cwiseProduct(y), k).array() - my * my;
    const Eigen::ArrayXXd sxy = filter_valid(x.cwiseProduct(y), k).array() - mx * my;

    const Eigen::ArrayXXd num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
    const Eigen::ArrayXXd den = (mx * mx + my * my + c1) * (sxx + syy + c2);
    return (num / den).mean();
}

L1ErrorMap l1_error_map(const Image& a, const Image& b) {
    check_same_shape(a, b, "l1_error_map");
    L1ErrorMap out;
    out.map = MatrixX<float>::Zero(a.rows(), a.cols());
    MatrixX<double> acc = MatrixX<double>::Zero(a.rows(), a.cols());
    for (int c = 0; c < 3; ++c) acc += (a.channel[c].cast<double>() - b.channel[c].cast<double>()).cwiseAbs();
    acc /= 3.0;
    out.map = acc.cast<float>();

    std::vector<double> values(acc.data(), acc.data() + acc.size());
    out.stats.mean = acc.mean();
    out.stats.max = acc.maxCoeff();
    // Nearest-rank 95th percentile.
    const std::size_t rank = std::size_t(std::ceil(0.95 * double(values.size())));
    std::nth_element(values.begin(), values.begin() + long(rank - 1), values.end());
    out.stats.p95 = values[rank - 1];
    return out;
}

EvalReport evaluate_reconstruction(const LightField& recon, const LightField& truth,
                                   const std::vector<std::uint8_t>& mask, const EvalOptions& options) {
    check_eval_inputs(recon, truth, mask);
    EvalReport report;
    report.method = options.method;
    report.pattern = options.pattern;
    report.margin_columns = options.margin_columns;
    for (int u = 0; u < truth.dims().nu; ++u) {
        if (!mask[std::size_t(u)]) continue;
        for (int v = 0; v < truth.dims().nv; ++v) {
            const Image r = crop_columns(recon.view(u, v), options.margin_columns);
            const Image t = crop_columns(truth.view(u, v), options.margin_columns);
            ViewMetrics m;
            m.u = u;
            m.v = v;
            m.psnr = psnr(r, t);
            m.ssim = ssim(r, t);
            m.l1 = l1_error_map(r, t).stats;
            report.views.push_back(m);
        }
    }
    for (const auto& m : report.views) {
        report.mean_psnr += m.psnr.db;
        report.mean_ssim += m.ssim;
        report.mean_l1 += m.l1.mean;
        report.exact_views += m.psnr.exact ? 1 : 0;
    }
    const double n = double(report.views.size());
    report.mean_psnr /= n;
    report.mean_ssim /= n;
    report.mean_l1 /= n;
    return report;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "# method=" << method << " pattern=" << pattern << " psnr_peak=1.0 psnr_cap=" << kPsnrCap
        << " ssim=gaussian11_sigma1.5_luma margin_columns=" << margin_columns << '\n';
    out << "u,v,psnr_db,exact,ssim,l1_mean,l1_max,l1_p95\n";
    char line[256];
    for (const auto& m : views) {
        std::snprintf(line, sizeof line, "%d,%d,%.6f,%d,%.8f,%.8f,%.8f,%.8f\n", m.u, m.v, m.psnr.db,
                      m.psnr.exact ? 1 : 0, m.ssim, m.l1.mean, m.l1.max, m.l1.p95);
        out << line;
    }
    std::snprintf(line, sizeof line, "mean,,%.6f,%d,%.8f,%.8f,,\n", mean_psnr, exact_views, mean_ssim, mean_l1);
    out << line;
}

std::string EvalReport::to_text() const {
    std::ostringstream s;
    char buf[256];
    s << "method: " << method << "\npattern: " << pattern << '\n';
    s << "psnr: peak 1.0, MSE over RGB, exact matches capped at " << kPsnrCap << " dB\n";
    s << "ssim: 11x11 gaussian (sigma 1.5) on luma, K1 0.01, K2 0.03\n";
    s << "margin columns: " << margin_columns << '\n';
    std::snprintf(buf, sizeof buf, "views: %zu (exact: %d)\nmean psnr: %.4f dB\nmean ssim: %.6f\nmean l1: %.6f\n",
                  views.size(), exact_views, mean_psnr, mean_ssim, mean_l1);
    s << buf;
    return s.str();
}

void export_error_maps(const LightField& recon, const LightField& truth, const std::vector<std::uint8_t>& mask,
                       const std::filesystem::path& dir, int margin_columns) {
    check_eval_inputs(recon, truth, mask);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    for (int u = 0; u < truth.dims().nu; ++u) {
        if (!mask[std::size_t(u)]) continue;
        for (int v = 0; v < truth.dims().nv; ++v) {
            char name[64];
            std::snprintf(name, sizeof name, "error_%03d_%03d.png", u, v);
            const auto map = l1_error_map(crop_columns(recon.view(u, v), margin_columns),
                                          crop_columns(truth.view(u, v), margin_columns));
            write_png_gray(dir / name, map.map);
        }
    }
}

} // namespace lfr
