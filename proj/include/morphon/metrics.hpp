#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "morphon/loss.hpp"
#include "morphon/tensor.hpp"

namespace morphon {

// 10*log10(1/MSE) with peak 1.0; +inf when the images are identical.
inline double psnr(const Tensor& out, const Tensor& gt) {
    require_nonempty(out, "psnr");
    require_same_shape(out, gt, "psnr");
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out[i] - gt[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(out.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

// Patch-decomposed mean SSIM, the evaluation-side counterpart of dssim.
inline double eval_ssim(const Tensor& out, const Tensor& gt, const LossConfig& cfg = {}) {
    return 1.0 - 2.0 * dssim(out, gt, cfg);
}

struct MetricRow {
    std::string id;
    double ssim = 0.0;
    double psnr = 0.0;
};

inline std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

// "id,ssim,psnr" rows plus a trailing MEAN row.
inline void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    f << "id,ssim,psnr\n";
    double ssim_sum = 0.0, psnr_sum = 0.0;
    for (const auto& r : rows) {
        f << r.id << "," << format_metric(r.ssim) << "," << format_metric(r.psnr) << "\n";
        ssim_sum += r.ssim;
        psnr_sum += r.psnr;
    }
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    f << "MEAN," << format_metric(ssim_sum / n) << "," << format_metric(psnr_sum / n) << "\n";
}

}  // namespace morphon
