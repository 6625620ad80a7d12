#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "morphon/tensor.hpp"

namespace morphon {

struct LossConfig {
    double c1 = 0.0001;
    double c2 = 0.0009;
    int patch_size = 100;
    double lambda = 1.0;
};

namespace detail {

inline void check_loss_config(const LossConfig& cfg) {
    if (cfg.c1 <= 0.0 || cfg.c2 <= 0.0)
        throw std::invalid_argument("LossConfig: c1 and c2 must be > 0");
    if (cfg.patch_size < 2)
        throw std::invalid_argument("LossConfig: patch_size must be >= 2");
    if (cfg.lambda < 0.0)
        throw std::invalid_argument("LossConfig: lambda must be >= 0");
}

struct SsimTerms {
    double mu_x = 0, mu_y = 0;
    double var_x = 0, var_y = 0, cov = 0;
    double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
    double value = 0;
    std::size_t count = 0;
};

// Whole-patch population statistics over one rectangular region of a channel.
inline SsimTerms ssim_region(const Tensor& x, const Tensor& y, int c, int y0, int x0, int h,
                             int w, const LossConfig& cfg) {
    SsimTerms s;
    s.count = static_cast<std::size_t>(h) * w;
    const double n = static_cast<double>(s.count);

    double sum_x = 0, sum_y = 0;
    for (int yy = y0; yy < y0 + h; ++yy)
        for (int xx = x0; xx < x0 + w; ++xx) {
            sum_x += x.at(c, yy, xx);
            sum_y += y.at(c, yy, xx);
        }
    s.mu_x = sum_x / n;
    s.mu_y = sum_y / n;

    double vx = 0, vy = 0, vxy = 0;
    for (int yy = y0; yy < y0 + h; ++yy)
        for (int xx = x0; xx < x0 + w; ++xx) {
            const double dx = x.at(c, yy, xx) - s.mu_x;
            const double dy = y.at(c, yy, xx) - s.mu_y;
            vx += dx * dx;
            vy += dy * dy;
            vxy += dx * dy;
        }
    s.var_x = vx / n;
    s.var_y = vy / n;
    s.cov = vxy / n;

    s.a1 = 2.0 * s.mu_x * s.mu_y + cfg.c1;
    s.a2 = 2.0 * s.cov + cfg.c2;
    s.b1 = s.mu_x * s.mu_x + s.mu_y * s.mu_y + cfg.c1;
    s.b2 = s.var_x + s.var_y + cfg.c2;
    s.value = (s.a1 * s.a2) / (s.b1 * s.b2);
    return s;
}

// Non-overlapping patch_size tiles; trailing partial tiles kept as smaller
// patches, so every pixel contributes to exactly one patch.
template <typename Fn>
inline std::size_t for_each_patch(const Tensor& a, const LossConfig& cfg, Fn fn) {
    std::size_t patches = 0;
    for (int c = 0; c < a.channels(); ++c)
        for (int y0 = 0; y0 < a.height(); y0 += cfg.patch_size)
            for (int x0 = 0; x0 < a.width(); x0 += cfg.patch_size) {
                const int h = std::min(cfg.patch_size, a.height() - y0);
                const int w = std::min(cfg.patch_size, a.width() - x0);
                fn(c, y0, x0, h, w);
                ++patches;
            }
    return patches;
}

inline std::size_t patch_count(const Tensor& a, const LossConfig& cfg) {
    const auto tiles = [&](int n) { return (n + cfg.patch_size - 1) / cfg.patch_size; };
    return static_cast<std::size_t>(a.channels()) * tiles(a.height()) * tiles(a.width());
}

}  // namespace detail

// SSIM of two same-size patches using whole-patch statistics.
inline double ssim(const Tensor& x, const Tensor& y, const LossConfig& cfg = {}) {
    detail::check_loss_config(cfg);
    require_nonempty(x, "ssim");
    require_same_shape(x, y, "ssim");

    const double n = static_cast<double>(x.size());
    double sum_x = 0, sum_y = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum_x += x[i];
        sum_y += y[i];
    }
    const double mu_x = sum_x / n;
    const double mu_y = sum_y / n;
    double vx = 0, vy = 0, vxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mu_x;
        const double dy = y[i] - mu_y;
        vx += dx * dx;
        vy += dy * dy;
        vxy += dx * dy;
    }
    const double a1 = 2.0 * mu_x * mu_y + cfg.c1;
    const double a2 = 2.0 * (vxy / n) + cfg.c2;
    const double b1 = mu_x * mu_x + mu_y * mu_y + cfg.c1;
    const double b2 = vx / n + vy / n + cfg.c2;
    return (a1 * a2) / (b1 * b2);
}

// Mean over non-overlapping patches of (1 - SSIM)/2.
inline double dssim(const Tensor& out, const Tensor& gt, const LossConfig& cfg = {}) {
    detail::check_loss_config(cfg);
    require_nonempty(out, "dssim");
    require_same_shape(out, gt, "dssim");
    double sum = 0.0;
    const std::size_t m = detail::for_each_patch(out, cfg, [&](int c, int y0, int x0, int h, int w) {
        sum += (1.0 - detail::ssim_region(out, gt, c, y0, x0, h, w, cfg).value) / 2.0;
    });
    return sum / static_cast<double>(m);
}

inline double mae(const Tensor& out, const Tensor& gt) {
    require_nonempty(out, "mae");
    require_same_shape(out, gt, "mae");
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) sum += std::abs(out[i] - gt[i]);
    return sum / static_cast<double>(out.size());
}

inline double total_loss(const Tensor& out, const Tensor& gt, const LossConfig& cfg = {}) {
    return dssim(out, gt, cfg) + cfg.lambda * mae(out, gt);
}

// Loss value plus d(loss)/d(out) per pixel: the SSIM quotient rule through the
// patch statistics, plus lambda * sign(out - gt)/N with sign(0) = 0.
inline std::pair<double, Tensor> total_loss_with_grad(const Tensor& out, const Tensor& gt,
                                                      const LossConfig& cfg = {}) {
    detail::check_loss_config(cfg);
    require_nonempty(out, "total_loss");
    require_same_shape(out, gt, "total_loss");

    Tensor grad(out.channels(), out.height(), out.width());
    double dssim_sum = 0.0;
    const std::size_t m = detail::patch_count(out, cfg);
    detail::for_each_patch(out, cfg, [&](int c, int y0, int x0, int h, int w) {
        const auto s = detail::ssim_region(out, gt, c, y0, x0, h, w, cfg);
        dssim_sum += (1.0 - s.value) / 2.0;
        const double n = static_cast<double>(s.count);
        const double inv_b1b2 = 1.0 / (s.b1 * s.b2);
        for (int y = y0; y < y0 + h; ++y) {
            for (int x = x0; x < x0 + w; ++x) {
                const double xv = out.at(c, y, x);
                const double yv = gt.at(c, y, x);
                const double da1 = 2.0 * s.mu_y / n;
                const double da2 = 2.0 * (yv - s.mu_y) / n;
                const double db1 = 2.0 * s.mu_x / n;
                const double db2 = 2.0 * (xv - s.mu_x) / n;
                const double ds = (da1 * s.a2 + s.a1 * da2) * inv_b1b2 -
                                  s.value * (db1 / s.b1 + db2 / s.b2);
                grad.at(c, y, x) += -ds / (2.0 * static_cast<double>(m));
            }
        }
    });

    double mae_sum = 0.0;
    const double inv_n = 1.0 / static_cast<double>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out[i] - gt[i];
        mae_sum += std::abs(d);
        if (d > 0.0)
            grad[i] += cfg.lambda * inv_n;
        else if (d < 0.0)
            grad[i] -= cfg.lambda * inv_n;
    }

    const double loss = dssim_sum / static_cast<double>(m) + cfg.lambda * mae_sum * inv_n;
    return {loss, std::move(grad)};
}

inline Tensor total_loss_grad(const Tensor& out, const Tensor& gt, const LossConfig& cfg = {}) {
    return total_loss_with_grad(out, gt, cfg).second;
}

}  // namespace morphon
