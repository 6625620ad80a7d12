#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphon {

// Dense rank-3 array (channels x height x width), row-major within each
// channel. Carries images, feature maps and gradients throughout the library.
// Element storage is double; reductions accumulate in double as well.
class Tensor {
public:
    Tensor() = default;

    Tensor(int channels, int height, int width, double fill = 0.0)
        : channels_(channels), height_(height), width_(width),
          data_(static_cast<std::size_t>(check_dims(channels, height, width)), fill) {}

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const {
        return channels_ == other.channels_ && height_ == other.height_ &&
               width_ == other.width_;
    }

    std::string shape_str() const {
        return std::to_string(channels_) + "x" + std::to_string(height_) + "x" +
               std::to_string(width_);
    }

    // Copy of one channel as a 1xHxW tensor.
    Tensor channel(int c) const {
        Tensor out(1, height_, width_);
        const std::size_t plane = static_cast<std::size_t>(height_) * width_;
        std::copy(data_.begin() + c * plane, data_.begin() + (c + 1) * plane,
                  out.data_.begin());
        return out;
    }

    void set_channel(int c, const Tensor& src) {
        if (src.channels_ != 1 || src.height_ != height_ || src.width_ != width_)
            throw std::invalid_argument("set_channel: shape mismatch " + shape_str() +
                                        " vs " + src.shape_str());
        const std::size_t plane = static_cast<std::size_t>(height_) * width_;
        std::copy(src.data_.begin(), src.data_.end(), data_.begin() + c * plane);
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    static std::size_t check_dims(int c, int h, int w) {
        if (c < 0 || h < 0 || w < 0)
            throw std::invalid_argument("Tensor: negative dimension");
        return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }

    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

// 8-bit grayscale raster, the exchange type for PGM export.
struct Image8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
}

inline void require_nonempty(const Tensor& a, const char* op) {
    if (a.empty())
        throw std::invalid_argument(std::string(op) + ": empty tensor");
}

inline Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "elementwise_mul");
    Tensor out(a.channels(), a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

// Population statistics: divide by N, not N-1.
inline double mean(const Tensor& a) {
    require_nonempty(a, "mean");
    double sum = 0.0;
    for (double v : a.data()) sum += v;
    return sum / static_cast<double>(a.size());
}

inline double covariance(const Tensor& a, const Tensor& b) {
    require_nonempty(a, "covariance");
    require_same_shape(a, b, "covariance");
    const double mu_a = mean(a);
    const double mu_b = mean(b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - mu_a) * (b[i] - mu_b);
    return sum / static_cast<double>(a.size());
}

inline double variance(const Tensor& a) {
    require_nonempty(a, "variance");
    return covariance(a, a);
}

inline Tensor crop(const Tensor& a, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > a.height() || x0 + w > a.width())
        throw std::invalid_argument("crop: region outside tensor " + a.shape_str());
    Tensor out(a.channels(), h, w);
    for (int c = 0; c < a.channels(); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = a.at(c, y0 + y, x0 + x);
    return out;
}

}  // namespace morphon
