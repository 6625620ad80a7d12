#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "morphon/optim.hpp"
#include "morphon/tensor.hpp"

namespace morphon {

enum class MorphKind { dilation, erosion };

inline const char* morph_kind_name(MorphKind k) {
    return k == MorphKind::dilation ? "dilation" : "erosion";
}

// Trainable a x b structuring element. The anchor sits at (rows/2, cols/2),
// keeping outputs spatially aligned with inputs.
struct StructuringElement {
    int rows = 0;
    int cols = 0;
    ParamGrid param;

    StructuringElement() = default;
    StructuringElement(int rows_, int cols_) : rows(rows_), cols(cols_) {
        if (rows < 1 || cols < 1)
            throw std::invalid_argument("StructuringElement: dimensions must be >= 1");
        param = ParamGrid(static_cast<std::size_t>(rows) * cols);
    }

    int anchor_row() const { return rows / 2; }
    int anchor_col() const { return cols / 2; }

    float weight(int i, int j) const { return param.values[static_cast<std::size_t>(i) * cols + j]; }
    void set_weight(int i, int j, float v) { param.values[static_cast<std::size_t>(i) * cols + j] = v; }

    void fill(float v) { std::fill(param.values.begin(), param.values.end(), v); }
};

// 180-degree rotation of the weight grid.
inline StructuringElement reflect(const StructuringElement& se) {
    StructuringElement out(se.rows, se.cols);
    for (int i = 0; i < se.rows; ++i)
        for (int j = 0; j < se.cols; ++j)
            out.set_weight(i, j, se.weight(se.rows - 1 - i, se.cols - 1 - j));
    return out;
}

// Cached forward state for the backward pass: the winning SE offset per
// output pixel. Max/min are piecewise linear, so routing the upstream
// gradient to the recorded argmax/argmin reproduces the exact subgradient.
struct MorphTape {
    MorphKind kind = MorphKind::dilation;
    int height = 0;
    int width = 0;
    int se_rows = 0;
    int se_cols = 0;
    std::vector<std::uint32_t> arg_index;  // i*se_cols + j per output pixel

    std::pair<int, int> winner(int y, int x) const {
        const std::uint32_t packed = arg_index[static_cast<std::size_t>(y) * width + x];
        return {static_cast<int>(packed) / se_cols, static_cast<int>(packed) % se_cols};
    }
};

namespace detail {

inline void check_morph_input(const Tensor& input, const StructuringElement& se, const char* op) {
    if (input.channels() != 1)
        throw std::invalid_argument(std::string(op) + ": expected single-channel input, got " +
                                    input.shape_str());
    if (input.height() < 1 || input.width() < 1)
        throw std::invalid_argument(std::string(op) + ": empty input image");
    if (se.rows > 2 * input.height() + 1 || se.cols > 2 * input.width() + 1)
        throw std::invalid_argument(std::string(op) + ": structuring element " +
                                    std::to_string(se.rows) + "x" + std::to_string(se.cols) +
                                    " too large for input " + input.shape_str());
}

// Shared kernel for both operators. Out-of-bounds source pixels are excluded
// from the extremum (-inf / +inf padding). Ties break to the lowest (i, then j)
// offset; the strict comparison below keeps the first maximum seen.
inline std::pair<Tensor, MorphTape> morph_forward(const Tensor& input,
                                                  const StructuringElement& se,
                                                  MorphKind kind) {
    check_morph_input(input, se, morph_kind_name(kind));
    const int h = input.height();
    const int w = input.width();
    const int oy = se.anchor_row();
    const int ox = se.anchor_col();
    const bool dil = kind == MorphKind::dilation;

    Tensor out(1, h, w);
    MorphTape tape;
    tape.kind = kind;
    tape.height = h;
    tape.width = w;
    tape.se_rows = se.rows;
    tape.se_cols = se.cols;
    tape.arg_index.resize(static_cast<std::size_t>(h) * w);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double best = dil ? -std::numeric_limits<double>::infinity()
                              : std::numeric_limits<double>::infinity();
            std::uint32_t best_idx = 0;
            for (int i = 0; i < se.rows; ++i) {
                const int sy = dil ? y - i + oy : y + i - oy;
                if (sy < 0 || sy >= h) continue;
                for (int j = 0; j < se.cols; ++j) {
                    const int sx = dil ? x - j + ox : x + j - ox;
                    if (sx < 0 || sx >= w) continue;
                    const double wv = se.weight(i, j);
                    const double cand = dil ? input.at(0, sy, sx) + wv : input.at(0, sy, sx) - wv;
                    if (dil ? cand > best : cand < best) {
                        best = cand;
                        best_idx = static_cast<std::uint32_t>(i) * se.cols + j;
                    }
                }
            }
            out.at(0, y, x) = best;
            tape.arg_index[static_cast<std::size_t>(y) * w + x] = best_idx;
        }
    }
    return {std::move(out), std::move(tape)};
}

}  // namespace detail

// output(y,x) = max over valid (i,j) of input(y-i+oy, x-j+ox) + W(i,j)
inline std::pair<Tensor, MorphTape> dilate(const Tensor& input, const StructuringElement& se) {
    return detail::morph_forward(input, se, MorphKind::dilation);
}

// output(y,x) = min over valid (i,j) of input(y+i-oy, x+j-ox) - W(i,j)
inline std::pair<Tensor, MorphTape> erode(const Tensor& input, const StructuringElement& se) {
    return detail::morph_forward(input, se, MorphKind::erosion);
}

// Routes each output pixel's upstream value to its winning source pixel and
// accumulates into se.grad (negated for erosion, where W enters with a minus).
inline Tensor morph_backward(const MorphTape& tape, StructuringElement& se,
                             const Tensor& upstream) {
    if (upstream.channels() != 1 || upstream.height() != tape.height ||
        upstream.width() != tape.width)
        throw std::invalid_argument("morph_backward: upstream shape " + upstream.shape_str() +
                                    " does not match tape " + std::to_string(tape.height) + "x" +
                                    std::to_string(tape.width));
    if (se.rows != tape.se_rows || se.cols != tape.se_cols)
        throw std::invalid_argument("morph_backward: structuring element does not match tape");

    const bool dil = tape.kind == MorphKind::dilation;
    const int oy = se.anchor_row();
    const int ox = se.anchor_col();
    Tensor input_grad(1, tape.height, tape.width);
    for (int y = 0; y < tape.height; ++y) {
        for (int x = 0; x < tape.width; ++x) {
            const double g = upstream.at(0, y, x);
            const auto [i, j] = tape.winner(y, x);
            const int sy = dil ? y - i + oy : y + i - oy;
            const int sx = dil ? x - j + ox : x + j - ox;
            input_grad.at(0, sy, sx) += g;
            se.param.grad[static_cast<std::size_t>(i) * se.cols + j] += dil ? g : -g;
        }
    }
    return input_grad;
}

// One morphological layer: C_out structuring elements applied either to a
// broadcast single input channel or channel-wise (C_in == C_out).
struct MorphLayerTape {
    bool broadcast = false;
    std::vector<MorphTape> channels;
};

inline std::pair<Tensor, MorphLayerTape> multichannel_layer(
    const Tensor& input, const std::vector<StructuringElement>& ses, MorphKind kind) {
    const int c_out = static_cast<int>(ses.size());
    if (c_out < 1) throw std::invalid_argument("multichannel_layer: no structuring elements");
    if (input.channels() != 1 && input.channels() != c_out)
        throw std::invalid_argument("multichannel_layer: input channels " +
                                    std::to_string(input.channels()) + " must be 1 or " +
                                    std::to_string(c_out));

    MorphLayerTape tape;
    tape.broadcast = input.channels() == 1;
    tape.channels.reserve(c_out);
    Tensor out(c_out, input.height(), input.width());
    for (int k = 0; k < c_out; ++k) {
        const Tensor in_k = tape.broadcast ? input.channel(0) : input.channel(k);
        auto [o, t] = detail::morph_forward(in_k, ses[k], kind);
        out.set_channel(k, o);
        tape.channels.push_back(std::move(t));
    }
    return {std::move(out), std::move(tape)};
}

inline Tensor multichannel_backward(const MorphLayerTape& tape,
                                    std::vector<StructuringElement>& ses,
                                    const Tensor& upstream) {
    const int c_out = static_cast<int>(ses.size());
    if (upstream.channels() != c_out)
        throw std::invalid_argument("multichannel_backward: upstream channels " +
                                    std::to_string(upstream.channels()) + " vs " +
                                    std::to_string(c_out) + " structuring elements");
    const int in_channels = tape.broadcast ? 1 : c_out;
    Tensor input_grad(in_channels, upstream.height(), upstream.width());
    for (int k = 0; k < c_out; ++k) {
        Tensor g = morph_backward(tape.channels[k], ses[k], upstream.channel(k));
        const int dst = tape.broadcast ? 0 : k;
        for (int y = 0; y < g.height(); ++y)
            for (int x = 0; x < g.width(); ++x) input_grad.at(dst, y, x) += g.at(0, y, x);
    }
    return input_grad;
}

// Min weight -> 0, max -> 255, linear in between (round half up); a constant
// grid maps to mid-gray 128.
inline Image8 export_se_image(const StructuringElement& se) {
    Image8 img;
    img.height = se.rows;
    img.width = se.cols;
    img.pixels.resize(se.param.size());
    float lo = se.param.values[0], hi = se.param.values[0];
    for (float v : se.param.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (std::size_t i = 0; i < se.param.size(); ++i) {
        if (hi == lo) {
            img.pixels[i] = 128;
        } else {
            const double t = (se.param.values[i] - lo) / (static_cast<double>(hi) - lo);
            img.pixels[i] = static_cast<std::uint8_t>(std::floor(t * 255.0 + 0.5));
        }
    }
    return img;
}

}  // namespace morphon
