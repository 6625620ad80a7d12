#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "morphon/optim.hpp"
#include "morphon/tensor.hpp"

namespace morphon {

enum class Activation { none, tanh, sigmoid };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::none: return "none";
        case Activation::tanh: return "tanh";
        default: return "sigmoid";
    }
}

inline double apply_activation(Activation a, double v) {
    switch (a) {
        case Activation::none: return v;
        case Activation::tanh: return std::tanh(v);
        default: return 1.0 / (1.0 + std::exp(-v));
    }
}

inline double activation_derivative(Activation a, double pre) {
    switch (a) {
        case Activation::none: return 1.0;
        case Activation::tanh: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
        default: {
            const double s = 1.0 / (1.0 + std::exp(-pre));
            return s * (1.0 - s);
        }
    }
}

// Same-size cross-correlation with zero padding, stride 1, one bias per
// output map. Even kernels anchor at ((k-1)/2, (k-1)/2): pad-left 3 /
// pad-right 4 for the 8x8 case.
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    Activation activation = Activation::none;
    ParamGrid kernel;  // out x in x kh x kw
    ParamGrid bias;    // out

    ConvLayer() = default;
    ConvLayer(int in_ch, int out_ch, int kh, int kw, Activation act)
        : in_channels(in_ch), out_channels(out_ch), kernel_h(kh), kernel_w(kw), activation(act) {
        if (in_ch < 1 || out_ch < 1 || kh < 1 || kw < 1)
            throw std::invalid_argument("ConvLayer: dimensions must be >= 1");
        kernel = ParamGrid(static_cast<std::size_t>(out_ch) * in_ch * kh * kw);
        bias = ParamGrid(static_cast<std::size_t>(out_ch));
    }

    int anchor_row() const { return (kernel_h - 1) / 2; }
    int anchor_col() const { return (kernel_w - 1) / 2; }

    std::size_t kernel_index(int o, int c, int u, int v) const {
        return ((static_cast<std::size_t>(o) * in_channels + c) * kernel_h + u) * kernel_w + v;
    }
};

struct ConvTape {
    Tensor input;
    Tensor pre_activation;
};

inline std::pair<Tensor, ConvTape> conv_forward(const Tensor& input, const ConvLayer& layer) {
    if (input.channels() != layer.in_channels)
        throw std::invalid_argument("conv_forward: input has " +
                                    std::to_string(input.channels()) + " channels, layer expects " +
                                    std::to_string(layer.in_channels));
    const int h = input.height();
    const int w = input.width();
    const int oy = layer.anchor_row();
    const int ox = layer.anchor_col();

    Tensor pre(layer.out_channels, h, w);
    for (int o = 0; o < layer.out_channels; ++o) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = layer.bias.values[o];
                for (int c = 0; c < layer.in_channels; ++c) {
                    for (int u = 0; u < layer.kernel_h; ++u) {
                        const int sy = y + u - oy;
                        if (sy < 0 || sy >= h) continue;
                        for (int v = 0; v < layer.kernel_w; ++v) {
                            const int sx = x + v - ox;
                            if (sx < 0 || sx >= w) continue;
                            acc += input.at(c, sy, sx) * layer.kernel.values[layer.kernel_index(o, c, u, v)];
                        }
                    }
                }
                pre.at(o, y, x) = acc;
            }
        }
    }

    Tensor out(layer.out_channels, h, w);
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = apply_activation(layer.activation, pre[i]);

    ConvTape tape{input, std::move(pre)};
    return {std::move(out), std::move(tape)};
}

// Applies the activation derivative, accumulates kernel/bias gradients and
// returns the gradient w.r.t. the layer input.
inline Tensor conv_backward(const ConvTape& tape, ConvLayer& layer, const Tensor& upstream) {
    if (!upstream.same_shape(tape.pre_activation))
        throw std::invalid_argument("conv_backward: upstream shape " + upstream.shape_str() +
                                    " does not match forward output " +
                                    tape.pre_activation.shape_str());
    const int h = upstream.height();
    const int w = upstream.width();
    const int oy = layer.anchor_row();
    const int ox = layer.anchor_col();

    Tensor g_pre(layer.out_channels, h, w);
    for (std::size_t i = 0; i < g_pre.size(); ++i)
        g_pre[i] = upstream[i] * activation_derivative(layer.activation, tape.pre_activation[i]);

    Tensor input_grad(layer.in_channels, h, w);
    for (int o = 0; o < layer.out_channels; ++o) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double g = g_pre.at(o, y, x);
                if (g == 0.0) continue;
                layer.bias.grad[o] += g;
                for (int c = 0; c < layer.in_channels; ++c) {
                    for (int u = 0; u < layer.kernel_h; ++u) {
                        const int sy = y + u - oy;
                        if (sy < 0 || sy >= h) continue;
                        for (int v = 0; v < layer.kernel_w; ++v) {
                            const int sx = x + v - ox;
                            if (sx < 0 || sx >= w) continue;
                            const std::size_t ki = layer.kernel_index(o, c, u, v);
                            layer.kernel.grad[ki] += g * tape.input.at(c, sy, sx);
                            input_grad.at(c, sy, sx) += g * layer.kernel.values[ki];
                        }
                    }
                }
            }
        }
    }
    return input_grad;
}

}  // namespace morphon
