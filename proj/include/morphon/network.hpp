#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "morphon/conv.hpp"
#include "morphon/loss.hpp"
#include "morphon/morph.hpp"
#include "morphon/optim.hpp"
#include "morphon/tensor.hpp"

namespace morphon {

enum class LayerKind { dilation, erosion, conv };

struct LayerSpec {
    LayerKind kind = LayerKind::dilation;
    int count = 1;  // output feature maps
    int kernel_rows = 8;
    int kernel_cols = 8;
    Activation activation = Activation::none;
};

// Declarative description of the two-path network. Each path is a stack of
// alternating dilation/erosion layers followed by a conv branch ending in a
// single sigmoid map; the second path's morph sequence is the operator-wise
// complement of the first.
struct NetworkSpec {
    std::vector<LayerSpec> path1;
    std::vector<LayerSpec> path2;

    // 4-channel variant: 4D-4D-4E-4E-4D-4D-4E-4E-4E then 2/3/1 conv maps.
    static NetworkSpec morphon(int se_rows = 8, int se_cols = 8, int channels = 4) {
        static const bool dil_seq[] = {true, true, false, false, true, true, false, false, false};
        return from_sequence(dil_seq, 9, se_rows, se_cols, channels);
    }

    // Single-channel variant: 1D-1D-1D-1E-1E-1D-1D-1E-1E-1E then 2/3/1 conv maps.
    static NetworkSpec morphon_small(int se_rows = 8, int se_cols = 8, int channels = 1) {
        static const bool dil_seq[] = {true, true, true, false, false, true, true, false, false, false};
        return from_sequence(dil_seq, 10, se_rows, se_cols, channels);
    }

    void validate() const;

private:
    static NetworkSpec from_sequence(const bool* dilation_first_path, int n_morph, int se_rows,
                                     int se_cols, int channels) {
        NetworkSpec spec;
        for (int i = 0; i < n_morph; ++i) {
            const LayerKind k1 = dilation_first_path[i] ? LayerKind::dilation : LayerKind::erosion;
            const LayerKind k2 = dilation_first_path[i] ? LayerKind::erosion : LayerKind::dilation;
            spec.path1.push_back({k1, channels, se_rows, se_cols, Activation::none});
            spec.path2.push_back({k2, channels, se_rows, se_cols, Activation::none});
        }
        const int conv_maps[] = {2, 3, 1};
        const Activation conv_act[] = {Activation::tanh, Activation::tanh, Activation::sigmoid};
        for (int i = 0; i < 3; ++i) {
            spec.path1.push_back({LayerKind::conv, conv_maps[i], 8, 8, conv_act[i]});
            spec.path2.push_back({LayerKind::conv, conv_maps[i], 8, 8, conv_act[i]});
        }
        return spec;
    }
};

namespace detail_net {

inline bool is_morph(const LayerSpec& l) { return l.kind != LayerKind::conv; }

inline std::size_t morph_prefix_len(const std::vector<LayerSpec>& path) {
    std::size_t n = 0;
    while (n < path.size() && is_morph(path[n])) ++n;
    return n;
}

}  // namespace detail_net

inline void NetworkSpec::validate() const {
    if (path1.empty() || path2.empty())
        throw std::invalid_argument("NetworkSpec: both paths must be non-empty");

    const std::size_t m1 = detail_net::morph_prefix_len(path1);
    const std::size_t m2 = detail_net::morph_prefix_len(path2);
    if (m1 == 0) throw std::invalid_argument("NetworkSpec: a path must start with morphological layers");
    if (m1 != m2 || path1.size() != path2.size())
        throw std::invalid_argument("NetworkSpec: paths must have matching layer counts");

    for (std::size_t i = 0; i < path1.size(); ++i) {
        const LayerSpec& a = path1[i];
        const LayerSpec& b = path2[i];
        if (i < m1) {
            if (a.kind == b.kind)
                throw std::invalid_argument(
                    "NetworkSpec: path2 morph sequence must be the operator-wise complement of path1 "
                    "(layer " + std::to_string(i) + ")");
            if (a.activation != Activation::none || b.activation != Activation::none)
                throw std::invalid_argument("NetworkSpec: morph layers must have no activation");
            if (a.count != b.count || a.kernel_rows != b.kernel_rows || a.kernel_cols != b.kernel_cols)
                throw std::invalid_argument("NetworkSpec: complementary morph layers must share shape");
            if (a.count != path1[0].count)
                throw std::invalid_argument(
                    "NetworkSpec: all morph layers of a path must carry the same channel count");
        } else {
            if (a.kind != LayerKind::conv || b.kind != LayerKind::conv)
                throw std::invalid_argument("NetworkSpec: morph layers may not follow conv layers");
        }
    }
    const LayerSpec& last1 = path1.back();
    if (last1.kind != LayerKind::conv || last1.activation != Activation::sigmoid || last1.count != 1)
        throw std::invalid_argument(
            "NetworkSpec: each conv branch must end in a single sigmoid feature map");
}

// Per-layer cached forward state for one path.
struct PathTrace {
    std::vector<Tensor> morph_outputs;
    std::vector<MorphLayerTape> morph_tapes;
    std::vector<Tensor> conv_outputs;
    std::vector<ConvTape> conv_tapes;
    Tensor path_output;  // pixelwise mean of the final morph channel block
    Tensor weight_map;   // final conv output (sigmoid, single channel)
};

struct ForwardTrace {
    Tensor input;
    std::array<PathTrace, 2> paths;
    Tensor output;
};

struct MorphLayer {
    MorphKind kind = MorphKind::dilation;
    std::vector<StructuringElement> ses;
};

struct NetworkPath {
    std::vector<MorphLayer> morph;
    std::vector<ConvLayer> conv;
};

class Network {
public:
    static Network build(const NetworkSpec& spec, std::uint64_t seed) {
        spec.validate();
        Network net;
        net.spec_ = spec;
        net.seed_ = seed;
        Rng rng(seed);
        net.paths_[0] = build_path(spec.path1, rng);
        net.paths_[1] = build_path(spec.path2, rng);
        return net;
    }

    const NetworkSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    const NetworkPath& path(int i) const { return paths_[i]; }
    NetworkPath& path(int i) { return paths_[i]; }

    // True when path1 leads with dilation (a closing-type filter); its weight
    // map is then the closing map W_c and path2's the opening map W_o.
    bool path1_is_closing() const { return paths_[0].morph.front().kind == MorphKind::dilation; }

    ForwardTrace forward(const Tensor& image) const {
        if (image.channels() != 1)
            throw std::invalid_argument("Network::forward: expected single-channel image, got " +
                                        image.shape_str());
        ForwardTrace trace;
        trace.input = image;
        for (int p = 0; p < 2; ++p) run_path(p, image, trace.paths[p]);

        const Tensor& p1 = trace.paths[0].path_output;
        const Tensor& p2 = trace.paths[1].path_output;
        // I_out = (W_o . I_p1 + W_c . I_p2) / (W_o + W_c), maps named by the
        // filter type each path leads with.
        const Tensor& w_opening = path1_is_closing() ? trace.paths[1].weight_map
                                                     : trace.paths[0].weight_map;
        const Tensor& w_closing = path1_is_closing() ? trace.paths[0].weight_map
                                                     : trace.paths[1].weight_map;
        Tensor out(1, image.height(), image.width());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (w_opening[i] * p1[i] + w_closing[i] * p2[i]) / (w_opening[i] + w_closing[i]);
        trace.output = std::move(out);
        return trace;
    }

    // Accumulates gradients into every structuring element and conv parameter
    // and returns the loss value. Callers zero gradients between steps.
    double backward(const ForwardTrace& trace, const Tensor& gt, const LossConfig& cfg) {
        if (trace.output.empty())
            throw std::invalid_argument("Network::backward: forward trace is missing");
        auto [loss, g_out] = total_loss_with_grad(trace.output, gt, cfg);

        const Tensor& p1 = trace.paths[0].path_output;
        const Tensor& p2 = trace.paths[1].path_output;
        const bool swap = path1_is_closing();
        const Tensor& w_for_p1 = swap ? trace.paths[1].weight_map : trace.paths[0].weight_map;
        const Tensor& w_for_p2 = swap ? trace.paths[0].weight_map : trace.paths[1].weight_map;

        const int h = trace.output.height(), w = trace.output.width();
        Tensor g_p1(1, h, w), g_p2(1, h, w), g_wp1(1, h, w), g_wp2(1, h, w);
        for (std::size_t i = 0; i < g_out.size(); ++i) {
            const double d = w_for_p1[i] + w_for_p2[i];
            const double out_v = trace.output[i];
            const double g = g_out[i];
            g_p1[i] = g * w_for_p1[i] / d;
            g_p2[i] = g * w_for_p2[i] / d;
            const double g_w1 = g * (p1[i] - out_v) / d;
            const double g_w2 = g * (p2[i] - out_v) / d;
            // Route back to the producing path's weight map.
            (swap ? g_wp2[i] : g_wp1[i]) = g_w1;
            (swap ? g_wp1[i] : g_wp2[i]) = g_w2;
        }

        backward_path(0, trace.paths[0], g_p1, g_wp1);
        backward_path(1, trace.paths[1], g_p2, g_wp2);
        return loss;
    }

    void zero_grad() {
        for (ParamGrid* g : parameter_grids()) g->zero_grad();
    }

    // One optimization step over every grid; the shared counter advances once.
    void adam_step(AdamState& state) {
        state.advance();
        for (ParamGrid* g : parameter_grids()) adam_update(*g, state);
        for (const ParamGrid* g : parameter_grids())
            if (!g->all_finite())
                throw std::runtime_error("Network::adam_step: parameters became non-finite");
    }

    std::size_t count_parameters() const {
        std::size_t n = 0;
        for (const ParamGrid* g : parameter_grids()) n += g->size();
        return n;
    }

    // Canonical grid order (also the checkpoint layout): per path, the morph
    // SEs layer by layer, then conv kernel/bias pairs.
    std::vector<ParamGrid*> parameter_grids() {
        std::vector<ParamGrid*> grids;
        for (auto& path : paths_) {
            for (auto& layer : path.morph)
                for (auto& se : layer.ses) grids.push_back(&se.param);
            for (auto& layer : path.conv) {
                grids.push_back(&layer.kernel);
                grids.push_back(&layer.bias);
            }
        }
        return grids;
    }

    std::vector<const ParamGrid*> parameter_grids() const {
        std::vector<const ParamGrid*> grids;
        for (const auto& path : paths_) {
            for (const auto& layer : path.morph)
                for (const auto& se : layer.ses) grids.push_back(&se.param);
            for (const auto& layer : path.conv) {
                grids.push_back(&layer.kernel);
                grids.push_back(&layer.bias);
            }
        }
        return grids;
    }

    std::vector<std::string> parameter_names() const {
        std::vector<std::string> names;
        for (int p = 0; p < 2; ++p) {
            const std::string prefix = "path" + std::to_string(p + 1);
            for (std::size_t l = 0; l < paths_[p].morph.size(); ++l)
                for (std::size_t s = 0; s < paths_[p].morph[l].ses.size(); ++s)
                    names.push_back(prefix + " morph layer " + std::to_string(l) + " se " +
                                    std::to_string(s));
            for (std::size_t l = 0; l < paths_[p].conv.size(); ++l) {
                names.push_back(prefix + " conv layer " + std::to_string(l) + " kernel");
                names.push_back(prefix + " conv layer " + std::to_string(l) + " bias");
            }
        }
        return names;
    }

private:
    static NetworkPath build_path(const std::vector<LayerSpec>& specs, Rng& rng) {
        NetworkPath path;
        int in_channels = 1;
        for (const LayerSpec& ls : specs) {
            if (detail_net::is_morph(ls)) {
                MorphLayer layer;
                layer.kind = ls.kind == LayerKind::dilation ? MorphKind::dilation : MorphKind::erosion;
                for (int k = 0; k < ls.count; ++k) {
                    StructuringElement se(ls.kernel_rows, ls.kernel_cols);
                    // fan_in: SE size; fan_out: parallel operators in the layer.
                    glorot_fill(se.param, ls.kernel_rows * ls.kernel_cols, ls.count, rng);
                    layer.ses.push_back(std::move(se));
                }
                path.morph.push_back(std::move(layer));
                in_channels = ls.count;
            } else {
                ConvLayer layer(in_channels, ls.count, ls.kernel_rows, ls.kernel_cols, ls.activation);
                glorot_fill(layer.kernel, in_channels * ls.kernel_rows * ls.kernel_cols,
                            ls.count * ls.kernel_rows * ls.kernel_cols, rng);
                // biases start at zero
                path.conv.push_back(std::move(layer));
                in_channels = ls.count;
            }
        }
        return path;
    }

    void run_path(int p, const Tensor& image, PathTrace& pt) const {
        const NetworkPath& path = paths_[p];
        pt.morph_outputs.reserve(path.morph.size());
        pt.morph_tapes.reserve(path.morph.size());
        pt.conv_outputs.reserve(path.conv.size());
        pt.conv_tapes.reserve(path.conv.size());
        const Tensor* cur = &image;
        for (std::size_t l = 0; l < path.morph.size(); ++l) {
            auto [out, tape] = multichannel_layer(*cur, path.morph[l].ses, path.morph[l].kind);
            if (!out.all_finite())
                throw std::runtime_error("non-finite values in path" + std::to_string(p + 1) +
                                         " morph layer " + std::to_string(l) + " (" +
                                         morph_kind_name(path.morph[l].kind) + ")");
            pt.morph_outputs.push_back(std::move(out));
            pt.morph_tapes.push_back(std::move(tape));
            cur = &pt.morph_outputs.back();
        }

        // Path output: pixelwise mean over the final channel block.
        const Tensor& block = pt.morph_outputs.back();
        Tensor reduced(1, block.height(), block.width());
        for (int c = 0; c < block.channels(); ++c)
            for (int y = 0; y < block.height(); ++y)
                for (int x = 0; x < block.width(); ++x)
                    reduced.at(0, y, x) += block.at(c, y, x) / block.channels();
        pt.path_output = std::move(reduced);

        // Weight-map branch consumes the final morph block only.
        cur = &pt.morph_outputs.back();
        for (std::size_t l = 0; l < path.conv.size(); ++l) {
            auto [out, tape] = conv_forward(*cur, path.conv[l]);
            if (!out.all_finite())
                throw std::runtime_error("non-finite values in path" + std::to_string(p + 1) +
                                         " conv layer " + std::to_string(l));
            pt.conv_outputs.push_back(std::move(out));
            pt.conv_tapes.push_back(std::move(tape));
            cur = &pt.conv_outputs.back();
        }
        pt.weight_map = pt.conv_outputs.back();
    }

    void backward_path(int p, const PathTrace& pt, const Tensor& g_path_out,
                       const Tensor& g_weight_map) {
        NetworkPath& path = paths_[p];

        // Conv branch, last to first, down to the final morph block.
        Tensor g_conv = g_weight_map;
        for (std::size_t l = path.conv.size(); l-- > 0;)
            g_conv = conv_backward(pt.conv_tapes[l], path.conv[l], g_conv);

        // Final block gets the mean-reduction share plus the conv branch share.
        const Tensor& block = pt.morph_outputs.back();
        Tensor g_block(block.channels(), block.height(), block.width());
        for (int c = 0; c < block.channels(); ++c)
            for (int y = 0; y < block.height(); ++y)
                for (int x = 0; x < block.width(); ++x)
                    g_block.at(c, y, x) =
                        g_path_out.at(0, y, x) / block.channels() + g_conv.at(c, y, x);

        Tensor g = std::move(g_block);
        for (std::size_t l = path.morph.size(); l-- > 0;)
            g = multichannel_backward(pt.morph_tapes[l], path.morph[l].ses, g);
    }

    NetworkSpec spec_;
    std::array<NetworkPath, 2> paths_;
    std::uint64_t seed_ = 0;
};

}  // namespace morphon
