#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphon/data.hpp"
#include "morphon/network.hpp"

namespace morphon {

struct TrainingMeta {
    std::uint64_t epochs_run = 0;
    double final_train_loss = std::numeric_limits<double>::quiet_NaN();
    double final_val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct LoadedCheckpoint {
    Network net;
    AdamState adam;
    TrainingMeta meta;
};

// Versioned binary container: magic "MRPH", u32 version, length-prefixed JSON
// spec descriptor, then per grid the values and Adam moments as little-endian
// f32, closed by a CRC32 trailer.
namespace detail_ckpt {

constexpr char kMagic[4] = {'M', 'R', 'P', 'H'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline float get_f32(const std::uint8_t* p) {
    const std::uint32_t bits = get_u32(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline const char* layer_kind_str(LayerKind k) {
    switch (k) {
        case LayerKind::dilation: return "dilation";
        case LayerKind::erosion: return "erosion";
        default: return "conv";
    }
}

inline LayerKind layer_kind_from(const std::string& s) {
    if (s == "dilation") return LayerKind::dilation;
    if (s == "erosion") return LayerKind::erosion;
    if (s == "conv") return LayerKind::conv;
    throw std::runtime_error("checkpoint: unknown layer kind '" + s + "'");
}

inline Activation activation_from(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    throw std::runtime_error("checkpoint: unknown activation '" + s + "'");
}

inline nlohmann::json path_to_json(const std::vector<LayerSpec>& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const LayerSpec& l : path)
        arr.push_back({{"kind", layer_kind_str(l.kind)},
                       {"count", l.count},
                       {"kh", l.kernel_rows},
                       {"kw", l.kernel_cols},
                       {"act", activation_name(l.activation)}});
    return arr;
}

inline std::vector<LayerSpec> path_from_json(const nlohmann::json& arr) {
    std::vector<LayerSpec> path;
    for (const auto& j : arr) {
        LayerSpec l;
        l.kind = layer_kind_from(j.at("kind").get<std::string>());
        l.count = j.at("count").get<int>();
        l.kernel_rows = j.at("kh").get<int>();
        l.kernel_cols = j.at("kw").get<int>();
        l.activation = activation_from(j.at("act").get<std::string>());
        path.push_back(l);
    }
    return path;
}

inline nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

inline double double_or_nan(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail_ckpt

inline void save_checkpoint(const std::string& path, const Network& net, const AdamState& adam,
                            const TrainingMeta& meta = {}) {
    using nlohmann::json;
    json header;
    header["arch"] = {{"path1", detail_ckpt::path_to_json(net.spec().path1)},
                      {"path2", detail_ckpt::path_to_json(net.spec().path2)}};
    header["seed"] = net.seed();
    header["adam"] = {{"lr", adam.lr},
                      {"beta1", adam.beta1},
                      {"beta2", adam.beta2},
                      {"epsilon", adam.epsilon},
                      {"step_count", adam.step_count}};
    header["meta"] = {{"epochs_run", meta.epochs_run},
                      {"final_train_loss", detail_ckpt::finite_or_null(meta.final_train_loss)},
                      {"final_val_loss", detail_ckpt::finite_or_null(meta.final_val_loss)}};
    const std::string header_str = header.dump();

    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), detail_ckpt::kMagic, detail_ckpt::kMagic + 4);
    detail_ckpt::put_u32(bytes, detail_ckpt::kVersion);
    detail_ckpt::put_u32(bytes, static_cast<std::uint32_t>(header_str.size()));
    bytes.insert(bytes.end(), header_str.begin(), header_str.end());

    for (const ParamGrid* grid : net.parameter_grids()) {
        for (float v : grid->values) detail_ckpt::put_f32(bytes, v);
        for (float v : grid->adam_m) detail_ckpt::put_f32(bytes, v);
        for (float v : grid->adam_v) detail_ckpt::put_f32(bytes, v);
    }

    const std::uint32_t crc =
        static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
    detail_ckpt::put_u32(bytes, crc);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> bytes = detail_io::read_file(path);
    if (bytes.size() < 12) throw std::runtime_error("checkpoint: truncated file " + path);
    if (std::memcmp(bytes.data(), detail_ckpt::kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t version = detail_ckpt::get_u32(&bytes[4]);
    if (version != detail_ckpt::kVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version) + " in " + path);
    const std::uint32_t header_len = detail_ckpt::get_u32(&bytes[8]);
    if (12 + static_cast<std::size_t>(header_len) + 4 > bytes.size())
        throw std::runtime_error("checkpoint: truncated file " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("checkpoint: malformed header in " + path);
    }

    LoadedCheckpoint ckpt;
    NetworkSpec spec;
    try {
        spec.path1 = detail_ckpt::path_from_json(header.at("arch").at("path1"));
        spec.path2 = detail_ckpt::path_from_json(header.at("arch").at("path2"));
        ckpt.net = Network::build(spec, header.at("seed").get<std::uint64_t>());
        const auto& adam = header.at("adam");
        ckpt.adam.lr = adam.at("lr").get<double>();
        ckpt.adam.beta1 = adam.at("beta1").get<double>();
        ckpt.adam.beta2 = adam.at("beta2").get<double>();
        ckpt.adam.epsilon = adam.at("epsilon").get<double>();
        ckpt.adam.step_count = adam.at("step_count").get<std::uint64_t>();
        const auto& meta = header.at("meta");
        ckpt.meta.epochs_run = meta.at("epochs_run").get<std::uint64_t>();
        ckpt.meta.final_train_loss = detail_ckpt::double_or_nan(meta.at("final_train_loss"));
        ckpt.meta.final_val_loss = detail_ckpt::double_or_nan(meta.at("final_val_loss"));
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("checkpoint: malformed header in " + path);
    }

    std::size_t blob = 0;
    for (const ParamGrid* grid : ckpt.net.parameter_grids()) blob += grid->size() * 12;
    const std::size_t expected = 12 + header_len + blob + 4;
    if (bytes.size() != expected) throw std::runtime_error("checkpoint: truncated file " + path);

    const std::uint32_t stored_crc = detail_ckpt::get_u32(&bytes[bytes.size() - 4]);
    const std::uint32_t actual_crc = static_cast<std::uint32_t>(
        crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
    if (stored_crc != actual_crc)
        throw std::runtime_error("checkpoint: checksum mismatch in " + path);

    std::size_t pos = 12 + header_len;
    auto read_block = [&](std::vector<float>& dst) {
        for (float& v : dst) {
            v = detail_ckpt::get_f32(&bytes[pos]);
            pos += 4;
        }
    };
    for (ParamGrid* grid : ckpt.net.parameter_grids()) {
        read_block(grid->values);
        read_block(grid->adam_m);
        read_block(grid->adam_v);
    }
    return ckpt;
}

}  // namespace morphon
