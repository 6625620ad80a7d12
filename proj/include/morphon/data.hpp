#pragma once

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "morphon/rng.hpp"
#include "morphon/tensor.hpp"

namespace morphon {

struct ImagePair {
    Tensor rainy;
    Tensor clean;
    std::string id;
};

// -------------------------------------------------------------------------
// PGM (P5) read/write. The canonical internal format.
// -------------------------------------------------------------------------

namespace detail_io {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    const auto len = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
    if (!f) throw std::runtime_error("cannot read file: " + path);
    return buf;
}

// Next PNM header token, skipping whitespace and # comments.
inline std::string pnm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
    while (pos < buf.size()) {
        if (std::isspace(buf[pos])) {
            ++pos;
        } else if (buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < buf.size() && !std::isspace(buf[pos])) tok.push_back(static_cast<char>(buf[pos++]));
    return tok;
}

}  // namespace detail_io

inline Tensor load_pgm(const std::string& path) {
    const auto buf = detail_io::read_file(path);
    std::size_t pos = 0;
    if (detail_io::pnm_token(buf, pos) != "P5")
        throw std::runtime_error("not a binary PGM (P5): " + path);
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(detail_io::pnm_token(buf, pos));
        h = std::stoi(detail_io::pnm_token(buf, pos));
        maxval = std::stoi(detail_io::pnm_token(buf, pos));
    } catch (const std::exception&) {
        throw std::runtime_error("malformed PGM header: " + path);
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw std::runtime_error("unsupported PGM (need 8-bit, positive size): " + path);
    ++pos;  // single whitespace after maxval
    if (pos + static_cast<std::size_t>(w) * h > buf.size())
        throw std::runtime_error("truncated PGM data: " + path);

    Tensor img(1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(0, y, x) = buf[pos++] / static_cast<double>(maxval);
    return img;
}

inline void write_pgm(const std::string& path, const Image8& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write file: " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!f) throw std::runtime_error("failed writing PGM: " + path);
}

// Round half up from [0,1]*255; values outside [0,1] are clamped.
inline std::uint8_t to_byte(double v) {
    const double scaled = std::floor(v * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

inline void write_pgm(const std::string& path, const Tensor& image) {
    if (image.channels() != 1)
        throw std::invalid_argument("write_pgm: expected single-channel tensor, got " +
                                    image.shape_str());
    Image8 img;
    img.height = image.height();
    img.width = image.width();
    img.pixels.resize(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) img.pixels[i] = to_byte(image[i]);
    write_pgm(path, img);
}

// -------------------------------------------------------------------------
// PNG read (8-bit gray / gray+alpha / RGB / RGBA, non-interlaced).
// Chunk parsing and row unfiltering here; DEFLATE via zlib.
// -------------------------------------------------------------------------

namespace detail_io {

inline std::uint32_t be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace detail_io

inline Tensor load_png(const std::string& path) {
    const auto buf = detail_io::read_file(path);
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
        throw std::runtime_error("not a PNG file: " + path);

    std::uint32_t w = 0, h = 0;
    int bit_depth = 0, color_type = 0, interlace = 0;
    bool have_ihdr = false;
    std::vector<std::uint8_t> idat;

    std::size_t pos = 8;
    while (pos + 8 <= buf.size()) {
        const std::uint32_t len = detail_io::be32(&buf[pos]);
        if (pos + 12 + len > buf.size()) throw std::runtime_error("truncated PNG: " + path);
        const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
        const std::uint8_t* data = &buf[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("bad PNG IHDR: " + path);
            w = detail_io::be32(data);
            h = detail_io::be32(data + 4);
            bit_depth = data[8];
            color_type = data[9];
            interlace = data[12];
            have_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!have_ihdr || w == 0 || h == 0) throw std::runtime_error("bad PNG header: " + path);
    if (bit_depth != 8) throw std::runtime_error("unsupported PNG bit depth (need 8): " + path);
    if (interlace != 0) throw std::runtime_error("interlaced PNG not supported: " + path);
    int channels;
    switch (color_type) {
        case 0: channels = 1; break;  // gray
        case 2: channels = 3; break;  // RGB
        case 4: channels = 2; break;  // gray + alpha
        case 6: channels = 4; break;  // RGBA
        default: throw std::runtime_error("unsupported PNG color type: " + path);
    }

    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw std::runtime_error("PNG decompression failed: " + path);

    // Undo per-row filters in place into a separate pixel buffer.
    std::vector<std::uint8_t> px(static_cast<std::size_t>(h) * stride);
    for (std::uint32_t y = 0; y < h; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = &raw[y * (stride + 1) + 1];
        std::uint8_t* dst = &px[y * stride];
        const std::uint8_t* up = y > 0 ? &px[(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= static_cast<std::size_t>(channels)) ? up[i - channels] : 0;
            int v;
            switch (filter) {
                case 0: v = src[i]; break;
                case 1: v = src[i] + a; break;
                case 2: v = src[i] + b; break;
                case 3: v = src[i] + (a + b) / 2; break;
                case 4: v = src[i] + detail_io::paeth(a, b, c); break;
                default: throw std::runtime_error("bad PNG filter type: " + path);
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    Tensor img(1, static_cast<int>(h), static_cast<int>(w));
    for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            const std::uint8_t* p = &px[y * stride + x * channels];
            double gray;
            if (channels <= 2) {
                gray = p[0];
            } else {
                gray = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            }
            img.at(0, static_cast<int>(y), static_cast<int>(x)) = gray / 255.0;
        }
    }
    return img;
}

// Dispatch by magic bytes; single-channel tensor in [0,1], color via luma.
inline Tensor load_grayscale(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    char magic[2] = {0, 0};
    f.read(magic, 2);
    f.close();
    if (magic[0] == 'P' && magic[1] == '5') return load_pgm(path);
    if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') return load_png(path);
    throw std::runtime_error("unsupported image format (need PGM P5 or PNG): " + path);
}

// -------------------------------------------------------------------------
// Bilinear resize, corner-aligned sampling.
// -------------------------------------------------------------------------

inline Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
    require_nonempty(img, "resize_bilinear");
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("resize_bilinear: target dimensions must be >= 1");
    const int in_h = img.height(), in_w = img.width();
    const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;

    Tensor out(img.channels(), out_h, out_w);
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < out_h; ++y) {
            const double fy = y * sy;
            const int y0 = std::min(static_cast<int>(fy), in_h - 1);
            const int y1 = std::min(y0 + 1, in_h - 1);
            const double ty = fy - y0;
            for (int x = 0; x < out_w; ++x) {
                const double fx = x * sx;
                const int x0 = std::min(static_cast<int>(fx), in_w - 1);
                const int x1 = std::min(x0 + 1, in_w - 1);
                const double tx = fx - x0;
                const double top = img.at(c, y0, x0) * (1.0 - tx) + img.at(c, y0, x1) * tx;
                const double bot = img.at(c, y1, x0) * (1.0 - tx) + img.at(c, y1, x1) * tx;
                out.at(c, y, x) = top * (1.0 - ty) + bot * ty;
            }
        }
    }
    return out;
}

// -------------------------------------------------------------------------
// Dataset split: deterministic shuffled 80/10/10 by id, remainders to train.
// -------------------------------------------------------------------------

struct SplitResult {
    std::vector<std::string> train, val, test;
};

inline SplitResult split_dataset(std::vector<std::string> ids, std::uint64_t seed) {
    if (ids.empty()) throw std::invalid_argument("split_dataset: empty id list");
    Rng rng(seed);
    rng.shuffle(ids);
    const std::size_t n = ids.size();
    const std::size_t n_val = n / 10;
    const std::size_t n_test = n / 10;
    const std::size_t n_train = n - n_val - n_test;
    SplitResult r;
    r.train.assign(ids.begin(), ids.begin() + n_train);
    r.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    r.test.assign(ids.begin() + n_train + n_val, ids.end());
    return r;
}

// -------------------------------------------------------------------------
// Synthetic rain: additive anti-aliased bright streaks.
// -------------------------------------------------------------------------

struct RainConfig {
    int streak_count = 60;
    double streak_length = 12.0;   // pixels
    double streak_width = 1.2;     // pixels
    double angle_deg = 0.0;        // from vertical, [-45, 45]
    double intensity = 0.4;        // additive brightness
    std::uint64_t seed = 1;
};

namespace detail_rain {

inline void check_config(const RainConfig& cfg) {
    if (cfg.intensity < 0.0 || cfg.intensity > 1.0)
        throw std::invalid_argument("RainConfig: intensity must lie in [0, 1]");
    if (cfg.angle_deg < -45.0 || cfg.angle_deg > 45.0)
        throw std::invalid_argument("RainConfig: angle must lie in [-45, 45] degrees");
    if (cfg.streak_count < 0 || cfg.streak_length <= 0.0 || cfg.streak_width <= 0.0)
        throw std::invalid_argument("RainConfig: invalid streak geometry");
}

// Coverage in [0,1] per pixel: distance to the streak segment mapped through
// a one-pixel soft edge. Overlapping streaks combine by max.
inline Tensor streak_coverage(int h, int w, const RainConfig& cfg) {
    Tensor cov(1, h, w);
    Rng rng(cfg.seed);
    const double theta = cfg.angle_deg * 3.14159265358979323846 / 180.0;
    const double dx = std::sin(theta);
    const double dy = std::cos(theta);
    for (int s = 0; s < cfg.streak_count; ++s) {
        const double cx = rng.uniform(0.0, static_cast<double>(w));
        const double cy = rng.uniform(0.0, static_cast<double>(h));
        const double half = cfg.streak_length / 2.0;
        const double x0 = cx - dx * half, y0 = cy - dy * half;
        const double x1 = cx + dx * half, y1 = cy + dy * half;

        const int pad = static_cast<int>(std::ceil(cfg.streak_width / 2.0 + 1.0));
        const int bx0 = std::max(0, static_cast<int>(std::floor(std::min(x0, x1))) - pad);
        const int bx1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(x0, x1))) + pad);
        const int by0 = std::max(0, static_cast<int>(std::floor(std::min(y0, y1))) - pad);
        const int by1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(y0, y1))) + pad);

        const double vx = x1 - x0, vy = y1 - y0;
        const double len2 = vx * vx + vy * vy;
        for (int y = by0; y <= by1; ++y) {
            for (int x = bx0; x <= bx1; ++x) {
                const double px = x - x0, py = y - y0;
                double t = len2 > 0.0 ? (px * vx + py * vy) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double ddx = px - t * vx, ddy = py - t * vy;
                const double dist = std::sqrt(ddx * ddx + ddy * ddy);
                const double c = std::clamp(cfg.streak_width / 2.0 + 0.5 - dist, 0.0, 1.0);
                cov.at(0, y, x) = std::max(cov.at(0, y, x), c);
            }
        }
    }
    return cov;
}

}  // namespace detail_rain

inline ImagePair synthesize_rain(const Tensor& clean, const RainConfig& cfg) {
    detail_rain::check_config(cfg);
    if (clean.channels() != 1)
        throw std::invalid_argument("synthesize_rain: expected single-channel image");
    const Tensor cov = detail_rain::streak_coverage(clean.height(), clean.width(), cfg);
    ImagePair pair;
    pair.clean = clean;
    pair.rainy = clean;
    for (std::size_t i = 0; i < clean.size(); ++i)
        pair.rainy[i] = std::min(1.0, clean[i] + cfg.intensity * cov[i]);
    return pair;
}

// Rain on the left half only; the right half stays bit-identical to clean.
inline ImagePair synthesize_half_degraded(const Tensor& clean, const RainConfig& cfg) {
    detail_rain::check_config(cfg);
    if (clean.channels() != 1)
        throw std::invalid_argument("synthesize_half_degraded: expected single-channel image");
    Tensor cov = detail_rain::streak_coverage(clean.height(), clean.width(), cfg);
    const int half = clean.width() / 2;
    for (int y = 0; y < clean.height(); ++y)
        for (int x = half; x < clean.width(); ++x) cov.at(0, y, x) = 0.0;
    ImagePair pair;
    pair.clean = clean;
    pair.rainy = clean;
    for (std::size_t i = 0; i < clean.size(); ++i)
        pair.rainy[i] = std::min(1.0, clean[i] + cfg.intensity * cov[i]);
    return pair;
}

// Procedural clean images for desk-scale experiments: oriented gradient
// background, a few gray rectangles and soft blobs.
inline Tensor procedural_clean(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor img(1, h, w);
    const double base = rng.uniform(0.25, 0.6);
    const double gx = rng.uniform(-0.3, 0.3);
    const double gy = rng.uniform(-0.3, 0.3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(0, y, x) = base + gx * x / std::max(1, w - 1) + gy * y / std::max(1, h - 1);

    const int n_rect = 2 + static_cast<int>(rng.uniform_index(3));
    for (int r = 0; r < n_rect; ++r) {
        const int rw = 4 + static_cast<int>(rng.uniform_index(std::max(2, w / 2)));
        const int rh = 4 + static_cast<int>(rng.uniform_index(std::max(2, h / 2)));
        const int rx = static_cast<int>(rng.uniform_index(std::max(1, w - rw)));
        const int ry = static_cast<int>(rng.uniform_index(std::max(1, h - rh)));
        const double v = rng.uniform(0.1, 0.9);
        for (int y = ry; y < std::min(h, ry + rh); ++y)
            for (int x = rx; x < std::min(w, rx + rw); ++x) img.at(0, y, x) = v;
    }

    const int n_blob = 1 + static_cast<int>(rng.uniform_index(3));
    for (int b = 0; b < n_blob; ++b) {
        const double bx = rng.uniform(0.0, static_cast<double>(w));
        const double by = rng.uniform(0.0, static_cast<double>(h));
        const double sigma = rng.uniform(2.0, std::max(3.0, w / 6.0));
        const double amp = rng.uniform(-0.3, 0.3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                img.at(0, y, x) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
            }
    }

    for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.05, 0.95);
    return img;
}

// -------------------------------------------------------------------------
// Dataset manifest: one "rainy_path<TAB>clean_path" line per pair.
// -------------------------------------------------------------------------

struct ManifestEntry {
    std::string rainy_path;
    std::string clean_path;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("manifest line missing tab separator: " + line);
        entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return entries;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest: " + path);
    for (const auto& e : entries) f << e.rainy_path << "\t" << e.clean_path << "\n";
}

inline std::vector<ImagePair> load_pairs(const std::vector<ManifestEntry>& entries) {
    std::vector<ImagePair> pairs;
    pairs.reserve(entries.size());
    for (const auto& e : entries) {
        ImagePair p;
        p.rainy = load_grayscale(e.rainy_path);
        p.clean = load_grayscale(e.clean_path);
        if (!p.rainy.same_shape(p.clean))
            throw std::runtime_error("manifest pair shape mismatch: " + e.rainy_path + " vs " +
                                     e.clean_path);
        p.id = e.rainy_path;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace morphon
