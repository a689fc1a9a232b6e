#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "ercs/tensor.hpp"

namespace ercs {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct ImageFile {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, height*width samples
    std::string path;

    Tensor to_tensor() const {
        Tensor t({height, width});
        for (std::size_t i = 0; i < pixels.size(); ++i)
            t.data[i] = static_cast<double>(pixels[i]) / 255.0;
        return t;
    }
};

namespace detail {

// next token, skipping whitespace and '#' comment lines
inline std::string pgm_token(std::istream& in, const std::string& path) {
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            break;
        }
    }
    if (c == EOF)
        throw IoError(path + ": truncated header at byte " + std::to_string(in.tellg()));
    std::string tok;
    do {
        tok.push_back(static_cast<char>(c));
    } while ((c = in.get()) != EOF && !std::isspace(c) && c != '#');
    if (c == '#')
        while ((c = in.get()) != EOF && c != '\n') {}
    return tok;
}

}  // namespace detail

// Binary (P5) and ASCII (P2) PGM, maxval <= 255.
inline ImageFile read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    const std::string magic = detail::pgm_token(in, path);
    if (magic != "P5" && magic != "P2")
        throw IoError(path + ": bad magic '" + magic + "' at byte 0");
    auto read_uint = [&](const char* what) -> std::size_t {
        const std::string tok = detail::pgm_token(in, path);
        try {
            return std::stoul(tok);
        } catch (const std::exception&) {
            throw IoError(path + ": bad " + std::string(what) + " '" + tok + "' at byte " +
                          std::to_string(in.tellg()));
        }
    };
    ImageFile img;
    img.path = path;
    img.width = read_uint("width");
    img.height = read_uint("height");
    const std::size_t maxval = read_uint("maxval");
    if (maxval == 0 || maxval > 255)
        throw IoError(path + ": maxval " + std::to_string(maxval) + " out of [1,255]");
    const std::size_t n = img.width * img.height;
    img.pixels.resize(n);
    if (magic == "P5") {
        // exactly one whitespace byte separates maxval from raster
        in.read(reinterpret_cast<char*>(img.pixels.data()),
                static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw IoError(path + ": truncated raster at byte " +
                          std::to_string(in.tellg()));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t v = read_uint("sample");
            if (v > maxval)
                throw IoError(path + ": sample " + std::to_string(v) + " exceeds maxval");
            img.pixels[i] = static_cast<std::uint8_t>(v);
        }
    }
    return img;
}

// Values in [0,1], quantized by round-half-up to 8 bits; emits binary P5.
inline void write_pgm(const Tensor& image, const std::string& path) {
    if (image.shape.size() != 2)
        throw DimensionError("write_pgm: need 2-D image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "P5\n" << image.shape[1] << " " << image.shape[0] << "\n255\n";
    for (double v : image.data) {
        double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        const auto q = static_cast<std::uint8_t>(clamped * 255.0 + 0.5);
        out.put(static_cast<char>(q));
    }
    if (!out) throw IoError(path + ": write failed");
}

struct PaddedImage {
    Tensor padded;
    std::size_t orig_h = 0, orig_w = 0;

    Tensor crop(const Tensor& reconstruction) const {
        Tensor out({orig_h, orig_w});
        for (std::size_t r = 0; r < orig_h; ++r)
            for (std::size_t c = 0; c < orig_w; ++c)
                out.data[r * orig_w + c] = reconstruction.data[r * reconstruction.shape[1] + c];
        return out;
    }
};

// Symmetric (mirror) padding on the right/bottom up to the least size
// compatible with both the 2B sampling tiling and 2^L divisibility.
inline PaddedImage pad_image(const Tensor& image, std::size_t block_side, int levels) {
    if (image.shape.size() != 2) throw DimensionError("pad_image: need 2-D image");
    const std::size_t mod = std::lcm(2 * block_side, std::size_t{1} << levels);
    auto round_up = [mod](std::size_t v) { return ((v + mod - 1) / mod) * mod; };
    PaddedImage out;
    out.orig_h = image.shape[0];
    out.orig_w = image.shape[1];
    const std::size_t H = round_up(out.orig_h), W = round_up(out.orig_w);
    if (H == out.orig_h && W == out.orig_w) {
        out.padded = image;
        return out;
    }
    auto fold = [](std::size_t i, std::size_t n) {
        const std::size_t p = i % (2 * n);
        return p < n ? p : 2 * n - 1 - p;
    };
    out.padded = Tensor({H, W});
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c)
            out.padded.data[r * W + c] =
                image.data[fold(r, out.orig_h) * out.orig_w + fold(c, out.orig_w)];
    return out;
}

}  // namespace ercs
