// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/cli/image_io.hpp"

#include <png.h>

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "oir/error.hpp"

namespace oir::cli {

Image read_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw_error(ErrorKind::io, "cannot read PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw_error(ErrorKind::io, "cannot decode PNG " + path.string() + ": " + msg);
    }
    Tensor t({img.height, img.width, 3});
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        t[i] = static_cast<float>(buffer[i]) / 255.0f;
    }
    return Image(std::move(t));
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw_error(ErrorKind::parameter, "PNG output supports 1 or 3 channels");
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const auto values = image.tensor().values();
    std::vector<png_byte> buffer(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        buffer[i] = static_cast<png_byte>(std::lround(std::clamp(values[i], 0.0f, 1.0f) * 255.0f));
    }
    if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        throw_error(ErrorKind::io, "cannot write PNG " + path.string() + ": " + img.message);
    }
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                                static_cast<char>(v >> 24)};
    out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char*>(b.data()), 4);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

void write_oirt(const std::filesystem::path& path, const Tensor& latent) {
    if (latent.rank() != 3) {
        throw_error(ErrorKind::parameter, "OIRT snapshots hold (C, H, W) latents");
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw_error(ErrorKind::io, "cannot open " + path.string());
    }
    out.write("OIRT", 4);
    out.put(static_cast<char>(kOirtVersion));
    for (std::size_t d = 0; d < 3; ++d) {
        put_u32(out, static_cast<std::uint32_t>(latent.dim(d)));
    }
    for (float v : latent.values()) {
        put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) {
        throw_error(ErrorKind::io, "failed writing " + path.string());
    }
}

Tensor read_oirt(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_error(ErrorKind::io, "cannot open " + path.string());
    }
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (std::string_view(magic.data(), 4) != "OIRT") {
        throw_error(ErrorKind::io, path.string() + " is not an OIRT file");
    }
    const int version = in.get();
    if (version != kOirtVersion) {
        throw_error(ErrorKind::io, "unsupported OIRT version " + std::to_string(version));
    }
    std::vector<std::size_t> shape(3);
    for (auto& d : shape) {
        d = get_u32(in);
    }
    Tensor t(shape);
    for (auto& v : t.values()) {
        v = std::bit_cast<float>(get_u32(in));
    }
    if (!in) {
        throw_error(ErrorKind::io, path.string() + " is truncated");
    }
    return t;
}

Image contact_sheet(const std::vector<Image>& images, std::size_t columns) {
    if (images.empty()) {
        throw_error(ErrorKind::parameter, "contact sheet needs at least one image");
    }
    constexpr std::size_t kGap = 2;
    const std::size_t n = images.size();
    if (columns == 0) {
        columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    }
    const std::size_t rows = (n + columns - 1) / columns;
    const std::size_t h = images.front().height();
    const std::size_t w = images.front().width();
    const std::size_t c = images.front().channels();
    Image sheet(rows * h + (rows + 1) * kGap, columns * w + (columns + 1) * kGap, c, 1.0f);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& img = images[k];
        if (img.height() != h || img.width() != w || img.channels() != c) {
            throw_error(ErrorKind::parameter, "contact sheet images must share one shape");
        }
        const std::size_t oy = kGap + (k / columns) * (h + kGap);
        const std::size_t ox = kGap + (k % columns) * (w + kGap);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    sheet.at(oy + y, ox + x, ch) = img.at(y, x, ch);
                }
            }
        }
    }
    return sheet;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_error(ErrorKind::io, "cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr)) {
        throw_error(ErrorKind::io, "SHA-256 failed for " + path.string());
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

}  // namespace oir::cli
