// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/remote/wire.hpp"

#include <bit>
#include <cstring>

#include <openssl/evp.h>

#include "oir/error.hpp"

namespace oir::remote {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw_error(ErrorKind::protocol, "base64 payload length " + std::to_string(text.size()) +
                                             " is not a multiple of 4");
    }
    std::vector<std::uint8_t> out(3 * (text.size() / 4));
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) {
        throw_error(ErrorKind::protocol, "invalid base64 payload: " + excerpt(text, 40));
    }
    // EVP_DecodeBlock counts padding as zero bytes
    std::size_t padding = 0;
    for (std::size_t i = text.size(); i > 0 && text[i - 1] == '=' && padding < 2; --i) {
        ++padding;
    }
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

nlohmann::json marshal_tensor(const Tensor& tensor) {
    std::vector<std::uint8_t> bytes(tensor.size() * 4);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(tensor[i]);
        bytes[4 * i + 0] = static_cast<std::uint8_t>(bits);
        bytes[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
        bytes[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
        bytes[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
    }
    return {{"dtype", "float32"}, {"shape", tensor.shape()}, {"data", base64_encode(bytes)}};
}

Tensor unmarshal_tensor(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("shape") || !j.contains("data") || !j["shape"].is_array() ||
        !j["data"].is_string()) {
        throw_error(ErrorKind::protocol, "malformed tensor envelope: " + excerpt(j.dump()));
    }
    if (j.contains("dtype") && j["dtype"] != "float32") {
        throw_error(ErrorKind::protocol, "unsupported tensor dtype " + j["dtype"].dump());
    }
    std::vector<std::size_t> shape;
    for (const auto& d : j["shape"]) {
        if (!d.is_number_unsigned()) {
            throw_error(ErrorKind::protocol, "tensor shape entries must be nonnegative integers: " + excerpt(j["shape"].dump()));
        }
        shape.push_back(d.get<std::size_t>());
    }
    const auto bytes = base64_decode(j["data"].get_ref<const std::string&>());
    const std::size_t expected = element_count(shape);
    if (bytes.size() != expected * 4) {
        throw_error(ErrorKind::protocol, "tensor shape " + j["shape"].dump() + " needs " + std::to_string(expected) +
                                             " values, payload holds " + std::to_string(bytes.size() / 4) +
                                             (bytes.size() % 4 ? " and a partial value" : ""));
    }
    std::vector<float> data(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                                   static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                                   static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                                   static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
        data[i] = std::bit_cast<float>(bits);
    }
    return Tensor(std::move(shape), std::move(data));
}

nlohmann::json marshal_image(const Image& image) {
    return marshal_tensor(image.tensor());
}

Image unmarshal_image(const nlohmann::json& j) {
    Tensor t = unmarshal_tensor(j);
    try {
        return Image(std::move(t));
    } catch (const Error& e) {
        throw Error(ErrorKind::protocol, "invalid image payload: " + e.detail());
    }
}

nlohmann::json marshal_mask(const Mask& mask) {
    Tensor t({mask.height(), mask.width()});
    const auto cells = mask.cells();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        t[i] = cells[i] ? 1.0f : 0.0f;
    }
    return marshal_tensor(t);
}

Mask unmarshal_mask(const nlohmann::json& j, MaskResolution resolution) {
    const Tensor t = unmarshal_tensor(j);
    if (t.rank() != 2) {
        throw_error(ErrorKind::protocol, "mask tensors must be (H, W)");
    }
    Mask m(t.dim(0), t.dim(1), resolution);
    for (std::size_t y = 0; y < t.dim(0); ++y) {
        for (std::size_t x = 0; x < t.dim(1); ++x) {
            const float v = t[y * t.dim(1) + x];
            if (v != 0.0f && v != 1.0f) {
                throw_error(ErrorKind::protocol, "mask values must be 0 or 1");
            }
            m.set(y, x, v == 1.0f);
        }
    }
    return m;
}

nlohmann::json error_body(std::string_view kind, std::string_view message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

std::string excerpt(std::string_view payload, std::size_t n) {
    if (payload.size() <= n) {
        return std::string(payload);
    }
    return std::string(payload.substr(0, n)) + "...";
}

}  // namespace oir::remote
