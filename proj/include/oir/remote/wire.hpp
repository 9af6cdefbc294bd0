// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Wire format shared with the model server.
//
// Every request and response is a JSON object. Tensors travel as
//   {"dtype": "float32", "shape": [d0, d1, ...], "data": "<base64>"}
// where data is the row-major payload as little-endian IEEE-754 binary32.
// Images are (H, W, C) tensors in [0, 1], latents (C, H, W), masks (H, W)
// holding 0.0 / 1.0. Requests are batch-first:
//
//   POST /v1/handshake   {"protocol_version"}                      -> capabilities
//   POST /v1/embed_text  {"prompts": [str]}                        -> {"embeddings": [T]}
//   POST /v1/eps         {"latents": [T], "timesteps": [int],
//                         "embeddings": [T]}                       -> {"eps": [T]}
//   POST /v1/encode      {"images": [T]}                           -> {"latents": [T]}
//   POST /v1/decode      {"latents": [T]}                          -> {"images": [T]}
//   POST /v1/clip_score  {"images": [T], "masks": [T],
//                         "texts": [str]}                          -> {"scores": [float]}
//   POST /v1/segment     {"images": [T], "phrases": [[str]]}       -> {"masks": [[T]]}
//
// Failures answer with a non-200 status and {"error": {"kind", "message"}}.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "oir/backends.hpp"
#include "oir/tensor.hpp"

namespace oir::remote {

inline constexpr std::string_view kProtocolVersion = "1";

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

nlohmann::json marshal_tensor(const Tensor& tensor);
/// Throws a protocol error on a malformed envelope or a shape/length mismatch.
Tensor unmarshal_tensor(const nlohmann::json& j);

nlohmann::json marshal_image(const Image& image);
Image unmarshal_image(const nlohmann::json& j);

nlohmann::json marshal_mask(const Mask& mask);
Mask unmarshal_mask(const nlohmann::json& j, MaskResolution resolution);

nlohmann::json error_body(std::string_view kind, std::string_view message);

/// First n characters of a payload, for error messages.
std::string excerpt(std::string_view payload, std::size_t n = 160);

}  // namespace oir::remote
