// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oir/backends.hpp"
#include "oir/tensor.hpp"

namespace oir::cli {

/// Reads any PNG as 8-bit RGB scaled to [0, 1].
Image read_png(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image, quantizing round(v * 255).
void write_png(const std::filesystem::path& path, const Image& image);

/// Latent snapshot: "OIRT", version byte 1, (C, H, W) as u32 LE, then f32 LE row-major.
void write_oirt(const std::filesystem::path& path, const Tensor& latent);
Tensor read_oirt(const std::filesystem::path& path);

inline constexpr unsigned char kOirtVersion = 1;

/// Tiles images row-major on a white background with a 2 px gutter.
Image contact_sheet(const std::vector<Image>& images, std::size_t columns = 0);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace oir::cli
