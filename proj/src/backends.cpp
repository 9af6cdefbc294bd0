// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/backends.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "oir/error.hpp"

namespace oir {

Image::Image(std::size_t height, std::size_t width, std::size_t channels, float fill)
    : m_data({height, width, channels}, fill) {
    if (fill < 0.0f || fill > 1.0f) {
        throw_error(ErrorKind::parameter, "image fill value outside [0, 1]");
    }
}

Image::Image(Tensor data) : m_data(std::move(data)) {
    if (m_data.rank() != 3) {
        throw_error(ErrorKind::parameter, "image tensor must be (H, W, C)");
    }
    for (float v : m_data.values()) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
            throw_error(ErrorKind::parameter, "image values must be finite and within [0, 1]");
        }
    }
}

Mask::Mask(std::size_t height, std::size_t width, MaskResolution resolution, bool fill)
    : m_height(height), m_width(width), m_resolution(resolution), m_cells(height * width, fill ? 1 : 0) {}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(m_cells.begin(), m_cells.end(), std::uint8_t{1}));
}

Mask Mask::complement() const {
    Mask out = *this;
    for (auto& c : out.m_cells) {
        c = c ? 0 : 1;
    }
    return out;
}

Mask rect_mask(std::size_t height, std::size_t width, const Rect& rect, MaskResolution resolution) {
    if (rect.top > rect.bottom || rect.left > rect.right || rect.bottom > height || rect.right > width) {
        throw_error(ErrorKind::parameter, "rectangle [" + std::to_string(rect.top) + "," + std::to_string(rect.left) +
                                              "," + std::to_string(rect.bottom) + "," + std::to_string(rect.right) +
                                              ") outside " + std::to_string(height) + "x" + std::to_string(width));
    }
    Mask m(height, width, resolution);
    for (std::size_t y = rect.top; y < rect.bottom; ++y) {
        for (std::size_t x = rect.left; x < rect.right; ++x) {
            m.set(y, x, true);
        }
    }
    return m;
}

namespace {

struct Span {
    std::size_t index;
    double weight;
};

// Source cells overlapping target cell i when n_src cells map onto n_dst.
std::vector<std::vector<Span>> overlap_table(std::size_t n_src, std::size_t n_dst) {
    std::vector<std::vector<Span>> table(n_dst);
    for (std::size_t i = 0; i < n_dst; ++i) {
        const double lo = static_cast<double>(i * n_src) / static_cast<double>(n_dst);
        const double hi = static_cast<double>((i + 1) * n_src) / static_cast<double>(n_dst);
        const auto first = static_cast<std::size_t>(std::floor(lo));
        const auto last = std::min(n_src, static_cast<std::size_t>(std::ceil(hi)));
        for (std::size_t s = first; s < last; ++s) {
            const double w = std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
            if (w > 0.0) {
                table[i].push_back({s, w});
            }
        }
    }
    return table;
}

}  // namespace

std::vector<double> pooled_mask_fractions(const Mask& pixel_mask, std::size_t latent_height, std::size_t latent_width) {
    if (latent_height == 0 || latent_width == 0) {
        throw_error(ErrorKind::parameter, "latent mask dimensions must be nonzero");
    }
    if (pixel_mask.resolution() != MaskResolution::pixel) {
        throw_error(ErrorKind::parameter, "downsample_mask expects a pixel-resolution mask");
    }
    const auto rows = overlap_table(pixel_mask.height(), latent_height);
    const auto cols = overlap_table(pixel_mask.width(), latent_width);
    std::vector<double> out(latent_height * latent_width, 0.0);
    for (std::size_t i = 0; i < latent_height; ++i) {
        for (std::size_t j = 0; j < latent_width; ++j) {
            double covered = 0.0;
            double area = 0.0;
            for (const auto& r : rows[i]) {
                for (const auto& c : cols[j]) {
                    const double w = r.weight * c.weight;
                    area += w;
                    if (pixel_mask.at(r.index, c.index)) {
                        covered += w;
                    }
                }
            }
            out[i * latent_width + j] = area > 0.0 ? covered / area : 0.0;
        }
    }
    return out;
}

Mask downsample_mask(const Mask& pixel_mask, std::size_t latent_height, std::size_t latent_width) {
    const auto fractions = pooled_mask_fractions(pixel_mask, latent_height, latent_width);
    Mask out(latent_height, latent_width, MaskResolution::latent);
    for (std::size_t i = 0; i < latent_height; ++i) {
        for (std::size_t j = 0; j < latent_width; ++j) {
            out.set(i, j, fractions[i * latent_width + j] >= 0.5);
        }
    }
    return out;
}

CountingPredictor::CountingPredictor(std::shared_ptr<NoisePredictor> inner) : m_inner(std::move(inner)) {}

std::vector<Tensor> CountingPredictor::predict(std::span<const Tensor> latents, std::span<const std::size_t> timesteps,
                                               std::span<const Embedding> embeddings) {
    ++m_calls;
    m_elements += latents.size();
    return m_inner->predict(latents, timesteps, embeddings);
}

void CountingPredictor::reset() noexcept {
    m_calls = 0;
    m_elements = 0;
}

std::vector<Tensor> SerializedPredictor::predict(std::span<const Tensor> latents,
                                                 std::span<const std::size_t> timesteps,
                                                 std::span<const Embedding> embeddings) {
    std::lock_guard lock(m_mutex);
    return m_inner->predict(latents, timesteps, embeddings);
}

}  // namespace oir
