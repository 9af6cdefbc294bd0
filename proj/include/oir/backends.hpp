// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oir/tensor.hpp"

namespace oir {

using Embedding = std::vector<float>;

/// Latent tensor shape (channels, height, width).
struct LatentShape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::vector<std::size_t> dims() const { return {channels, height, width}; }
    friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

/// Pixel-space image, (H, W, C) layout, values in [0, 1].
class Image {
public:
    Image() = default;
    Image(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f);
    /// Validates rank, finiteness and the [0, 1] range.
    explicit Image(Tensor data);

    std::size_t height() const { return m_data.dim(0); }
    std::size_t width() const { return m_data.dim(1); }
    std::size_t channels() const { return m_data.dim(2); }

    float at(std::size_t y, std::size_t x, std::size_t c) const {
        return m_data[(y * width() + x) * channels() + c];
    }
    float& at(std::size_t y, std::size_t x, std::size_t c) {
        return m_data[(y * width() + x) * channels() + c];
    }

    const Tensor& tensor() const noexcept { return m_data; }
    Tensor& tensor() noexcept { return m_data; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    Tensor m_data;
};

enum class MaskResolution { pixel, latent };

/// Binary mask on either the pixel or the latent grid.
class Mask {
public:
    Mask() = default;
    Mask(std::size_t height, std::size_t width, MaskResolution resolution, bool fill = false);

    std::size_t height() const noexcept { return m_height; }
    std::size_t width() const noexcept { return m_width; }
    MaskResolution resolution() const noexcept { return m_resolution; }

    bool at(std::size_t y, std::size_t x) const { return m_cells[y * m_width + x] != 0; }
    void set(std::size_t y, std::size_t x, bool value) { m_cells[y * m_width + x] = value ? 1 : 0; }

    std::span<const std::uint8_t> cells() const noexcept { return m_cells; }
    std::size_t count() const noexcept;
    bool empty() const noexcept { return count() == 0; }

    Mask complement() const;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t m_height = 0;
    std::size_t m_width = 0;
    MaskResolution m_resolution = MaskResolution::pixel;
    std::vector<std::uint8_t> m_cells;
};

/// Mask with a filled axis-aligned rectangle [top, bottom) x [left, right).
struct Rect {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t bottom = 0;
    std::size_t right = 0;
};
Mask rect_mask(std::size_t height, std::size_t width, const Rect& rect, MaskResolution resolution);

/// Area-average pooling to the latent grid, then threshold at 0.5 (ties become 1).
/// Handles non-integer ratios with fractional cell overlap.
Mask downsample_mask(const Mask& pixel_mask, std::size_t latent_height, std::size_t latent_width);

/// Area-average pooled fractions before thresholding, row-major latent grid.
std::vector<double> pooled_mask_fractions(const Mask& pixel_mask, std::size_t latent_height,
                                          std::size_t latent_width);

// ---------------------------------------------------------------------------
// Model-facing interfaces.

/// Noise prediction network: one ε tensor per batch element.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;

    virtual std::size_t embedding_width() const = 0;
    virtual LatentShape latent_shape() const = 0;
    virtual bool concurrency_safe() const = 0;

    virtual std::vector<Tensor> predict(std::span<const Tensor> latents,
                                        std::span<const std::size_t> timesteps,
                                        std::span<const Embedding> embeddings) = 0;
};

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::size_t embedding_width() const = 0;
    virtual Embedding embed(std::string_view prompt) = 0;
};

class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual LatentShape latent_shape() const = 0;
    virtual std::size_t image_height() const = 0;
    virtual std::size_t image_width() const = 0;
    virtual Tensor encode(const Image& image) = 0;
    virtual Image decode(const Tensor& latent) = 0;
};

/// Cosine-scale similarity between a masked image region and a text prompt.
class RegionScorer {
public:
    virtual ~RegionScorer() = default;
    virtual std::string name() const = 0;
    virtual double score(const Image& image, const Mask& mask, std::string_view text) = 0;
};

class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual std::vector<Mask> segment(const Image& image, std::span<const std::string> phrases) = 0;
};

/// The five backend handles an editing job runs against.
struct BackendSet {
    std::shared_ptr<NoisePredictor> predictor;
    std::shared_ptr<TextEmbedder> embedder;
    std::shared_ptr<LatentCodec> codec;
    std::shared_ptr<RegionScorer> scorer;
    std::shared_ptr<Segmenter> segmenter;
    std::string identity;
};

/// Counts predict() calls and batch elements; forwards everything else.
class CountingPredictor final : public NoisePredictor {
public:
    explicit CountingPredictor(std::shared_ptr<NoisePredictor> inner);

    std::size_t embedding_width() const override { return m_inner->embedding_width(); }
    LatentShape latent_shape() const override { return m_inner->latent_shape(); }
    bool concurrency_safe() const override { return m_inner->concurrency_safe(); }

    std::vector<Tensor> predict(std::span<const Tensor> latents, std::span<const std::size_t> timesteps,
                                std::span<const Embedding> embeddings) override;

    std::size_t calls() const noexcept { return m_calls.load(); }
    std::size_t elements() const noexcept { return m_elements.load(); }
    void reset() noexcept;

private:
    std::shared_ptr<NoisePredictor> m_inner;
    std::atomic<std::size_t> m_calls{0};
    std::atomic<std::size_t> m_elements{0};
};

/// Serializes predict() for backends that are not safe to call concurrently.
class SerializedPredictor final : public NoisePredictor {
public:
    explicit SerializedPredictor(std::shared_ptr<NoisePredictor> inner) : m_inner(std::move(inner)) {}

    std::size_t embedding_width() const override { return m_inner->embedding_width(); }
    LatentShape latent_shape() const override { return m_inner->latent_shape(); }
    bool concurrency_safe() const override { return true; }

    std::vector<Tensor> predict(std::span<const Tensor> latents, std::span<const std::size_t> timesteps,
                                std::span<const Embedding> embeddings) override;

private:
    std::shared_ptr<NoisePredictor> m_inner;
    std::mutex m_mutex;
};

}  // namespace oir
