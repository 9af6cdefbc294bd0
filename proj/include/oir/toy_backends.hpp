// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "oir/backends.hpp"

namespace oir::toy {

/// Linear oracle ε(x, t, e) = A_e x + b_{e,t}.
///
/// A_e mixes channels per pixel and adds a one-row cyclic shift term:
///   A_e x = M_e x + g_e * roll_rows(x)
/// with ||M_e||_F <= 0.07 and |g_e| <= 0.03, so the spectral norm is at most 0.1.
/// b_{e,t} = (0.5 + t / T) * sum_j e_j phi_j with smooth seeded fields phi_j.
/// Everything is derived from (seed, embedding); evaluation is pure.
class ToyNoisePredictor final : public NoisePredictor {
public:
    static constexpr double kMixNormBound = 0.07;
    static constexpr double kShiftBound = 0.03;

    ToyNoisePredictor(std::uint64_t seed, LatentShape shape, std::size_t embedding_width = 8,
                      std::size_t total_train_steps = 1000);

    std::size_t embedding_width() const override { return m_width; }
    LatentShape latent_shape() const override { return m_shape; }
    bool concurrency_safe() const override { return true; }

    std::vector<Tensor> predict(std::span<const Tensor> latents, std::span<const std::size_t> timesteps,
                                std::span<const Embedding> embeddings) override;

    /// Single-element convenience form of predict().
    Tensor eps(const Tensor& latent, std::size_t timestep, const Embedding& embedding) const;

    /// Channel mixing matrix M_e (C x C, row-major) and shift gain g_e.
    std::pair<std::vector<double>, double> linear_part(const Embedding& embedding) const;

private:
    LatentShape m_shape;
    std::size_t m_width;
    std::size_t m_total_train_steps;
    std::vector<std::vector<double>> m_mix_basis;   // width x (C*C)
    std::vector<double> m_shift_basis;              // width
    std::vector<std::vector<float>> m_fields;       // width x (C*H*W)
};

/// Always predicts zero noise; DDIM steps reduce to rescaling.
class ZeroNoisePredictor final : public NoisePredictor {
public:
    ZeroNoisePredictor(LatentShape shape, std::size_t embedding_width)
        : m_shape(shape), m_width(embedding_width) {}

    std::size_t embedding_width() const override { return m_width; }
    LatentShape latent_shape() const override { return m_shape; }
    bool concurrency_safe() const override { return true; }

    std::vector<Tensor> predict(std::span<const Tensor> latents, std::span<const std::size_t> timesteps,
                                std::span<const Embedding> embeddings) override;

private:
    LatentShape m_shape;
    std::size_t m_width;
};

/// Bag-of-words embedder: each word hashes to a seeded vector; the prompt
/// embedding is their sum divided by sqrt(word count).
class ToyTextEmbedder final : public TextEmbedder {
public:
    ToyTextEmbedder(std::uint64_t seed, std::size_t embedding_width = 8);

    std::size_t embedding_width() const override { return m_width; }
    Embedding embed(std::string_view prompt) override;

private:
    std::uint64_t m_seed;
    std::size_t m_width;
};

/// Identity codec: latent (C, H, W) holds the image (H, W, C) values transposed.
/// decode() clamps to [0, 1].
class ToyLatentCodec final : public LatentCodec {
public:
    explicit ToyLatentCodec(LatentShape shape) : m_shape(shape) {}

    LatentShape latent_shape() const override { return m_shape; }
    std::size_t image_height() const override { return m_shape.height; }
    std::size_t image_width() const override { return m_shape.width; }
    Tensor encode(const Image& image) override;
    Image decode(const Tensor& latent) override;

private:
    LatentShape m_shape;
};

/// Piecewise-linear response curve over strictly increasing abscissae,
/// clamped to the end values outside its range.
class Profile {
public:
    explicit Profile(std::vector<std::pair<double, double>> points);
    double operator()(double x) const;
    const std::vector<std::pair<double, double>>& points() const noexcept { return m_points; }

private:
    std::vector<std::pair<double, double>> m_points;
};

/// Mean intensity over the masked pixels, all channels.
double masked_mean(const Image& image, const Mask& mask);

/// Scores an image region as profile(masked_mean). The prompt is ignored.
class ToyRegionScorer final : public RegionScorer {
public:
    explicit ToyRegionScorer(Profile profile) : m_profile(std::move(profile)) {}

    std::string name() const override { return "toy-region-scorer"; }
    double score(const Image& image, const Mask& mask, std::string_view text) override;

private:
    Profile m_profile;
};

/// Returns fixed rectangle masks in phrase order.
class ToySegmenter final : public Segmenter {
public:
    explicit ToySegmenter(std::vector<Rect> rects) : m_rects(std::move(rects)) {}

    std::vector<Mask> segment(const Image& image, std::span<const std::string> phrases) override;

private:
    std::vector<Rect> m_rects;
};

/// Everything needed to rebuild an identical toy backend set.
struct ToyConfig {
    std::uint64_t seed = 1;
    LatentShape shape{3, 32, 32};
    std::size_t embedding_width = 8;
    std::size_t total_train_steps = 1000;
    std::vector<std::pair<double, double>> scorer_profile{{0.0, 0.0}, {1.0, 1.0}};
    std::vector<Rect> rects;
};

std::shared_ptr<ToyNoisePredictor> toy_noise_predictor(std::uint64_t seed, LatentShape shape,
                                                       std::size_t embedding_width = 8);
std::shared_ptr<ToyRegionScorer> toy_region_scorer(std::vector<std::pair<double, double>> planted_profile);
std::shared_ptr<ToySegmenter> toy_segmenter(std::vector<Rect> rects);

BackendSet make_toy_backends(const ToyConfig& config);

}  // namespace oir::toy
