// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/toy_backends.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "oir/error.hpp"

namespace oir::toy {

namespace {

// Portable uniform draw in [lo, hi): the distributions in <random> are not
// specified bit-for-bit across standard libraries.
double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void check_shape(const Tensor& t, const LatentShape& shape) {
    if (t.shape() != shape.dims()) {
        throw_error(ErrorKind::parameter, "latent shape does not match the backend's declared shape");
    }
}

}  // namespace

ToyNoisePredictor::ToyNoisePredictor(std::uint64_t seed, LatentShape shape, std::size_t embedding_width,
                                     std::size_t total_train_steps)
    : m_shape(shape), m_width(embedding_width), m_total_train_steps(total_train_steps) {
    if (embedding_width == 0 || shape.channels == 0 || shape.height == 0 || shape.width == 0) {
        throw_error(ErrorKind::parameter, "toy predictor needs nonzero shape and embedding width");
    }
    std::mt19937_64 rng(seed);
    const std::size_t C = shape.channels;
    const std::size_t H = shape.height;
    const std::size_t W = shape.width;
    m_mix_basis.resize(m_width);
    m_shift_basis.resize(m_width);
    m_fields.resize(m_width);
    for (std::size_t j = 0; j < m_width; ++j) {
        m_mix_basis[j].resize(C * C);
        for (auto& v : m_mix_basis[j]) {
            v = uniform(rng, -1.0, 1.0);
        }
        m_shift_basis[j] = uniform(rng, -1.0, 1.0);

        // three low-frequency plane waves with per-channel phases
        constexpr std::size_t kWaves = 3;
        double amp[kWaves];
        double fx[kWaves];
        double fy[kWaves];
        std::vector<double> phase(kWaves * C);
        for (std::size_t m = 0; m < kWaves; ++m) {
            amp[m] = uniform(rng, -1.0, 1.0);
            fx[m] = std::floor(uniform(rng, 0.0, 4.0));
            fy[m] = std::floor(uniform(rng, 0.0, 4.0));
            for (std::size_t c = 0; c < C; ++c) {
                phase[m * C + c] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            }
        }
        m_fields[j].resize(C * H * W);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < H; ++y) {
                for (std::size_t x = 0; x < W; ++x) {
                    double v = 0.0;
                    for (std::size_t m = 0; m < kWaves; ++m) {
                        const double arg = 2.0 * std::numbers::pi *
                                               (fx[m] * static_cast<double>(x) / static_cast<double>(W) +
                                                fy[m] * static_cast<double>(y) / static_cast<double>(H)) +
                                           phase[m * C + c];
                        v += amp[m] * std::sin(arg);
                    }
                    m_fields[j][(c * H + y) * W + x] = static_cast<float>(v / static_cast<double>(kWaves));
                }
            }
        }
    }
}

std::pair<std::vector<double>, double> ToyNoisePredictor::linear_part(const Embedding& embedding) const {
    if (embedding.size() != m_width) {
        throw_error(ErrorKind::parameter, "embedding width " + std::to_string(embedding.size()) + " != " +
                                              std::to_string(m_width));
    }
    const std::size_t C = m_shape.channels;
    std::vector<double> mix(C * C, 0.0);
    double shift = 0.0;
    for (std::size_t j = 0; j < m_width; ++j) {
        for (std::size_t k = 0; k < C * C; ++k) {
            mix[k] += embedding[j] * m_mix_basis[j][k];
        }
        shift += embedding[j] * m_shift_basis[j];
    }
    double fro = 0.0;
    for (double v : mix) {
        fro += v * v;
    }
    fro = std::sqrt(fro);
    if (fro > 0.0) {
        const double scale = kMixNormBound * std::tanh(fro) / fro;
        for (double& v : mix) {
            v *= scale;
        }
    }
    return {std::move(mix), kShiftBound * std::tanh(shift)};
}

Tensor ToyNoisePredictor::eps(const Tensor& latent, std::size_t timestep, const Embedding& embedding) const {
    check_shape(latent, m_shape);
    const auto [mix, shift] = linear_part(embedding);
    const std::size_t C = m_shape.channels;
    const std::size_t H = m_shape.height;
    const std::size_t W = m_shape.width;
    const double tau = 0.5 + static_cast<double>(timestep) / static_cast<double>(m_total_train_steps);

    Tensor out(m_shape.dims());
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
            const std::size_t y_next = (y + 1) % H;
            for (std::size_t x = 0; x < W; ++x) {
                const std::size_t idx = (c * H + y) * W + x;
                double v = 0.0;
                for (std::size_t k = 0; k < C; ++k) {
                    v += mix[c * C + k] * latent[(k * H + y) * W + x];
                }
                v += shift * latent[(c * H + y_next) * W + x];
                double bias = 0.0;
                for (std::size_t j = 0; j < m_width; ++j) {
                    bias += embedding[j] * m_fields[j][idx];
                }
                out[idx] = static_cast<float>(v + tau * bias);
            }
        }
    }
    return out;
}

std::vector<Tensor> ToyNoisePredictor::predict(std::span<const Tensor> latents, std::span<const std::size_t> timesteps,
                                               std::span<const Embedding> embeddings) {
    if (latents.size() != timesteps.size() || latents.size() != embeddings.size()) {
        throw_error(ErrorKind::parameter, "predict batch sizes disagree");
    }
    std::vector<Tensor> out;
    out.reserve(latents.size());
    for (std::size_t b = 0; b < latents.size(); ++b) {
        out.push_back(eps(latents[b], timesteps[b], embeddings[b]));
    }
    return out;
}

std::vector<Tensor> ZeroNoisePredictor::predict(std::span<const Tensor> latents, std::span<const std::size_t>,
                                                std::span<const Embedding>) {
    std::vector<Tensor> out;
    out.reserve(latents.size());
    for (const auto& l : latents) {
        out.emplace_back(l.shape(), 0.0f);
    }
    return out;
}

ToyTextEmbedder::ToyTextEmbedder(std::uint64_t seed, std::size_t embedding_width)
    : m_seed(seed), m_width(embedding_width) {}

Embedding ToyTextEmbedder::embed(std::string_view prompt) {
    std::vector<double> acc(m_width, 0.0);
    std::istringstream words{std::string(prompt)};
    std::string word;
    std::size_t count = 0;
    while (words >> word) {
        std::mt19937_64 rng(fnv1a(word) ^ (m_seed * 0x9e3779b97f4a7c15ULL));
        for (auto& v : acc) {
            v += uniform(rng, -1.0, 1.0);
        }
        ++count;
    }
    Embedding out(m_width, 0.0f);
    if (count > 0) {
        const double norm = 1.0 / std::sqrt(static_cast<double>(count));
        for (std::size_t j = 0; j < m_width; ++j) {
            out[j] = static_cast<float>(acc[j] * norm);
        }
    }
    return out;
}

Tensor ToyLatentCodec::encode(const Image& image) {
    if (image.height() != m_shape.height || image.width() != m_shape.width || image.channels() != m_shape.channels) {
        throw_error(ErrorKind::parameter, "image shape does not match the toy codec");
    }
    Tensor out(m_shape.dims());
    const std::size_t H = m_shape.height;
    const std::size_t W = m_shape.width;
    for (std::size_t c = 0; c < m_shape.channels; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                out[(c * H + y) * W + x] = image.at(y, x, c);
            }
        }
    }
    return out;
}

Image ToyLatentCodec::decode(const Tensor& latent) {
    check_shape(latent, m_shape);
    if (!latent.all_finite()) {
        throw_error(ErrorKind::numeric, "cannot decode a non-finite latent");
    }
    const std::size_t H = m_shape.height;
    const std::size_t W = m_shape.width;
    Image out(H, W, m_shape.channels);
    for (std::size_t c = 0; c < m_shape.channels; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                out.at(y, x, c) = std::clamp(latent[(c * H + y) * W + x], 0.0f, 1.0f);
            }
        }
    }
    return out;
}

Profile::Profile(std::vector<std::pair<double, double>> points) : m_points(std::move(points)) {
    if (m_points.empty()) {
        throw_error(ErrorKind::parameter, "scorer profile must not be empty");
    }
    std::sort(m_points.begin(), m_points.end());
    for (std::size_t i = 1; i < m_points.size(); ++i) {
        if (!(m_points[i].first > m_points[i - 1].first)) {
            throw_error(ErrorKind::parameter, "scorer profile abscissae must be distinct");
        }
    }
}

double Profile::operator()(double x) const {
    if (x <= m_points.front().first) {
        return m_points.front().second;
    }
    if (x >= m_points.back().first) {
        return m_points.back().second;
    }
    const auto hi = std::upper_bound(m_points.begin(), m_points.end(), x,
                                     [](double v, const auto& p) { return v < p.first; });
    const auto lo = hi - 1;
    if (x == lo->first) {
        return lo->second;
    }
    const double t = (x - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
}

double masked_mean(const Image& image, const Mask& mask) {
    if (mask.height() != image.height() || mask.width() != image.width()) {
        throw_error(ErrorKind::parameter, "mask and image sizes differ");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            if (!mask.at(y, x)) {
                continue;
            }
            for (std::size_t c = 0; c < image.channels(); ++c) {
                sum += image.at(y, x, c);
                ++n;
            }
        }
    }
    if (n == 0) {
        throw_error(ErrorKind::scorer, "region mask is empty");
    }
    return sum / static_cast<double>(n);
}

double ToyRegionScorer::score(const Image& image, const Mask& mask, std::string_view) {
    return m_profile(masked_mean(image, mask));
}

std::vector<Mask> ToySegmenter::segment(const Image& image, std::span<const std::string> phrases) {
    if (phrases.size() != m_rects.size()) {
        throw_error(ErrorKind::validation, std::to_string(phrases.size()) + " phrases but " +
                                               std::to_string(m_rects.size()) + " toy rectangles");
    }
    std::vector<Mask> out;
    out.reserve(m_rects.size());
    for (const auto& r : m_rects) {
        out.push_back(rect_mask(image.height(), image.width(), r, MaskResolution::pixel));
    }
    return out;
}

std::shared_ptr<ToyNoisePredictor> toy_noise_predictor(std::uint64_t seed, LatentShape shape,
                                                       std::size_t embedding_width) {
    return std::make_shared<ToyNoisePredictor>(seed, shape, embedding_width);
}

std::shared_ptr<ToyRegionScorer> toy_region_scorer(std::vector<std::pair<double, double>> planted_profile) {
    return std::make_shared<ToyRegionScorer>(Profile(std::move(planted_profile)));
}

std::shared_ptr<ToySegmenter> toy_segmenter(std::vector<Rect> rects) {
    return std::make_shared<ToySegmenter>(std::move(rects));
}

BackendSet make_toy_backends(const ToyConfig& config) {
    BackendSet set;
    set.predictor = std::make_shared<ToyNoisePredictor>(config.seed, config.shape, config.embedding_width,
                                                        config.total_train_steps);
    set.embedder = std::make_shared<ToyTextEmbedder>(config.seed, config.embedding_width);
    set.codec = std::make_shared<ToyLatentCodec>(config.shape);
    set.scorer = toy_region_scorer(config.scorer_profile);
    set.segmenter = toy_segmenter(config.rects);
    set.identity = "toy(seed=" + std::to_string(config.seed) + ")";
    return set;
}

}  // namespace oir::toy
