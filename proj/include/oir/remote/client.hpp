// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>

#include "json.hpp"
#include "oir/backends.hpp"

namespace oir::remote {

struct ServerEndpoint {
    std::string base_url;
    std::chrono::milliseconds timeout{30000};
    /// Attempts per request on connection failures (at least one is made).
    std::size_t retry_budget = 3;
    std::string protocol_version{"1"};
    std::string bearer_token;
    std::size_t max_in_flight = 4;
};

struct ServerCapabilities {
    std::string protocol_version;
    std::size_t embedding_width = 0;
    LatentShape latent_shape;
    std::size_t image_height = 0;
    std::size_t image_width = 0;
    std::size_t image_channels = 0;
    std::map<std::string, std::string> models;
    bool concurrency_safe = false;
};

/// One server connection configuration shared by the five adapters.
class RemoteSession {
public:
    explicit RemoteSession(ServerEndpoint endpoint);

    const ServerEndpoint& endpoint() const noexcept { return m_endpoint; }

    /// Performs the handshake once and caches the result.
    const ServerCapabilities& handshake();
    const ServerCapabilities& capabilities() const;

    /// POSTs a JSON body and returns the parsed JSON response.
    /// Connection failures are retried; protocol and server errors are not.
    nlohmann::json post(const std::string& path, const nlohmann::json& body);

    std::size_t requests_sent() const noexcept { return m_requests; }

private:
    ServerEndpoint m_endpoint;
    std::counting_semaphore<1024> m_slots;
    std::mutex m_mutex;
    std::optional<ServerCapabilities> m_caps;
    std::atomic<std::size_t> m_requests{0};
};

ServerCapabilities handshake(RemoteSession& session);

class RemoteNoisePredictor final : public NoisePredictor {
public:
    explicit RemoteNoisePredictor(std::shared_ptr<RemoteSession> session);

    std::size_t embedding_width() const override;
    LatentShape latent_shape() const override;
    bool concurrency_safe() const override;

    std::vector<Tensor> predict(std::span<const Tensor> latents, std::span<const std::size_t> timesteps,
                                std::span<const Embedding> embeddings) override;

private:
    std::shared_ptr<RemoteSession> m_session;
};

class RemoteTextEmbedder final : public TextEmbedder {
public:
    explicit RemoteTextEmbedder(std::shared_ptr<RemoteSession> session) : m_session(std::move(session)) {}
    std::size_t embedding_width() const override;
    Embedding embed(std::string_view prompt) override;

private:
    std::shared_ptr<RemoteSession> m_session;
};

class RemoteLatentCodec final : public LatentCodec {
public:
    explicit RemoteLatentCodec(std::shared_ptr<RemoteSession> session) : m_session(std::move(session)) {}
    LatentShape latent_shape() const override;
    std::size_t image_height() const override;
    std::size_t image_width() const override;
    Tensor encode(const Image& image) override;
    Image decode(const Tensor& latent) override;

private:
    std::shared_ptr<RemoteSession> m_session;
};

class RemoteRegionScorer final : public RegionScorer {
public:
    explicit RemoteRegionScorer(std::shared_ptr<RemoteSession> session) : m_session(std::move(session)) {}
    std::string name() const override;
    double score(const Image& image, const Mask& mask, std::string_view text) override;

private:
    std::shared_ptr<RemoteSession> m_session;
};

class RemoteSegmenter final : public Segmenter {
public:
    explicit RemoteSegmenter(std::shared_ptr<RemoteSession> session) : m_session(std::move(session)) {}
    std::vector<Mask> segment(const Image& image, std::span<const std::string> phrases) override;

private:
    std::shared_ptr<RemoteSession> m_session;
};

/// Handshakes and wraps all five interfaces around one session.
BackendSet make_remote_backends(const ServerEndpoint& endpoint);

}  // namespace oir::remote
