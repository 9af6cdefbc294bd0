// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/remote/client.hpp"

#include <httplib.h>

#include "oir/error.hpp"
#include "oir/remote/wire.hpp"

namespace oir::remote {

namespace {

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw_error(ErrorKind::protocol, std::string("response lacks \"") + key + "\": " + excerpt(j.dump()));
    }
    return j.at(key);
}

const nlohmann::json& array_field(const nlohmann::json& j, const char* key, std::size_t expected) {
    const auto& a = field(j, key);
    if (!a.is_array() || a.size() != expected) {
        throw_error(ErrorKind::protocol, std::string("\"") + key + "\" must be an array of " +
                                             std::to_string(expected) + ": " + excerpt(a.dump()));
    }
    return a;
}

class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<1024>& s) : m_s(s) { m_s.acquire(); }
    ~SlotGuard() { m_s.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<1024>& m_s;
};

}  // namespace

RemoteSession::RemoteSession(ServerEndpoint endpoint)
    : m_endpoint(std::move(endpoint)),
      m_slots(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(m_endpoint.max_in_flight, 1, 1024))) {
    if (m_endpoint.base_url.empty()) {
        throw_error(ErrorKind::parameter, "remote endpoint URL is empty");
    }
}

nlohmann::json RemoteSession::post(const std::string& path, const nlohmann::json& body) {
    SlotGuard slot(m_slots);
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!m_endpoint.bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + m_endpoint.bearer_token);
    }
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(m_endpoint.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(m_endpoint.timeout - seconds);

    const std::size_t attempts = std::max<std::size_t>(1, m_endpoint.retry_budget);
    std::string last_error;
    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
        httplib::Client client(m_endpoint.base_url);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());
        ++m_requests;
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
            throw_error(ErrorKind::protocol, path + " returned malformed JSON (HTTP " + std::to_string(res->status) +
                                                 "): " + excerpt(res->body));
        }
        if (res->status != 200) {
            std::string kind = "backend";
            std::string message = excerpt(res->body);
            if (reply.is_object() && reply.contains("error") && reply["error"].is_object()) {
                kind = reply["error"].value("kind", "backend");
                message = reply["error"].value("message", message);
            }
            throw_error(kind == "protocol" ? ErrorKind::protocol : ErrorKind::backend,
                        "server answered " + path + " with HTTP " + std::to_string(res->status) + ": " + message);
        }
        return reply;
    }
    throw_error(ErrorKind::connection, m_endpoint.base_url + path + " unreachable after " + std::to_string(attempts) +
                                           " attempt(s): " + last_error);
}

const ServerCapabilities& RemoteSession::handshake() {
    std::lock_guard lock(m_mutex);
    if (m_caps) {
        return *m_caps;
    }
    const auto reply = post("/v1/handshake", {{"protocol_version", m_endpoint.protocol_version}});
    ServerCapabilities caps;
    try {
        caps.protocol_version = field(reply, "protocol_version").get<std::string>();
        if (caps.protocol_version != m_endpoint.protocol_version) {
            throw_error(ErrorKind::protocol, "server speaks protocol \"" + caps.protocol_version +
                                                 "\", client expects \"" + m_endpoint.protocol_version + "\"");
        }
        caps.embedding_width = field(reply, "embedding_width").get<std::size_t>();
        const auto ls = array_field(reply, "latent_shape", 3).get<std::vector<std::size_t>>();
        caps.latent_shape = {ls[0], ls[1], ls[2]};
        const auto is = array_field(reply, "image_shape", 3).get<std::vector<std::size_t>>();
        caps.image_height = is[0];
        caps.image_width = is[1];
        caps.image_channels = is[2];
        if (reply.contains("models")) {
            caps.models = reply["models"].get<std::map<std::string, std::string>>();
        }
        caps.concurrency_safe = reply.value("concurrency_safe", false);
    } catch (const nlohmann::json::exception& e) {
        throw_error(ErrorKind::protocol, std::string("malformed handshake: ") + e.what());
    }
    m_caps = std::move(caps);
    return *m_caps;
}

const ServerCapabilities& RemoteSession::capabilities() const {
    if (!m_caps) {
        throw_error(ErrorKind::protocol, "handshake has not completed");
    }
    return *m_caps;
}

ServerCapabilities handshake(RemoteSession& session) {
    return session.handshake();
}

RemoteNoisePredictor::RemoteNoisePredictor(std::shared_ptr<RemoteSession> session) : m_session(std::move(session)) {}

std::size_t RemoteNoisePredictor::embedding_width() const {
    return m_session->capabilities().embedding_width;
}

LatentShape RemoteNoisePredictor::latent_shape() const {
    return m_session->capabilities().latent_shape;
}

bool RemoteNoisePredictor::concurrency_safe() const {
    return m_session->capabilities().concurrency_safe;
}

std::vector<Tensor> RemoteNoisePredictor::predict(std::span<const Tensor> latents,
                                                  std::span<const std::size_t> timesteps,
                                                  std::span<const Embedding> embeddings) {
    nlohmann::json body;
    body["latents"] = nlohmann::json::array();
    body["embeddings"] = nlohmann::json::array();
    for (const auto& l : latents) {
        body["latents"].push_back(marshal_tensor(l));
    }
    for (const auto& e : embeddings) {
        body["embeddings"].push_back(marshal_tensor(Tensor({e.size()}, e)));
    }
    body["timesteps"] = std::vector<std::size_t>(timesteps.begin(), timesteps.end());
    const auto reply = m_session->post("/v1/eps", body);
    std::vector<Tensor> out;
    for (const auto& t : array_field(reply, "eps", latents.size())) {
        out.push_back(unmarshal_tensor(t));
    }
    for (std::size_t b = 0; b < out.size(); ++b) {
        if (out[b].shape() != latents[b].shape()) {
            throw_error(ErrorKind::protocol, "eps tensor " + std::to_string(b) + " shape differs from its latent");
        }
    }
    return out;
}

std::size_t RemoteTextEmbedder::embedding_width() const {
    return m_session->capabilities().embedding_width;
}

Embedding RemoteTextEmbedder::embed(std::string_view prompt) {
    const auto reply = m_session->post("/v1/embed_text", {{"prompts", nlohmann::json::array({std::string(prompt)})}});
    const Tensor t = unmarshal_tensor(array_field(reply, "embeddings", 1)[0]);
    if (t.rank() != 1) {
        throw_error(ErrorKind::protocol, "embeddings must be rank-1 tensors");
    }
    return Embedding(t.values().begin(), t.values().end());
}

LatentShape RemoteLatentCodec::latent_shape() const {
    return m_session->capabilities().latent_shape;
}

std::size_t RemoteLatentCodec::image_height() const {
    return m_session->capabilities().image_height;
}

std::size_t RemoteLatentCodec::image_width() const {
    return m_session->capabilities().image_width;
}

Tensor RemoteLatentCodec::encode(const Image& image) {
    const auto reply = m_session->post("/v1/encode", {{"images", nlohmann::json::array({marshal_image(image)})}});
    Tensor t = unmarshal_tensor(array_field(reply, "latents", 1)[0]);
    if (t.shape() != latent_shape().dims()) {
        throw_error(ErrorKind::protocol, "encoded latent shape differs from the handshake");
    }
    return t;
}

Image RemoteLatentCodec::decode(const Tensor& latent) {
    const auto reply = m_session->post("/v1/decode", {{"latents", nlohmann::json::array({marshal_tensor(latent)})}});
    return unmarshal_image(array_field(reply, "images", 1)[0]);
}

std::string RemoteRegionScorer::name() const {
    const auto& models = m_session->capabilities().models;
    const auto it = models.find("scorer");
    return it == models.end() ? "remote-scorer" : it->second;
}

double RemoteRegionScorer::score(const Image& image, const Mask& mask, std::string_view text) {
    const auto reply = m_session->post(
        "/v1/clip_score",
        {{"images", nlohmann::json::array({marshal_image(image)})},
         {"masks", nlohmann::json::array({marshal_mask(mask)})},
         {"texts", nlohmann::json::array({std::string(text)})}});
    const auto& v = array_field(reply, "scores", 1)[0];
    if (!v.is_number()) {
        throw_error(ErrorKind::protocol, "score is not a number: " + excerpt(v.dump()));
    }
    return v.get<double>();
}

std::vector<Mask> RemoteSegmenter::segment(const Image& image, std::span<const std::string> phrases) {
    const std::vector<std::string> list(phrases.begin(), phrases.end());
    const auto reply = m_session->post("/v1/segment", {{"images", nlohmann::json::array({marshal_image(image)})},
                                                        {"phrases", nlohmann::json::array({list})}});
    const auto& per_image = array_field(reply, "masks", 1)[0];
    if (!per_image.is_array() || per_image.size() != phrases.size()) {
        throw_error(ErrorKind::protocol, "segment must return one mask per phrase");
    }
    std::vector<Mask> out;
    for (const auto& m : per_image) {
        out.push_back(unmarshal_mask(m, MaskResolution::pixel));
        if (out.back().height() != image.height() || out.back().width() != image.width()) {
            throw_error(ErrorKind::protocol, "segment mask size differs from the image");
        }
    }
    return out;
}

BackendSet make_remote_backends(const ServerEndpoint& endpoint) {
    auto session = std::make_shared<RemoteSession>(endpoint);
    const auto& caps = session->handshake();
    BackendSet set;
    set.predictor = std::make_shared<RemoteNoisePredictor>(session);
    set.embedder = std::make_shared<RemoteTextEmbedder>(session);
    set.codec = std::make_shared<RemoteLatentCodec>(session);
    set.scorer = std::make_shared<RemoteRegionScorer>(session);
    set.segmenter = std::make_shared<RemoteSegmenter>(session);
    set.identity = "remote(" + endpoint.base_url + ")";
    for (const auto& [role, model] : caps.models) {
        set.identity += " " + role + "=" + model;
    }
    return set;
}

}  // namespace oir::remote
