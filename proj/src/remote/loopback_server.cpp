// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/remote/loopback_server.hpp"

#include <httplib.h>

#include <functional>

#include "json.hpp"
#include "oir/error.hpp"
#include "oir/remote/wire.hpp"

namespace oir::remote {

namespace {

using json = nlohmann::json;
using Handler = std::function<json(const json&)>;

const json& require_array(const json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || !body[key].is_array()) {
        throw_error(ErrorKind::protocol, std::string("request lacks array \"") + key + "\"");
    }
    return body[key];
}

}  // namespace

LoopbackServer::LoopbackServer(BackendSet backends, LoopbackOptions options)
    : m_backends(std::move(backends)), m_options(std::move(options)), m_server(std::make_unique<httplib::Server>()) {
    install_routes();
    if (m_options.port == 0) {
        m_port = m_server->bind_to_any_port(m_options.host);
    } else if (m_server->bind_to_port(m_options.host, m_options.port)) {
        m_port = m_options.port;
    } else {
        m_port = -1;
    }
    if (m_port <= 0) {
        throw_error(ErrorKind::connection, "loopback server could not bind " + m_options.host);
    }
    m_thread = std::thread([this] { m_server->listen_after_bind(); });
    m_server->wait_until_ready();
}

LoopbackServer::~LoopbackServer() {
    stop();
}

std::string LoopbackServer::url() const {
    return "http://" + m_options.host + ":" + std::to_string(m_port);
}

std::size_t LoopbackServer::requests(const std::string& path) const {
    std::lock_guard lock(m_count_mutex);
    const auto it = m_counts.find(path);
    return it == m_counts.end() ? 0 : it->second;
}

void LoopbackServer::wait() {
    if (m_thread.joinable()) {
        m_thread.join();
    }
}

void LoopbackServer::stop() {
    if (m_server) {
        m_server->stop();
    }
    if (m_thread.joinable()) {
        m_thread.join();
    }
}

void LoopbackServer::install_routes() {
    auto route = [this](const std::string& path, Handler handler) {
        m_server->Post(path, [this, path, handler](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(m_count_mutex);
                ++m_counts[path];
            }
            try {
                const json body = json::parse(req.body);
                res.set_content(handler(body).dump(), "application/json");
            } catch (const json::exception& e) {
                res.status = 400;
                res.set_content(error_body("protocol", e.what()).dump(), "application/json");
            } catch (const Error& e) {
                res.status = e.kind() == ErrorKind::protocol ? 400 : 500;
                res.set_content(error_body(to_string(e.kind()), e.detail()).dump(), "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                res.set_content(error_body("backend", e.what()).dump(), "application/json");
            }
        });
    };

    route("/v1/handshake", [this](const json&) {
        const auto ls = m_backends.codec->latent_shape();
        return json{{"protocol_version", m_options.protocol_version},
                    {"embedding_width", m_backends.predictor->embedding_width()},
                    {"latent_shape", ls.dims()},
                    {"image_shape", {m_backends.codec->image_height(), m_backends.codec->image_width(), ls.channels}},
                    {"models", m_options.models},
                    {"concurrency_safe", m_backends.predictor->concurrency_safe()}};
    });

    route("/v1/embed_text", [this](const json& body) {
        json out = json::array();
        for (const auto& p : require_array(body, "prompts")) {
            const Embedding e = m_backends.embedder->embed(p.get<std::string>());
            out.push_back(marshal_tensor(Tensor({e.size()}, e)));
        }
        return json{{"embeddings", out}};
    });

    route("/v1/eps", [this](const json& body) {
        std::vector<Tensor> latents;
        std::vector<Embedding> embeddings;
        for (const auto& t : require_array(body, "latents")) {
            latents.push_back(unmarshal_tensor(t));
        }
        for (const auto& t : require_array(body, "embeddings")) {
            const Tensor e = unmarshal_tensor(t);
            embeddings.emplace_back(e.values().begin(), e.values().end());
        }
        const auto timesteps = require_array(body, "timesteps").get<std::vector<std::size_t>>();
        if (timesteps.size() != latents.size() || embeddings.size() != latents.size()) {
            throw_error(ErrorKind::protocol, "eps request arrays differ in length");
        }
        json out = json::array();
        for (const auto& e : m_backends.predictor->predict(latents, timesteps, embeddings)) {
            out.push_back(marshal_tensor(e));
        }
        return json{{"eps", out}};
    });

    route("/v1/encode", [this](const json& body) {
        json out = json::array();
        for (const auto& t : require_array(body, "images")) {
            out.push_back(marshal_tensor(m_backends.codec->encode(unmarshal_image(t))));
        }
        return json{{"latents", out}};
    });

    route("/v1/decode", [this](const json& body) {
        json out = json::array();
        for (const auto& t : require_array(body, "latents")) {
            out.push_back(marshal_image(m_backends.codec->decode(unmarshal_tensor(t))));
        }
        return json{{"images", out}};
    });

    route("/v1/clip_score", [this](const json& body) {
        const auto& images = require_array(body, "images");
        const auto& masks = require_array(body, "masks");
        const auto& texts = require_array(body, "texts");
        if (masks.size() != images.size() || texts.size() != images.size()) {
            throw_error(ErrorKind::protocol, "clip_score request arrays differ in length");
        }
        json out = json::array();
        for (std::size_t i = 0; i < images.size(); ++i) {
            out.push_back(m_backends.scorer->score(unmarshal_image(images[i]),
                                                   unmarshal_mask(masks[i], MaskResolution::pixel),
                                                   texts[i].get<std::string>()));
        }
        return json{{"scores", out}};
    });

    route("/v1/segment", [this](const json& body) {
        const auto& images = require_array(body, "images");
        const auto& phrases = require_array(body, "phrases");
        if (phrases.size() != images.size()) {
            throw_error(ErrorKind::protocol, "segment request arrays differ in length");
        }
        json out = json::array();
        for (std::size_t i = 0; i < images.size(); ++i) {
            const auto list = phrases[i].get<std::vector<std::string>>();
            json masks = json::array();
            for (const auto& m : m_backends.segmenter->segment(unmarshal_image(images[i]), list)) {
                masks.push_back(marshal_mask(m));
            }
            out.push_back(masks);
        }
        return json{{"masks", out}};
    });
}

}  // namespace oir::remote
