// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "doctest.h"
#include "httplib.h"
#include "oir/remote/client.hpp"
#include "oir/remote/loopback_server.hpp"
#include "oir/remote/wire.hpp"
#include "oir/sampler.hpp"
#include "oir/toy_backends.hpp"
#include "support.hpp"

using namespace oir;
using namespace oir::remote;
using namespace oir::test;
using nlohmann::json;

namespace {

toy::ToyConfig toy_config() {
    toy::ToyConfig cfg;
    cfg.seed = 5;
    cfg.shape = {3, 16, 16};
    cfg.rects = {{0, 0, 8, 8}, {8, 8, 16, 16}};
    return cfg;
}

ServerEndpoint endpoint_for(const std::string& url) {
    ServerEndpoint ep;
    ep.base_url = url;
    ep.timeout = std::chrono::milliseconds(2000);
    return ep;
}

// Raw server whose every route runs the same handler.
class RawServer {
public:
    explicit RawServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        m_server.Post(R"(/v1/.*)", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++m_hits;
            handler(req, res);
        });
        m_port = m_server.bind_to_any_port("127.0.0.1");
        m_thread = std::thread([this] { m_server.listen_after_bind(); });
        m_server.wait_until_ready();
    }
    ~RawServer() {
        m_server.stop();
        m_thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(m_port); }
    int hits() const { return m_hits; }

private:
    httplib::Server m_server;
    std::thread m_thread;
    int m_port = 0;
    std::atomic<int> m_hits{0};
};

// Binds and closes a socket so that nothing listens on the returned port.
int unused_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

}  // namespace

TEST_CASE("base64 round trip and padding") {
    for (std::size_t n = 0; n < 10; ++n) {
        std::vector<std::uint8_t> bytes(n);
        for (std::size_t i = 0; i < n; ++i) {
            bytes[i] = static_cast<std::uint8_t>(37 * i + 11);
        }
        const std::string text = base64_encode(bytes);
        CHECK(text.size() == 4 * ((n + 2) / 3));
        CHECK(base64_decode(text) == bytes);
    }
    CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a'}) == "TWE=");
    CHECK(error_kind_of([] { base64_decode("abc"); }) == ErrorKind::protocol);
    CHECK(error_kind_of([] { base64_decode("ab!d"); }) == ErrorKind::protocol);
}

TEST_CASE("tensor marshalling is bit-exact and little-endian") {
    Tensor t = random_tensor({2, 3, 4}, 9, -1e6f, 1e6f);
    t[0] = -0.0f;
    t[1] = std::numeric_limits<float>::denorm_min();
    t[2] = std::numeric_limits<float>::max();
    t[3] = std::numeric_limits<float>::lowest();
    const json j = marshal_tensor(t);
    CHECK(j["dtype"] == "float32");
    CHECK(j["shape"] == json::array({2, 3, 4}));
    const Tensor back = unmarshal_tensor(json::parse(j.dump()));
    CHECK(back.shape() == t.shape());
    CHECK(bit_equal(back, t));

    const Tensor one({1}, 1.0f);
    const auto raw = base64_decode(marshal_tensor(one)["data"].get<std::string>());
    CHECK(raw == std::vector<std::uint8_t>{0x00, 0x00, 0x80, 0x3f});
}

TEST_CASE("shape and length mismatches are protocol errors") {
    json j = marshal_tensor(Tensor({5}, 1.0f));
    j["shape"] = json::array({2, 3});
    CHECK(error_kind_of([&] { unmarshal_tensor(j); }) == ErrorKind::protocol);
    json dtype = marshal_tensor(Tensor({2}, 1.0f));
    dtype["dtype"] = "float64";
    CHECK(error_kind_of([&] { unmarshal_tensor(dtype); }) == ErrorKind::protocol);
    CHECK(error_kind_of([] { unmarshal_tensor(json{{"shape", {1}}}); }) == ErrorKind::protocol);
    CHECK(error_kind_of([] { unmarshal_tensor(json::array()); }) == ErrorKind::protocol);
}

TEST_CASE("image and mask marshalling") {
    const Image img = random_image(5, 4, 3, 2);
    CHECK(unmarshal_image(marshal_image(img)) == img);
    const Mask m = rect_mask(5, 4, {1, 1, 3, 4}, MaskResolution::pixel);
    CHECK(unmarshal_mask(marshal_mask(m), MaskResolution::pixel) == m);
    json bad = marshal_tensor(Tensor({2, 2}, 0.5f));
    CHECK(error_kind_of([&] { unmarshal_mask(bad, MaskResolution::pixel); }) == ErrorKind::protocol);
    json out_of_range = marshal_tensor(Tensor({2, 2, 1}, 1.5f));
    CHECK(error_kind_of([&] { unmarshal_image(out_of_range); }) == ErrorKind::protocol);
}

TEST_CASE("handshake against the loopback server") {
    LoopbackServer server(toy::make_toy_backends(toy_config()));
    RemoteSession session(endpoint_for(server.url()));
    const auto& caps = session.handshake();
    CHECK(caps.protocol_version == "1");
    CHECK(caps.embedding_width == 8);
    CHECK(caps.latent_shape == LatentShape{3, 16, 16});
    CHECK(caps.image_height == 16);
    CHECK(caps.image_channels == 3);
    CHECK(caps.models.at("diffusion") == "toy-linear-oracle");
    session.handshake();
    CHECK(server.requests("/v1/handshake") == 1);
}

TEST_CASE("protocol version mismatch") {
    LoopbackOptions opts;
    opts.protocol_version = "2";
    LoopbackServer server(toy::make_toy_backends(toy_config()), opts);
    RemoteSession session(endpoint_for(server.url()));
    CHECK(error_kind_of([&] { session.handshake(); }) == ErrorKind::protocol);
    CHECK(error_kind_of([&] { make_remote_backends(endpoint_for(server.url())); }) == ErrorKind::protocol);
}

TEST_CASE("remote adapters reproduce the local toy backends") {
    const auto local = toy::make_toy_backends(toy_config());
    LoopbackServer server(toy::make_toy_backends(toy_config()));
    const auto remote = make_remote_backends(endpoint_for(server.url()));
    CHECK(remote.identity.find(server.url()) != std::string::npos);

    const auto e = local.embedder->embed("a cat on a mat");
    CHECK(remote.embedder->embed("a cat on a mat") == e);

    const Image img = random_image(16, 16, 3, 8);
    const Tensor z = local.codec->encode(img);
    CHECK(bit_equal(remote.codec->encode(img), z));
    CHECK(remote.codec->decode(z) == local.codec->decode(z));

    const Mask m = rect_mask(16, 16, {2, 2, 9, 9}, MaskResolution::pixel);
    CHECK(remote.scorer->score(img, m, "cat") == local.scorer->score(img, m, "cat"));
    CHECK(remote.scorer->name() == local.scorer->name());

    const std::vector<std::string> phrases{"cat", "mat"};
    CHECK(remote.segmenter->segment(img, phrases) == local.segmenter->segment(img, phrases));
    CHECK(remote.predictor->embedding_width() == 8);
}

TEST_CASE("batch of 8 predictions travels as one request") {
    const auto local = toy::make_toy_backends(toy_config());
    LoopbackServer server(toy::make_toy_backends(toy_config()));
    const auto remote = make_remote_backends(endpoint_for(server.url()));
    std::vector<Tensor> xs;
    std::vector<std::size_t> ts;
    std::vector<Embedding> es;
    for (std::size_t b = 0; b < 8; ++b) {
        xs.push_back(random_tensor({3, 16, 16}, 100 + b));
        ts.push_back(37 * b);
        es.push_back(local.embedder->embed("prompt " + std::to_string(b)));
    }
    const auto got = remote.predictor->predict(xs, ts, es);
    CHECK(server.requests("/v1/eps") == 1);
    REQUIRE(got.size() == 8);
    const auto want = local.predictor->predict(xs, ts, es);
    for (std::size_t b = 0; b < 8; ++b) {
        CHECK(bit_equal(got[b], want[b]));
    }
}

TEST_CASE("engine results are identical through the loopback server") {
    const auto local = toy::make_toy_backends(toy_config());
    LoopbackServer server(toy::make_toy_backends(toy_config()));
    const auto remote = make_remote_backends(endpoint_for(server.url()));
    const auto s = select_timesteps(build_linear_schedule(1000, 0.00085, 0.012), 20);
    const Image img = smooth_image(16, 16, 3, 2);
    const auto e = local.embedder->embed("a cat");
    const Conditioning c{e, local.embedder->embed("a dog"), 7.5};
    const auto a = invert({local.codec->encode(img), 0}, c, s, *local.predictor);
    const auto b = invert({remote.codec->encode(img), 0}, c, s, *remote.predictor);
    CHECK(bit_equal(a.at(20).data, b.at(20).data));
    CHECK(bit_equal(denoise(a.at(20), c, 20, 0, s, *local.predictor).data,
                    denoise(b.at(20), c, 20, 0, s, *remote.predictor).data));
}

TEST_CASE("server-side errors are not retried") {
    LoopbackServer server(toy::make_toy_backends(toy_config()));
    auto session = std::make_shared<RemoteSession>(endpoint_for(server.url()));
    session->handshake();
    RemoteNoisePredictor predictor(session);
    const std::vector<Tensor> xs{Tensor({3, 15, 16})};
    const std::vector<std::size_t> ts{1};
    const std::vector<Embedding> es{Embedding(8)};
    const auto before = session->requests_sent();
    const auto kind = error_kind_of([&] { predictor.predict(xs, ts, es); });
    CHECK((kind == ErrorKind::protocol || kind == ErrorKind::backend));
    CHECK(session->requests_sent() == before + 1);

    const auto raw = session->requests_sent();
    CHECK(error_kind_of([&] { session->post("/v1/eps", json{{"latents", "nope"}}); }) == ErrorKind::protocol);
    CHECK(session->requests_sent() == raw + 1);
}

TEST_CASE("timeouts exhaust the retry budget with a connection error") {
    RawServer slow([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        res.set_content("{}", "application/json");
    });
    ServerEndpoint ep = endpoint_for(slow.url());
    ep.timeout = std::chrono::milliseconds(100);
    ep.retry_budget = 3;
    RemoteSession session(ep);
    CHECK(error_kind_of([&] { session.handshake(); }) == ErrorKind::connection);
    CHECK(session.requests_sent() == 3);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    CHECK(slow.hits() == 3);
}

TEST_CASE("refused connections are connection errors") {
    ServerEndpoint ep = endpoint_for("http://127.0.0.1:" + std::to_string(unused_port()));
    ep.retry_budget = 2;
    RemoteSession session(ep);
    CHECK(error_kind_of([&] { session.handshake(); }) == ErrorKind::connection);
    CHECK(session.requests_sent() == 2);
    CHECK(exit_code_for(ErrorKind::connection) == 3);
}

TEST_CASE("malformed responses are protocol errors with an excerpt") {
    RawServer broken([](const httplib::Request&, httplib::Response& res) {
        res.set_content("<html>proxy error</html>", "text/html");
    });
    RemoteSession session(endpoint_for(broken.url()));
    try {
        session.handshake();
        FAIL("expected a protocol error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::protocol);
        CHECK(std::string(e.what()).find("proxy error") != std::string::npos);
    }
    CHECK(broken.hits() == 1);
}

TEST_CASE("responses with the wrong batch size are protocol errors") {
    const auto local = toy::make_toy_backends(toy_config());
    RawServer liar([&](const httplib::Request& req, httplib::Response& res) {
        if (req.path == "/v1/handshake") {
            res.set_content(json{{"protocol_version", "1"},
                                 {"embedding_width", 8},
                                 {"latent_shape", {3, 16, 16}},
                                 {"image_shape", {16, 16, 3}},
                                 {"models", json::object()},
                                 {"concurrency_safe", true}}
                                .dump(),
                            "application/json");
            return;
        }
        res.set_content(json{{"embeddings", json::array()}}.dump(), "application/json");
    });
    auto session = std::make_shared<RemoteSession>(endpoint_for(liar.url()));
    session->handshake();
    RemoteTextEmbedder emb(session);
    CHECK(error_kind_of([&] { emb.embed("x"); }) == ErrorKind::protocol);
}

TEST_CASE("bearer token is sent when configured") {
    std::atomic<bool> saw_token{false};
    RawServer auth([&](const httplib::Request& req, httplib::Response& res) {
        saw_token = req.get_header_value("Authorization") == "Bearer s3cret";
        res.status = 401;
        res.set_content(error_body("backend", "unauthorized").dump(), "application/json");
    });
    ServerEndpoint ep = endpoint_for(auth.url());
    ep.bearer_token = "s3cret";
    RemoteSession session(ep);
    CHECK(error_kind_of([&] { session.handshake(); }) == ErrorKind::backend);
    CHECK(saw_token);
}
