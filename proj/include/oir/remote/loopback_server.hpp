// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <memory>
#include <string>
#include <thread>

#include "oir/backends.hpp"

namespace httplib {
class Server;
}

namespace oir::remote {

struct LoopbackOptions {
    std::string host{"127.0.0.1"};
    int port = 0;  // 0 picks a free port
    std::string protocol_version{"1"};
    std::map<std::string, std::string> models{{"diffusion", "toy-linear-oracle"},
                                              {"scorer", "toy-region-scorer"},
                                              {"segmenter", "toy-rect-segmenter"}};
};

/// Serves the /v1 protocol over an in-process BackendSet.
class LoopbackServer {
public:
    LoopbackServer(BackendSet backends, LoopbackOptions options = {});
    ~LoopbackServer();

    LoopbackServer(const LoopbackServer&) = delete;
    LoopbackServer& operator=(const LoopbackServer&) = delete;

    int port() const noexcept { return m_port; }
    std::string url() const;
    std::size_t requests(const std::string& path) const;

    /// Blocks the calling thread until stop(); used by the standalone tool.
    void wait();
    void stop();

private:
    void install_routes();

    BackendSet m_backends;
    LoopbackOptions m_options;
    std::unique_ptr<httplib::Server> m_server;
    std::thread m_thread;
    int m_port = 0;
    mutable std::mutex m_count_mutex;
    std::map<std::string, std::size_t> m_counts;
};

}  // namespace oir::remote
