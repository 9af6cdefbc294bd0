// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

// Serves toy backends over the /v1 protocol, sized and seeded from a job spec.

#include <iostream>

#include "CLI11.hpp"
#include "oir/cli/image_io.hpp"
#include "oir/cli/jobspec.hpp"
#include "oir/error.hpp"
#include "oir/remote/loopback_server.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Toy model server for the oir /v1 protocol", "oir-toy-server"};
    std::string job_path;
    int port = 8080;
    std::string host = "127.0.0.1";
    app.add_option("job", job_path, "Job spec whose toy backend section configures the server")->required();
    app.add_option("--port", port, "Port (0 picks a free one)");
    app.add_option("--host", host, "Bind address");
    CLI11_PARSE(app, argc, argv);

    try {
        auto spec = oir::cli::load_jobspec(job_path);
        spec.backend.kind = "toy";
        const auto image = oir::cli::read_png(spec.image);
        oir::remote::LoopbackOptions options;
        options.host = host;
        options.port = port;
        oir::remote::LoopbackServer server(oir::cli::build_backends(spec, image), options);
        std::cout << "listening on " << server.url() << std::endl;
        server.wait();
    } catch (const oir::Error& e) {
        std::cerr << "oir-toy-server: " << e.what() << '\n';
        return oir::exit_code_for(e.kind());
    }
    return 0;
}
