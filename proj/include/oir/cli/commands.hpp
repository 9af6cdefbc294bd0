// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oir/cli/jobspec.hpp"
#include "oir/pipeline.hpp"
#include "oir/remote/client.hpp"

namespace oir::cli {

inline constexpr int kExitOk = 0;

/// Writes curves/, candidates/ and summary.txt, then run.json.
int cmd_search(const JobSpec& spec, std::ostream& out, std::ostream& err);

/// Full edit. With quiet set only output.png and run.json are written.
int cmd_edit(const JobSpec& spec, const AblationOptions& ablation, bool quiet, std::ostream& out,
             std::ostream& err);

struct EvalOptions {
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::string> endpoint;
};

/// Manifest: {"method", "scorer": {...}, "rows": [{"name", "edited", "original", "prompt"}]}.
/// Writes report.csv and report.txt; exits nonzero only when every row fails.
int cmd_eval(const std::filesystem::path& manifest, const EvalOptions& options, std::ostream& out,
             std::ostream& err);

/// Handshake plus one call per endpoint with shape checks.
int cmd_protocol_check(const remote::ServerEndpoint& endpoint, std::ostream& out, std::ostream& err);

/// Argument parsing and dispatch for the `oir` binary.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oir::cli
