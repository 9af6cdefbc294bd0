// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oir/pipeline.hpp"
#include "oir/remote/client.hpp"
#include "oir/toy_backends.hpp"

namespace oir::cli {

struct BackendSpec {
    std::string kind{"toy"};  // "toy" or "remote"
    std::size_t embedding_width = 8;
    std::vector<std::pair<double, double>> scorer_profile{{0.0, 0.0}, {1.0, 1.0}};
    std::vector<Rect> rects;
    remote::ServerEndpoint endpoint;
};

struct ScheduleSpec {
    std::size_t total_train_steps = 1000;
    double beta_start = 0.00085;
    double beta_end = 0.012;
};

struct JobSpec {
    std::filesystem::path image;
    std::string original_prompt;
    std::string target_prompt;
    std::vector<PairSpec> pairs;
    std::vector<std::optional<std::size_t>> pair_steps;
    BackendSpec backend;
    std::size_t n_steps = 50;
    double i_r_fraction = 0.2;
    double i_re_fraction = 0.2;
    std::optional<std::size_t> stride;
    double guidance_scale = 7.5;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir{"oir_out"};
    ScheduleSpec schedule;

    /// 1 for the toy backend, 5 for remote backends, unless set.
    std::size_t effective_stride() const { return stride.value_or(backend.kind == "toy" ? 1 : 5); }
};

/// Flag values; each set field wins over the job file.
struct JobOverrides {
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::size_t> n_steps;
    std::optional<std::size_t> stride;
    std::optional<double> guidance_scale;
    std::optional<std::uint64_t> seed;
    std::optional<double> i_r_fraction;
    std::optional<double> i_re_fraction;
    std::optional<std::string> endpoint;
};

/// Relative paths resolve against base_dir. Throws validation errors.
JobSpec parse_jobspec(const nlohmann::json& doc, const std::filesystem::path& base_dir);
JobSpec load_jobspec(const std::filesystem::path& path);

void apply_overrides(JobSpec& spec, const JobOverrides& overrides);

/// Range and consistency checks that need no backend.
void validate_jobspec(const JobSpec& spec);

/// Resolved configuration, as recorded in run.json.
nlohmann::json to_json(const JobSpec& spec);

/// Toy backends are sized to the input image.
BackendSet build_backends(const JobSpec& spec, const Image& image);

NoiseSchedule build_schedule(const JobSpec& spec);

}  // namespace oir::cli
