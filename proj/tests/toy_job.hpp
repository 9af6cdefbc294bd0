// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "oir/pipeline.hpp"
#include "oir/toy_backends.hpp"
#include "support.hpp"

namespace oir::test {

// Two objects in opposite quadrants of a 32x32 image.
struct ToyJobConfig {
    toy::ToyConfig toy;
    std::string original_prompt{"a cat and a ball"};
    std::string target_prompt{"a dog and a cube"};
    std::vector<PairSpec> pairs{{"cat", "dog"}, {"ball", "cube"}};
    std::size_t n_steps = 50;
    OirOptions options;

    ToyJobConfig() {
        toy.seed = 7;
        toy.shape = {3, 32, 32};
        toy.rects = {{2, 2, 14, 16}, {18, 16, 30, 30}};
    }
};

inline NoiseSchedule default_schedule(std::size_t n) {
    return select_timesteps(build_linear_schedule(1000, 0.00085, 0.012), n);
}

inline EditJob make_toy_job(const ToyJobConfig& cfg, BackendSet backends) {
    return EditJob{smooth_image(cfg.toy.shape.height, cfg.toy.shape.width, cfg.toy.shape.channels, 12),
                   cfg.original_prompt,
                   cfg.target_prompt,
                   cfg.pairs,
                   default_schedule(cfg.n_steps),
                   std::move(backends),
                   cfg.options};
}

inline EditJob make_toy_job(const ToyJobConfig& cfg) {
    return make_toy_job(cfg, toy::make_toy_backends(cfg.toy));
}

}  // namespace oir::test
