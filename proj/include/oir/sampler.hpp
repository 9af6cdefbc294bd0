// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "oir/backends.hpp"
#include "oir/schedule.hpp"
#include "oir/tensor.hpp"

namespace oir {

/// Latent tensor (C, H, W) at a DDIM step: 0 is clean, N fully inverted.
struct Latent {
    Tensor data;
    std::size_t step = 0;
};

/// Every latent of one inversion, latents[i].step == i.
struct Trajectory {
    std::vector<Latent> latents;
    std::string prompt_id;

    std::size_t n_steps() const noexcept { return latents.empty() ? 0 : latents.size() - 1; }
    const Latent& at(std::size_t step) const;
};

/// Classifier-free guidance inputs. uncond is the negative prompt embedding.
struct Conditioning {
    Embedding cond;
    Embedding uncond;
    double guidance_scale = 7.5;
};

/// ε_uncond + s (ε_cond - ε_uncond) for a batch of latents sharing one timestep
/// and one conditioning. Issues exactly one predict() call, batch [cond..., uncond...].
std::vector<Tensor> guided_eps(NoisePredictor& backend, std::span<const Tensor> latents, std::size_t timestep,
                               const Conditioning& cond);

/// One deterministic DDIM transition from alpha_bar a_from to a_to.
/// Used in both directions; the arithmetic is identical for every caller.
Tensor ddim_transition(const Tensor& x, const Tensor& eps, double a_from, double a_to);

Trajectory invert(const Latent& latent0, const Conditioning& cond, const NoiseSchedule& schedule,
                  NoisePredictor& backend, std::string prompt_id = {});

Latent denoise(const Latent& latent, const Conditioning& cond, std::size_t from_step, std::size_t to_step,
               const NoiseSchedule& schedule, NoisePredictor& backend);

Latent reinvert(const Latent& latent, const Conditioning& cond, std::size_t n_steps, const NoiseSchedule& schedule,
                NoisePredictor& backend);

/// Throws a numeric error naming `where` and the step when x holds NaN/Inf.
void check_finite(const Tensor& x, std::string_view where, std::size_t step);

}  // namespace oir
