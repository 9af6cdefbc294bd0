// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/sampler.hpp"

#include <cmath>
#include <string>

#include "oir/error.hpp"

namespace oir {

const Latent& Trajectory::at(std::size_t step) const {
    if (step >= latents.size()) {
        throw_error(ErrorKind::index, "trajectory has no latent at step " + std::to_string(step));
    }
    return latents[step];
}

void check_finite(const Tensor& x, std::string_view where, std::size_t step) {
    if (!x.all_finite()) {
        throw_error(ErrorKind::numeric, std::string(where) + " produced a non-finite latent at step " +
                                            std::to_string(step));
    }
}

std::vector<Tensor> guided_eps(NoisePredictor& backend, std::span<const Tensor> latents, std::size_t timestep,
                               const Conditioning& cond) {
    const std::size_t n = latents.size();
    std::vector<Tensor> batch;
    batch.reserve(2 * n);
    batch.insert(batch.end(), latents.begin(), latents.end());
    batch.insert(batch.end(), latents.begin(), latents.end());
    const std::vector<std::size_t> timesteps(2 * n, timestep);
    std::vector<Embedding> embeddings(2 * n);
    for (std::size_t b = 0; b < n; ++b) {
        embeddings[b] = cond.cond;
        embeddings[n + b] = cond.uncond;
    }

    std::vector<Tensor> raw;
    try {
        raw = backend.predict(batch, timesteps, embeddings);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw_error(ErrorKind::backend, std::string("noise predictor failed: ") + e.what());
    }
    if (raw.size() != 2 * n) {
        throw_error(ErrorKind::backend, "noise predictor returned " + std::to_string(raw.size()) + " tensors for a batch of " +
                                            std::to_string(2 * n));
    }

    const double s = cond.guidance_scale;
    std::vector<Tensor> out;
    out.reserve(n);
    for (std::size_t b = 0; b < n; ++b) {
        const Tensor& c = raw[b];
        const Tensor& u = raw[n + b];
        if (c.shape() != latents[b].shape() || u.shape() != latents[b].shape()) {
            throw_error(ErrorKind::backend, "noise prediction shape differs from its latent");
        }
        Tensor g(latents[b].shape());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double ue = u[i];
            g[i] = static_cast<float>(ue + s * (static_cast<double>(c[i]) - ue));
        }
        out.push_back(std::move(g));
    }
    return out;
}

Tensor ddim_transition(const Tensor& x, const Tensor& eps, double a_from, double a_to) {
    const double sqrt_from = std::sqrt(a_from);
    const double sigma_from = std::sqrt(1.0 - a_from);
    const double sqrt_to = std::sqrt(a_to);
    const double sigma_to = std::sqrt(1.0 - a_to);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = eps[i];
        const double x0 = (static_cast<double>(x[i]) - sigma_from * e) / sqrt_from;
        out[i] = static_cast<float>(sqrt_to * x0 + sigma_to * e);
    }
    return out;
}

namespace {

// Noise-adding steps from latent.step to latent.step + n_steps; shared by
// invert and reinvert.
template <typename Sink>
Tensor forward_steps(Tensor x, std::size_t from, std::size_t n_steps, const Conditioning& cond,
                     const NoiseSchedule& schedule, NoisePredictor& backend, std::string_view where, Sink&& sink) {
    for (std::size_t i = from; i < from + n_steps; ++i) {
        const std::size_t t = transition_timestep(schedule, i);
        auto eps = guided_eps(backend, std::span<const Tensor>(&x, 1), t, cond);
        x = ddim_transition(x, eps.front(), latent_alpha_bar(schedule, i), latent_alpha_bar(schedule, i + 1));
        check_finite(x, where, i + 1);
        sink(x, i + 1);
    }
    return x;
}

}  // namespace

Trajectory invert(const Latent& latent0, const Conditioning& cond, const NoiseSchedule& schedule,
                  NoisePredictor& backend, std::string prompt_id) {
    if (latent0.step != 0) {
        throw_error(ErrorKind::parameter, "inversion must start from a clean latent, got step " +
                                              std::to_string(latent0.step));
    }
    check_finite(latent0.data, "inversion input", 0);
    const std::size_t n = schedule.n_inversion_steps();
    Trajectory traj;
    traj.prompt_id = std::move(prompt_id);
    traj.latents.reserve(n + 1);
    traj.latents.push_back(latent0);
    forward_steps(latent0.data, 0, n, cond, schedule, backend, "inversion",
                  [&](const Tensor& x, std::size_t step) { traj.latents.push_back({x, step}); });
    return traj;
}

Latent denoise(const Latent& latent, const Conditioning& cond, std::size_t from_step, std::size_t to_step,
               const NoiseSchedule& schedule, NoisePredictor& backend) {
    if (from_step <= to_step) {
        throw_error(ErrorKind::parameter, "denoise needs from_step > to_step, got " + std::to_string(from_step) +
                                              " -> " + std::to_string(to_step));
    }
    if (latent.step != from_step) {
        throw_error(ErrorKind::parameter, "latent is at step " + std::to_string(latent.step) + ", not " +
                                              std::to_string(from_step));
    }
    if (from_step > schedule.n_inversion_steps()) {
        throw_error(ErrorKind::parameter, "from_step " + std::to_string(from_step) + " exceeds N=" +
                                              std::to_string(schedule.n_inversion_steps()));
    }
    Tensor x = latent.data;
    for (std::size_t i = from_step; i > to_step; --i) {
        const std::size_t t = transition_timestep(schedule, i - 1);
        auto eps = guided_eps(backend, std::span<const Tensor>(&x, 1), t, cond);
        x = ddim_transition(x, eps.front(), latent_alpha_bar(schedule, i), latent_alpha_bar(schedule, i - 1));
        check_finite(x, "denoise", i - 1);
    }
    return {std::move(x), to_step};
}

Latent reinvert(const Latent& latent, const Conditioning& cond, std::size_t n_steps, const NoiseSchedule& schedule,
                NoisePredictor& backend) {
    const std::size_t n = schedule.n_inversion_steps();
    if (latent.step + n_steps > n) {
        throw_error(ErrorKind::parameter, "re-inversion from step " + std::to_string(latent.step) + " by " +
                                              std::to_string(n_steps) + " overruns N=" + std::to_string(n));
    }
    Tensor x = forward_steps(latent.data, latent.step, n_steps, cond, schedule, backend, "re-inversion",
                             [](const Tensor&, std::size_t) {});
    return {std::move(x), latent.step + n_steps};
}

}  // namespace oir
