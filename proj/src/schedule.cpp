// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/schedule.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "oir/error.hpp"

namespace oir {

NoiseSchedule build_linear_schedule(std::size_t total_train_steps, double beta_start, double beta_end) {
    if (total_train_steps == 0) {
        throw_error(ErrorKind::parameter, "schedule needs at least one training step");
    }
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw_error(ErrorKind::parameter, "beta range must satisfy 0 < beta_start <= beta_end < 1, got [" +
                                              std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
    }
    NoiseSchedule s;
    s.m_alpha_bar.resize(total_train_steps);
    const double span = total_train_steps > 1 ? static_cast<double>(total_train_steps - 1) : 1.0;
    double prod = 1.0;
    for (std::size_t t = 0; t < total_train_steps; ++t) {
        const double beta = beta_start + (beta_end - beta_start) * static_cast<double>(t) / span;
        prod *= 1.0 - beta;
        s.m_alpha_bar[t] = prod;
    }
    s.m_grid.resize(total_train_steps);
    std::iota(s.m_grid.begin(), s.m_grid.end(), std::size_t{0});
    return s;
}

NoiseSchedule select_timesteps(const NoiseSchedule& schedule, std::size_t n) {
    const std::size_t total = schedule.total_train_steps();
    if (n < 1 || n > total) {
        throw_error(ErrorKind::parameter,
                    "requested " + std::to_string(n) + " steps from a " + std::to_string(total) + "-step schedule");
    }
    NoiseSchedule s;
    s.m_alpha_bar = schedule.m_alpha_bar;
    s.m_grid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // round(i * T / n), halves up, in exact integer arithmetic
        const std::size_t t = (2 * i * total + n) / (2 * n);
        s.m_grid[i] = std::min(t, total - 1);
    }
    return s;
}

double alpha_bar_at(const NoiseSchedule& schedule, std::size_t step) {
    if (step >= schedule.n_inversion_steps()) {
        throw_error(ErrorKind::index, "step " + std::to_string(step) + " outside [0, " +
                                          std::to_string(schedule.n_inversion_steps()) + ")");
    }
    return schedule.alpha_bar()[schedule.timestep_grid()[step]];
}

double latent_alpha_bar(const NoiseSchedule& schedule, std::size_t latent_step) {
    if (latent_step == 0) {
        return 1.0;
    }
    return alpha_bar_at(schedule, latent_step - 1);
}

std::size_t transition_timestep(const NoiseSchedule& schedule, std::size_t lower_latent_step) {
    if (lower_latent_step >= schedule.n_inversion_steps()) {
        throw_error(ErrorKind::index, "no transition above latent step " + std::to_string(lower_latent_step));
    }
    return schedule.timestep_grid()[lower_latent_step];
}

}  // namespace oir
