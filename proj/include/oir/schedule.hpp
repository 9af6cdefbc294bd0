// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace oir {

/// Diffusion noise schedule plus the DDIM timestep grid used for inversion.
///
/// alpha_bar is kept at full training resolution; the grid only indexes into it.
/// Immutable once built.
class NoiseSchedule {
public:
    std::size_t total_train_steps() const noexcept { return m_alpha_bar.size(); }
    std::span<const double> alpha_bar() const noexcept { return m_alpha_bar; }

    /// Number of DDIM steps N.
    std::size_t n_inversion_steps() const noexcept { return m_grid.size(); }
    std::span<const std::size_t> timestep_grid() const noexcept { return m_grid; }

    friend NoiseSchedule build_linear_schedule(std::size_t, double, double);
    friend NoiseSchedule select_timesteps(const NoiseSchedule&, std::size_t);

private:
    NoiseSchedule() = default;

    std::vector<double> m_alpha_bar;
    std::vector<std::size_t> m_grid;
};

/// alpha_bar[t] = prod_{s<=t} (1 - beta_s) with beta linearly spaced over
/// [beta_start, beta_end]. The returned schedule has an identity timestep grid
/// over all training steps.
NoiseSchedule build_linear_schedule(std::size_t total_train_steps, double beta_start, double beta_end);

/// Uniform grid: timestep_grid[i] = round(i * T / n), clamped to [0, T-1],
/// with halves rounded up. Depends only on T and n.
NoiseSchedule select_timesteps(const NoiseSchedule& schedule, std::size_t n);

/// alpha_bar at timestep_grid[step], 0 <= step < N.
double alpha_bar_at(const NoiseSchedule& schedule, std::size_t step);

/// alpha_bar of latent index i in [0, N]: 1 for the clean latent, otherwise
/// alpha_bar_at(i - 1).
double latent_alpha_bar(const NoiseSchedule& schedule, std::size_t latent_step);

/// Model timestep queried when moving between latent i and i + 1 (either direction).
std::size_t transition_timestep(const NoiseSchedule& schedule, std::size_t lower_latent_step);

}  // namespace oir
