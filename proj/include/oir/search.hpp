// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oir/backends.hpp"
#include "oir/sampler.hpp"
#include "oir/schedule.hpp"

namespace oir {

/// Edited candidates, one per inversion depth.
struct CandidateSet {
    std::size_t pair_id = 0;
    std::vector<std::size_t> steps;
    std::vector<Latent> latents;  // all at step 0
    std::vector<Image> images;
};

/// Per-step search metric values for one editing pair.
struct SearchCurve {
    std::size_t pair_id = 0;
    std::vector<std::size_t> steps;
    std::vector<double> s_e_raw;
    std::vector<double> s_ne_raw;
    std::vector<double> s_e;
    std::vector<double> s_ne;
    std::vector<double> s;
    std::size_t optimal_step = 0;

    std::size_t optimal_index() const;
};

/// Inversion depths {stride, 2*stride, ...} up to n_steps, keeping those >= min_step.
/// n_steps is always included when it is on the stride grid.
std::vector<std::size_t> search_steps(std::size_t n_steps, std::size_t stride, std::size_t min_step = 1);

/// Denoises traj.latents[i] down to 0 for each requested step, one job after another.
CandidateSet generate_candidates_serial(const Trajectory& traj, const Conditioning& guided_cond,
                                        std::span<const std::size_t> steps, const NoiseSchedule& schedule,
                                        NoisePredictor& backend, LatentCodec& codec, std::size_t pair_id = 0);

/// Wavefront variant of generate_candidates_serial with identical results.
///
/// Walks the global step t from max(steps) down to 1. When t is a requested
/// depth a lane is opened on traj.latents[t]; all open lanes then advance one
/// step with a single batched predict() call. Call depth is max(steps) and the
/// batch grows to |steps| lanes.
CandidateSet generate_candidates_batched(const Trajectory& traj, const Conditioning& guided_cond,
                                         std::span<const std::size_t> steps, const NoiseSchedule& schedule,
                                         NoisePredictor& backend, LatentCodec& codec, std::size_t pair_id = 0);

/// Raw editing-region alignment: the scorer's similarity before normalization.
double compute_s_e_raw(const Image& image, const Mask& mask_e, std::string_view target_prompt, RegionScorer& scorer);

/// Raw non-editing-region preservation: -sum(((candidate - original) * mask_ne)^2).
double compute_s_ne_raw(const Image& candidate, const Image& original, const Mask& mask_ne);

/// Min-max normalization to [0, 1]; a zero-spread list maps to all 0.5.
std::vector<double> normalize_minmax(std::span<const double> values);

/// Computes S = 0.5 (norm(S_e) + norm(S_ne)) across the candidate set and picks
/// the earliest step attaining max S.
SearchCurve build_search_curve(const CandidateSet& candidates, const Image& original, const Mask& mask_e,
                               const Mask& mask_ne, std::string_view target_prompt, RegionScorer& scorer);

/// Curve assembly from raw values; exposed for planted-value checks.
SearchCurve curve_from_raw(std::size_t pair_id, std::vector<std::size_t> steps, std::vector<double> s_e_raw,
                           std::vector<double> s_ne_raw);

/// Columns: step,s_e_raw,s_ne_raw,s_e,s_ne,s,is_optimal. Values printed with 17 significant digits.
void write_curve_csv(std::ostream& out, const SearchCurve& curve);
std::string curve_to_json(const SearchCurve& curve);

}  // namespace oir
