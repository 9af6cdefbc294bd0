// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "oir/backends.hpp"
#include "oir/sampler.hpp"
#include "oir/schedule.hpp"
#include "oir/search.hpp"

namespace oir {

/// (source phrase in the original prompt, its replacement in the target prompt).
struct PairSpec {
    std::string source_phrase;
    std::string target_phrase;
};

struct EditingPair {
    std::size_t index = 0;
    std::string source_phrase;
    std::string target_phrase;
    std::string guided_prompt;
    Mask mask_e;
    Mask mask_e_latent;
    std::size_t optimal_step = 0;
};

struct ReassemblyPlan {
    std::vector<EditingPair> pairs;
    std::size_t i_r = 0;
    std::size_t i_re = 0;
    Mask mask_ne_latent;

    /// False when the edit masks cover the whole latent grid.
    bool has_protected_region() const { return !mask_ne_latent.empty(); }
};

struct OirOptions {
    double i_r_fraction = 0.2;
    double i_re_fraction = 0.2;
    std::size_t stride = 1;
    double guidance_scale = 7.5;
    bool batched_search = true;
    bool parallel_pairs = true;
    /// Per-pair step that bypasses the search for that pair (empty = search all).
    std::vector<std::optional<std::size_t>> pair_step_override;
};

struct AblationOptions {
    bool disable_reinversion = false;
    /// Edit all pairs jointly from this step under the target prompt, no search.
    std::optional<std::size_t> force_single_step;
};

struct EditJob {
    Image original;
    std::string original_prompt;
    std::string target_prompt;
    std::vector<PairSpec> pairs;
    NoiseSchedule schedule;
    BackendSet backends;
    OirOptions options;
};

struct OirResult {
    Image output;
    ReassemblyPlan plan;
    std::vector<SearchCurve> curves;        // per pair, empty for overridden pairs
    std::vector<CandidateSet> candidates;   // parallel to curves
    std::optional<Latent> reassembled;      // snapshot at i_r before re-inversion
    std::vector<Latent> branches;           // per-pair latents at i_r
    Trajectory trajectory;
};

/// Guided prompt k: the original prompt with only pair k's phrase replaced.
/// Each source phrase must occur exactly once.
std::vector<std::string> build_guided_prompts(const std::string& original_prompt, const std::vector<PairSpec>& pairs);

/// Downsamples the pixel masks, checks pairwise disjointness on the latent
/// grid and computes the non-editing complement.
ReassemblyPlan plan_job(std::size_t n_steps, std::vector<EditingPair> pairs, std::size_t latent_height,
                        std::size_t latent_width, double i_r_fraction, double i_re_fraction);

/// Same, taking each pair's optimal step from its searched curve.
ReassemblyPlan plan_job(std::size_t n_steps, std::vector<EditingPair> pairs, const std::vector<SearchCurve>& curves,
                        std::size_t latent_height, std::size_t latent_width, double i_r_fraction,
                        double i_re_fraction);

/// Pair masks at latent resolution combined cellwise with the background latent.
Tensor reassemble(const std::vector<Tensor>& pair_latents, const std::vector<Mask>& pair_masks,
                  const Mask& mask_ne, const Tensor& background);

struct SearchResult {
    std::vector<EditingPair> pairs;  // optimal_step filled from each curve
    std::vector<SearchCurve> curves;
    std::vector<CandidateSet> candidates;
    Trajectory trajectory;
};

/// Search alone over the full stride grid {stride, ..., N}. No reassembly
/// constraints apply, so overlapping masks are accepted here.
SearchResult run_search(const EditJob& job);

OirResult run_oir(const EditJob& job);
OirResult run_oir_ablation(const EditJob& job, const AblationOptions& ablation);

}  // namespace oir
