// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/search.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "json.hpp"

#include "oir/error.hpp"

namespace oir {

namespace {

void validate_steps(const Trajectory& traj, std::span<const std::size_t> steps, const NoiseSchedule& schedule) {
    const std::size_t n = schedule.n_inversion_steps();
    if (traj.n_steps() != n) {
        throw_error(ErrorKind::parameter, "trajectory has " + std::to_string(traj.n_steps()) + " steps, schedule has " +
                                              std::to_string(n));
    }
    if (steps.empty()) {
        throw_error(ErrorKind::parameter, "no candidate steps requested");
    }
    for (std::size_t k = 0; k < steps.size(); ++k) {
        if (steps[k] < 1 || steps[k] > n) {
            throw_error(ErrorKind::parameter, "candidate step " + std::to_string(steps[k]) + " outside [1, " +
                                                  std::to_string(n) + "]");
        }
        if (k > 0 && steps[k] <= steps[k - 1]) {
            throw_error(ErrorKind::parameter, "candidate steps must be strictly increasing");
        }
    }
}

void check_region_mask(const Mask& mask, const Image& image) {
    if (mask.resolution() != MaskResolution::pixel) {
        throw_error(ErrorKind::parameter, "search masks must be pixel resolution");
    }
    if (mask.height() != image.height() || mask.width() != image.width()) {
        throw_error(ErrorKind::parameter, "mask and image sizes differ");
    }
}

}  // namespace

std::size_t SearchCurve::optimal_index() const {
    const auto it = std::find(steps.begin(), steps.end(), optimal_step);
    if (it == steps.end()) {
        throw_error(ErrorKind::index, "optimal step is not on the curve");
    }
    return static_cast<std::size_t>(it - steps.begin());
}

std::vector<std::size_t> search_steps(std::size_t n_steps, std::size_t stride, std::size_t min_step) {
    if (stride == 0) {
        throw_error(ErrorKind::parameter, "search stride must be positive");
    }
    std::vector<std::size_t> out;
    for (std::size_t s = stride; s <= n_steps; s += stride) {
        if (s >= min_step) {
            out.push_back(s);
        }
    }
    if (out.empty()) {
        throw_error(ErrorKind::parameter, "stride " + std::to_string(stride) + " leaves no candidate step in [" +
                                              std::to_string(min_step) + ", " + std::to_string(n_steps) + "]");
    }
    return out;
}

CandidateSet generate_candidates_serial(const Trajectory& traj, const Conditioning& guided_cond,
                                        std::span<const std::size_t> steps, const NoiseSchedule& schedule,
                                        NoisePredictor& backend, LatentCodec& codec, std::size_t pair_id) {
    validate_steps(traj, steps, schedule);
    CandidateSet set;
    set.pair_id = pair_id;
    set.steps.assign(steps.begin(), steps.end());
    for (std::size_t step : steps) {
        Latent clean = denoise(traj.at(step), guided_cond, step, 0, schedule, backend);
        set.images.push_back(codec.decode(clean.data));
        set.latents.push_back(std::move(clean));
    }
    return set;
}

CandidateSet generate_candidates_batched(const Trajectory& traj, const Conditioning& guided_cond,
                                         std::span<const std::size_t> steps, const NoiseSchedule& schedule,
                                         NoisePredictor& backend, LatentCodec& codec, std::size_t pair_id) {
    validate_steps(traj, steps, schedule);

    // Lanes open in descending step order; lane k serves steps[steps.size() - 1 - k].
    std::vector<Tensor> lanes;
    lanes.reserve(steps.size());
    auto next_open = steps.rbegin();
    for (std::size_t t = steps.back(); t >= 1; --t) {
        if (next_open != steps.rend() && *next_open == t) {
            lanes.push_back(traj.at(t).data);
            ++next_open;
        }
        // every open lane is at latent step t, so one timestep serves the batch
        const std::size_t timestep = transition_timestep(schedule, t - 1);
        auto eps = guided_eps(backend, lanes, timestep, guided_cond);
        const double a_from = latent_alpha_bar(schedule, t);
        const double a_to = latent_alpha_bar(schedule, t - 1);
        for (std::size_t k = 0; k < lanes.size(); ++k) {
            lanes[k] = ddim_transition(lanes[k], eps[k], a_from, a_to);
            check_finite(lanes[k], "batched candidate denoise", t - 1);
        }
    }

    CandidateSet set;
    set.pair_id = pair_id;
    set.steps.assign(steps.begin(), steps.end());
    for (std::size_t k = lanes.size(); k-- > 0;) {
        set.images.push_back(codec.decode(lanes[k]));
        set.latents.push_back({std::move(lanes[k]), 0});
    }
    return set;
}

double compute_s_e_raw(const Image& image, const Mask& mask_e, std::string_view target_prompt, RegionScorer& scorer) {
    check_region_mask(mask_e, image);
    if (mask_e.empty()) {
        throw_error(ErrorKind::scorer, "editing-region mask is empty");
    }
    const double v = scorer.score(image, mask_e, target_prompt);
    if (!std::isfinite(v)) {
        throw_error(ErrorKind::numeric, "region scorer returned a non-finite value");
    }
    return v;
}

double compute_s_ne_raw(const Image& candidate, const Image& original, const Mask& mask_ne) {
    if (candidate.tensor().shape() != original.tensor().shape()) {
        throw_error(ErrorKind::parameter, "candidate and original image shapes differ");
    }
    check_region_mask(mask_ne, original);
    double sum = 0.0;
    for (std::size_t y = 0; y < original.height(); ++y) {
        for (std::size_t x = 0; x < original.width(); ++x) {
            if (!mask_ne.at(y, x)) {
                continue;
            }
            for (std::size_t c = 0; c < original.channels(); ++c) {
                const double d = static_cast<double>(candidate.at(y, x, c)) - original.at(y, x, c);
                sum += d * d;
            }
        }
    }
    return -sum;
}

std::vector<double> normalize_minmax(std::span<const double> values) {
    if (values.empty()) {
        throw_error(ErrorKind::parameter, "cannot normalize an empty list");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw_error(ErrorKind::numeric, "cannot normalize non-finite values");
        }
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double spread = *hi_it - lo;
    std::vector<double> out(values.size(), 0.5);
    if (spread > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            out[i] = (values[i] - lo) / spread;
        }
    }
    return out;
}

SearchCurve curve_from_raw(std::size_t pair_id, std::vector<std::size_t> steps, std::vector<double> s_e_raw,
                           std::vector<double> s_ne_raw) {
    if (steps.empty() || steps.size() != s_e_raw.size() || steps.size() != s_ne_raw.size()) {
        throw_error(ErrorKind::parameter, "search curve columns must be nonempty and equally long");
    }
    SearchCurve curve;
    curve.pair_id = pair_id;
    curve.s_e = normalize_minmax(s_e_raw);
    curve.s_ne = normalize_minmax(s_ne_raw);
    curve.s.resize(steps.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        curve.s[i] = 0.5 * (curve.s_e[i] + curve.s_ne[i]);
        if (curve.s[i] > curve.s[best]) {
            best = i;  // strict: ties keep the earliest step
        }
    }
    curve.optimal_step = steps[best];
    curve.steps = std::move(steps);
    curve.s_e_raw = std::move(s_e_raw);
    curve.s_ne_raw = std::move(s_ne_raw);
    return curve;
}

SearchCurve build_search_curve(const CandidateSet& candidates, const Image& original, const Mask& mask_e,
                               const Mask& mask_ne, std::string_view target_prompt, RegionScorer& scorer) {
    if (candidates.steps.empty() || candidates.images.size() != candidates.steps.size()) {
        throw_error(ErrorKind::parameter, "candidate set is empty or inconsistent");
    }
    std::vector<double> se(candidates.steps.size());
    std::vector<double> sne(candidates.steps.size());
    for (std::size_t i = 0; i < candidates.steps.size(); ++i) {
        se[i] = compute_s_e_raw(candidates.images[i], mask_e, target_prompt, scorer);
        sne[i] = compute_s_ne_raw(candidates.images[i], original, mask_ne);
    }
    return curve_from_raw(candidates.pair_id, candidates.steps, std::move(se), std::move(sne));
}

void write_curve_csv(std::ostream& out, const SearchCurve& curve) {
    out << "step,s_e_raw,s_ne_raw,s_e,s_ne,s,is_optimal\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < curve.steps.size(); ++i) {
        out << curve.steps[i] << ',' << curve.s_e_raw[i] << ',' << curve.s_ne_raw[i] << ',' << curve.s_e[i] << ','
            << curve.s_ne[i] << ',' << curve.s[i] << ',' << (curve.steps[i] == curve.optimal_step ? 1 : 0) << '\n';
    }
}

std::string curve_to_json(const SearchCurve& curve) {
    nlohmann::json j;
    j["pair_id"] = curve.pair_id;
    j["steps"] = curve.steps;
    j["s_e_raw"] = curve.s_e_raw;
    j["s_ne_raw"] = curve.s_ne_raw;
    j["s_e"] = curve.s_e;
    j["s_ne"] = curve.s_ne;
    j["s"] = curve.s;
    j["optimal_step"] = curve.optimal_step;
    return j.dump(2);
}

}  // namespace oir
