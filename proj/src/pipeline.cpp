// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/pipeline.hpp"

#include <cmath>
#include <functional>
#include <future>
#include <string>

#include "oir/error.hpp"

namespace oir {

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw e.with_stage(stage);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::backend, e.what(), stage);
    }
}

std::size_t count_occurrences(const std::string& text, const std::string& phrase) {
    std::size_t n = 0;
    for (auto pos = text.find(phrase); pos != std::string::npos; pos = text.find(phrase, pos + 1)) {
        ++n;
    }
    return n;
}

std::size_t fraction_of(double fraction, std::size_t n, const char* name) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw_error(ErrorKind::parameter, std::string(name) + " must lie in [0, 1]");
    }
    return static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
}

// Runs fn(k) for k in [0, n), concurrently when allowed; results keep index order.
template <typename R>
std::vector<R> for_each_pair(std::size_t n, bool parallel, const std::function<R(std::size_t)>& fn) {
    std::vector<R> out;
    out.reserve(n);
    if (!parallel || n < 2) {
        for (std::size_t k = 0; k < n; ++k) {
            out.push_back(fn(k));
        }
        return out;
    }
    std::vector<std::future<R>> futures;
    futures.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        futures.push_back(std::async(std::launch::async, fn, k));
    }
    for (auto& f : futures) {
        out.push_back(f.get());
    }
    return out;
}

void check_embedding(const Embedding& e, const NoisePredictor& predictor, const std::string& prompt) {
    if (e.size() != predictor.embedding_width()) {
        throw_error(ErrorKind::parameter, "embedding of \"" + prompt + "\" has width " + std::to_string(e.size()) +
                                              ", predictor expects " + std::to_string(predictor.embedding_width()));
    }
}

}  // namespace

std::vector<std::string> build_guided_prompts(const std::string& original_prompt, const std::vector<PairSpec>& pairs) {
    std::vector<std::string> out;
    out.reserve(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        if (p.source_phrase.empty()) {
            throw_error(ErrorKind::substitution, "pair " + std::to_string(k) + " has an empty source phrase");
        }
        const std::size_t n = count_occurrences(original_prompt, p.source_phrase);
        if (n == 0) {
            throw_error(ErrorKind::substitution, "pair " + std::to_string(k) + ": \"" + p.source_phrase +
                                                     "\" does not occur in \"" + original_prompt + "\"");
        }
        if (n > 1) {
            throw_error(ErrorKind::ambiguity, "pair " + std::to_string(k) + ": \"" + p.source_phrase + "\" occurs " +
                                                  std::to_string(n) + " times in \"" + original_prompt + "\"");
        }
        std::string guided = original_prompt;
        guided.replace(guided.find(p.source_phrase), p.source_phrase.size(), p.target_phrase);
        out.push_back(std::move(guided));
    }
    return out;
}

ReassemblyPlan plan_job(std::size_t n_steps, std::vector<EditingPair> pairs, std::size_t latent_height,
                        std::size_t latent_width, double i_r_fraction, double i_re_fraction) {
    ReassemblyPlan plan;
    plan.i_r = fraction_of(i_r_fraction, n_steps, "i_r_fraction");
    plan.i_re = fraction_of(i_re_fraction, n_steps, "i_re_fraction");
    if (plan.i_r < 1) {
        throw_error(ErrorKind::parameter, "reassembly step must be at least 1");
    }
    if (plan.i_r + plan.i_re > n_steps) {
        throw_error(ErrorKind::parameter, "i_r + i_re = " + std::to_string(plan.i_r + plan.i_re) + " exceeds N=" +
                                              std::to_string(n_steps));
    }

    Mask union_mask(latent_height, latent_width, MaskResolution::latent);
    for (auto& p : pairs) {
        if (p.mask_e.resolution() == MaskResolution::latent) {
            if (p.mask_e.height() != latent_height || p.mask_e.width() != latent_width) {
                throw_error(ErrorKind::parameter, "latent mask size mismatch");
            }
            p.mask_e_latent = p.mask_e;
        } else {
            p.mask_e_latent = downsample_mask(p.mask_e, latent_height, latent_width);
        }
        if (p.optimal_step < plan.i_r || p.optimal_step > n_steps) {
            throw_error(ErrorKind::validation, "pair " + std::to_string(p.index) + " step " +
                                                   std::to_string(p.optimal_step) + " outside [i_r=" +
                                                   std::to_string(plan.i_r) + ", N=" + std::to_string(n_steps) + "]");
        }
    }

    std::string overlaps;
    for (std::size_t a = 0; a < pairs.size(); ++a) {
        for (std::size_t b = a + 1; b < pairs.size(); ++b) {
            const auto ca = pairs[a].mask_e_latent.cells();
            const auto cb = pairs[b].mask_e_latent.cells();
            for (std::size_t i = 0; i < ca.size(); ++i) {
                if (ca[i] && cb[i]) {
                    overlaps += (overlaps.empty() ? "" : ", ") + std::string("pair ") +
                                std::to_string(pairs[a].index) + " and pair " + std::to_string(pairs[b].index);
                    break;
                }
            }
        }
    }
    if (!overlaps.empty()) {
        throw_error(ErrorKind::validation, "edit masks overlap on the latent grid: " + overlaps);
    }

    for (const auto& p : pairs) {
        for (std::size_t y = 0; y < latent_height; ++y) {
            for (std::size_t x = 0; x < latent_width; ++x) {
                if (p.mask_e_latent.at(y, x)) {
                    union_mask.set(y, x, true);
                }
            }
        }
    }
    plan.mask_ne_latent = union_mask.complement();
    plan.pairs = std::move(pairs);
    return plan;
}

ReassemblyPlan plan_job(std::size_t n_steps, std::vector<EditingPair> pairs, const std::vector<SearchCurve>& curves,
                        std::size_t latent_height, std::size_t latent_width, double i_r_fraction,
                        double i_re_fraction) {
    if (curves.size() != pairs.size()) {
        throw_error(ErrorKind::parameter, "need one search curve per editing pair");
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        pairs[k].optimal_step = curves[k].optimal_step;
    }
    return plan_job(n_steps, std::move(pairs), latent_height, latent_width, i_r_fraction, i_re_fraction);
}

Tensor reassemble(const std::vector<Tensor>& pair_latents, const std::vector<Mask>& pair_masks, const Mask& mask_ne,
                  const Tensor& background) {
    if (pair_latents.size() != pair_masks.size()) {
        throw_error(ErrorKind::parameter, "one latent mask per branch latent is required");
    }
    if (background.rank() != 3) {
        throw_error(ErrorKind::parameter, "background latent must be (C, H, W)");
    }
    const std::size_t C = background.dim(0);
    const std::size_t H = background.dim(1);
    const std::size_t W = background.dim(2);
    auto check_mask = [&](const Mask& m) {
        if (m.height() != H || m.width() != W) {
            throw_error(ErrorKind::parameter, "reassembly mask does not match the latent grid");
        }
    };
    check_mask(mask_ne);
    for (std::size_t k = 0; k < pair_latents.size(); ++k) {
        check_mask(pair_masks[k]);
        if (pair_latents[k].shape() != background.shape()) {
            throw_error(ErrorKind::parameter, "branch latent shape differs from the background latent");
        }
    }

    Tensor out(background.shape());
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const Tensor* source = mask_ne.at(y, x) ? &background : nullptr;
            std::size_t owners = source ? 1 : 0;
            for (std::size_t k = 0; k < pair_latents.size(); ++k) {
                if (pair_masks[k].at(y, x)) {
                    source = &pair_latents[k];
                    ++owners;
                }
            }
            if (owners != 1) {
                throw_error(ErrorKind::validation, "latent cell (" + std::to_string(y) + ", " + std::to_string(x) +
                                                       ") has " + std::to_string(owners) + " sources");
            }
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t i = (c * H + y) * W + x;
                out[i] = (*source)[i];
            }
        }
    }
    return out;
}

namespace {

struct Prepared {
    std::vector<std::string> guided_prompts;
    Conditioning cond_o;
    Conditioning cond_t;
    std::vector<Conditioning> cond_pairs;
    Trajectory trajectory;
};

Prepared prepare(const EditJob& job) {
    const BackendSet& be = job.backends;
    if (!be.predictor || !be.embedder || !be.codec || !be.scorer || !be.segmenter) {
        throw_error(ErrorKind::parameter, "edit job is missing a backend");
    }
    if (job.original_prompt.empty() || job.target_prompt.empty()) {
        throw_error(ErrorKind::validation, "original and target prompts must be nonempty");
    }
    NoisePredictor& predictor = *be.predictor;
    const OirOptions& opt = job.options;
    Prepared prep;

    prep.guided_prompts = in_stage("prompts", [&] { return build_guided_prompts(job.original_prompt, job.pairs); });

    // Negative prompt is the original prompt for every stage.
    in_stage("embed", [&] {
        const Embedding e_o = be.embedder->embed(job.original_prompt);
        const Embedding e_t = be.embedder->embed(job.target_prompt);
        check_embedding(e_o, predictor, job.original_prompt);
        check_embedding(e_t, predictor, job.target_prompt);
        prep.cond_o = {e_o, e_o, opt.guidance_scale};
        prep.cond_t = {e_t, e_o, opt.guidance_scale};
        for (const auto& gp : prep.guided_prompts) {
            Embedding e_k = be.embedder->embed(gp);
            check_embedding(e_k, predictor, gp);
            prep.cond_pairs.push_back({std::move(e_k), e_o, opt.guidance_scale});
        }
        return 0;
    });

    const Latent latent0 = in_stage("encode", [&] {
        if (job.original.height() != be.codec->image_height() || job.original.width() != be.codec->image_width()) {
            throw_error(ErrorKind::parameter, "input image is " + std::to_string(job.original.height()) + "x" +
                                                  std::to_string(job.original.width()) + ", codec expects " +
                                                  std::to_string(be.codec->image_height()) + "x" +
                                                  std::to_string(be.codec->image_width()));
        }
        return Latent{be.codec->encode(job.original), 0};
    });

    prep.trajectory = in_stage(
        "inversion", [&] { return invert(latent0, prep.cond_o, job.schedule, predictor, job.original_prompt); });
    return prep;
}

std::vector<EditingPair> segment_pairs(const EditJob& job, const Prepared& prep, std::size_t initial_step) {
    std::vector<EditingPair> pairs(job.pairs.size());
    std::vector<std::string> phrases;
    for (const auto& p : job.pairs) {
        phrases.push_back(p.source_phrase);
    }
    std::vector<Mask> masks;
    if (!phrases.empty()) {
        masks = job.backends.segmenter->segment(job.original, phrases);
    }
    if (masks.size() != phrases.size()) {
        throw_error(ErrorKind::backend, "segmenter returned " + std::to_string(masks.size()) + " masks for " +
                                            std::to_string(phrases.size()) + " phrases");
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        pairs[k].index = k;
        pairs[k].source_phrase = job.pairs[k].source_phrase;
        pairs[k].target_phrase = job.pairs[k].target_phrase;
        pairs[k].guided_prompt = prep.guided_prompts[k];
        pairs[k].mask_e = std::move(masks[k]);
        pairs[k].optimal_step = initial_step;
    }
    return pairs;
}

struct Searched {
    SearchCurve curve;
    CandidateSet candidates;
    std::size_t step = 0;
};

std::vector<Searched> search_pairs(const EditJob& job, const Prepared& prep, const std::vector<EditingPair>& pairs,
                                   std::size_t min_step, bool use_overrides) {
    const OirOptions& opt = job.options;
    const BackendSet& be = job.backends;
    const std::size_t n = job.schedule.n_inversion_steps();
    const bool parallel = opt.parallel_pairs && be.predictor->concurrency_safe();
    return for_each_pair<Searched>(pairs.size(), parallel, [&](std::size_t k) {
        Searched out;
        if (use_overrides && k < opt.pair_step_override.size() && opt.pair_step_override[k]) {
            out.step = *opt.pair_step_override[k];
            return out;
        }
        const auto steps = search_steps(n, opt.stride, min_step);
        if (steps.empty()) {
            throw_error(ErrorKind::parameter, "stride " + std::to_string(opt.stride) + " leaves no candidate steps");
        }
        out.candidates =
            opt.batched_search
                ? generate_candidates_batched(prep.trajectory, prep.cond_pairs[k], steps, job.schedule,
                                              *be.predictor, *be.codec, k)
                : generate_candidates_serial(prep.trajectory, prep.cond_pairs[k], steps, job.schedule,
                                             *be.predictor, *be.codec, k);
        out.curve = build_search_curve(out.candidates, job.original, pairs[k].mask_e, pairs[k].mask_e.complement(),
                                       pairs[k].guided_prompt, *be.scorer);
        out.step = out.curve.optimal_step;
        return out;
    });
}

}  // namespace

SearchResult run_search(const EditJob& job) {
    Prepared prep = prepare(job);
    SearchResult result;
    result.pairs = in_stage("segment", [&] { return segment_pairs(job, prep, 0); });
    const auto searched = in_stage("search", [&] { return search_pairs(job, prep, result.pairs, 1, false); });
    for (std::size_t k = 0; k < result.pairs.size(); ++k) {
        result.pairs[k].optimal_step = searched[k].step;
        result.curves.push_back(searched[k].curve);
        result.candidates.push_back(searched[k].candidates);
    }
    result.trajectory = std::move(prep.trajectory);
    return result;
}

OirResult run_oir(const EditJob& job) {
    return run_oir_ablation(job, {});
}

OirResult run_oir_ablation(const EditJob& job, const AblationOptions& ablation) {
    Prepared prep = prepare(job);
    const BackendSet& be = job.backends;
    NoisePredictor& predictor = *be.predictor;
    const NoiseSchedule& schedule = job.schedule;
    const std::size_t n = schedule.n_inversion_steps();
    const OirOptions& opt = job.options;
    const LatentShape lshape = be.codec->latent_shape();
    const Conditioning& cond_t = prep.cond_t;

    OirResult result;
    result.trajectory = prep.trajectory;
    const Trajectory& traj = prep.trajectory;

    if (ablation.force_single_step) {
        const std::size_t step = *ablation.force_single_step;
        if (step < 1 || step > n) {
            throw Error(ErrorKind::parameter, "forced step " + std::to_string(step) + " outside [1, " +
                                                  std::to_string(n) + "]", "force-step");
        }
        const Latent clean = in_stage("force-step", [&] { return denoise(traj.at(step), cond_t, step, 0, schedule, predictor); });
        result.output = in_stage("decode", [&] { return be.codec->decode(clean.data); });
        return result;
    }

    // Fail fast on plan parameters before spending time on the search.
    const std::size_t i_r = in_stage("plan", [&] {
        return plan_job(n, {}, lshape.height, lshape.width, opt.i_r_fraction, opt.i_re_fraction).i_r;
    });

    std::vector<EditingPair> pairs = in_stage("segment", [&] {
        auto out = segment_pairs(job, prep, i_r);
        // disjointness is checked now so overlapping jobs never reach the search
        plan_job(n, out, lshape.height, lshape.width, opt.i_r_fraction, opt.i_re_fraction);
        return out;
    });

    const bool parallel = opt.parallel_pairs && predictor.concurrency_safe();
    const auto searched = in_stage("search", [&] { return search_pairs(job, prep, pairs, i_r, true); });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        pairs[k].optimal_step = searched[k].step;
        result.curves.push_back(searched[k].curve);
        result.candidates.push_back(searched[k].candidates);
    }

    result.plan = in_stage("plan", [&] {
        return plan_job(n, std::move(pairs), lshape.height, lshape.width, opt.i_r_fraction, opt.i_re_fraction);
    });
    const ReassemblyPlan& plan = result.plan;

    result.branches = in_stage("branch", [&] {
        return for_each_pair<Latent>(plan.pairs.size(), parallel, [&](std::size_t k) {
            const std::size_t from = plan.pairs[k].optimal_step;
            if (from == plan.i_r) {
                return traj.at(plan.i_r);
            }
            return denoise(traj.at(from), prep.cond_pairs[k], from, plan.i_r, schedule, predictor);
        });
    });

    const Latent reassembled = in_stage("reassembly", [&] {
        std::vector<Tensor> latents;
        std::vector<Mask> masks;
        for (std::size_t k = 0; k < plan.pairs.size(); ++k) {
            latents.push_back(result.branches[k].data);
            masks.push_back(plan.pairs[k].mask_e_latent);
        }
        Latent out{reassemble(latents, masks, plan.mask_ne_latent, traj.at(plan.i_r).data), plan.i_r};
        check_finite(out.data, "reassembly", plan.i_r);
        return out;
    });
    result.reassembled = reassembled;

    Latent start = reassembled;
    if (!ablation.disable_reinversion && plan.i_re > 0) {
        start = in_stage("re-inversion", [&] { return reinvert(reassembled, cond_t, plan.i_re, schedule, predictor); });
    }
    const Latent clean =
        in_stage("final-denoise", [&] { return denoise(start, cond_t, start.step, 0, schedule, predictor); });
    result.output = in_stage("decode", [&] { return be.codec->decode(clean.data); });
    return result;
}

}  // namespace oir
