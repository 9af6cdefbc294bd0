// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/cli/jobspec.hpp"

#include <cmath>
#include <fstream>

#include "oir/error.hpp"

namespace oir::cli {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& message) {
    throw Error(ErrorKind::validation, message, "jobspec");
}

bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

template <typename T>
std::optional<T> field(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return std::nullopt;
    }
    try {
        if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) {
                invalid(where + key + " must be a string");
            }
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!is_count(*it)) {
                invalid(where + key + " must be a nonnegative integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number()) {
                invalid(where + key + " must be a number");
            }
        }
        return it->get<T>();
    } catch (const json::exception& e) {
        invalid(where + key + ": " + e.what());
    }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
    auto v = field<T>(obj, key, where);
    if (!v) {
        invalid(std::string("missing required field ") + where + key);
    }
    return *v;
}

BackendSpec parse_backend(const json& b) {
    if (!b.is_object()) {
        invalid("backend must be an object");
    }
    BackendSpec spec;
    spec.kind = field<std::string>(b, "kind", "backend.").value_or("toy");
    if (spec.kind == "toy") {
        spec.embedding_width = field<std::size_t>(b, "embedding_width", "backend.").value_or(8);
        if (const auto it = b.find("scorer_profile"); it != b.end()) {
            spec.scorer_profile.clear();
            if (!it->is_array()) {
                invalid("backend.scorer_profile must be a list of [x, y] points");
            }
            for (const auto& pt : *it) {
                if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
                    invalid("backend.scorer_profile must be a list of [x, y] points");
                }
                spec.scorer_profile.emplace_back(pt[0].get<double>(), pt[1].get<double>());
            }
        }
        if (const auto it = b.find("rects"); it != b.end()) {
            if (!it->is_array()) {
                invalid("backend.rects must be a list of [top, left, bottom, right]");
            }
            for (const auto& r : *it) {
                if (!r.is_array() || r.size() != 4 ||
                    !std::all_of(r.begin(), r.end(), is_count)) {
                    invalid("backend.rects must be a list of [top, left, bottom, right]");
                }
                spec.rects.push_back({r[0].get<std::size_t>(), r[1].get<std::size_t>(), r[2].get<std::size_t>(),
                                      r[3].get<std::size_t>()});
            }
        }
    } else if (spec.kind == "remote") {
        spec.endpoint.base_url = field<std::string>(b, "endpoint", "backend.").value_or("");
        if (auto t = field<double>(b, "timeout_s", "backend.")) {
            if (!(*t > 0.0)) {
                invalid("backend.timeout_s must be positive");
            }
            spec.endpoint.timeout = std::chrono::milliseconds(std::llround(*t * 1000.0));
        }
        spec.endpoint.retry_budget = field<std::size_t>(b, "retry_budget", "backend.").value_or(3);
        spec.endpoint.bearer_token = field<std::string>(b, "token", "backend.").value_or("");
        spec.endpoint.max_in_flight = field<std::size_t>(b, "max_in_flight", "backend.").value_or(4);
    } else {
        invalid("backend.kind must be \"toy\" or \"remote\", got \"" + spec.kind + "\"");
    }
    return spec;
}

}  // namespace

JobSpec parse_jobspec(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) {
        invalid("job spec must be a JSON object");
    }
    JobSpec spec;
    const auto image = required<std::string>(doc, "image", "");
    spec.image = std::filesystem::path(image).is_absolute() ? std::filesystem::path(image) : base_dir / image;
    spec.original_prompt = required<std::string>(doc, "original_prompt", "");
    spec.target_prompt = required<std::string>(doc, "target_prompt", "");

    const auto pairs = doc.find("pairs");
    if (pairs == doc.end() || !pairs->is_array()) {
        invalid("missing required field pairs");
    }
    for (std::size_t k = 0; k < pairs->size(); ++k) {
        const auto& p = (*pairs)[k];
        const std::string where = "pairs[" + std::to_string(k) + "].";
        if (!p.is_object()) {
            invalid(where.substr(0, where.size() - 1) + " must be an object");
        }
        spec.pairs.push_back({required<std::string>(p, "source_phrase", where),
                              required<std::string>(p, "target_phrase", where)});
        spec.pair_steps.push_back(field<std::size_t>(p, "step", where));
    }

    if (const auto b = doc.find("backend"); b != doc.end()) {
        spec.backend = parse_backend(*b);
    }
    spec.n_steps = field<std::size_t>(doc, "n_steps", "").value_or(spec.n_steps);
    spec.i_r_fraction = field<double>(doc, "i_r_fraction", "").value_or(spec.i_r_fraction);
    spec.i_re_fraction = field<double>(doc, "i_re_fraction", "").value_or(spec.i_re_fraction);
    spec.stride = field<std::size_t>(doc, "stride", "");
    spec.guidance_scale = field<double>(doc, "guidance_scale", "").value_or(spec.guidance_scale);
    spec.seed = field<std::uint64_t>(doc, "seed", "").value_or(spec.seed);
    if (auto out = field<std::string>(doc, "output_dir", "")) {
        spec.output_dir = std::filesystem::path(*out).is_absolute() ? std::filesystem::path(*out) : base_dir / *out;
    }
    if (const auto s = doc.find("schedule"); s != doc.end()) {
        if (!s->is_object()) {
            invalid("schedule must be an object");
        }
        spec.schedule.total_train_steps =
            field<std::size_t>(*s, "total_train_steps", "schedule.").value_or(spec.schedule.total_train_steps);
        spec.schedule.beta_start = field<double>(*s, "beta_start", "schedule.").value_or(spec.schedule.beta_start);
        spec.schedule.beta_end = field<double>(*s, "beta_end", "schedule.").value_or(spec.schedule.beta_end);
    }
    return spec;
}

JobSpec load_jobspec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::validation, "cannot open job spec " + path.string(), "jobspec");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        invalid(path.string() + " is not valid JSON: " + e.what());
    }
    return parse_jobspec(doc, path.parent_path());
}

void apply_overrides(JobSpec& spec, const JobOverrides& o) {
    if (o.output_dir) spec.output_dir = *o.output_dir;
    if (o.n_steps) spec.n_steps = *o.n_steps;
    if (o.stride) spec.stride = *o.stride;
    if (o.guidance_scale) spec.guidance_scale = *o.guidance_scale;
    if (o.seed) spec.seed = *o.seed;
    if (o.i_r_fraction) spec.i_r_fraction = *o.i_r_fraction;
    if (o.i_re_fraction) spec.i_re_fraction = *o.i_re_fraction;
    if (o.endpoint) {
        spec.backend.kind = "remote";
        spec.backend.endpoint.base_url = *o.endpoint;
    }
}

void validate_jobspec(const JobSpec& spec) {
    if (spec.original_prompt.empty()) {
        invalid("original_prompt must be nonempty");
    }
    if (spec.target_prompt.empty()) {
        invalid("target_prompt must be nonempty");
    }
    for (std::size_t k = 0; k < spec.pairs.size(); ++k) {
        if (spec.pairs[k].target_phrase.empty()) {
            invalid("pairs[" + std::to_string(k) + "].target_phrase must be nonempty");
        }
    }
    if (spec.schedule.total_train_steps < 1) {
        invalid("schedule.total_train_steps must be positive");
    }
    const auto beta_ok = [](double b) { return std::isfinite(b) && b > 0.0 && b < 1.0; };
    if (!beta_ok(spec.schedule.beta_start) || !beta_ok(spec.schedule.beta_end)) {
        invalid("schedule betas must lie in (0, 1)");
    }
    if (spec.n_steps < 1 || spec.n_steps > spec.schedule.total_train_steps) {
        invalid("n_steps must lie in [1, " + std::to_string(spec.schedule.total_train_steps) + "]");
    }
    const auto frac_ok = [](double f) { return std::isfinite(f) && f >= 0.0 && f <= 1.0; };
    if (!frac_ok(spec.i_r_fraction) || !frac_ok(spec.i_re_fraction)) {
        invalid("i_r_fraction and i_re_fraction must lie in [0, 1]");
    }
    const auto n = static_cast<double>(spec.n_steps);
    const auto i_r = static_cast<std::size_t>(std::lround(spec.i_r_fraction * n));
    const auto i_re = static_cast<std::size_t>(std::lround(spec.i_re_fraction * n));
    if (i_r < 1) {
        invalid("i_r_fraction rounds to a reassembly step of 0");
    }
    if (i_r + i_re > spec.n_steps) {
        invalid("i_r + i_re = " + std::to_string(i_r + i_re) + " exceeds n_steps = " + std::to_string(spec.n_steps));
    }
    for (std::size_t k = 0; k < spec.pair_steps.size(); ++k) {
        if (spec.pair_steps[k] && (*spec.pair_steps[k] < i_r || *spec.pair_steps[k] > spec.n_steps)) {
            invalid("pairs[" + std::to_string(k) + "].step outside [" + std::to_string(i_r) + ", " +
                    std::to_string(spec.n_steps) + "]");
        }
    }
    if (spec.effective_stride() < 1 || spec.effective_stride() > spec.n_steps) {
        invalid("stride must lie in [1, n_steps]");
    }
    if (!std::isfinite(spec.guidance_scale)) {
        invalid("guidance_scale must be finite");
    }
    if (spec.backend.kind == "toy") {
        if (spec.backend.embedding_width < 1) {
            invalid("backend.embedding_width must be positive");
        }
        if (spec.backend.rects.size() != spec.pairs.size()) {
            invalid("toy backend needs one rect per pair: got " + std::to_string(spec.backend.rects.size()) +
                    " rects for " + std::to_string(spec.pairs.size()) + " pairs");
        }
        try {
            toy::Profile{spec.backend.scorer_profile};
        } catch (const Error& e) {
            invalid(std::string("backend.scorer_profile: ") + e.what());
        }
    } else if (spec.backend.endpoint.base_url.empty()) {
        invalid("remote backend needs an endpoint");
    }
    try {
        build_guided_prompts(spec.original_prompt, spec.pairs);
    } catch (const Error& e) {
        throw e.with_stage("jobspec");
    }
}

json to_json(const JobSpec& spec) {
    json pairs = json::array();
    for (std::size_t k = 0; k < spec.pairs.size(); ++k) {
        json p{{"source_phrase", spec.pairs[k].source_phrase}, {"target_phrase", spec.pairs[k].target_phrase}};
        if (k < spec.pair_steps.size() && spec.pair_steps[k]) {
            p["step"] = *spec.pair_steps[k];
        }
        pairs.push_back(std::move(p));
    }
    json backend{{"kind", spec.backend.kind}};
    if (spec.backend.kind == "toy") {
        backend["embedding_width"] = spec.backend.embedding_width;
        json profile = json::array();
        for (const auto& [x, y] : spec.backend.scorer_profile) {
            profile.push_back(json::array({x, y}));
        }
        backend["scorer_profile"] = std::move(profile);
        json rects = json::array();
        for (const auto& r : spec.backend.rects) {
            rects.push_back(json::array({r.top, r.left, r.bottom, r.right}));
        }
        backend["rects"] = std::move(rects);
    } else {
        // the bearer token is deliberately not recorded
        backend["endpoint"] = spec.backend.endpoint.base_url;
        backend["timeout_s"] = static_cast<double>(spec.backend.endpoint.timeout.count()) / 1000.0;
        backend["retry_budget"] = spec.backend.endpoint.retry_budget;
    }
    return json{{"image", spec.image.filename().string()},
                {"original_prompt", spec.original_prompt},
                {"target_prompt", spec.target_prompt},
                {"pairs", std::move(pairs)},
                {"backend", std::move(backend)},
                {"n_steps", spec.n_steps},
                {"i_r_fraction", spec.i_r_fraction},
                {"i_re_fraction", spec.i_re_fraction},
                {"stride", spec.effective_stride()},
                {"guidance_scale", spec.guidance_scale},
                {"seed", spec.seed},
                {"output_dir", spec.output_dir.string()},
                {"schedule",
                 {{"total_train_steps", spec.schedule.total_train_steps},
                  {"beta_start", spec.schedule.beta_start},
                  {"beta_end", spec.schedule.beta_end}}}};
}

BackendSet build_backends(const JobSpec& spec, const Image& image) {
    if (spec.backend.kind == "remote") {
        return remote::make_remote_backends(spec.backend.endpoint);
    }
    toy::ToyConfig cfg;
    cfg.seed = spec.seed;
    cfg.shape = {image.channels(), image.height(), image.width()};
    cfg.embedding_width = spec.backend.embedding_width;
    cfg.total_train_steps = spec.schedule.total_train_steps;
    cfg.scorer_profile = spec.backend.scorer_profile;
    cfg.rects = spec.backend.rects;
    return toy::make_toy_backends(cfg);
}

NoiseSchedule build_schedule(const JobSpec& spec) {
    return select_timesteps(
        build_linear_schedule(spec.schedule.total_train_steps, spec.schedule.beta_start, spec.schedule.beta_end),
        spec.n_steps);
}

}  // namespace oir::cli
