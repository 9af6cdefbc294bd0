// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "oir/cli/image_io.hpp"
#include "oir/error.hpp"
#include "oir/metrics.hpp"
#include "oir/toy_backends.hpp"

namespace oir::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Tracks written artifacts so run.json can list their checksums.
class RunRecord {
public:
    RunRecord(std::string command, fs::path dir) : m_command(std::move(command)), m_dir(std::move(dir)) {}

    const fs::path& dir() const { return m_dir; }

    fs::path path(const std::string& rel) {
        m_artifacts.push_back(rel);
        const fs::path p = m_dir / rel;
        fs::create_directories(p.parent_path());
        return p;
    }

    void write_text(const std::string& rel, const std::string& text) {
        std::ofstream out(path(rel), std::ios::binary);
        out << text;
        if (!out) {
            throw_error(ErrorKind::io, "failed writing " + (m_dir / rel).string());
        }
    }

    void complete(json info) {
        json sums = json::object();
        for (const auto& rel : m_artifacts) {
            sums[rel] = sha256_file(m_dir / rel);
        }
        info["status"] = "complete";
        info["command"] = m_command;
        info["artifacts"] = std::move(sums);
        write_run_json(info);
    }

    // Best effort: a failed run must never leave a run.json that reads as complete.
    void fail(json info, const Error& e) noexcept {
        try {
            info["status"] = "failed";
            info["command"] = m_command;
            info["error"] = {{"kind", std::string(to_string(e.kind()))}, {"stage", e.stage()}, {"message", e.detail()}};
            info["exit_code"] = exit_code_for(e.kind());
            fs::create_directories(m_dir);
            write_run_json(info);
        } catch (...) {
        }
    }

private:
    void write_run_json(const json& info) {
        std::ofstream out(m_dir / "run.json", std::ios::binary);
        out << info.dump(2) << '\n';
    }

    std::string m_command;
    fs::path m_dir;
    std::vector<std::string> m_artifacts;
};

json base_info(const JobSpec& spec, const std::string& identity) {
    return json{{"config", to_json(spec)}, {"seed", spec.seed}, {"backend_identity", identity}};
}

json pairs_info(const std::vector<EditingPair>& pairs) {
    json out = json::array();
    for (const auto& p : pairs) {
        out.push_back({{"index", p.index},
                       {"source_phrase", p.source_phrase},
                       {"target_phrase", p.target_phrase},
                       {"guided_prompt", p.guided_prompt},
                       {"optimal_step", p.optimal_step}});
    }
    return out;
}

void write_curves(RunRecord& record, const std::vector<SearchCurve>& curves,
                  const std::vector<CandidateSet>& candidates) {
    for (std::size_t k = 0; k < curves.size(); ++k) {
        if (curves[k].steps.empty()) {
            continue;  // pair step was fixed by the job
        }
        const std::string stem = "pair_" + std::to_string(k);
        std::ostringstream csv;
        write_curve_csv(csv, curves[k]);
        record.write_text("curves/" + stem + ".csv", csv.str());
        record.write_text("curves/" + stem + ".json", curve_to_json(curves[k]) + "\n");
        write_png(record.path("candidates/" + stem + ".png"), contact_sheet(candidates[k].images));
    }
}

std::string summary_text(const std::vector<EditingPair>& pairs, const std::vector<SearchCurve>& curves) {
    std::ostringstream s;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        s << "pair " << k << " (" << pairs[k].source_phrase << " -> " << pairs[k].target_phrase
          << "): i_k=" << pairs[k].optimal_step;
        if (k < curves.size() && !curves[k].steps.empty()) {
            s << " over " << curves[k].steps.size() << " candidates";
        } else {
            s << " (fixed)";
        }
        s << '\n';
    }
    return s.str();
}

EditJob make_job(const JobSpec& spec, Image image, BackendSet backends) {
    OirOptions opt;
    opt.i_r_fraction = spec.i_r_fraction;
    opt.i_re_fraction = spec.i_re_fraction;
    opt.stride = spec.effective_stride();
    opt.guidance_scale = spec.guidance_scale;
    opt.pair_step_override = spec.pair_steps;
    return EditJob{std::move(image),    spec.original_prompt, spec.target_prompt, spec.pairs,
                   build_schedule(spec), std::move(backends), std::move(opt)};
}

int report_error(const Error& e, std::ostream& err) {
    err << "oir: " << e.what() << '\n';
    return exit_code_for(e.kind());
}

// Shared driver: validate, load, build backends, run body; failures land in run.json.
int run_job(const std::string& command, const JobSpec& spec, std::ostream& err,
            const std::function<json(RunRecord&, EditJob&)>& body) {
    RunRecord record(command, spec.output_dir);
    json info{{"config", to_json(spec)}, {"seed", spec.seed}};
    try {
        validate_jobspec(spec);
        Image image = read_png(spec.image);
        BackendSet backends;
        try {
            backends = build_backends(spec, image);
        } catch (const Error& e) {
            throw e.with_stage("backend");
        }
        info = base_info(spec, backends.identity);
        EditJob job = make_job(spec, std::move(image), std::move(backends));
        json extra = body(record, job);
        info.update(extra);
        record.complete(std::move(info));
        return kExitOk;
    } catch (const Error& e) {
        record.fail(std::move(info), e);
        return report_error(e, err);
    } catch (const std::exception& e) {
        const Error wrapped(ErrorKind::io, e.what());
        record.fail(std::move(info), wrapped);
        return report_error(wrapped, err);
    }
}

}  // namespace

int cmd_search(const JobSpec& spec, std::ostream& out, std::ostream& err) {
    return run_job("search", spec, err, [&](RunRecord& record, EditJob& job) {
        const SearchResult result = run_search(job);
        write_curves(record, result.curves, result.candidates);
        const std::string summary = summary_text(result.pairs, result.curves);
        record.write_text("summary.txt", summary);
        out << summary;
        return json{{"pairs", pairs_info(result.pairs)}};
    });
}

int cmd_edit(const JobSpec& spec, const AblationOptions& ablation, bool quiet, std::ostream& out,
             std::ostream& err) {
    return run_job("edit", spec, err, [&](RunRecord& record, EditJob& job) {
        const OirResult result = run_oir_ablation(job, ablation);
        json info{{"ablation",
                   {{"disable_reinversion", ablation.disable_reinversion},
                    {"force_step", ablation.force_single_step ? json(*ablation.force_single_step) : json(nullptr)}}}};
        if (!ablation.force_single_step) {
            const auto& plan = result.plan;
            if (!plan.has_protected_region()) {
                err << "oir: note: edit masks cover the whole latent grid; no non-editing region\n";
            }
            info["i_r"] = plan.i_r;
            info["i_re"] = plan.i_re;
            info["pairs"] = pairs_info(plan.pairs);
            if (!quiet) {
                write_curves(record, result.curves, result.candidates);
                write_oirt(record.path("latents/reassembled.oirt"), result.reassembled->data);
                const std::string summary = summary_text(plan.pairs, result.curves);
                record.write_text("summary.txt", summary);
                out << summary;
            }
        }
        write_png(record.path("output.png"), result.output);
        if (!quiet) {
            out << "wrote " << (record.dir() / "output.png").string() << '\n';
        }
        return info;
    });
}

namespace {

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

int cmd_eval(const fs::path& manifest, const EvalOptions& options, std::ostream& out, std::ostream& err) {
    try {
        std::ifstream in(manifest);
        if (!in) {
            throw Error(ErrorKind::validation, "cannot open manifest " + manifest.string(), "manifest");
        }
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::validation, manifest.string() + " is not valid JSON: " + e.what(), "manifest");
        }
        const json rows = doc.is_array() ? doc : doc.value("rows", json::array());
        if (!rows.is_array() || rows.empty()) {
            throw Error(ErrorKind::validation, "manifest has no rows", "manifest");
        }
        const fs::path base = manifest.parent_path();
        const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

        std::shared_ptr<RegionScorer> scorer;
        const json scorer_spec = doc.is_object() ? doc.value("scorer", json(nullptr)) : json(nullptr);
        if (options.endpoint) {
            remote::ServerEndpoint ep;
            ep.base_url = *options.endpoint;
            scorer = remote::make_remote_backends(ep).scorer;
        } else if (scorer_spec.is_object()) {
            const std::string kind = scorer_spec.value("kind", "toy");
            if (kind == "toy") {
                std::vector<std::pair<double, double>> profile{{0.0, 0.0}, {1.0, 1.0}};
                if (scorer_spec.contains("scorer_profile")) {
                    profile = scorer_spec["scorer_profile"].get<std::vector<std::pair<double, double>>>();
                }
                scorer = toy::toy_region_scorer(std::move(profile));
            } else if (kind == "remote") {
                remote::ServerEndpoint ep;
                ep.base_url = scorer_spec.value("endpoint", "");
                scorer = remote::make_remote_backends(ep).scorer;
            } else {
                throw Error(ErrorKind::validation, "unknown scorer kind \"" + kind + "\"", "manifest");
            }
        }

        metrics::EvalReport report;
        if (scorer) {
            report.scorer_name = scorer->name();
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const json& r = rows[i];
            metrics::EvalRow row;
            row.name = r.is_object() ? r.value("name", r.value("edited", "row" + std::to_string(i)))
                                     : "row" + std::to_string(i);
            try {
                if (!r.is_object() || !r.contains("edited") || !r.contains("original")) {
                    throw_error(ErrorKind::validation, "row needs edited and original paths");
                }
                metrics::EvalInput input{row.name, read_png(resolve(r["edited"].get<std::string>())),
                                         read_png(resolve(r["original"].get<std::string>())),
                                         r.value("prompt", "")};
                row = metrics::evaluate_pairset({input}, scorer.get()).rows.front();
            } catch (const std::exception& e) {
                row.clip_score.reset();
                row.ms_ssim.reset();
                row.error = csv_safe(e.what());
                err << "oir: eval row " << row.name << ": " << e.what() << '\n';
            }
            report.rows.push_back(std::move(row));
        }
        metrics::recompute_aggregates(report);

        const fs::path dir = options.output_dir.value_or(base / "eval");
        fs::create_directories(dir);
        std::ofstream csv(dir / "report.csv", std::ios::binary);
        metrics::write_report_csv(csv, report);
        std::ostringstream table;
        const std::string method = doc.is_object() ? doc.value("method", "Ours") : "Ours";
        metrics::write_report_table(table, report, method);
        std::ofstream(dir / "report.txt", std::ios::binary) << table.str();
        out << table.str();

        const bool any_ok = std::any_of(report.rows.begin(), report.rows.end(),
                                        [](const metrics::EvalRow& r) { return r.error.empty(); });
        if (!any_ok) {
            throw Error(ErrorKind::validation, "every manifest row failed", "eval");
        }
        return kExitOk;
    } catch (const Error& e) {
        return report_error(e, err);
    } catch (const std::exception& e) {
        return report_error(Error(ErrorKind::validation, e.what(), "manifest"), err);
    }
}

int cmd_protocol_check(const remote::ServerEndpoint& endpoint, std::ostream& out, std::ostream& err) {
    try {
        auto session = std::make_shared<remote::RemoteSession>(endpoint);
        const auto& caps = session->handshake();
        out << "handshake: protocol " << caps.protocol_version << ", embedding width " << caps.embedding_width
            << ", latent " << caps.latent_shape.channels << "x" << caps.latent_shape.height << "x"
            << caps.latent_shape.width << ", image " << caps.image_height << "x" << caps.image_width << "x"
            << caps.image_channels << '\n';
        for (const auto& [role, model] : caps.models) {
            out << "  " << role << ": " << model << '\n';
        }
        const auto fail = [](const std::string& what) { throw_error(ErrorKind::protocol, what); };

        remote::RemoteTextEmbedder embedder(session);
        const Embedding e = embedder.embed("a photo of a cat");
        if (e.size() != caps.embedding_width) {
            fail("embed_text returned width " + std::to_string(e.size()));
        }
        out << "embed_text: ok\n";

        remote::RemoteNoisePredictor predictor(session);
        const std::vector<Tensor> latents(2, Tensor(caps.latent_shape.dims()));
        const std::vector<std::size_t> timesteps{0, 999};
        const std::vector<Embedding> embeddings(2, e);
        const auto eps = predictor.predict(latents, timesteps, embeddings);
        if (eps.size() != 2 || eps[0].shape() != caps.latent_shape.dims() || !eps[0].all_finite() ||
            !eps[1].all_finite()) {
            fail("eps returned a malformed batch");
        }
        out << "eps: ok (batch of 2)\n";

        remote::RemoteLatentCodec codec(session);
        const Image gray(caps.image_height, caps.image_width, caps.image_channels, 0.5f);
        const Tensor z = codec.encode(gray);
        if (z.shape() != caps.latent_shape.dims()) {
            fail("encode returned the wrong latent shape");
        }
        const Image back = codec.decode(z);
        if (back.height() != caps.image_height || back.width() != caps.image_width) {
            fail("decode returned the wrong image size");
        }
        out << "encode/decode: ok\n";

        remote::RemoteSegmenter segmenter(session);
        const std::vector<std::string> phrases{"cat"};
        const auto masks = segmenter.segment(gray, phrases);
        if (masks.size() != 1) {
            fail("segment returned " + std::to_string(masks.size()) + " masks for one phrase");
        }
        out << "segment: ok\n";

        remote::RemoteRegionScorer scorer(session);
        const double s = scorer.score(gray, masks.front().empty() ? masks.front().complement() : masks.front(), "cat");
        if (!std::isfinite(s)) {
            fail("clip_score returned a non-finite value");
        }
        out << "clip_score: ok\n";
        out << "protocol-check passed (" << session->requests_sent() << " requests)\n";
        return kExitOk;
    } catch (const Error& e) {
        return report_error(e, err);
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Object-aware inversion and reassembly image editing", "oir"};
    app.require_subcommand(1);

    std::string job_path;
    JobOverrides overrides;
    std::string output_dir;
    auto add_job_flags = [&](CLI::App* sub) {
        sub->add_option("job", job_path, "Job spec (JSON)")->required();
        sub->add_option("--output-dir,-o", output_dir, "Artifact directory");
        sub->add_option("--n-steps", overrides.n_steps, "Number of DDIM steps N");
        sub->add_option("--stride", overrides.stride, "Search step stride");
        sub->add_option("--guidance-scale", overrides.guidance_scale, "Classifier-free guidance scale");
        sub->add_option("--seed", overrides.seed, "Seed for the toy backend");
        sub->add_option("--i-r-fraction", overrides.i_r_fraction, "Reassembly step as a fraction of N");
        sub->add_option("--i-re-fraction", overrides.i_re_fraction, "Re-inversion steps as a fraction of N");
        sub->add_option("--endpoint", overrides.endpoint, "Use the remote backend at this URL");
    };

    auto* search = app.add_subcommand("search", "Search the optimal inversion step of each editing pair");
    add_job_flags(search);

    auto* edit = app.add_subcommand("edit", "Run the full edit");
    add_job_flags(edit);
    bool ablate_reinversion = false;
    std::optional<std::size_t> force_step;
    bool quiet = false;
    edit->add_flag("--ablate-reinversion", ablate_reinversion, "Skip re-inversion after reassembly");
    edit->add_option("--force-step", force_step, "Edit everything from one step under the target prompt");
    edit->add_flag("--quiet,-q", quiet, "Write only output.png and run.json");

    auto* eval = app.add_subcommand("eval", "Score edited images against their originals");
    std::string manifest;
    std::string eval_endpoint;
    eval->add_option("manifest", manifest, "Manifest (JSON)")->required();
    eval->add_option("--output-dir,-o", output_dir, "Report directory");
    eval->add_option("--endpoint", eval_endpoint, "Remote scorer URL");

    auto* check = app.add_subcommand("protocol-check", "Exercise every endpoint of a model server");
    remote::ServerEndpoint endpoint;
    double timeout_s = 30.0;
    check->add_option("endpoint", endpoint.base_url, "Server base URL")->required();
    check->add_option("--timeout", timeout_s, "Per-request timeout in seconds")->check(CLI::PositiveNumber);
    check->add_option("--retries", endpoint.retry_budget, "Attempts per request on connection errors");
    check->add_option("--token", endpoint.bearer_token, "Bearer token");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*search || *edit) {
            if (!output_dir.empty()) {
                overrides.output_dir = output_dir;
            }
            JobSpec spec = load_jobspec(job_path);
            apply_overrides(spec, overrides);
            if (*search) {
                return cmd_search(spec, out, err);
            }
            AblationOptions ablation;
            ablation.disable_reinversion = ablate_reinversion;
            ablation.force_single_step = force_step;
            return cmd_edit(spec, ablation, quiet, out, err);
        }
        if (*eval) {
            EvalOptions opt;
            if (!output_dir.empty()) {
                opt.output_dir = output_dir;
            }
            if (!eval_endpoint.empty()) {
                opt.endpoint = eval_endpoint;
            }
            return cmd_eval(manifest, opt, out, err);
        }
        endpoint.timeout = std::chrono::milliseconds(std::llround(timeout_s * 1000.0));
        return cmd_protocol_check(endpoint, out, err);
    } catch (const Error& e) {
        return report_error(e, err);
    }
}

}  // namespace oir::cli
