// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "oir/error.hpp"

namespace oir::metrics {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

struct Plane {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> v;

    double operator()(std::size_t y, std::size_t x) const { return v[y * w + x]; }
};

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> g{};
    const double mid = (static_cast<double>(kWindow) - 1.0) / 2.0;
    for (std::size_t i = 0; i < kWindow; ++i) {
        const double d = static_cast<double>(i) - mid;
        g[i] = std::exp(-0.5 * d * d / (kSigma * kSigma));
    }
    const double sum = std::accumulate(g.begin(), g.end(), 0.0);
    for (auto& t : g) {
        t /= sum;
    }
    return g;
}

// Valid-mode separable Gaussian filtering.
Plane filter_valid(const Plane& p) {
    static const auto taps = gaussian_taps();
    const std::size_t ow = p.w - kWindow + 1;
    const std::size_t oh = p.h - kWindow + 1;
    Plane rows{p.h, ow, std::vector<double>(p.h * ow)};
    for (std::size_t y = 0; y < p.h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) {
                acc += taps[k] * p(y, x + k);
            }
            rows.v[y * ow + x] = acc;
        }
    }
    Plane out{oh, ow, std::vector<double>(oh * ow)};
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) {
                acc += taps[k] * rows(y + k, x);
            }
            out.v[y * ow + x] = acc;
        }
    }
    return out;
}

// 2x2 average pooling; odd sizes first repeat their last row/column.
Plane downsample(const Plane& p) {
    const std::size_t ph = p.h + p.h % 2;
    const std::size_t pw = p.w + p.w % 2;
    auto at = [&](std::size_t y, std::size_t x) { return p(std::min(y, p.h - 1), std::min(x, p.w - 1)); };
    Plane out{ph / 2, pw / 2, std::vector<double>((ph / 2) * (pw / 2))};
    for (std::size_t y = 0; y < out.h; ++y) {
        for (std::size_t x = 0; x < out.w; ++x) {
            out.v[y * out.w + x] =
                (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1)) / 4.0;
        }
    }
    return out;
}

Plane elementwise(const Plane& a, const Plane& b, double (*op)(double, double)) {
    Plane out{a.h, a.w, std::vector<double>(a.v.size())};
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        out.v[i] = op(a.v[i], b.v[i]);
    }
    return out;
}

// Mean SSIM and mean contrast-structure term at one scale.
std::pair<double, double> ssim_and_cs(const Plane& x, const Plane& y) {
    const Plane mx = filter_valid(x);
    const Plane my = filter_valid(y);
    const Plane mxy = filter_valid(elementwise(x, y, [](double a, double b) { return a * b; }));
    const Plane msq = filter_valid(elementwise(x, y, [](double a, double b) { return a * a + b * b; }));
    double ssim_sum = 0.0;
    double cs_sum = 0.0;
    for (std::size_t i = 0; i < mx.v.size(); ++i) {
        const double num0 = mx.v[i] * my.v[i] * 2.0;
        const double den0 = mx.v[i] * mx.v[i] + my.v[i] * my.v[i];
        const double luminance = (num0 + kC1) / (den0 + kC1);
        const double cs = (mxy.v[i] * 2.0 - num0 + kC2) / (msq.v[i] - den0 + kC2);
        ssim_sum += luminance * cs;
        cs_sum += cs;
    }
    const auto n = static_cast<double>(mx.v.size());
    return {ssim_sum / n, cs_sum / n};
}

Plane channel_plane(const Image& img, std::size_t c) {
    Plane p{img.height(), img.width(), std::vector<double>(img.height() * img.width())};
    for (std::size_t y = 0; y < p.h; ++y) {
        for (std::size_t x = 0; x < p.w; ++x) {
            p.v[y * p.w + x] = img.at(y, x, c);
        }
    }
    return p;
}

std::string format_optional(const std::optional<double>& v, int precision) {
    if (!v) {
        return "absent";
    }
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << *v;
    return os.str();
}

}  // namespace

std::size_t ms_ssim_scales(std::size_t min_dim) {
    std::size_t scales = 0;
    while (scales < kMsSsimWeights.size() && (kWindow - 1) * (std::size_t{1} << scales) + 1 <= min_dim) {
        ++scales;
    }
    return scales;
}

double ms_ssim(const Image& a, const Image& b) {
    if (a.tensor().shape() != b.tensor().shape()) {
        throw_error(ErrorKind::parameter, "ms_ssim: image shapes differ");
    }
    const std::size_t scales = ms_ssim_scales(std::min(a.height(), a.width()));
    if (scales == 0) {
        throw_error(ErrorKind::parameter, "ms_ssim needs images of at least 11x11 pixels");
    }
    // Full 5-scale runs use the published weights as-is; truncated runs rescale
    // the retained weights to sum to one.
    const double weight_sum =
        scales == kMsSsimWeights.size()
            ? 1.0
            : std::accumulate(kMsSsimWeights.begin(), kMsSsimWeights.begin() + static_cast<long>(scales), 0.0);

    double total = 0.0;
    for (std::size_t c = 0; c < a.channels(); ++c) {
        Plane x = channel_plane(a, c);
        Plane y = channel_plane(b, c);
        double value = 1.0;
        for (std::size_t k = 0; k < scales; ++k) {
            if (k > 0) {
                x = downsample(x);
                y = downsample(y);
            }
            const auto [ssim, cs] = ssim_and_cs(x, y);
            const double term = std::max(0.0, k + 1 == scales ? ssim : cs);
            value *= std::pow(term, kMsSsimWeights[k] / weight_sum);
        }
        total += value;
    }
    return total / static_cast<double>(a.channels());
}

void recompute_aggregates(EvalReport& report) {
    auto mean_of = [&](auto field) -> std::optional<double> {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& row : report.rows) {
            if (row.error.empty() && (row.*field)) {
                sum += *(row.*field);
                ++n;
            }
        }
        if (n == 0) {
            return std::nullopt;
        }
        return sum / static_cast<double>(n);
    };
    report.mean_clip_score = mean_of(&EvalRow::clip_score);
    report.mean_ms_ssim = mean_of(&EvalRow::ms_ssim);
    report.mean_lpips = mean_of(&EvalRow::lpips);
}

EvalReport evaluate_pairset(const std::vector<EvalInput>& inputs, RegionScorer* scorer) {
    if (inputs.empty()) {
        throw_error(ErrorKind::parameter, "evaluation needs at least one row");
    }
    EvalReport report;
    if (scorer) {
        report.scorer_name = scorer->name();
    }
    for (const auto& in : inputs) {
        EvalRow row;
        row.name = in.name;
        row.ms_ssim = ms_ssim(in.edited, in.original);
        if (scorer) {
            const Mask full(in.edited.height(), in.edited.width(), MaskResolution::pixel, true);
            row.clip_score = scorer->score(in.edited, full, in.prompt);
        }
        report.rows.push_back(std::move(row));
    }
    recompute_aggregates(report);
    return report;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
    out << "image,clip_score,ms_ssim,lpips,error\n";
    for (const auto& row : report.rows) {
        out << row.name << ',' << format_optional(row.clip_score, 6) << ',' << format_optional(row.ms_ssim, 6) << ','
            << format_optional(row.lpips, 6) << ',' << row.error << '\n';
    }
    out << "mean," << format_optional(report.mean_clip_score, 6) << ',' << format_optional(report.mean_ms_ssim, 6)
        << ',' << format_optional(report.mean_lpips, 6) << ",\n";
}

void write_report_table(std::ostream& out, const EvalReport& report, const std::string& method) {
    const std::string header = "| Method | CLIP score (up) | MS-SSIM (up) | LPIPS (down) |";
    out << header << '\n' << "|---|---|---|---|\n";
    out << "| " << method << " | " << format_optional(report.mean_clip_score, 4) << " | "
        << format_optional(report.mean_ms_ssim, 4) << " | " << format_optional(report.mean_lpips, 4) << " |\n";
    if (!report.scorer_name.empty()) {
        out << "\nscorer: " << report.scorer_name << '\n';
    }
}

}  // namespace oir::metrics
