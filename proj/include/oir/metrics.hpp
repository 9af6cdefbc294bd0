// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oir/backends.hpp"

namespace oir::metrics {

inline constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Number of scales that fit an image whose smaller side is min_dim (0 if < 11).
std::size_t ms_ssim_scales(std::size_t min_dim);

/// Multi-scale SSIM with an 11x11 Gaussian window (sigma 1.5), dynamic range 1.
/// Uses fewer scales with renormalized weights below 161 px.
double ms_ssim(const Image& a, const Image& b);

struct EvalInput {
    std::string name;
    Image edited;
    Image original;
    std::string prompt;
};

struct EvalRow {
    std::string name;
    std::optional<double> clip_score;
    std::optional<double> ms_ssim;
    std::optional<double> lpips;
    std::string error;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::optional<double> mean_clip_score;
    std::optional<double> mean_ms_ssim;
    std::optional<double> mean_lpips;
    std::string scorer_name;
};

/// Per-row metrics and arithmetic means. Missing metrics stay absent.
EvalReport evaluate_pairset(const std::vector<EvalInput>& inputs, RegionScorer* scorer);

/// Averages over rows without an error; used by the CLI after adding failed rows.
void recompute_aggregates(EvalReport& report);

void write_report_csv(std::ostream& out, const EvalReport& report);
/// Plain-text table with the CLIP score / MS-SSIM / LPIPS columns.
void write_report_table(std::ostream& out, const EvalReport& report, const std::string& method = "Ours");

}  // namespace oir::metrics
