#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textrisk/evaluation.hpp"
#include "textrisk/network.hpp"
#include "textrisk/text_pipeline.hpp"

namespace textrisk {

// Per-token intensity in [0, 100]: each token takes the largest weight among
// the blocks covering it, relative to the largest block weight in the document.
std::vector<double> token_intensities(std::span<const double> alpha, const BlockSequence& blocks,
                                      std::size_t num_tokens);

struct HeatmapWord {
    std::string text;
    double intensity = 0.0;
};

struct HeatmapDoc {
    std::string record_id;
    std::string segment;
    std::vector<HeatmapWord> words;
};

// Words of the processed token stream with their intensities. When the
// normalized source words and the token-to-word map are supplied, every source
// word is shown instead, and words removed by preprocessing render at zero.
HeatmapDoc build_heatmap(std::string record_id, std::string segment, std::span<const std::string> tokens,
                         std::span<const double> intensities, std::span<const std::string> source_words = {},
                         std::span<const std::size_t> source = {});

std::string html_escape(std::string_view text);
// Self-contained HTML page; identical input gives identical bytes.
std::string render_heatmap(const HeatmapDoc& doc);

struct RunReport {
    nlohmann::json config;
    std::optional<EvalReport> evaluation;
    std::vector<std::pair<std::string, TrainingLog>> training_logs;
    // File names under heatmaps/.
    std::vector<std::string> heatmaps;
};

// Metrics bundle: evaluation report plus per-epoch losses (wall time omitted so
// the file is reproducible).
nlohmann::json metrics_json(const RunReport& report);
std::string render_run_report(const RunReport& report);
// Writes report.html and metrics.json into dir.
void emit_run_report(const std::filesystem::path& dir, const RunReport& report);

} // namespace textrisk
