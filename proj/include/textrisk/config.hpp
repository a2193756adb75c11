#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "textrisk/data_model.hpp"
#include "textrisk/embeddings.hpp"
#include "textrisk/network.hpp"

namespace textrisk {

// Parses the key-value config dialect: [section] headers, `key = value` lines,
// '#' comments, and values that are quoted strings, numbers, true/false or
// flat [a, b, ...] lists. Returns {section: {key: value}}.
nlohmann::json parse_config_text(std::string_view text, std::string_view origin = "<config>");

struct GridSpec {
    std::vector<int> block_sizes{10, 15, 20};
    std::vector<int> num_filters{40, 60};
    std::vector<int> pool_sizes{2, 4, 6};
    std::vector<int> cell_sizes{50, 100, 150};
    std::vector<double> learning_rates{1e-3, 1e-4};
    // Filter width is block size times this ratio.
    double filter_ratio = 0.5;
};

// Every grid cell applied to `base`, in lexicographic order of the grid axes.
std::vector<NetworkConfig> grid_cells(const GridSpec& grid, const NetworkConfig& base);

struct RunConfig {
    // [run]
    std::uint64_t seed = 42;
    std::string corpus = "corpus.jsonl";
    std::string output_dir = "textrisk-run";
    std::vector<std::string> text_modes{"aud", "man", "aud+man", "none"};
    std::string folds = "by-firm";
    int num_folds = 10;
    std::optional<double> size_threshold;
    bool deterministic = true;
    bool logit_baseline = true;
    int heatmaps = 5;

    // [pipeline]
    std::string stemmer = "porter";
    std::string language = "english";
    std::string stopwords_file;
    std::string entity_dictionary_file;
    std::size_t min_count = 25;
    std::size_t entity_min_observations = 3;
    double entity_capitalized_ratio = 0.8;

    // [embeddings]
    std::string pretrained_path;
    bool stem_pretrained_tokens = false;
    bool train_embeddings = true;
    SkipGramConfig skipgram;

    // [network]
    NetworkConfig network;

    // [data]
    EncoderOptions encoder;

    // [baselines]
    double logit_l2 = 1e-6;

    // [synth]
    SyntheticCorpusSpec synth;

    // [grid]
    GridSpec grid;

    // Config-file keys override defaults; relative paths stay relative to the
    // working directory.
    static RunConfig from_tree(const nlohmann::json& tree);
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(std::string_view text);

    // Every effective value, grouped by section.
    nlohmann::json to_tree() const;
    // Re-loadable config text of to_tree().
    std::string to_text() const;

    // Network config with the seed derived from the run seed.
    NetworkConfig network_for(std::string_view text_mode) const;
    void validate() const;
};

} // namespace textrisk
