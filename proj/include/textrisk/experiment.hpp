#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "textrisk/baselines.hpp"
#include "textrisk/config.hpp"
#include "textrisk/data_model.hpp"
#include "textrisk/embeddings.hpp"
#include "textrisk/error.hpp"
#include "textrisk/evaluation.hpp"
#include "textrisk/network.hpp"
#include "textrisk/reporting.hpp"
#include "textrisk/text_pipeline.hpp"

namespace textrisk {

// Content-addressed store of stage outputs: <root>/<stage>-<key>/<file>. A
// stage directory counts only once its completion marker exists.
class StageCache {
public:
    StageCache() = default;
    explicit StageCache(std::filesystem::path root) : root_(std::move(root)) {}

    // TEXTRISK_CACHE_DIR when set, else <output_dir>/cache.
    static std::filesystem::path default_root(const RunConfig& cfg);
    // 16 hex digits of FNV-1a over the canonical JSON of `inputs`.
    static std::string key(const nlohmann::json& inputs);

    bool enabled() const { return !root_.empty(); }
    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path dir(std::string_view stage, const std::string& key) const;
    bool complete(std::string_view stage, const std::string& key) const;
    // Creates an empty stage directory for writing.
    std::filesystem::path begin(std::string_view stage, const std::string& key) const;
    void finish(std::string_view stage, const std::string& key) const;

private:
    std::filesystem::path root_;
};

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

// Records plus their preprocessed, vocabulary-encoded text.
struct PreparedCorpus {
    std::vector<FirmYearRecord> records;
    Vocabulary vocab;
    std::vector<TokenizedDoc> auditor;
    std::vector<TokenizedDoc> management;
    std::string corpus_key;   // hash of the corpus file contents
    std::string prepare_key;  // cache key of the preprocessing stage

    std::vector<std::string> record_ids() const;
    EvalData eval_data() const;
};

TextPreprocessor make_preprocessor(const RunConfig& cfg);
// Fits the entity history and vocabulary on the whole corpus (no labels used).
PreparedCorpus prepare_records(std::vector<FirmYearRecord> records, const RunConfig& cfg);

// Blocks of every record's text for one mode; empty for mode none.
std::vector<BlockSequence> text_blocks(const PreparedCorpus& corpus, TextMode mode, int k);
std::vector<Sample> build_samples(const PreparedCorpus& corpus, std::span<const BlockSequence> blocks,
                                  std::span<const std::size_t> indices, const FeatureEncoder& encoder);

FoldPlan make_fold_plan(const PreparedCorpus& corpus, const RunConfig& cfg);

// "NN_aud", "NN_man", "NN_aud+man" and "NN" for the text-free network.
std::string model_name(TextMode mode);

struct CvResult {
    std::string name;
    std::vector<double> p_hat;  // out-of-fold, record order
    std::vector<int> folds;     // fold of each record
    std::vector<TrainingLog> logs;
    // Fold-0 network; absent for the logit baseline.
    std::optional<Model> fold0;
};

// Trains one network per fold; each fold fits its own feature encoder on its
// training records.
CvResult cross_validate_network(const PreparedCorpus& corpus, const FoldPlan& plan, const RunConfig& cfg,
                                const NetworkConfig& net, const EmbeddingMatrix* pretrained);
CvResult cross_validate_logit(const PreparedCorpus& corpus, const FoldPlan& plan, const RunConfig& cfg);

struct GridCellResult {
    NetworkConfig network;
    double mean_auc = 0.0;
    double se_auc = 0.0;
    double mean_log_score = 0.0;
    double se_log_score = 0.0;
};

// The cached, stage-by-stage driver used by the command line.
class Experiment {
public:
    using Logger = std::function<void(std::string_view)>;

    Experiment(RunConfig cfg, StageCache cache, Logger log = {});

    const RunConfig& config() const { return cfg_; }
    std::filesystem::path output_dir() const { return cfg_.output_dir; }

    const PreparedCorpus& corpus();
    // Pretrained file, skip-gram vectors, or nothing (random initialization).
    const std::optional<EmbeddingMatrix>& embeddings();
    const FoldPlan& fold_plan();

    CvResult network_cv(TextMode mode);
    CvResult network_cv(const NetworkConfig& net);
    CvResult logit_cv();

    std::vector<GridCellResult> grid_search(TextMode mode);

    // Heatmap pages of the highest-scored fold-0 test records; returns file names.
    std::vector<std::string> write_heatmaps(const Model& model, TextMode mode, std::span<const double> p_hat,
                                            std::span<const std::string> only_ids = {});

    // Runs every stage and writes the full output directory.
    void run_all();

    void write_resolved_config() const;

private:
    void note(std::string_view msg) const;
    std::string embeddings_key();

    RunConfig cfg_;
    StageCache cache_;
    Logger log_;
    std::optional<PreparedCorpus> corpus_;
    bool embeddings_ready_ = false;
    std::optional<EmbeddingMatrix> embeddings_;
    std::optional<FoldPlan> plan_;
};

// Prefixes errors raised inside a stage with the stage name.
template <typename F>
auto run_stage(std::string_view stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        if (std::string_view(e.what()).starts_with("[")) throw;
        throw Error(e.kind(), "[" + std::string(stage) + "] " + e.what());
    }
}

// Binary EmbeddingMatrix payload used by the cache.
std::string embedding_bytes(const EmbeddingMatrix& m);
EmbeddingMatrix embedding_from_bytes(std::string_view bytes);

nlohmann::json training_log_to_json(const TrainingLog& log);
TrainingLog training_log_from_json(const nlohmann::json& j);

} // namespace textrisk
