#include "textrisk/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "textrisk/random.hpp"

namespace textrisk {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const std::string& path) {
    if (path.empty()) return "";
    return hex64(fnv1a64(read_file_bytes(path)));
}

json doc_to_json(const TokenizedDoc& d) { return {{"ids", d.ids}, {"source", d.source}}; }

TokenizedDoc doc_from_json(const json& j, Segment segment) {
    TokenizedDoc d;
    d.segment = segment;
    d.ids = j.at("ids").get<std::vector<TokenId>>();
    d.source = j.at("source").get<std::vector<std::size_t>>();
    return d;
}

template <typename T>
void put_raw(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::string_view bytes, std::size_t& pos) {
    require(pos + sizeof(T) <= bytes.size(), ErrorKind::data, "truncated embedding payload");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
}

std::vector<FirmYearRecord> subset(std::span<const FirmYearRecord> records, std::span<const std::size_t> idx) {
    std::vector<FirmYearRecord> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(records[i]);
    return out;
}

std::string segment_label(TextMode mode) {
    switch (mode) {
        case TextMode::aud: return "auditor's report";
        case TextMode::man: return "management's statement";
        case TextMode::aud_man: return "auditor's report + management's statement";
        case TextMode::none: break;
    }
    return "none";
}

} // namespace

// ---- cache ----

fs::path StageCache::default_root(const RunConfig& cfg) {
    if (const char* env = std::getenv("TEXTRISK_CACHE_DIR"); env && *env) return env;
    return fs::path(cfg.output_dir) / "cache";
}

std::string StageCache::key(const json& inputs) { return hex64(fnv1a64(inputs.dump())); }

fs::path StageCache::dir(std::string_view stage, const std::string& key) const {
    return root_ / (std::string(stage) + "-" + key);
}

bool StageCache::complete(std::string_view stage, const std::string& key) const {
    return enabled() && fs::exists(dir(stage, key) / ".complete");
}

fs::path StageCache::begin(std::string_view stage, const std::string& key) const {
    const auto d = dir(stage, key);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void StageCache::finish(std::string_view stage, const std::string& key) const {
    write_file_bytes(dir(stage, key) / ".complete", "");
}

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::data, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_bytes(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string embedding_bytes(const EmbeddingMatrix& m) {
    std::string out;
    put_raw(out, static_cast<std::uint64_t>(m.rows));
    put_raw(out, static_cast<std::uint64_t>(m.dim));
    put_raw(out, static_cast<std::uint8_t>(m.trainable));
    out.append(reinterpret_cast<const char*>(m.weights.data()), m.weights.size() * sizeof(double));
    return out;
}

EmbeddingMatrix embedding_from_bytes(std::string_view bytes) {
    std::size_t pos = 0;
    EmbeddingMatrix m;
    m.rows = get_raw<std::uint64_t>(bytes, pos);
    m.dim = get_raw<std::uint64_t>(bytes, pos);
    m.trainable = get_raw<std::uint8_t>(bytes, pos) != 0;
    require(bytes.size() - pos == m.rows * m.dim * sizeof(double), ErrorKind::data, "embedding payload size mismatch");
    m.weights.resize(m.rows * m.dim);
    std::memcpy(m.weights.data(), bytes.data() + pos, m.weights.size() * sizeof(double));
    return m;
}

json training_log_to_json(const TrainingLog& log) {
    json epochs = json::array();
    for (const auto& e : log.epochs) {
        epochs.push_back(
            {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"wall_seconds", e.wall_seconds}});
    }
    return {{"best_epoch", log.best_epoch}, {"epochs", epochs}};
}

TrainingLog training_log_from_json(const json& j) {
    TrainingLog log;
    log.best_epoch = j.at("best_epoch").get<int>();
    for (const auto& e : j.at("epochs")) {
        log.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("val_loss").get<double>(),
                              e.value("wall_seconds", 0.0)});
    }
    return log;
}

// ---- corpus preparation ----

std::vector<std::string> PreparedCorpus::record_ids() const {
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.record_id());
    return ids;
}

EvalData PreparedCorpus::eval_data() const {
    EvalData d;
    d.record_ids = record_ids();
    for (const auto& r : records) {
        d.labels.push_back(r.distressed ? 1.0 : 0.0);
        d.firm_sizes.push_back(r.firm_size);
    }
    return d;
}

TextPreprocessor make_preprocessor(const RunConfig& cfg) {
    TextPreprocessor::Options opt;
    opt.stemmer = cfg.stemmer;
    opt.language = cfg.language;
    if (!cfg.stopwords_file.empty()) opt.stopwords = load_stopwords(cfg.stopwords_file);
    if (!cfg.entity_dictionary_file.empty()) {
        std::ifstream in(cfg.entity_dictionary_file);
        require(static_cast<bool>(in), ErrorKind::config,
                "cannot open entity dictionary " + cfg.entity_dictionary_file);
        std::string line;
        while (std::getline(in, line)) {
            for (const auto& w : split_words(line)) opt.entity_dictionary.insert(w.text);
        }
    }
    opt.entity_options.min_observations = cfg.entity_min_observations;
    opt.entity_options.capitalized_ratio = cfg.entity_capitalized_ratio;
    return TextPreprocessor(std::move(opt));
}

PreparedCorpus prepare_records(std::vector<FirmYearRecord> records, const RunConfig& cfg) {
    TextPreprocessor pre = make_preprocessor(cfg);
    for (const auto& r : records) {
        pre.observe(r.auditor_text);
        pre.observe(r.management_text);
    }
    std::vector<std::vector<AlignedToken>> aud, man;
    std::vector<std::vector<std::string>> streams;
    aud.reserve(records.size());
    man.reserve(records.size());
    for (const auto& r : records) {
        aud.push_back(pre.process(r.auditor_text));
        man.push_back(pre.process(r.management_text));
        for (const auto* doc : {&aud.back(), &man.back()}) {
            std::vector<std::string> s;
            s.reserve(doc->size());
            for (const auto& t : *doc) s.push_back(t.token);
            streams.push_back(std::move(s));
        }
    }
    PreparedCorpus out;
    out.vocab = Vocabulary::build(streams, cfg.min_count);
    for (std::size_t i = 0; i < records.size(); ++i) {
        out.auditor.push_back(tokenize(aud[i], out.vocab, Segment::auditor));
        out.management.push_back(tokenize(man[i], out.vocab, Segment::management));
    }
    out.records = std::move(records);
    return out;
}

std::vector<BlockSequence> text_blocks(const PreparedCorpus& corpus, TextMode mode, int k) {
    std::vector<BlockSequence> out;
    if (mode == TextMode::none) return out;
    out.reserve(corpus.records.size());
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        switch (mode) {
            case TextMode::aud: out.push_back(blockify(corpus.auditor[i], k)); break;
            case TextMode::man: out.push_back(blockify(corpus.management[i], k)); break;
            default: out.push_back(blockify(concatenate(corpus.auditor[i], corpus.management[i]), k)); break;
        }
    }
    return out;
}

std::vector<Sample> build_samples(const PreparedCorpus& corpus, std::span<const BlockSequence> blocks,
                                  std::span<const std::size_t> indices, const FeatureEncoder& encoder) {
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        const auto& r = corpus.records[i];
        const double y = r.distressed ? 1.0 : 0.0;
        if (blocks.empty()) {
            out.push_back(make_tabular_sample(encode(r, encoder), y));
        } else {
            out.push_back(make_sample(blocks[i], encode(r, encoder), y));
        }
    }
    return out;
}

FoldPlan make_fold_plan(const PreparedCorpus& corpus, const RunConfig& cfg) {
    std::vector<std::string> firms;
    std::vector<int> years;
    for (const auto& r : corpus.records) {
        firms.push_back(r.firm_id);
        years.push_back(r.year);
    }
    return make_folds(firms, years, parse_fold_strategy(cfg.folds), derive_seed(cfg.seed, "folds"), cfg.num_folds);
}

std::string model_name(TextMode mode) {
    return mode == TextMode::none ? "NN" : "NN_" + std::string(to_string(mode));
}

CvResult cross_validate_network(const PreparedCorpus& corpus, const FoldPlan& plan, const RunConfig& cfg,
                                const NetworkConfig& net, const EmbeddingMatrix* pretrained) {
    CvResult res;
    res.name = model_name(net.text_mode);
    res.p_hat.assign(corpus.records.size(), std::numeric_limits<double>::quiet_NaN());
    res.folds = plan.assignments;
    const auto blocks = text_blocks(corpus, net.text_mode, net.block_size);
    const auto vocab_hash = corpus.vocab.hash();
    for (int f = 0; f < plan.num_folds; ++f) {
        const auto train_idx = plan.train_indices(f);
        const auto test_idx = plan.test_indices(f);
        const auto enc = fit_encoder(subset(corpus.records, train_idx), cfg.encoder);
        Dataset data;
        data.samples = build_samples(corpus, blocks, train_idx, enc);
        data.vocab_size = corpus.vocab.size();
        data.num_features = enc.output_size();
        data.vocab_hash = vocab_hash;
        NetworkConfig fold_cfg = net;
        fold_cfg.seed = derive_seed(net.seed, "fold/" + std::to_string(f));
        auto trained = train(data, fold_cfg, pretrained);
        const auto test = build_samples(corpus, blocks, test_idx, enc);
        const auto p = predict(trained.model, test, vocab_hash);
        for (std::size_t j = 0; j < test_idx.size(); ++j) res.p_hat[test_idx[j]] = p[j];
        res.logs.push_back(std::move(trained.log));
        if (f == 0) res.fold0 = std::move(trained.model);
    }
    return res;
}

CvResult cross_validate_logit(const PreparedCorpus& corpus, const FoldPlan& plan, const RunConfig& cfg) {
    CvResult res;
    res.name = "logit";
    res.p_hat.assign(corpus.records.size(), std::numeric_limits<double>::quiet_NaN());
    res.folds = plan.assignments;
    LogitOptions opt;
    opt.l2 = cfg.logit_l2;
    for (int f = 0; f < plan.num_folds; ++f) {
        const auto train_idx = plan.train_indices(f);
        const auto enc = fit_encoder(subset(corpus.records, train_idx), cfg.encoder);
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        for (auto i : train_idx) {
            X.push_back(encode(corpus.records[i], enc));
            y.push_back(corpus.records[i].distressed ? 1.0 : 0.0);
        }
        const auto model = fit_logit(X, y, opt, enc.output_names());
        for (auto i : plan.test_indices(f)) res.p_hat[i] = predict_logit(model, encode(corpus.records[i], enc));
    }
    return res;
}

// ---- experiment driver ----

Experiment::Experiment(RunConfig cfg, StageCache cache, Logger log)
    : cfg_(std::move(cfg)), cache_(std::move(cache)), log_(std::move(log)) {
    cfg_.validate();
}

void Experiment::note(std::string_view msg) const {
    if (log_) log_(msg);
}

void Experiment::write_resolved_config() const {
    const fs::path dir = cfg_.output_dir;
    write_file_bytes(dir / "resolved_config.toml", cfg_.to_text());
    write_file_bytes(dir / "resolved_config.json", cfg_.to_tree().dump(2) + "\n");
}

const PreparedCorpus& Experiment::corpus() {
    if (corpus_) return *corpus_;
    run_stage("preprocess", [&] {
        require(fs::exists(cfg_.corpus), ErrorKind::data, "corpus file not found: " + cfg_.corpus);
        const std::string bytes = read_file_bytes(cfg_.corpus);
        std::istringstream in(bytes);
        auto records = parse_corpus(in);
        const std::string corpus_key = hex64(fnv1a64(bytes));
        const json tree = cfg_.to_tree();
        const std::string key = StageCache::key({{"stage", "preprocess"},
                                                 {"corpus", corpus_key},
                                                 {"pipeline", tree.at("pipeline")},
                                                 {"stopwords", file_hash(cfg_.stopwords_file)},
                                                 {"entities", file_hash(cfg_.entity_dictionary_file)}});
        PreparedCorpus pc;
        if (cache_.complete("preprocess", key)) {
            note("preprocess: cache hit " + key);
            const json j = json::parse(read_file_bytes(cache_.dir("preprocess", key) / "prepared.json"));
            pc.records = std::move(records);
            pc.vocab = Vocabulary::from_json(j.at("vocab"));
            const auto& aud = j.at("auditor");
            const auto& man = j.at("management");
            require(aud.size() == pc.records.size() && man.size() == pc.records.size(), ErrorKind::data,
                    "cached preprocessing does not match the corpus");
            for (std::size_t i = 0; i < aud.size(); ++i) {
                pc.auditor.push_back(doc_from_json(aud[i], Segment::auditor));
                pc.management.push_back(doc_from_json(man[i], Segment::management));
            }
        } else {
            note("preprocess: " + std::to_string(records.size()) + " records");
            pc = prepare_records(std::move(records), cfg_);
            if (cache_.enabled()) {
                const auto dir = cache_.begin("preprocess", key);
                json aud = json::array(), man = json::array();
                for (std::size_t i = 0; i < pc.records.size(); ++i) {
                    aud.push_back(doc_to_json(pc.auditor[i]));
                    man.push_back(doc_to_json(pc.management[i]));
                }
                const json j{{"vocab", pc.vocab.to_json()}, {"auditor", aud}, {"management", man}};
                write_file_bytes(dir / "prepared.json", j.dump());
                cache_.finish("preprocess", key);
            }
        }
        pc.corpus_key = corpus_key;
        pc.prepare_key = key;
        corpus_ = std::move(pc);
    });
    return *corpus_;
}

std::string Experiment::embeddings_key() {
    const json tree = cfg_.to_tree();
    return StageCache::key({{"stage", "embeddings"},
                            {"prepare", corpus().prepare_key},
                            {"embeddings", tree.at("embeddings")},
                            {"v", cfg_.network.embedding_dim},
                            {"seed", cfg_.seed},
                            {"pretrained", file_hash(cfg_.pretrained_path)}});
}

const std::optional<EmbeddingMatrix>& Experiment::embeddings() {
    if (embeddings_ready_) return embeddings_;
    run_stage("embeddings", [&] {
        const auto& pc = corpus();
        if (cfg_.pretrained_path.empty() && !cfg_.train_embeddings) {
            note("embeddings: random initialization");
            return;
        }
        const std::string key = embeddings_key();
        if (cache_.complete("embeddings", key)) {
            note("embeddings: cache hit " + key);
            embeddings_ = embedding_from_bytes(read_file_bytes(cache_.dir("embeddings", key) / "vectors.bin"));
            return;
        }
        if (!cfg_.pretrained_path.empty()) {
            auto loaded = load_pretrained(cfg_.pretrained_path, pc.vocab, cfg_.network.embedding_dim,
                                          derive_seed(cfg_.seed, "embeddings/pretrained"), cfg_.stem_pretrained_tokens);
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.4f", loaded.coverage);
            note("embeddings: pretrained coverage " + std::string(buf));
            embeddings_ = std::move(loaded.embeddings);
        } else {
            std::vector<std::vector<TokenId>> docs;
            docs.reserve(2 * pc.records.size());
            for (std::size_t i = 0; i < pc.records.size(); ++i) {
                docs.push_back(pc.auditor[i].ids);
                docs.push_back(pc.management[i].ids);
            }
            SkipGramConfig sg = cfg_.skipgram;
            sg.dim = cfg_.network.embedding_dim;
            sg.seed = derive_seed(cfg_.seed, "embeddings/skipgram");
            note("embeddings: skip-gram over " + std::to_string(docs.size()) + " documents");
            embeddings_ = train_skipgram(docs, pc.vocab.size(), sg).embeddings;
        }
        if (cache_.enabled()) {
            const auto dir = cache_.begin("embeddings", key);
            write_file_bytes(dir / "vectors.bin", embedding_bytes(*embeddings_));
            cache_.finish("embeddings", key);
        }
    });
    embeddings_ready_ = true;
    return embeddings_;
}

const FoldPlan& Experiment::fold_plan() {
    if (!plan_) plan_ = run_stage("folds", [&] { return make_fold_plan(corpus(), cfg_); });
    return *plan_;
}

CvResult Experiment::network_cv(TextMode mode) { return network_cv(cfg_.network_for(to_string(mode))); }

CvResult Experiment::network_cv(const NetworkConfig& net) {
    const std::string name = model_name(net.text_mode);
    return run_stage("train " + name, [&] {
        const auto& pc = corpus();
        const auto& plan = fold_plan();
        const bool text = net.has_text();
        const EmbeddingMatrix* pretrained = nullptr;
        if (text && embeddings()) pretrained = &*embeddings();
        const json tree = cfg_.to_tree();
        const std::string key = StageCache::key(
            {{"stage", "train"},
             {"network", net.to_json()},
             {"data", tree.at("data")},
             {"folds", {cfg_.folds, cfg_.num_folds, cfg_.seed}},
             {"input", text ? pc.prepare_key : pc.corpus_key},
             {"embeddings", text && pretrained ? json(embeddings_key()) : json(nullptr)}});
        if (cache_.complete("train", key)) {
            note("train " + name + ": cache hit " + key);
            const auto dir = cache_.dir("train", key);
            CvResult res;
            res.name = name;
            res.p_hat = align_predictions(name, read_prediction_csv(dir / "predictions.csv"), pc.record_ids()).p_hat;
            res.folds = plan.assignments;
            for (const auto& j : json::parse(read_file_bytes(dir / "logs.json"))) {
                res.logs.push_back(training_log_from_json(j));
            }
            res.fold0 = model_from_checkpoint(read_file_bytes(dir / "fold0.ckpt"));
            return res;
        }
        note("train " + name + ": " + std::to_string(plan.num_folds) + " folds");
        CvResult res = cross_validate_network(pc, plan, cfg_, net, pretrained);
        if (cache_.enabled()) {
            const auto dir = cache_.begin("train", key);
            write_prediction_csv(dir / "predictions.csv", pc.record_ids(), res.folds, res.p_hat);
            json logs = json::array();
            for (const auto& l : res.logs) logs.push_back(training_log_to_json(l));
            write_file_bytes(dir / "logs.json", logs.dump());
            write_file_bytes(dir / "fold0.ckpt", checkpoint_bytes(*res.fold0));
            cache_.finish("train", key);
        }
        return res;
    });
}

CvResult Experiment::logit_cv() {
    return run_stage("logit", [&] {
        const auto& pc = corpus();
        const auto& plan = fold_plan();
        const json tree = cfg_.to_tree();
        const std::string key = StageCache::key({{"stage", "logit"},
                                                 {"input", pc.corpus_key},
                                                 {"data", tree.at("data")},
                                                 {"baselines", tree.at("baselines")},
                                                 {"folds", {cfg_.folds, cfg_.num_folds, cfg_.seed}}});
        if (cache_.complete("logit", key)) {
            note("logit: cache hit " + key);
            CvResult res;
            res.name = "logit";
            res.p_hat = align_predictions("logit", read_prediction_csv(cache_.dir("logit", key) / "predictions.csv"),
                                          pc.record_ids())
                            .p_hat;
            res.folds = plan.assignments;
            return res;
        }
        note("logit: " + std::to_string(plan.num_folds) + " folds");
        CvResult res = cross_validate_logit(pc, plan, cfg_);
        if (cache_.enabled()) {
            const auto dir = cache_.begin("logit", key);
            write_prediction_csv(dir / "predictions.csv", pc.record_ids(), res.folds, res.p_hat);
            cache_.finish("logit", key);
        }
        return res;
    });
}

std::vector<GridCellResult> Experiment::grid_search(TextMode mode) {
    std::vector<GridCellResult> out;
    const auto cells = grid_cells(cfg_.grid, cfg_.network_for(to_string(mode)));
    note("grid-search: " + std::to_string(cells.size()) + " cells");
    for (const auto& cell : cells) {
        try {
            cell.validate();
        } catch (const Error& e) {
            note(std::string("grid-search: skipping infeasible cell: ") + e.what());
            continue;
        }
        const auto cv = network_cv(cell);
        const std::vector<PredictionSource> src{{cv.name, cv.p_hat}};
        const auto report = run_stage("evaluate", [&] {
            return evaluate(src, fold_plan(), corpus().eval_data(), cfg_.size_threshold);
        });
        const auto& m = report.models.front();
        out.push_back({cell, m.mean_auc, m.se_auc, m.mean_log_score, m.se_log_score});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const GridCellResult& a, const GridCellResult& b) { return a.mean_auc > b.mean_auc; });
    return out;
}

std::vector<std::string> Experiment::write_heatmaps(const Model& model, TextMode mode, std::span<const double> p_hat,
                                                    std::span<const std::string> only_ids) {
    return run_stage("heatmap", [&] {
        require(mode != TextMode::none, ErrorKind::config, "heatmaps need a text model");
        const auto& pc = corpus();
        const auto& plan = fold_plan();
        const auto ids = pc.record_ids();
        std::vector<std::size_t> chosen;
        if (!only_ids.empty()) {
            for (const auto& want : only_ids) {
                const auto it = std::find(ids.begin(), ids.end(), want);
                require(it != ids.end(), ErrorKind::data, "unknown record id " + want);
                chosen.push_back(static_cast<std::size_t>(it - ids.begin()));
            }
        } else {
            chosen = plan.test_indices(0);
            std::stable_sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
                const double pa = std::isnan(p_hat[a]) ? -1.0 : p_hat[a];
                const double pb = std::isnan(p_hat[b]) ? -1.0 : p_hat[b];
                return pa > pb;
            });
            chosen.resize(std::min(chosen.size(), static_cast<std::size_t>(cfg_.heatmaps)));
        }
        // The fold-0 network saw features encoded with the fold-0 training statistics.
        const auto enc = fit_encoder(subset(pc.records, plan.train_indices(0)), cfg_.encoder);
        const int k = model.config().block_size;
        std::vector<std::string> files;
        for (auto i : chosen) {
            const auto& r = pc.records[i];
            TokenizedDoc doc;
            std::vector<std::string> source_words;
            if (mode == TextMode::aud || mode == TextMode::man) {
                doc = mode == TextMode::aud ? pc.auditor[i] : pc.management[i];
                for (auto& w : split_words(mode == TextMode::aud ? r.auditor_text : r.management_text)) {
                    source_words.push_back(std::move(w.text));
                }
            } else {
                doc = concatenate(pc.auditor[i], pc.management[i]);
            }
            const auto blocks = blockify(doc, k);
            const auto trace = extract_attention(model, make_sample(blocks, encode(r, enc), r.distressed ? 1.0 : 0.0));
            const auto intensity = token_intensities(trace.alpha, blocks, doc.ids.size());
            std::vector<std::string> tokens;
            for (auto id : doc.ids) tokens.push_back(pc.vocab.token(id));
            const auto page = build_heatmap(ids[i], segment_label(mode), tokens, intensity, source_words,
                                            source_words.empty() ? std::span<const std::size_t>{}
                                                                 : std::span<const std::size_t>(doc.source));
            const std::string file = ids[i] + ".html";
            write_file_bytes(fs::path(cfg_.output_dir) / "heatmaps" / file, render_heatmap(page));
            files.push_back(file);
        }
        return files;
    });
}

void Experiment::run_all() {
    const fs::path out = cfg_.output_dir;
    fs::create_directories(out);
    write_resolved_config();
    const auto& pc = corpus();
    const auto& plan = fold_plan();
    const auto ids = pc.record_ids();

    std::vector<PredictionSource> sources;
    RunReport report;
    report.config = cfg_.to_tree();
    std::optional<std::pair<TextMode, CvResult>> heatmap_source;
    for (const auto& mode_name : cfg_.text_modes) {
        const TextMode mode = parse_text_mode(mode_name);
        auto cv = network_cv(mode);
        write_prediction_csv(out / "predictions" / (cv.name + ".csv"), ids, cv.folds, cv.p_hat);
        save_checkpoint(out / "checkpoints" / (std::string(to_string(mode)) + ".ckpt"), *cv.fold0);
        for (std::size_t f = 0; f < cv.logs.size(); ++f) {
            report.training_logs.emplace_back(cv.name + " fold " + std::to_string(f), cv.logs[f]);
        }
        sources.push_back({cv.name, cv.p_hat});
        if (mode != TextMode::none && !heatmap_source) heatmap_source.emplace(mode, std::move(cv));
    }
    if (cfg_.logit_baseline) {
        auto cv = logit_cv();
        write_prediction_csv(out / "predictions" / "logit.csv", ids, cv.folds, cv.p_hat);
        sources.push_back({cv.name, cv.p_hat});
    }
    report.evaluation =
        run_stage("evaluate", [&] { return evaluate(sources, plan, pc.eval_data(), cfg_.size_threshold); });
    write_file_bytes(out / "evaluation.txt", report.evaluation->to_table());
    note(report.evaluation->to_table());
    if (heatmap_source && cfg_.heatmaps > 0) {
        report.heatmaps =
            write_heatmaps(*heatmap_source->second.fold0, heatmap_source->first, heatmap_source->second.p_hat);
    }
    run_stage("report", [&] { emit_run_report(out, report); });
}

} // namespace textrisk
