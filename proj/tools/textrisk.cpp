// textrisk command line.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "textrisk/config.hpp"
#include "textrisk/data_model.hpp"
#include "textrisk/error.hpp"
#include "textrisk/experiment.hpp"
#include "textrisk/random.hpp"

namespace fs = std::filesystem;
using namespace textrisk;
using json = nlohmann::json;

namespace {

struct GlobalFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string text_mode;
    std::optional<double> size_threshold;
    std::string folds;
    bool deterministic = false;
    std::string output_dir;
    std::string corpus;
};

RunConfig resolve(const GlobalFlags& g) {
    RunConfig c = g.config.empty() ? RunConfig::from_tree(json::object()) : RunConfig::load(g.config);
    if (g.seed) c.seed = *g.seed;
    if (!g.text_mode.empty()) c.text_modes = {g.text_mode};
    if (g.size_threshold) c.size_threshold = *g.size_threshold;
    if (!g.folds.empty()) c.folds = g.folds;
    if (g.deterministic) c.deterministic = true;
    if (!g.output_dir.empty()) c.output_dir = g.output_dir;
    if (!g.corpus.empty()) c.corpus = g.corpus;
    c.validate();
    return c;
}

void log_line(std::string_view msg) { std::cerr << "textrisk: " << msg << '\n'; }

Experiment make_experiment(const RunConfig& cfg) {
    Experiment ex(cfg, StageCache(StageCache::default_root(cfg)), log_line);
    fs::create_directories(cfg.output_dir);
    ex.write_resolved_config();
    return ex;
}

// First requested mode that reads text.
TextMode text_mode_for_heatmaps(const RunConfig& cfg) {
    for (const auto& m : cfg.text_modes) {
        const auto mode = parse_text_mode(m);
        if (mode != TextMode::none) return mode;
    }
    fail(ErrorKind::config, "no text mode among run.text_modes; heatmaps and grid search need one");
}

std::vector<PredictionSource> load_predictions(const fs::path& dir, const std::vector<std::string>& extra,
                                               const std::vector<std::string>& ids) {
    std::vector<PredictionSource> out;
    if (fs::exists(dir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(align_predictions(f.stem().string(), read_prediction_csv(f), ids));
    }
    for (const auto& spec : extra) {
        const auto eq = spec.find('=');
        require(eq != std::string::npos && eq > 0, ErrorKind::config,
                "--predictions expects name=path, got '" + spec + "'");
        const fs::path path = spec.substr(eq + 1);
        require(fs::exists(path), ErrorKind::data, "prediction file not found: " + path.string());
        out.push_back(align_predictions(spec.substr(0, eq), read_prediction_csv(path), ids));
    }
    require(!out.empty(), ErrorKind::data, "no prediction files found in " + dir.string());
    return out;
}

EvalReport evaluate_outputs(Experiment& ex, const std::vector<std::string>& extra) {
    const auto& pc = ex.corpus();
    const auto sources = load_predictions(ex.output_dir() / "predictions", extra, pc.record_ids());
    return run_stage("evaluate",
                     [&] { return evaluate(sources, ex.fold_plan(), pc.eval_data(), ex.config().size_threshold); });
}

void write_cv_outputs(Experiment& ex, const CvResult& cv, std::optional<TextMode> mode) {
    const auto out = ex.output_dir();
    write_prediction_csv(out / "predictions" / (cv.name + ".csv"), ex.corpus().record_ids(), cv.folds, cv.p_hat);
    if (mode && cv.fold0) save_checkpoint(out / "checkpoints" / (std::string(to_string(*mode)) + ".ckpt"), *cv.fold0);
    if (!cv.logs.empty()) {
        json logs = json::array();
        for (const auto& l : cv.logs) logs.push_back(training_log_to_json(l));
        write_file_bytes(out / "logs" / (cv.name + ".json"), logs.dump(2) + "\n");
    }
}

int cmd_synth(const RunConfig& cfg, const std::string& out, std::optional<std::size_t> n_firms) {
    SyntheticCorpusSpec spec = cfg.synth;
    if (n_firms) spec.n_firms = *n_firms;
    spec.seed = derive_seed(cfg.seed, "synth");
    const auto records = run_stage("synth-data", [&] { return generate_synthetic(spec); });
    const fs::path path = out.empty() ? fs::path(cfg.corpus) : fs::path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_corpus(path, records);
    std::size_t distressed = 0;
    for (const auto& r : records) distressed += r.distressed ? 1 : 0;
    std::printf("wrote %zu records (%zu distressed) to %s\n", records.size(), distressed, path.string().c_str());
    return 0;
}

int cmd_preprocess(const RunConfig& cfg) {
    auto ex = make_experiment(cfg);
    const auto& pc = ex.corpus();
    const auto out = ex.output_dir();
    pc.vocab.save(out / "vocab.json");
    std::string lines;
    for (std::size_t i = 0; i < pc.records.size(); ++i) {
        lines += json{{"record_id", pc.records[i].record_id()},
                      {"auditor", pc.auditor[i].ids},
                      {"management", pc.management[i].ids}}
                     .dump();
        lines += '\n';
    }
    write_file_bytes(out / "tokens.jsonl", lines);
    std::printf("vocabulary: %zu tokens; %zu documents tokenized\n", pc.vocab.size(), pc.records.size());
    return 0;
}

int cmd_train_embeddings(const RunConfig& cfg) {
    auto ex = make_experiment(cfg);
    const auto& emb = ex.embeddings();
    require(emb.has_value(), ErrorKind::config,
            "embeddings.train is false and embeddings.pretrained_path is empty; nothing to train");
    const auto path = ex.output_dir() / "embeddings.vec";
    save_word_vectors(path, *emb, ex.corpus().vocab);
    std::printf("wrote %zu x %zu vectors to %s\n", emb->rows, emb->dim, path.string().c_str());
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    auto ex = make_experiment(cfg);
    for (const auto& m : cfg.text_modes) {
        const auto mode = parse_text_mode(m);
        const auto cv = ex.network_cv(mode);
        write_cv_outputs(ex, cv, mode);
        std::printf("%s: trained %zu folds\n", cv.name.c_str(), cv.logs.size());
    }
    if (cfg.logit_baseline) {
        const auto cv = ex.logit_cv();
        write_cv_outputs(ex, cv, std::nullopt);
        std::printf("logit: trained %d folds\n", ex.fold_plan().num_folds);
    }
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& extra) {
    auto ex = make_experiment(cfg);
    const auto report = evaluate_outputs(ex, extra);
    write_file_bytes(ex.output_dir() / "evaluation.json", report.to_json().dump(2) + "\n");
    write_file_bytes(ex.output_dir() / "evaluation.txt", report.to_table());
    std::cout << report.to_table();
    return 0;
}

int cmd_grid(const RunConfig& cfg) {
    auto ex = make_experiment(cfg);
    const auto mode = text_mode_for_heatmaps(cfg);
    const auto results = ex.grid_search(mode);
    json rows = json::array();
    std::string csv = "rank,k,gamma,m,tau,d,learning_rate,mean_auc,se_auc,mean_log_score,se_log_score\n";
    std::string table;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%4s %3s %5s %3s %3s %4s %8s  %-20s %s\n", "rank", "k", "gamma", "m", "tau", "d",
                  "lr", "AUC (mean +- se)", "log score");
    table += buf;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const auto& n = r.network;
        rows.push_back({{"rank", i + 1},
                        {"network", n.to_json()},
                        {"mean_auc", r.mean_auc},
                        {"se_auc", r.se_auc},
                        {"mean_log_score", r.mean_log_score},
                        {"se_log_score", r.se_log_score}});
        std::snprintf(buf, sizeof buf, "%zu,%d,%d,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", i + 1, n.block_size,
                      n.filter_width, n.num_filters, n.pool_size, n.cell_size, n.learning_rate, r.mean_auc, r.se_auc,
                      r.mean_log_score, r.se_log_score);
        csv += buf;
        std::snprintf(buf, sizeof buf, "%4zu %3d %5d %3d %3d %4d %8.0e  %.4f +- %.4f      %.4f +- %.4f\n", i + 1,
                      n.block_size, n.filter_width, n.num_filters, n.pool_size, n.cell_size, n.learning_rate,
                      r.mean_auc, r.se_auc, r.mean_log_score, r.se_log_score);
        table += buf;
    }
    write_file_bytes(ex.output_dir() / "grid.json", rows.dump(2) + "\n");
    write_file_bytes(ex.output_dir() / "grid.csv", csv);
    std::cout << table;
    return 0;
}

int cmd_heatmap(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& records) {
    auto ex = make_experiment(cfg);
    const auto mode = text_mode_for_heatmaps(cfg);
    const fs::path ckpt =
        checkpoint.empty() ? ex.output_dir() / "checkpoints" / (std::string(to_string(mode)) + ".ckpt") : fs::path(checkpoint);
    require(fs::exists(ckpt), ErrorKind::data, "checkpoint not found: " + ckpt.string() + " (run train first)");
    const Model model = load_checkpoint(ckpt);
    require(model.config().text_mode == mode, ErrorKind::config,
            "checkpoint text mode " + std::string(to_string(model.config().text_mode)) + " differs from " +
                std::string(to_string(mode)));
    const auto ids = ex.corpus().record_ids();
    std::vector<double> p_hat(ids.size(), 0.0);
    const fs::path preds = ex.output_dir() / "predictions" / (model_name(mode) + ".csv");
    if (fs::exists(preds)) p_hat = align_predictions("", read_prediction_csv(preds), ids).p_hat;
    const auto files = ex.write_heatmaps(model, mode, p_hat, records);
    for (const auto& f : files) std::printf("%s\n", (ex.output_dir() / "heatmaps" / f).string().c_str());
    return 0;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& extra) {
    auto ex = make_experiment(cfg);
    const auto out = ex.output_dir();
    RunReport report;
    report.config = cfg.to_tree();
    report.evaluation = evaluate_outputs(ex, extra);
    if (fs::exists(out / "logs")) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(out / "logs")) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto logs = json::parse(read_file_bytes(f));
            for (std::size_t i = 0; i < logs.size(); ++i) {
                report.training_logs.emplace_back(f.stem().string() + " fold " + std::to_string(i),
                                                  training_log_from_json(logs[i]));
            }
        }
    }
    if (fs::exists(out / "heatmaps")) {
        for (const auto& e : fs::directory_iterator(out / "heatmaps")) report.heatmaps.push_back(e.path().filename());
        std::sort(report.heatmaps.begin(), report.heatmaps.end());
    }
    run_stage("report", [&] { emit_run_report(out, report); });
    std::printf("wrote %s and %s\n", (out / "report.html").string().c_str(), (out / "metrics.json").string().c_str());
    return 0;
}

int cmd_end_to_end(const RunConfig& cfg) {
    auto ex = make_experiment(cfg);
    ex.run_all();
    std::printf("wrote %s\n", (ex.output_dir() / "report.html").string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distress prediction from annual-report text and financial variables"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config, "Config file ([section] key = value)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Top-level seed");
    app.add_option("--text-mode", g.text_mode, "Restrict to one mode: aud, man, aud+man or none");
    app.add_option("--size-threshold", g.size_threshold, "Evaluate only firms with size above this value");
    app.add_option("--folds", g.folds, "Fold strategy: by-firm or by-year");
    app.add_flag("--deterministic", g.deterministic, "Single-threaded numerics");
    app.add_option("--output-dir", g.output_dir, "Output directory (overrides run.output_dir)");
    app.add_option("--corpus", g.corpus, "Corpus JSONL (overrides run.corpus)");

    std::string synth_out;
    std::optional<std::size_t> n_firms;
    auto* synth = app.add_subcommand("synth-data", "Write a synthetic corpus");
    synth->add_option("--out", synth_out, "Output JSONL path (default run.corpus)");
    synth->add_option("--n-firms", n_firms, "Number of firms (overrides synth.n_firms)");

    auto* preprocess = app.add_subcommand("preprocess", "Normalize, stem and scrub texts; build the vocabulary");
    auto* embeddings = app.add_subcommand("train-embeddings", "Skip-gram pretraining or pretrained-vector lookup");
    auto* train = app.add_subcommand("train", "Cross-validated training for each text mode");

    std::vector<std::string> extra_predictions;
    auto* evaluate = app.add_subcommand("evaluate", "Score out-of-fold predictions");
    evaluate->add_option("--predictions", extra_predictions, "Extra model as name=path to a prediction CSV");

    auto* grid = app.add_subcommand("grid-search", "Cross-validate every grid cell and rank by mean AUC");

    std::string checkpoint;
    std::vector<std::string> records;
    auto* heatmap = app.add_subcommand("heatmap", "Attention heatmaps as HTML");
    heatmap->add_option("--checkpoint", checkpoint, "Network checkpoint (default checkpoints/<mode>.ckpt)");
    heatmap->add_option("--record", records, "Record id to render (repeatable)");

    auto* report = app.add_subcommand("report", "Assemble report.html and metrics.json");
    report->add_option("--predictions", extra_predictions, "Extra model as name=path to a prediction CSV");

    auto* e2e = app.add_subcommand("end-to-end", "preprocess, embeddings, train, evaluate and report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ErrorKind::config);
    }

    try {
        const RunConfig cfg = resolve(g);
        if (*synth) return cmd_synth(cfg, synth_out, n_firms);
        if (*preprocess) return cmd_preprocess(cfg);
        if (*embeddings) return cmd_train_embeddings(cfg);
        if (*train) return cmd_train(cfg);
        if (*evaluate) return cmd_evaluate(cfg, extra_predictions);
        if (*grid) return cmd_grid(cfg);
        if (*heatmap) return cmd_heatmap(cfg, checkpoint, records);
        if (*report) return cmd_report(cfg, extra_predictions);
        if (*e2e) return cmd_end_to_end(cfg);
    } catch (const Error& e) {
        std::cerr << "textrisk: error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "textrisk: error: malformed JSON: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::data);
    } catch (const std::exception& e) {
        std::cerr << "textrisk: internal error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::internal);
    }
    return static_cast<int>(ErrorKind::internal);
}
