// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/finite_difference.hpp"
#include "oracles/statistics.hpp"
#include "support/generators.hpp"
#include "support/properties.hpp"
#include "textrisk/baselines.hpp"
#include "textrisk/config.hpp"
#include "textrisk/evaluation.hpp"
#include "textrisk/experiment.hpp"
#include "textrisk/network.hpp"

using namespace textrisk;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "textrisk_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Reduced network for the cross-validated criteria (4, 5); criteria 6 and 7 use
// the full-size defaults.
const char* kReducedNetwork = R"(
[network]
k = 10
gamma = 5
m = 8
tau = 2
d = 16
v = 32
hidden1 = 32
hidden2 = 16
learning_rate = 0.003
max_epochs = 6
)";

RunConfig synthetic_run(const fs::path& dir, const std::string& extra, const char* network = kReducedNetwork) {
    auto cfg = RunConfig::parse(std::string(R"(
[run]
seed = 11
num_folds = 10
heatmaps = 0
[pipeline]
min_count = 5
[embeddings]
train = false
)") + network + extra);
    cfg.corpus = (dir / "corpus.jsonl").string();
    cfg.output_dir = (dir / "out").string();
    write_file_bytes(cfg.corpus, corpus_to_jsonl(generate_synthetic(cfg.synth)));
    return cfg;
}

// ---- 1 ----
Outcome gradient_check() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_block;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        NetworkConfig cfg;
        cfg.block_size = 6;
        cfg.filter_width = 3;
        cfg.pool_size = 2;
        cfg.num_filters = 2;
        cfg.cell_size = 3;
        cfg.embedding_dim = 4;
        cfg.hidden1 = 5;
        cfg.hidden2 = 4;
        cfg.seed = seed;
        auto rng = Rng::stream(seed, "acceptance/gradient");
        const std::size_t V = 9, F = 3;
        auto params = init_params(cfg, V, F, seed);
        oracle::jitter_biases(params, rng);
        std::vector<Sample> batch;
        for (int i = 0; i < 3; ++i) {
            auto s = gen::sample(rng, cfg, V, F, 2);
            s.block_mask.clear();
            batch.push_back(s);
        }
        std::vector<double> analytic(params.size());
        loss_and_gradient(params, batch, analytic);
        const auto numeric = oracle::numeric_gradient(params, batch, 1e-5);
        for (const auto& e : oracle::compare(params, analytic, numeric)) {
            if (e.max_rel_error > worst) {
                worst = e.max_rel_error;
                worst_block = e.name;
            }
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst < 1e-4 && secs < 60.0,
            "20 seeds, worst relative error " + fmt("%.2e", worst) + " (" + worst_block + "), " + fmt("%.1f", secs) + " s"};
}

// ---- 2 ----
Outcome shape_law() {
    const auto start = std::chrono::steady_clock::now();
    RunConfig run;
    const auto cells = grid_cells(run.grid, run.network);
    int bad = 0;
    auto rng = Rng::stream(2, "acceptance/shape");
    for (const auto& c : cells) {
        const int v = 4;
        const ConvShape s{c.block_size, v, c.filter_width, c.num_filters, c.pool_size};
        const auto B = gen::normals(rng, static_cast<std::size_t>(c.block_size * v));
        const auto W = gen::normals(rng, static_cast<std::size_t>(c.num_filters * c.filter_width * v));
        const auto r = conv_forward(B, W, s);
        const int L = c.block_size - c.filter_width + 1;
        const int P = c.block_size - c.filter_width - c.pool_size + 2;
        if (static_cast<int>(r.x.size()) != L * c.num_filters) ++bad;
        if (static_cast<int>(r.z.size()) != P * c.num_filters) ++bad;
        if (c.block_feature_size() != P * c.num_filters || c.conv_length() != L) ++bad;
        auto net = c;
        net.embedding_dim = v;
        NetworkParams params(net, 10, 2);
        if (params.block("conv.W").size() != static_cast<std::size_t>(c.num_filters * c.filter_width * v)) ++bad;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {cells.size() == 108 && bad == 0 && secs < 1.0,
            std::to_string(cells.size()) + " cells, " + std::to_string(bad) + " violations, " + fmt("%.3f", secs) + " s"};
}

// ---- 3 ----
Outcome oracle_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    double auc_err = 0.0, bce_err = 0.0, t_err = 0.0, logit_err = 0.0;
    for (int c = 0; c < 1000; ++c) {
        auto rng = Rng::stream(3, "acceptance/auc/" + std::to_string(c));
        const auto n = static_cast<std::size_t>(gen::integer(rng, 2, 200));
        const auto y = gen::labels(rng, n, rng.uniform(0.05, 0.95));
        const auto s = c % 3 == 0 ? gen::tied_scores(rng, n, gen::integer(rng, 2, 20)) : gen::normals(rng, n);
        auc_err = std::max(auc_err, std::abs(auc(s, y) - oracle::auc_pairwise(s, y)));

        std::vector<double> p(n);
        for (auto& v : p) v = rng.uniform(1e-6, 1.0 - 1e-6);
        bce_err = std::max(bce_err, std::abs(log_score(p, y) - bce_loss(p, y)));
    }
    for (int c = 0; c < 200; ++c) {
        auto rng = Rng::stream(3, "acceptance/ttest/" + std::to_string(c));
        const auto n = static_cast<std::size_t>(gen::integer(rng, 2, 15));
        const auto a = gen::normals(rng, n);
        auto b = a;
        const double shift = rng.uniform(-1.0, 1.0);
        for (auto& v : b) v += shift + rng.uniform(-1.0, 1.0);
        t_err = std::max(t_err, std::abs(paired_t_test(a, b) - oracle::paired_t_p_quadrature(a, b)));
    }
    for (int c = 0; c < 50; ++c) {
        auto rng = Rng::stream(3, "acceptance/logit/" + std::to_string(c));
        const int n = gen::integer(rng, 8, 30);
        const int p = gen::integer(rng, 1, 3);
        std::vector<std::vector<double>> X;
        for (int i = 0; i < n; ++i) X.push_back(gen::normals(rng, static_cast<std::size_t>(p)));
        const auto y = gen::labels(rng, static_cast<std::size_t>(n));
        LogitOptions opt;
        opt.l2 = rng.uniform(0.05, 2.0);
        const auto m = fit_logit(X, y, opt);
        const auto theta = oracle::logit_fit_nelder_mead(X, y, opt.l2);
        logit_err = std::max(logit_err, std::abs(m.intercept - theta[0]));
        for (int j = 0; j < p; ++j)
            logit_err = std::max(logit_err, std::abs(m.coefficients[static_cast<std::size_t>(j)] - theta[static_cast<std::size_t>(j) + 1]));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = auc_err <= 1e-12 && bce_err <= 1e-12 && t_err <= 1e-8 && logit_err <= 1e-4 && secs < 120.0;
    return {ok, "AUC " + fmt("%.1e", auc_err) + ", log score " + fmt("%.1e", bce_err) + ", t-test " +
                    fmt("%.1e", t_err) + ", logit " + fmt("%.1e", logit_err) + ", " + fmt("%.1f", secs) + " s"};
}

EvalReport cv_report(Experiment& ex, const std::vector<CvResult>& results) {
    std::vector<PredictionSource> models;
    for (const auto& r : results) models.push_back({r.name, r.p_hat});
    return evaluate(models, ex.fold_plan(), ex.corpus().eval_data());
}

// ---- 4 ----
Outcome learning_sanity() {
    const auto start = std::chrono::steady_clock::now();
    const auto dir = scratch("learning");
    auto cfg = synthetic_run(dir, R"(
[synth]
n_firms = 5000
signal_strength = 0.9
tabular_signal_strength = 0.3
)");
    Experiment ex(cfg, StageCache());
    const auto text = ex.network_cv(TextMode::aud);
    const auto plain = ex.network_cv(TextMode::none);
    const auto rep = cv_report(ex, {text, plain});
    const double a = rep.model(text.name).mean_auc;
    const double b = rep.model(plain.name).mean_auc;
    const double p = rep.p_auc(text.name, plain.name);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fs::remove_all(dir);
    return {a - b >= 0.03 && p < 0.01, std::to_string(ex.corpus().records.size()) + " records, " + text.name + " " +
                                           fmt("%.4f", a) + " vs " + plain.name + " " + fmt("%.4f", b) + ", p=" +
                                           fmt("%.2e", p) + ", " + fmt("%.0f", secs) + " s"};
}

// ---- 5 ----
Outcome null_signal() {
    const auto dir = scratch("null");
    auto cfg = synthetic_run(dir, R"(
[synth]
n_firms = 5000
signal_strength = 0.0
tabular_signal_strength = 0.0
)");
    Experiment ex(cfg, StageCache());
    const auto rep = cv_report(ex, {ex.network_cv(TextMode::aud), ex.network_cv(TextMode::none), ex.logit_cv()});
    bool ok = true;
    std::string detail;
    for (const auto& m : rep.models) {
        const double z = std::abs(m.mean_auc - 0.5) / m.se_auc;
        if (!(z <= 3.0)) ok = false;
        detail += (detail.empty() ? "" : ", ") + m.name + " " + fmt("%.4f", m.mean_auc) + " (" + fmt("%.2f", z) + " SE)";
    }
    fs::remove_all(dir);
    return {ok, detail};
}

// ---- 6 ----
Outcome overfit() {
    NetworkConfig cfg;  // full-size defaults
    cfg.seed = 6;
    cfg.text_mode = TextMode::aud;
    auto rng = Rng::stream(6, "acceptance/overfit");
    const std::size_t V = 1000, F = 50;
    std::vector<Sample> data;
    for (int i = 0; i < 256; ++i) {
        std::vector<TokenId> ids(static_cast<std::size_t>(gen::integer(rng, 16, 24)));
        for (auto& id : ids) id = static_cast<TokenId>(Vocabulary::kNumSpecial + rng.below(V - Vocabulary::kNumSpecial));
        data.push_back(make_sample(blockify(ids, cfg.block_size), gen::normals(rng, F), i % 2 ? 1.0 : 0.0));
    }
    // Labels are then shuffled so only memorization can fit them.
    for (std::size_t i = data.size(); i > 1; --i) std::swap(data[i - 1].label, data[rng.below(i)].label);

    auto params = init_params(cfg, V, F, cfg.seed);
    AdamState state;
    const AdamOptions opt{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
    std::vector<double> grad(params.size());
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    int step = 0, hit = -1;
    double loss = batch_loss(params, data);
    const double initial = loss;
    while (step < 200 && hit < 0) {
        rng.shuffle(order);
        for (std::size_t lo = 0; lo < order.size() && step < 200; lo += 64) {
            std::vector<Sample> batch;
            for (std::size_t i = lo; i < std::min(order.size(), lo + 64); ++i) batch.push_back(data[order[i]]);
            loss_and_gradient(params, batch, grad);
            adam_step(params.values, grad, state, opt, params.blocks());
            ++step;
        }
        loss = batch_loss(params, data);
        if (loss < 0.05) hit = step;
    }
    return {hit > 0, "training BCE " + fmt("%.4f", initial) + " -> " + fmt("%.4f", loss) + " after " +
                         std::to_string(step) + " Adam steps"};
}

// ---- 7 ----
Outcome attention_localization() {
    const auto dir = scratch("attention");
    auto cfg = synthetic_run(dir, R"(
[synth]
n_firms = 3000
signal_strength = 1.0
tabular_signal_strength = 0.0
)", "[network]\nmax_epochs = 3\n");
    Experiment ex(cfg, StageCache());
    const auto& corpus = ex.corpus();
    const auto& plan = ex.fold_plan();
    const auto net = cfg.network_for("aud");
    const auto blocks = text_blocks(corpus, TextMode::aud, net.block_size);

    const auto train_idx = plan.train_indices(0);
    const auto enc = fit_encoder([&] {
        std::vector<FirmYearRecord> rows;
        for (auto i : train_idx) rows.push_back(corpus.records[i]);
        return rows;
    }(), cfg.encoder);
    Dataset data;
    data.samples = build_samples(corpus, blocks, train_idx, enc);
    data.vocab_size = corpus.vocab.size();
    data.num_features = enc.output_size();
    data.vocab_hash = corpus.vocab.hash();
    const auto model = train(data, net).model;

    const std::set<std::string> pool(cfg.synth.distress_pool.begin(), cfg.synth.distress_pool.end());
    int docs = 0, hits = 0;
    for (auto i : plan.test_indices(0)) {
        const auto& doc = corpus.auditor[i];
        const auto words = split_words(corpus.records[i].auditor_text);
        std::vector<std::uint8_t> distress(doc.ids.size(), 0);
        bool any = false;
        for (std::size_t t = 0; t < doc.ids.size(); ++t) {
            if (pool.count(words[doc.source[t]].text)) distress[t] = any = true;
        }
        if (!any) continue;
        const auto& b = blocks[i];
        const auto trace = extract_attention(model, build_samples(corpus, blocks, std::vector<std::size_t>{i}, enc)[0]);
        const auto top = static_cast<std::size_t>(std::max_element(trace.alpha.begin(), trace.alpha.end()) - trace.alpha.begin());
        bool covered = false;
        for (std::size_t t = b.offsets[top]; t < std::min(doc.ids.size(), b.offsets[top] + static_cast<std::size_t>(b.block_size)); ++t)
            covered = covered || distress[t];
        ++docs;
        hits += covered ? 1 : 0;
    }
    fs::remove_all(dir);
    const double rate = docs ? static_cast<double>(hits) / docs : 0.0;
    return {docs > 0 && rate >= 0.95, std::to_string(hits) + "/" + std::to_string(docs) +
                                          " held-out documents put the largest weight on a distress block (" +
                                          fmt("%.1f", 100.0 * rate) + "%)"};
}

// ---- 8 ----
Outcome invariant_suites() {
    bool ok = true;
    std::string detail;
    for (const auto& r : props::all(1000)) {
        ok = ok && r.ok() && r.cases >= 1000;
        detail += (detail.empty() ? "" : "; ") + r.name + " " + std::to_string(r.cases - r.failures) + "/" +
                  std::to_string(r.cases);
        if (!r.ok()) detail += " [" + r.first_failure + "]";
    }
    return {ok, detail};
}

// ---- 9 ----
Outcome determinism() {
    const auto dir = scratch("determinism");
    const std::string cli = TEXTRISK_CLI_PATH;
    const std::string config = R"([run]
seed = 9
corpus = "corpus.jsonl"
num_folds = 3
heatmaps = 2
[pipeline]
min_count = 2
[embeddings]
epochs = 1
[network]
k = 6
gamma = 3
m = 4
tau = 2
d = 8
v = 16
hidden1 = 16
hidden2 = 8
batch_size = 16
max_epochs = 2
[synth]
n_firms = 80
distress_rate = 0.3
)";
    write_file_bytes(dir / "run.toml", config);
    auto sh = [&](const std::string& args) {
        const std::string cmd = "cd '" + dir.string() + "' && env -u TEXTRISK_CACHE_DIR '" + cli + "' " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    if (sh("--config run.toml synth-data --out corpus.jsonl") != 0) return {false, "synth-data failed"};
    if (sh("--config run.toml --output-dir r1 end-to-end") != 0) return {false, "first end-to-end run failed"};
    if (sh("--config run.toml --output-dir r2 end-to-end") != 0) return {false, "second end-to-end run failed"};

    std::vector<fs::path> files{"metrics.json"};
    for (const auto& e : fs::directory_iterator(dir / "r1" / "checkpoints")) files.push_back(fs::path("checkpoints") / e.path().filename());
    int same = 0;
    std::string diff;
    for (const auto& f : files) {
        if (!fs::exists(dir / "r2" / f)) {
            diff += " missing " + f.string();
            continue;
        }
        if (read_file_bytes(dir / "r1" / f) == read_file_bytes(dir / "r2" / f)) ++same;
        else diff += " differs " + f.string();
    }
    fs::remove_all(dir);
    return {same == static_cast<int>(files.size()) && files.size() > 1,
            std::to_string(same) + "/" + std::to_string(files.size()) + " files byte-identical" + diff};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_check},
        {"shape law", shape_law},
        {"oracle equivalence", oracle_equivalence},
        {"learning sanity", learning_sanity},
        {"null-signal control", null_signal},
        {"overfit check", overfit},
        {"attention localization", attention_localization},
        {"invariant suites", invariant_suites},
        {"determinism", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(n)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("criterion %d %-24s %s  %s\n", n, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
