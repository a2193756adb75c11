#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "textrisk/config.hpp"
#include "textrisk/error.hpp"
#include "textrisk/experiment.hpp"

using namespace textrisk;
namespace fs = std::filesystem;

TEST_CASE("config text parsing") {
    const auto tree = parse_config_text(R"(
# comment
[run]
seed = 9            # trailing comment
corpus = "data/c#1.jsonl"
text_modes = ["aud", "none"]
size_threshold = 5e6
deterministic = false

[network]
learning_rate = 0.003
k = 10
gamma = 5
)");
    CHECK(tree["run"]["seed"] == 9);
    CHECK(tree["run"]["corpus"] == "data/c#1.jsonl");
    CHECK(tree["run"]["text_modes"].size() == 2);
    CHECK(tree["run"]["size_threshold"].get<double>() == 5e6);
    CHECK(tree["run"]["deterministic"] == false);

    const auto cfg = RunConfig::from_tree(tree);
    CHECK(cfg.seed == 9);
    CHECK(cfg.size_threshold == 5e6);
    CHECK(cfg.network.block_size == 10);
    CHECK(cfg.network.learning_rate == 0.003);

    CHECK_THROWS_AS(parse_config_text("[run\nseed = 1"), Error);
    CHECK_THROWS_AS(parse_config_text("seed = 1"), Error);
    CHECK_THROWS_AS(parse_config_text("[run]\nseed 1"), Error);
    CHECK_THROWS_AS(parse_config_text("[run]\nseed = 1\nseed = 2"), Error);
    try {
        RunConfig::parse("[network]\nkk = 3\n");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        CHECK(std::string(e.what()).find("kk") != std::string::npos);
    }
    CHECK_THROWS_AS(RunConfig::parse("[run]\ntext_modes = [\"both\"]\n"), Error);
    CHECK_THROWS_AS(RunConfig::parse("[network]\ngamma = 30\n"), Error);
}

TEST_CASE("config round-trips through its text form") {
    RunConfig cfg;
    cfg.seed = 123;
    cfg.size_threshold = 5e6;
    cfg.network.learning_rate = 1e-4;
    cfg.text_modes = {"aud+man"};
    cfg.corpus = "a \"quoted\" path";
    const auto again = RunConfig::parse(cfg.to_text());
    CHECK(again.to_tree() == cfg.to_tree());
    RunConfig none;
    CHECK(RunConfig::parse(none.to_text()).to_tree() == none.to_tree());
}

TEST_CASE("default grid has 108 valid cells") {
    RunConfig cfg;
    const auto cells = grid_cells(cfg.grid, cfg.network);
    CHECK(cells.size() == 108);
    std::set<std::tuple<int, int, int, int, double>> uniq;
    for (const auto& c : cells) {
        CHECK(c.filter_width == c.block_size / 2);
        uniq.insert({c.block_size, c.num_filters, c.pool_size, c.cell_size, c.learning_rate});
        CHECK(c.block_feature_size() == (c.block_size - c.filter_width - c.pool_size + 2) * c.num_filters);
    }
    CHECK(uniq.size() == 108);
}

TEST_CASE("network seeds are derived per text mode") {
    RunConfig cfg;
    const auto a = cfg.network_for("aud");
    const auto b = cfg.network_for("man");
    CHECK(a.text_mode == TextMode::aud);
    CHECK(a.seed != b.seed);
    CHECK(cfg.network_for("aud").seed == a.seed);
}

namespace {

std::set<std::string> stage_dirs(const fs::path& root, const std::string& stage) {
    std::set<std::string> out;
    if (!fs::exists(root)) return out;
    for (const auto& e : fs::directory_iterator(root))
        if (e.path().filename().string().starts_with(stage + "-")) out.insert(e.path().filename().string());
    return out;
}

} // namespace

TEST_CASE("cache keys change only for dependent stages") {
    const auto dir = fs::temp_directory_path() / "textrisk_cache_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    RunConfig cfg = RunConfig::parse(R"(
[run]
seed = 5
num_folds = 3
text_modes = ["aud"]
logit_baseline = true
[pipeline]
min_count = 2
[embeddings]
train = false
[network]
k = 6
gamma = 3
m = 2
tau = 2
d = 3
v = 4
hidden1 = 4
hidden2 = 3
batch_size = 16
max_epochs = 1
[synth]
n_firms = 40
)");
    cfg.corpus = (dir / "corpus.jsonl").string();
    cfg.output_dir = (dir / "out").string();
    write_file_bytes(cfg.corpus, corpus_to_jsonl(generate_synthetic(cfg.synth)));
    const StageCache cache(dir / "cache");

    {
        Experiment ex(cfg, cache);
        ex.network_cv(TextMode::aud);
        ex.logit_cv();
    }
    const auto pre = stage_dirs(dir / "cache", "preprocess");
    const auto trn = stage_dirs(dir / "cache", "train");
    const auto lgt = stage_dirs(dir / "cache", "logit");
    CHECK(pre.size() == 1);
    CHECK(trn.size() == 1);
    CHECK(lgt.size() == 1);

    // Same inputs: nothing new.
    {
        Experiment ex(cfg, cache);
        const auto a = ex.network_cv(TextMode::aud);
        CHECK(a.p_hat.size() == ex.corpus().records.size());
    }
    CHECK(stage_dirs(dir / "cache", "train") == trn);

    // A network change retrains but reuses preprocessing and the logit fit.
    auto net = cfg;
    net.network.learning_rate = 0.01;
    {
        Experiment ex(net, cache);
        ex.network_cv(TextMode::aud);
        ex.logit_cv();
    }
    CHECK(stage_dirs(dir / "cache", "preprocess") == pre);
    CHECK(stage_dirs(dir / "cache", "logit") == lgt);
    CHECK(stage_dirs(dir / "cache", "train").size() == 2);

    // A pipeline change invalidates preprocessing and training, not the logit fit.
    auto pipe = cfg;
    pipe.min_count = 3;
    {
        Experiment ex(pipe, cache);
        ex.network_cv(TextMode::aud);
        ex.logit_cv();
    }
    CHECK(stage_dirs(dir / "cache", "preprocess").size() == 2);
    CHECK(stage_dirs(dir / "cache", "train").size() == 3);
    CHECK(stage_dirs(dir / "cache", "logit") == lgt);
    fs::remove_all(dir);
}

TEST_CASE("cache root follows the environment") {
    RunConfig cfg;
    cfg.output_dir = "some/out";
    ::unsetenv("TEXTRISK_CACHE_DIR");
    CHECK(StageCache::default_root(cfg) == fs::path("some/out") / "cache");
    ::setenv("TEXTRISK_CACHE_DIR", "/tmp/elsewhere", 1);
    CHECK(StageCache::default_root(cfg) == fs::path("/tmp/elsewhere"));
    ::unsetenv("TEXTRISK_CACHE_DIR");
}
