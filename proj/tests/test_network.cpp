#include <doctest.h>

#include <cmath>

#include "oracles/finite_difference.hpp"
#include "support/generators.hpp"
#include "textrisk/error.hpp"
#include "textrisk/network.hpp"

using namespace textrisk;

namespace {

NetworkConfig tiny_config(std::uint64_t seed) {
    NetworkConfig c;
    c.block_size = 6;
    c.filter_width = 3;
    c.pool_size = 2;
    c.num_filters = 2;
    c.cell_size = 3;
    c.embedding_dim = 4;
    c.hidden1 = 5;
    c.hidden2 = 4;
    c.batch_size = 8;
    c.seed = seed;
    return c;
}

Dataset random_dataset(const NetworkConfig& cfg, std::size_t n, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "dataset");
    Dataset d;
    d.vocab_size = 12;
    d.num_features = 3;
    d.vocab_hash = 42;
    for (std::size_t i = 0; i < n; ++i) d.samples.push_back(gen::sample(rng, cfg, d.vocab_size, d.num_features, gen::integer(rng, 1, 3)));
    return d;
}

} // namespace

TEST_CASE("text modes parse and print") {
    for (auto m : {TextMode::aud, TextMode::man, TextMode::aud_man, TextMode::none}) CHECK(parse_text_mode(to_string(m)) == m);
    CHECK(to_string(TextMode::aud_man) == "aud+man");
    CHECK_THROWS_AS(parse_text_mode("both"), Error);
}

TEST_CASE("config validation and JSON round-trip") {
    NetworkConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.block_feature_size() == 320);
    CHECK(NetworkConfig::from_json(c.to_json()) == c);
    auto bad = c;
    bad.filter_width = 20;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.pool_size = 12;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("full-network gradient matches central differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto cfg = tiny_config(seed);
        Rng rng = Rng::stream(seed, "gradcheck");
        auto params = init_params(cfg, 9, 3, seed);
        oracle::jitter_biases(params, rng);
        std::vector<Sample> batch;
        for (int i = 0; i < 3; ++i) {
            auto s = gen::sample(rng, cfg, 9, 3, 2);
            s.block_mask.clear();
            batch.push_back(s);
        }
        std::vector<double> analytic(params.size());
        loss_and_gradient(params, batch, analytic);
        const auto numeric = oracle::numeric_gradient(params, batch);
        for (const auto& e : oracle::compare(params, analytic, numeric)) {
            CAPTURE(e.name);
            CHECK(e.max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("masked blocks and PAD tokens receive zero gradient") {
    auto cfg = tiny_config(3);
    Rng rng = Rng::stream(3, "masked-grad");
    const auto params = init_params(cfg, 9, 3, 3);
    auto s = gen::sample(rng, cfg, 9, 3, 3);
    s.block_mask = {1, 1, 0};
    // Tokens only in the masked block.
    for (int i = 12; i < 18; ++i) s.ids[static_cast<std::size_t>(i)] = 8;
    for (int i = 0; i < 12; ++i)
        if (s.ids[static_cast<std::size_t>(i)] == 8) s.ids[static_cast<std::size_t>(i)] = 7;
    s.ids[0] = Vocabulary::kPad;
    std::vector<double> g(params.size());
    loss_and_gradient(params, std::span<const Sample>(&s, 1), g);
    const auto& emb = params.block("embedding");
    for (int j = 0; j < 4; ++j) {
        CHECK(g[emb.offset + static_cast<std::size_t>(8 * 4 + j)] == 0.0);
        CHECK(g[emb.offset + static_cast<std::size_t>(j)] == 0.0);
    }
}

TEST_CASE("zero upstream gradient gives zero output-layer gradient") {
    auto cfg = tiny_config(4);
    Rng rng = Rng::stream(4, "zero-dlogit");
    const auto params = init_params(cfg, 9, 3, 4);
    const auto s = gen::sample(rng, cfg, 9, 3, 2);
    std::vector<double> g(params.size(), 0.0);
    backward(params, s, forward(params, s), 0.0, g);
    const auto& w3 = params.block("output.W");
    const auto& b3 = params.block("output.b");
    for (std::size_t i = 0; i < w3.size(); ++i) CHECK(g[w3.offset + i] == 0.0);
    CHECK(g[b3.offset] == 0.0);
}

TEST_CASE("duplicated sample contributes exactly twice") {
    auto cfg = tiny_config(5);
    Rng rng = Rng::stream(5, "dup");
    const auto params = init_params(cfg, 9, 3, 5);
    const auto s = gen::sample(rng, cfg, 9, 3, 2);
    std::vector<double> one(params.size(), 0.0), two(params.size(), 0.0);
    const std::vector<Sample> single{s}, pair{s, s};
    accumulate_gradient(params, single, one);
    accumulate_gradient(params, pair, two);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(two[i] == 2.0 * one[i]);
}

TEST_CASE("adam: first step, zero gradients, symmetry, frozen blocks, non-finite") {
    AdamOptions opt;
    opt.learning_rate = 0.01;
    std::vector<double> p{1.0, 2.0, 3.0, 1.0};
    const std::vector<double> g{0.5, -3.0, 1e-3, 0.5};
    AdamState st;
    adam_step(p, g, st, opt);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(2.0 + 0.01).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(3.0 - 0.01).epsilon(1e-5));
    CHECK(p[0] == p[3]);

    std::vector<double> q{1.0, -1.0};
    AdamState zs;
    for (int i = 0; i < 10; ++i) adam_step(q, std::vector<double>{0.0, 0.0}, zs, opt);
    CHECK(q == std::vector<double>{1.0, -1.0});

    std::vector<double> r{0.0, 0.0, 0.0};
    std::vector<ParamBlock> blocks{{"free", 0, 1, 2, false}, {"frozen", 2, 1, 1, true}};
    AdamState fs;
    adam_step(r, std::vector<double>{1.0, 1.0, 1.0}, fs, opt, blocks);
    CHECK(r[2] == 0.0);
    CHECK(r[0] != 0.0);

    std::vector<double> s{0.0, 0.0, 0.0};
    AdamState ns;
    try {
        adam_step(s, std::vector<double>{0.0, 0.0, std::nan("")}, ns, opt, blocks);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
        CHECK(std::string(e.what()).find("frozen") != std::string::npos);
    }
}

TEST_CASE("frozen batch loss falls over the first five Adam steps") {
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto cfg = tiny_config(seed);
        const auto data = random_dataset(cfg, 16, seed);
        auto params = init_params(cfg, data.vocab_size, data.num_features, seed);
        AdamState st;
        std::vector<double> g(params.size());
        double prev = loss_and_gradient(params, data.samples, g);
        bool down = true;
        for (int step = 0; step < 5; ++step) {
            adam_step(params.values, g, st, AdamOptions{}, params.blocks());
            const double now = loss_and_gradient(params, data.samples, g);
            if (!(now < prev)) down = false;
            prev = now;
        }
        if (down) ++good;
    }
    CHECK(good >= 18);
}

TEST_CASE("training: zero epochs, determinism, PAD row, batch size") {
    auto cfg = tiny_config(6);
    const auto data = random_dataset(cfg, 40, 6);
    cfg.max_epochs = 0;
    const auto idle = train(data, cfg);
    CHECK(idle.model.params == init_params(cfg, data.vocab_size, data.num_features, cfg.seed));
    CHECK(idle.log.epochs.empty());

    cfg.max_epochs = 3;
    cfg.patience = 3;
    const auto a = train(data, cfg);
    const auto b = train(data, cfg);
    CHECK(a.log.same_losses(b.log));
    CHECK(a.model == b.model);
    CHECK(a.log.epochs.size() == 3);
    for (double x : a.model.params.view("embedding").subspan(0, 4)) CHECK(x == 0.0);

    auto big = cfg;
    big.batch_size = 64;
    CHECK_THROWS_AS(train(data, big), Error);
}

TEST_CASE("prediction contract") {
    auto cfg = tiny_config(7);
    const auto data = random_dataset(cfg, 20, 7);
    Model m{init_params(cfg, data.vocab_size, data.num_features, 7), data.vocab_hash};
    const auto batch = predict(m, data.samples, data.vocab_hash);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(batch[i] == predict_one(m, data.samples[i], data.vocab_hash));
        CHECK(batch[i] > 0.0);
        CHECK(batch[i] < 1.0);
    }
    CHECK(predict(m, data.samples, data.vocab_hash) == batch);
    CHECK_THROWS_AS(predict(m, data.samples, data.vocab_hash + 1), Error);

    const auto empty = make_sample(blockify(std::vector<TokenId>{}, cfg.block_size), {0.1, 0.2, 0.3}, 0.0);
    CHECK(std::isfinite(predict_one(m, empty, data.vocab_hash)));
    const auto trace = extract_attention(m, empty);
    CHECK(trace.alpha == std::vector<double>{1.0});
}

TEST_CASE("text_mode=none ignores the text") {
    auto cfg = tiny_config(8);
    cfg.text_mode = TextMode::none;
    Model m{init_params(cfg, 0, 3, 8), 0};
    const std::vector<double> f{0.5, -1.0, 2.0};
    auto a = make_tabular_sample(f, 1.0);
    auto b = make_sample(blockify(std::vector<TokenId>{5, 6, 7, 8, 9, 10, 11}, 6), f, 1.0);
    CHECK(predict_one(m, a, 0) == predict_one(m, b, 123));
}

TEST_CASE("checkpoint round-trip and corruption") {
    auto cfg = tiny_config(9);
    const auto data = random_dataset(cfg, 10, 9);
    Model m{init_params(cfg, data.vocab_size, data.num_features, 9), data.vocab_hash};
    auto bytes = checkpoint_bytes(m);
    CHECK(bytes.compare(0, 8, std::string(kCheckpointMagic, 8)) == 0);
    const auto back = model_from_checkpoint(bytes);
    CHECK(back == m);
    CHECK(predict(back, data.samples, data.vocab_hash) == predict(m, data.samples, data.vocab_hash));
    bytes[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(model_from_checkpoint(bytes), Error);
    CHECK_THROWS_AS(model_from_checkpoint("TXTRISK"), Error);
}
