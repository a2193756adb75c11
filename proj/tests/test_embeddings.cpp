#include <doctest.h>

#include <set>
#include <sstream>

#include "textrisk/embeddings.hpp"
#include "textrisk/error.hpp"

using namespace textrisk;

namespace {

Vocabulary small_vocab() {
    std::vector<std::vector<std::string>> corpus{{"alpha", "beta", "gamma", "beta"}};
    return Vocabulary::build(corpus, 1);
}

std::string vec_file(const std::vector<std::pair<std::string, std::vector<double>>>& rows, int dim) {
    std::ostringstream out;
    out << rows.size() << ' ' << dim << '\n';
    for (const auto& [tok, v] : rows) {
        out << tok;
        for (double x : v) out << ' ' << x;
        out << '\n';
    }
    return out.str();
}

} // namespace

TEST_CASE("skip-gram pair enumeration") {
    const std::vector<TokenId> seq{7, 8, 7, 8, 7, 8};
    std::set<std::pair<TokenId, TokenId>> uniq;
    for (const auto& p : skipgram_pairs(seq, 1)) uniq.insert(p);
    CHECK(uniq == std::set<std::pair<TokenId, TokenId>>{{7, 8}, {8, 7}});
    CHECK(skipgram_pairs(seq, 1).size() == 10);
    CHECK(skipgram_pairs(std::vector<TokenId>{5}, 3).empty());
}

TEST_CASE("skip-gram with zero epochs returns the initialization") {
    const std::vector<std::vector<TokenId>> corpus{{5, 6, 7, 8, 9, 10, 11}};
    SkipGramConfig cfg;
    cfg.dim = 4;
    cfg.negatives = 2;
    cfg.epochs = 0;
    cfg.subsample_threshold = 0.0;
    cfg.seed = 3;
    const auto a = train_skipgram(corpus, 12, cfg);
    cfg.epochs = 2;
    const auto b = train_skipgram(corpus, 12, cfg);
    CHECK(a.epoch_losses.empty());
    CHECK(a.embeddings != b.embeddings);
    cfg.epochs = 0;
    CHECK(train_skipgram(corpus, 12, cfg).embeddings == a.embeddings);
    for (double x : a.embeddings.row(0)) CHECK(x == 0.0);
    for (double x : b.embeddings.row(0)) CHECK(x == 0.0);
}

TEST_CASE("skip-gram rejects a vocabulary too small for the negatives") {
    const std::vector<std::vector<TokenId>> corpus{{5, 6, 5, 6}};
    SkipGramConfig cfg;
    cfg.dim = 3;
    cfg.negatives = 5;
    CHECK_THROWS_AS(train_skipgram(corpus, 7, cfg), Error);
}

TEST_CASE("skip-gram places co-occurring words closer than strangers") {
    // Two topic groups that never share a sentence.
    Rng rng = Rng::stream(8, "bigram-corpus");
    std::vector<std::vector<TokenId>> corpus;
    for (int s = 0; s < 400; ++s) {
        const TokenId base = s % 2 == 0 ? 5 : 11;
        std::vector<TokenId> sent;
        for (int i = 0; i < 8; ++i) sent.push_back(base + static_cast<TokenId>(rng.below(6)));
        corpus.push_back(sent);
    }
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SkipGramConfig cfg;
        cfg.dim = 10;
        cfg.window = 2;
        cfg.negatives = 4;
        cfg.epochs = 5;
        cfg.subsample_threshold = 0.0;
        cfg.seed = seed;
        const auto r = train_skipgram(corpus, 17, cfg);
        const auto& E = r.embeddings;
        const double together = cosine_similarity(E.row(5), E.row(6));
        const double apart = cosine_similarity(E.row(5), E.row(12));
        if (together > apart) ++wins;
        CHECK(r.epoch_losses.back() < r.epoch_losses.front());
    }
    CHECK(wins == 5);
}

TEST_CASE("skip-gram is deterministic under a fixed seed") {
    const std::vector<std::vector<TokenId>> corpus{{5, 6, 7, 8, 9, 10, 11, 5, 6, 7}};
    SkipGramConfig cfg;
    cfg.dim = 5;
    cfg.negatives = 2;
    cfg.epochs = 3;
    cfg.seed = 77;
    CHECK(train_skipgram(corpus, 12, cfg).embeddings == train_skipgram(corpus, 12, cfg).embeddings);
}

TEST_CASE("pretrained vectors: coverage, fill and errors") {
    const auto vocab = small_vocab();
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6}, c{7, 8, 9};
    std::istringstream full(vec_file({{"alpha", a}, {"beta", b}, {"gamma", c}}, 3));
    const auto r = load_pretrained(full, vocab, 3, 1);
    CHECK(r.coverage == 1.0);
    CHECK(std::vector<double>(r.embeddings.row(static_cast<std::size_t>(vocab.id("beta"))).begin(),
                              r.embeddings.row(static_cast<std::size_t>(vocab.id("beta"))).end()) == b);
    for (double x : r.embeddings.row(0)) CHECK(x == 0.0);

    std::istringstream none(vec_file({{"delta", a}}, 3));
    const auto z = load_pretrained(none, vocab, 3, 1);
    CHECK(z.coverage == 0.0);
    for (std::size_t row = 1; row < vocab.size(); ++row)
        for (double x : z.embeddings.row(row)) CHECK(std::abs(x) <= 0.5 / 3);

    std::istringstream wrong_dim(vec_file({{"alpha", a}}, 3));
    CHECK_THROWS_AS(load_pretrained(wrong_dim, vocab, 2, 1), Error);

    std::istringstream malformed("2 3\nalpha 1 2 3\nbeta 1 x 3\n");
    try {
        load_pretrained(malformed, vocab, 3, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    std::istringstream stemmed(vec_file({{"alphas", a}}, 3));
    CHECK(load_pretrained(stemmed, vocab, 3, 1, true).coverage == doctest::Approx(1.0 / 3));
}

TEST_CASE("pretrained dimension 300 accepted, 299 rejected") {
    const auto vocab = small_vocab();
    const std::vector<double> v300(300, 0.25), v299(299, 0.25);
    std::istringstream ok(vec_file({{"alpha", v300}}, 300));
    CHECK_NOTHROW(load_pretrained(ok, vocab, 300, 1));
    std::istringstream bad(vec_file({{"alpha", v299}}, 299));
    CHECK_THROWS_AS(load_pretrained(bad, vocab, 300, 1), Error);
}

TEST_CASE("lookup_block") {
    Rng rng = Rng::stream(2, "lookup");
    const auto E = EmbeddingMatrix::random(10, 300, rng);
    const std::vector<TokenId> pads(20, Vocabulary::kPad);
    const auto zero = lookup_block(pads, E);
    CHECK(zero.size() == 20 * 300);
    CHECK(std::all_of(zero.begin(), zero.end(), [](double x) { return x == 0.0; }));

    const std::vector<TokenId> same{7, 7, 3};
    const auto B = lookup_block(same, E);
    CHECK(std::equal(B.begin(), B.begin() + 300, B.begin() + 300));
    CHECK(std::equal(B.begin() + 600, B.end(), E.row(3).begin()));
    CHECK_THROWS_AS(lookup_block(std::vector<TokenId>{10}, E), Error);
}
