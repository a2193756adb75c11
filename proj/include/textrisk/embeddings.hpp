#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "textrisk/random.hpp"
#include "textrisk/text_pipeline.hpp"

namespace textrisk {

struct SkipGramConfig {
    int window = 5;
    int dim = 300;
    int negatives = 5;
    // Words with corpus frequency f are dropped with probability 1 - sqrt(t / f).
    double subsample_threshold = 1e-3;
    int epochs = 5;
    double learning_rate = 0.025;
    // Noise distribution is unigram counts raised to this power.
    double noise_exponent = 0.75;
    std::uint64_t seed = 1;
};

// |V| x v word vectors, row-major. Row PAD is zero and stays zero.
struct EmbeddingMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> weights;
    bool trainable = true;

    std::span<double> row(std::size_t r) { return std::span<double>(weights).subspan(r * dim, dim); }
    std::span<const double> row(std::size_t r) const { return std::span<const double>(weights).subspan(r * dim, dim); }

    // Uniform(-0.5/dim, 0.5/dim) entries, PAD row zero.
    static EmbeddingMatrix random(std::size_t rows, std::size_t dim, Rng& rng);

    bool operator==(const EmbeddingMatrix&) const = default;
};

struct SkipGramResult {
    EmbeddingMatrix embeddings;
    // Mean negative-sampling loss per positive pair, one entry per epoch.
    std::vector<double> epoch_losses;
};

// (center, context) pairs within `window` positions of each other, in scan order.
std::vector<std::pair<TokenId, TokenId>> skipgram_pairs(std::span<const TokenId> sequence, int window);

SkipGramResult train_skipgram(std::span<const std::vector<TokenId>> corpus, std::size_t vocab_size,
                              const SkipGramConfig& cfg);

struct PretrainedVectors {
    EmbeddingMatrix embeddings;
    // Fraction of non-special vocabulary tokens found in the file.
    double coverage = 0.0;
};

// Textual word-vector format: header "count dim", then "token f1 ... fdim" per
// line. Tokens absent from the file are drawn from Uniform(-0.5/dim, 0.5/dim).
// With `stem_file_tokens`, file tokens are stemmed before matching and the
// first vector for each stem wins.
PretrainedVectors load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab, int expected_dim,
                                  std::uint64_t seed, bool stem_file_tokens = false);
PretrainedVectors load_pretrained(std::istream& in, const Vocabulary& vocab, int expected_dim, std::uint64_t seed,
                                  bool stem_file_tokens = false);

// Writes every vocabulary row with round-trip precision.
void save_word_vectors(const std::filesystem::path& path, const EmbeddingMatrix& matrix, const Vocabulary& vocab);

// k x v matrix whose row i is the vector of ids[i]; PAD rows are zero.
std::vector<double> lookup_block(std::span<const TokenId> ids, const EmbeddingMatrix& matrix);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

} // namespace textrisk
