#include "textrisk/embeddings.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "textrisk/error.hpp"
#include "textrisk/stemmer.hpp"

namespace textrisk {

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

EmbeddingMatrix EmbeddingMatrix::random(std::size_t rows, std::size_t dim, Rng& rng) {
    EmbeddingMatrix m;
    m.rows = rows;
    m.dim = dim;
    m.weights.resize(rows * dim);
    const double half = 0.5 / static_cast<double>(dim);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            const double x = rng.uniform(-half, half);
            m.weights[r * dim + c] = r == static_cast<std::size_t>(Vocabulary::kPad) ? 0.0 : x;
        }
    }
    return m;
}

std::vector<std::pair<TokenId, TokenId>> skipgram_pairs(std::span<const TokenId> sequence, int window) {
    std::vector<std::pair<TokenId, TokenId>> out;
    const auto n = static_cast<std::ptrdiff_t>(sequence.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - window); j <= std::min(n - 1, i + window); ++j) {
            if (j != i) out.emplace_back(sequence[static_cast<std::size_t>(i)], sequence[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

SkipGramResult train_skipgram(std::span<const std::vector<TokenId>> corpus, std::size_t vocab_size,
                              const SkipGramConfig& cfg) {
    require(cfg.window >= 1, ErrorKind::config, "skip-gram window must be >= 1");
    require(cfg.dim >= 1, ErrorKind::config, "embedding dimension must be >= 1");
    require(cfg.negatives >= 1, ErrorKind::config, "negatives_per_positive must be >= 1");
    require(cfg.epochs >= 0, ErrorKind::config, "skip-gram epochs must be >= 0");
    require(!corpus.empty(), ErrorKind::data, "skip-gram corpus is empty");

    std::vector<double> counts(vocab_size, 0.0);
    double total = 0.0;
    for (const auto& seq : corpus) {
        for (TokenId id : seq) {
            require(id >= 0 && static_cast<std::size_t>(id) < vocab_size, ErrorKind::data,
                    "token id out of vocabulary range in skip-gram corpus");
            if (id == Vocabulary::kPad) continue;
            counts[static_cast<std::size_t>(id)] += 1.0;
            total += 1.0;
        }
    }
    require(total > 0.0, ErrorKind::data, "skip-gram corpus has no tokens");
    std::size_t distinct = 0;
    std::vector<double> noise(vocab_size, 0.0);
    for (std::size_t i = 0; i < vocab_size; ++i) {
        if (counts[i] > 0.0) {
            ++distinct;
            noise[i] = std::pow(counts[i], cfg.noise_exponent);
        }
    }
    require(distinct >= static_cast<std::size_t>(cfg.negatives) + 1, ErrorKind::data,
            "vocabulary smaller than negatives_per_positive + 1");
    const DiscreteSampler noise_sampler(noise);

    std::vector<double> drop(vocab_size, 0.0);
    if (cfg.subsample_threshold > 0.0) {
        for (std::size_t i = 0; i < vocab_size; ++i) {
            if (counts[i] == 0.0) continue;
            const double f = counts[i] / total;
            drop[i] = std::clamp(1.0 - std::sqrt(cfg.subsample_threshold / f), 0.0, 1.0);
        }
    }

    Rng init_rng = Rng::stream(cfg.seed, "skipgram/init");
    Rng rng = Rng::stream(cfg.seed, "skipgram/train");
    SkipGramResult result;
    result.embeddings = EmbeddingMatrix::random(vocab_size, static_cast<std::size_t>(cfg.dim), init_rng);
    auto& in = result.embeddings.weights;
    std::vector<double> out(vocab_size * static_cast<std::size_t>(cfg.dim), 0.0);
    const auto dim = static_cast<std::size_t>(cfg.dim);
    std::vector<double> grad_in(dim);

    const double planned = static_cast<double>(cfg.epochs) * total + 1.0;
    double processed = 0.0;
    std::vector<TokenId> kept;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss = 0.0;
        std::size_t pairs = 0;
        for (const auto& seq : corpus) {
            kept.clear();
            for (TokenId id : seq) {
                if (id == Vocabulary::kPad) continue;
                processed += 1.0;
                if (drop[static_cast<std::size_t>(id)] > 0.0 && rng.uniform() < drop[static_cast<std::size_t>(id)])
                    continue;
                kept.push_back(id);
            }
            const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - processed / planned);
            const auto n = static_cast<std::ptrdiff_t>(kept.size());
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                const auto center = static_cast<std::size_t>(kept[static_cast<std::size_t>(i)]);
                double* w = &in[center * dim];
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - cfg.window);
                const std::ptrdiff_t hi = std::min(n - 1, i + cfg.window);
                for (std::ptrdiff_t j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    const auto context = static_cast<std::size_t>(kept[static_cast<std::size_t>(j)]);
                    std::fill(grad_in.begin(), grad_in.end(), 0.0);
                    for (int s = 0; s <= cfg.negatives; ++s) {
                        std::size_t target = context;
                        double label = 1.0;
                        if (s > 0) {
                            target = noise_sampler.sample(rng);
                            if (target == context) continue;
                            label = 0.0;
                        }
                        double* u = &out[target * dim];
                        double score = 0.0;
                        for (std::size_t c = 0; c < dim; ++c) score += w[c] * u[c];
                        loss -= label > 0.5 ? log_sigmoid(score) : log_sigmoid(-score);
                        const double g = (label - sigmoid(score)) * lr;
                        for (std::size_t c = 0; c < dim; ++c) {
                            grad_in[c] += g * u[c];
                            u[c] += g * w[c];
                        }
                    }
                    for (std::size_t c = 0; c < dim; ++c) w[c] += grad_in[c];
                    ++pairs;
                }
            }
        }
        result.epoch_losses.push_back(pairs > 0 ? loss / static_cast<double>(pairs) : 0.0);
    }
    return result;
}

PretrainedVectors load_pretrained(std::istream& in, const Vocabulary& vocab, int expected_dim, std::uint64_t seed,
                                  bool stem_file_tokens) {
    std::string line;
    std::size_t line_no = 1;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::data, "word-vector file is empty");
    std::size_t count = 0;
    long long dim = 0;
    {
        std::istringstream header(line);
        require(static_cast<bool>(header >> count >> dim) && dim > 0, ErrorKind::data,
                "word-vector line 1: expected header 'count dim'");
    }
    require(dim == expected_dim, ErrorKind::data,
            "word-vector dimension mismatch: file has " + std::to_string(dim) + ", expected " +
                std::to_string(expected_dim));

    Rng rng = Rng::stream(seed, "pretrained/init");
    PretrainedVectors result;
    result.embeddings = EmbeddingMatrix::random(vocab.size(), static_cast<std::size_t>(dim), rng);
    std::vector<bool> found(vocab.size(), false);
    PorterStemmer stemmer;
    std::vector<double> values(static_cast<std::size_t>(dim));
    std::size_t read = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string token;
        fields >> token;
        for (auto& v : values) {
            require(static_cast<bool>(fields >> v) && std::isfinite(v), ErrorKind::data,
                    "word-vector line " + std::to_string(line_no) + ": malformed or short vector");
        }
        std::string extra;
        require(!(fields >> extra), ErrorKind::data,
                "word-vector line " + std::to_string(line_no) + ": more than " + std::to_string(dim) + " values");
        ++read;
        if (stem_file_tokens) token = stemmer.stem(token);
        if (!vocab.contains(token)) continue;
        const auto id = static_cast<std::size_t>(vocab.id(token));
        if (id == static_cast<std::size_t>(Vocabulary::kPad) || found[id]) continue;
        found[id] = true;
        std::copy(values.begin(), values.end(), result.embeddings.row(id).begin());
    }
    require(read == count, ErrorKind::data,
            "word-vector file declares " + std::to_string(count) + " vectors but contains " + std::to_string(read));

    std::size_t regular = 0;
    std::size_t hits = 0;
    for (std::size_t i = static_cast<std::size_t>(Vocabulary::kNumSpecial); i < vocab.size(); ++i) {
        ++regular;
        if (found[i]) ++hits;
    }
    result.coverage = regular == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(regular);
    return result;
}

PretrainedVectors load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab, int expected_dim,
                                  std::uint64_t seed, bool stem_file_tokens) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::data, "cannot open word-vector file " + path.string());
    return load_pretrained(in, vocab, expected_dim, seed, stem_file_tokens);
}

void save_word_vectors(const std::filesystem::path& path, const EmbeddingMatrix& matrix, const Vocabulary& vocab) {
    require(matrix.rows == vocab.size(), ErrorKind::internal, "embedding rows do not match vocabulary size");
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write word-vector file " + path.string());
    out << matrix.rows << ' ' << matrix.dim << '\n';
    char buf[40];
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        out << vocab.token(static_cast<TokenId>(r));
        for (double v : matrix.row(r)) {
            std::snprintf(buf, sizeof buf, " %.17g", v);
            out << buf;
        }
        out << '\n';
    }
}

std::vector<double> lookup_block(std::span<const TokenId> ids, const EmbeddingMatrix& matrix) {
    std::vector<double> block(ids.size() * matrix.dim, 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto id = static_cast<std::size_t>(ids[i]);
        require(id < matrix.rows, ErrorKind::data, "token id out of embedding range");
        if (ids[i] == Vocabulary::kPad) continue;
        const auto row = matrix.row(id);
        std::copy(row.begin(), row.end(), block.begin() + static_cast<std::ptrdiff_t>(i * matrix.dim));
    }
    return block;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

} // namespace textrisk
