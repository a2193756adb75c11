#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "textrisk/stemmer.hpp"

namespace textrisk {

using TokenId = std::int32_t;

inline constexpr std::string_view kPadToken = "xxpadxx";
inline constexpr std::string_view kUnkToken = "xxunkxx";
inline constexpr std::string_view kNumberToken = "xxnumberxx";
inline constexpr std::string_view kEntityToken = "xxentityxx";
inline constexpr std::string_view kSeparatorToken = "xxsepxx";

// Lowercases, replaces punctuation, tabs and newlines with spaces and collapses
// whitespace runs. ASCII and Latin-1 letters are case-folded.
std::string normalize(std::string_view text);

// Words of `text` after normalization, with the casing facts the entity
// heuristic needs. Joining `text` fields with single spaces gives normalize(text).
struct Word {
    std::string text;
    bool capitalized = false;
    bool sentence_initial = false;
};
std::vector<Word> split_words(std::string_view text);

bool is_number_token(std::string_view token);

std::set<std::string> default_stopwords(std::string_view language);
std::set<std::string> load_stopwords(const std::filesystem::path& path);

// Dictionary entities plus words that are capitalized in nearly every
// mid-sentence occurrence across the corpus (names of firms, people, places).
class EntityScrubber {
public:
    struct Options {
        std::size_t min_observations = 3;
        double capitalized_ratio = 0.8;
    };

    EntityScrubber() = default;
    explicit EntityScrubber(std::set<std::string> dictionary, Options options);
    explicit EntityScrubber(std::set<std::string> dictionary) : EntityScrubber(std::move(dictionary), Options{}) {}

    // Accumulates capitalization history from raw text.
    void observe(std::string_view raw_text);
    bool is_entity(const std::string& token) const;

    const std::set<std::string>& dictionary() const { return dictionary_; }
    // Tokens currently classified as entities by the capitalization history.
    std::set<std::string> learned_entities() const;

private:
    struct Counts {
        std::size_t mid_sentence = 0;
        std::size_t capitalized = 0;
    };
    std::set<std::string> dictionary_;
    std::map<std::string, Counts> history_;
    Options options_;
};

struct AlignedToken {
    std::string token;
    // Index of the normalized source word this token came from.
    std::size_t source = 0;
};

// Steps 3-4 of the pipeline on normalized tokens: stopwords dropped, runs of
// numeric tokens collapsed to the number token, runs of entities collapsed to
// the entity token.
std::vector<std::string> scrub(std::span<const std::string> tokens, const std::set<std::string>& stopwords,
                               const EntityScrubber& entities);
std::vector<AlignedToken> scrub_aligned(std::span<const std::string> tokens, const std::set<std::string>& stopwords,
                                        const EntityScrubber& entities);

// Full per-document preprocessing: normalize, stem, scrub. Stopword, number and
// entity decisions are taken on the surface form; survivors are emitted stemmed.
class TextPreprocessor {
public:
    struct Options {
        std::string stemmer = "porter";
        std::string language = "english";
        std::set<std::string> stopwords;  // empty: built-in list for `language`
        std::set<std::string> entity_dictionary;
        EntityScrubber::Options entity_options;
    };

    explicit TextPreprocessor(Options options);

    // Learns capitalization history; call over the corpus before process().
    void observe(std::string_view raw_text) { scrubber_.observe(raw_text); }

    std::vector<AlignedToken> process(std::string_view raw_text) const;
    std::vector<std::string> tokens(std::string_view raw_text) const;

    const Options& options() const { return options_; }
    const EntityScrubber& scrubber() const { return scrubber_; }

    // Freezes the learned entities into the dictionary so the preprocessor can
    // be reconstructed without the corpus.
    nlohmann::json to_json() const;
    static TextPreprocessor from_json(const nlohmann::json& j);

private:
    Options options_;
    std::unique_ptr<Stemmer> stemmer_;
    std::set<std::string> stopwords_;
    EntityScrubber scrubber_;
};

class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kNumber = 2;
    static constexpr TokenId kEntity = 3;
    static constexpr TokenId kSeparator = 4;
    static constexpr TokenId kNumSpecial = 5;
    static constexpr int kFormatVersion = 1;

    Vocabulary();

    // Builds from token sequences; tokens seen fewer than min_count times are
    // dropped. Ids are assigned by descending frequency, then lexicographically.
    static Vocabulary build(std::span<const std::vector<std::string>> corpus, std::size_t min_count);

    std::size_t size() const { return tokens_.size(); }
    std::size_t min_count() const { return min_count_; }
    TokenId id(std::string_view token) const;
    const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    bool contains(std::string_view token) const;
    std::uint64_t hash() const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const {
        return tokens_ == other.tokens_ && min_count_ == other.min_count_;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    std::size_t min_count_ = 1;
};

inline Vocabulary build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t min_count) {
    return Vocabulary::build(corpus, min_count);
}

enum class Segment { auditor, management, concatenated };

struct TokenizedDoc {
    std::vector<TokenId> ids;
    Segment segment = Segment::auditor;
    // source[i] is the normalized-word index of ids[i] in its segment text.
    std::vector<std::size_t> source;
};

TokenizedDoc tokenize(std::span<const AlignedToken> tokens, const Vocabulary& vocab, Segment segment);
// Auditor stream, separator, management stream.
TokenizedDoc concatenate(const TokenizedDoc& auditor, const TokenizedDoc& management);

// Half-overlapping windows of k token ids; stride k/2. The final window is
// right-padded with PAD and its padding is masked out.
struct BlockSequence {
    int block_size = 0;
    int step = 0;
    int num_blocks = 0;
    bool empty = false;
    std::vector<TokenId> ids;       // num_blocks * block_size
    std::vector<std::uint8_t> valid;  // 1 for real tokens
    std::vector<std::size_t> offsets;  // start token index of each block

    std::span<const TokenId> block(int t) const {
        return std::span<const TokenId>(ids).subspan(static_cast<std::size_t>(t * block_size),
                                                     static_cast<std::size_t>(block_size));
    }
};

BlockSequence blockify(std::span<const TokenId> ids, int k);
inline BlockSequence blockify(const TokenizedDoc& doc, int k) { return blockify(doc.ids, k); }

} // namespace textrisk
