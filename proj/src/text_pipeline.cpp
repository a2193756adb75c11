#include "textrisk/text_pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "textrisk/error.hpp"
#include "textrisk/random.hpp"

namespace textrisk {

namespace {

// Decodes one UTF-8 code point starting at text[i]; returns its length in
// bytes, or 0 for an invalid sequence.
std::size_t decode_utf8(std::string_view text, std::size_t i, char32_t& cp) {
    const auto c0 = static_cast<unsigned char>(text[i]);
    if (c0 < 0x80) {
        cp = c0;
        return 1;
    }
    std::size_t len = 0;
    if ((c0 & 0xE0) == 0xC0) {
        len = 2;
        cp = c0 & 0x1F;
    } else if ((c0 & 0xF0) == 0xE0) {
        len = 3;
        cp = c0 & 0x0F;
    } else if ((c0 & 0xF8) == 0xF0) {
        len = 4;
        cp = c0 & 0x07;
    } else {
        return 0;
    }
    if (i + len > text.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        const auto c = static_cast<unsigned char>(text[i + k]);
        if ((c & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (c & 0x3F);
    }
    return len;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_separator(char32_t cp) {
    if (cp < 0x80) {
        const bool alnum = (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
        return !alnum;
    }
    if (cp <= 0xBF) return true;  // C1 controls, NBSP, Latin-1 punctuation and symbols
    if (cp == 0xD7 || cp == 0xF7) return true;
    if (cp >= 0x2000 && cp <= 0x206F) return true;
    if (cp >= 0x20A0 && cp <= 0x20CF) return true;
    if (cp >= 0x3000 && cp <= 0x303F) return true;
    return cp == 0xFEFF;
}

bool is_upper(char32_t cp) { return (cp >= 'A' && cp <= 'Z') || (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7); }

char32_t to_lower(char32_t cp) { return is_upper(cp) ? cp + 0x20 : cp; }

bool is_sentence_end(char32_t cp) { return cp == '.' || cp == '!' || cp == '?'; }

const char* const kEnglishStopwords[] = {
    "i",       "me",      "my",     "myself", "we",     "our",     "ours",     "ourselves", "you",    "your",
    "yours",   "yourself", "yourselves", "he", "him",   "his",     "himself",  "she",       "her",    "hers",
    "herself", "it",      "its",    "itself", "they",   "them",    "their",    "theirs",    "themselves",
    "what",    "which",   "who",    "whom",   "this",   "that",    "these",    "those",     "am",     "is",
    "are",     "was",     "were",   "be",     "been",   "being",   "have",     "has",       "had",    "having",
    "do",      "does",    "did",    "doing",  "a",      "an",      "the",      "and",       "but",    "if",
    "or",      "because", "as",     "until",  "while",  "of",      "at",       "by",        "for",    "with",
    "about",   "against", "between", "into",  "through", "during", "before",   "after",     "above",  "below",
    "to",      "from",    "up",     "down",   "in",     "out",     "on",       "off",       "over",   "under",
    "again",   "further", "then",   "once",   "here",   "there",   "when",     "where",     "why",    "how",
    "all",     "any",     "both",   "each",   "few",    "more",    "most",     "other",     "some",   "such",
    "no",      "nor",     "not",    "only",   "own",    "same",    "so",       "than",      "too",    "very",
    "s",       "t",       "can",    "will",   "just",   "don",     "should",   "now",       "d",      "ll",
    "m",       "o",       "re",     "ve",     "y",      "ain",     "aren",     "couldn",    "didn",   "doesn",
    "hadn",    "hasn",    "haven",  "isn",    "ma",     "mightn",  "mustn",    "needn",     "shan",   "shouldn",
    "wasn",    "weren",   "won",    "wouldn",
};

const char* const kDanishStopwords[] = {
    "og",    "i",      "jeg",   "det",    "at",     "en",     "den",    "til",   "er",    "som",   "på",
    "de",    "med",    "han",   "af",     "for",    "ikke",   "der",    "var",   "mig",   "sig",   "men",
    "et",    "har",    "om",    "vi",     "min",    "havde",  "ham",    "hun",   "nu",    "over",  "da",
    "fra",   "du",     "ud",    "sin",    "dem",    "os",     "op",     "man",   "hans",  "hvor",  "eller",
    "hvad",  "skal",   "selv",  "her",    "alle",   "vil",    "blev",   "kunne", "ind",   "når",   "være",
    "dog",   "noget",  "ville", "jo",     "deres",  "efter",  "ned",    "skulle", "denne", "end",  "dette",
    "mit",   "også",   "under", "have",   "dig",    "anden",  "hende",  "mine",  "alt",   "meget", "sit",
    "sine",  "vor",    "mod",   "disse",  "hvis",   "din",    "nogle",  "hos",   "blive", "mange", "ad",
    "bliver", "hendes", "været", "thi",   "jer",    "sådan",
};

} // namespace

std::vector<Word> split_words(std::string_view text) {
    std::vector<Word> words;
    Word current;
    bool in_word = false;
    bool pending_sentence_start = true;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = 0;
        std::size_t len = decode_utf8(text, i, cp);
        bool sep = true;
        if (len == 0) {
            len = 1;
            cp = 0;
        } else {
            sep = is_separator(cp);
        }
        if (sep) {
            if (in_word) {
                words.push_back(std::move(current));
                current = Word{};
                in_word = false;
            }
            if (len == 1 && is_sentence_end(cp)) pending_sentence_start = true;
        } else {
            if (!in_word) {
                in_word = true;
                current.capitalized = is_upper(cp);
                current.sentence_initial = pending_sentence_start;
                pending_sentence_start = false;
            }
            append_utf8(current.text, to_lower(cp));
        }
        i += len;
    }
    if (in_word) words.push_back(std::move(current));
    return words;
}

std::string normalize(std::string_view text) {
    std::string out;
    for (const auto& w : split_words(text)) {
        if (!out.empty()) out += ' ';
        out += w.text;
    }
    return out;
}

bool is_number_token(std::string_view token) {
    return std::any_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::set<std::string> default_stopwords(std::string_view language) {
    if (language == "english") return {std::begin(kEnglishStopwords), std::end(kEnglishStopwords)};
    if (language == "danish") return {std::begin(kDanishStopwords), std::end(kDanishStopwords)};
    if (language == "none") return {};
    fail(ErrorKind::config, "no built-in stopword list for language '" + std::string(language) + "'");
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::config, "cannot open stopword list " + path.string());
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const std::string word = normalize(line);
        if (!word.empty()) out.insert(word);
    }
    return out;
}

// ---------------------------------------------------------------------------

EntityScrubber::EntityScrubber(std::set<std::string> dictionary, Options options) : options_(options) {
    for (const auto& entry : dictionary) {
        for (const auto& w : split_words(entry)) dictionary_.insert(w.text);
    }
}

void EntityScrubber::observe(std::string_view raw_text) {
    for (const auto& w : split_words(raw_text)) {
        if (w.sentence_initial || is_number_token(w.text)) continue;
        auto& c = history_[w.text];
        ++c.mid_sentence;
        if (w.capitalized) ++c.capitalized;
    }
}

bool EntityScrubber::is_entity(const std::string& token) const {
    if (dictionary_.count(token) != 0) return true;
    auto it = history_.find(token);
    if (it == history_.end() || it->second.mid_sentence < options_.min_observations) return false;
    return static_cast<double>(it->second.capitalized) >=
           options_.capitalized_ratio * static_cast<double>(it->second.mid_sentence);
}

std::set<std::string> EntityScrubber::learned_entities() const {
    std::set<std::string> out;
    for (const auto& [token, _] : history_) {
        if (dictionary_.count(token) == 0 && is_entity(token)) out.insert(token);
    }
    return out;
}

std::vector<AlignedToken> scrub_aligned(std::span<const std::string> tokens, const std::set<std::string>& stopwords,
                                        const EntityScrubber& entities) {
    std::vector<AlignedToken> out;
    enum class Kind { word, number, entity, dropped };
    Kind prev = Kind::dropped;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        Kind kind = Kind::word;
        if (stopwords.count(tok) != 0) {
            kind = Kind::dropped;
        } else if (is_number_token(tok)) {
            kind = Kind::number;
        } else if (entities.is_entity(tok)) {
            kind = Kind::entity;
        }
        if (kind == Kind::number && prev != Kind::number) out.push_back({std::string(kNumberToken), i});
        if (kind == Kind::entity && prev != Kind::entity) out.push_back({std::string(kEntityToken), i});
        if (kind == Kind::word) out.push_back({tok, i});
        prev = kind;
    }
    return out;
}

std::vector<std::string> scrub(std::span<const std::string> tokens, const std::set<std::string>& stopwords,
                               const EntityScrubber& entities) {
    std::vector<std::string> out;
    for (auto& t : scrub_aligned(tokens, stopwords, entities)) out.push_back(std::move(t.token));
    return out;
}

// ---------------------------------------------------------------------------

TextPreprocessor::TextPreprocessor(Options options)
    : options_(std::move(options)),
      stemmer_(make_stemmer(options_.stemmer)),
      stopwords_(options_.stopwords.empty() ? default_stopwords(options_.language) : options_.stopwords),
      scrubber_(options_.entity_dictionary, options_.entity_options) {}

std::vector<AlignedToken> TextPreprocessor::process(std::string_view raw_text) const {
    const auto words = split_words(raw_text);
    std::vector<std::string> surface;
    surface.reserve(words.size());
    for (const auto& w : words) surface.push_back(w.text);
    auto out = scrub_aligned(surface, stopwords_, scrubber_);
    for (auto& t : out) {
        if (t.token != kNumberToken && t.token != kEntityToken) t.token = stemmer_->stem(t.token);
    }
    return out;
}

std::vector<std::string> TextPreprocessor::tokens(std::string_view raw_text) const {
    std::vector<std::string> out;
    for (auto& t : process(raw_text)) out.push_back(std::move(t.token));
    return out;
}

nlohmann::json TextPreprocessor::to_json() const {
    std::set<std::string> entities = scrubber_.dictionary();
    for (const auto& e : scrubber_.learned_entities()) entities.insert(e);
    return {
        {"format_version", 1},
        {"stemmer", options_.stemmer},
        {"language", options_.language},
        {"stopwords", stopwords_},
        {"entity_dictionary", entities},
        {"entity_min_observations", options_.entity_options.min_observations},
        {"entity_capitalized_ratio", options_.entity_options.capitalized_ratio},
    };
}

TextPreprocessor TextPreprocessor::from_json(const nlohmann::json& j) {
    require(j.value("format_version", 0) == 1, ErrorKind::data, "unsupported preprocessor format_version");
    Options o;
    try {
        o.stemmer = j.at("stemmer").get<std::string>();
        o.language = j.at("language").get<std::string>();
        o.stopwords = j.at("stopwords").get<std::set<std::string>>();
        o.entity_dictionary = j.at("entity_dictionary").get<std::set<std::string>>();
        o.entity_options.min_observations = j.at("entity_min_observations").get<std::size_t>();
        o.entity_options.capitalized_ratio = j.at("entity_capitalized_ratio").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("malformed preprocessor: ") + e.what());
    }
    if (o.stopwords.empty()) o.language = "none";
    return TextPreprocessor(std::move(o));
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
    for (auto t : {kPadToken, kUnkToken, kNumberToken, kEntityToken, kSeparatorToken}) {
        index_.emplace(std::string(t), static_cast<TokenId>(tokens_.size()));
        tokens_.emplace_back(t);
    }
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus, std::size_t min_count) {
    require(!corpus.empty(), ErrorKind::data, "cannot build a vocabulary from an empty corpus");
    Vocabulary v;
    v.min_count_ = min_count;
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& doc : corpus) {
        for (const auto& tok : doc) ++counts[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, n] : counts) {
        if (n >= min_count && v.index_.count(tok) == 0) kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (auto& [tok, _] : kept) {
        v.index_.emplace(tok, static_cast<TokenId>(v.tokens_.size()));
        v.tokens_.push_back(tok);
    }
    return v;
}

TokenId Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = fnv1a64("vocab/" + std::to_string(min_count_));
    for (const auto& t : tokens_) {
        h = fnv1a64(t, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

nlohmann::json Vocabulary::to_json() const {
    return {{"format_version", kFormatVersion}, {"min_count", min_count_}, {"tokens", tokens_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    require(j.value("format_version", 0) == kFormatVersion, ErrorKind::data, "unsupported vocabulary format_version");
    Vocabulary v;
    std::vector<std::string> tokens;
    try {
        v.min_count_ = j.at("min_count").get<std::size_t>();
        tokens = j.at("tokens").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("malformed vocabulary: ") + e.what());
    }
    require(tokens.size() >= static_cast<std::size_t>(kNumSpecial), ErrorKind::data, "vocabulary lacks special tokens");
    for (std::size_t i = 0; i < static_cast<std::size_t>(kNumSpecial); ++i) {
        require(tokens[i] == v.tokens_[i], ErrorKind::data, "vocabulary special tokens out of order");
    }
    for (std::size_t i = static_cast<std::size_t>(kNumSpecial); i < tokens.size(); ++i) {
        require(v.index_.emplace(tokens[i], static_cast<TokenId>(i)).second, ErrorKind::data,
                "duplicate vocabulary token '" + tokens[i] + "'");
        v.tokens_.push_back(tokens[i]);
    }
    return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write vocabulary " + path.string());
    out << to_json().dump() << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::data, "cannot open vocabulary " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, "vocabulary " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

TokenizedDoc tokenize(std::span<const AlignedToken> tokens, const Vocabulary& vocab, Segment segment) {
    TokenizedDoc doc;
    doc.segment = segment;
    doc.ids.reserve(tokens.size());
    doc.source.reserve(tokens.size());
    for (const auto& t : tokens) {
        doc.ids.push_back(vocab.id(t.token));
        doc.source.push_back(t.source);
    }
    return doc;
}

TokenizedDoc concatenate(const TokenizedDoc& auditor, const TokenizedDoc& management) {
    TokenizedDoc doc;
    doc.segment = Segment::concatenated;
    doc.ids = auditor.ids;
    doc.ids.push_back(Vocabulary::kSeparator);
    doc.ids.insert(doc.ids.end(), management.ids.begin(), management.ids.end());
    return doc;
}

BlockSequence blockify(std::span<const TokenId> ids, int k) {
    // Odd k strides by floor(k/2).
    require(k >= 2, ErrorKind::config, "block size must be at least 2");
    BlockSequence seq;
    seq.block_size = k;
    seq.step = k / 2;
    const auto n = ids.size();
    const auto uk = static_cast<std::size_t>(k);
    const auto step = static_cast<std::size_t>(seq.step);
    std::size_t blocks = 1;
    if (n > uk) blocks += (n - uk + step - 1) / step;
    seq.empty = n == 0;
    seq.num_blocks = static_cast<int>(blocks);
    seq.ids.assign(blocks * uk, Vocabulary::kPad);
    seq.valid.assign(blocks * uk, 0);
    for (std::size_t t = 0; t < blocks; ++t) {
        const std::size_t start = t * step;
        seq.offsets.push_back(start);
        for (std::size_t i = 0; i < uk && start + i < n; ++i) {
            seq.ids[t * uk + i] = ids[start + i];
            seq.valid[t * uk + i] = 1;
        }
    }
    return seq;
}

} // namespace textrisk
