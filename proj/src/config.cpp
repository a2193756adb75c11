#include "textrisk/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "textrisk/error.hpp"
#include "textrisk/evaluation.hpp"
#include "textrisk/random.hpp"
#include "textrisk/stemmer.hpp"

namespace textrisk {

namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

class ValueParser {
public:
    ValueParser(std::string_view text, std::string where) : text_(text), where_(std::move(where)) {}

    json parse_all() {
        json v = value();
        skip_ws();
        if (pos_ != text_.size()) error("unexpected trailing characters");
        return v;
    }

private:
    [[noreturn]] void error(const std::string& msg) const { fail(ErrorKind::config, where_ + ": " + msg); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    json value() {
        skip_ws();
        if (pos_ >= text_.size()) error("missing value");
        const char c = text_[pos_];
        if (c == '"') return string();
        if (c == '[') return list();
        return scalar();
    }

    json string() {
        ++pos_;
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            char c = text_[pos_++];
            if (c == '\\') {
                if (pos_ >= text_.size()) error("unterminated escape");
                const char e = text_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: error(std::string("unknown escape \\") + e);
                }
            }
            out += c;
        }
        if (pos_ >= text_.size()) error("unterminated string");
        ++pos_;
        return out;
    }

    json list() {
        ++pos_;
        json arr = json::array();
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            return arr;
        }
        while (true) {
            json item = value();
            if (item.is_array()) error("nested lists are not supported");
            arr.push_back(std::move(item));
            skip_ws();
            if (pos_ >= text_.size()) error("unterminated list");
            if (text_[pos_] == ',') {
                ++pos_;
                continue;
            }
            if (text_[pos_] == ']') {
                ++pos_;
                return arr;
            }
            error("expected ',' or ']' in list");
        }
    }

    json scalar() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
               !std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        const std::string tok(text_.substr(start, pos_ - start));
        if (tok == "true") return true;
        if (tok == "false") return false;
        if (tok.empty()) error("missing value");
        const bool integral = tok.find_first_not_of("+-0123456789") == std::string::npos;
        char* end = nullptr;
        if (integral) {
            errno = 0;
            if (tok[0] == '-') {
                const long long v = std::strtoll(tok.c_str(), &end, 10);
                if (errno == 0 && *end == '\0') return v;
            } else {
                const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
                if (errno == 0 && *end == '\0') return v;
            }
            error("integer out of range: " + tok);
        }
        const double d = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') error("cannot parse value '" + tok + "' (strings need quotes)");
        return d;
    }

    std::string_view text_;
    std::string where_;
    std::size_t pos_ = 0;
};

std::string strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && quoted) {
            ++i;
        } else if (line[i] == '"') {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return std::string(line.substr(0, i));
        }
    }
    return std::string(line);
}

// Typed accessors that name the key on failure.
struct Field {
    const json& v;
    std::string name;

    [[noreturn]] void bad(const char* expected) const {
        fail(ErrorKind::config, "config key '" + name + "' must be " + expected + ", got " + v.dump());
    }
    long long as_int() const {
        if (!v.is_number_integer()) bad("an integer");
        return v.get<long long>();
    }
    std::uint64_t as_u64() const {
        if (!v.is_number_unsigned()) bad("a non-negative integer");
        return v.get<std::uint64_t>();
    }
    double as_double() const {
        if (!v.is_number()) bad("a number");
        return v.get<double>();
    }
    bool as_bool() const {
        if (!v.is_boolean()) bad("true or false");
        return v.get<bool>();
    }
    std::string as_string() const {
        if (!v.is_string()) bad("a quoted string");
        return v.get<std::string>();
    }
    std::vector<std::string> as_strings() const {
        if (!v.is_array()) bad("a list of strings");
        std::vector<std::string> out;
        for (const auto& x : v) {
            if (!x.is_string()) bad("a list of strings");
            out.push_back(x.get<std::string>());
        }
        return out;
    }
    std::vector<int> as_ints() const {
        if (!v.is_array()) bad("a list of integers");
        std::vector<int> out;
        for (const auto& x : v) {
            if (!x.is_number_integer()) bad("a list of integers");
            out.push_back(x.get<int>());
        }
        return out;
    }
    std::vector<double> as_doubles() const {
        if (!v.is_array()) bad("a list of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) bad("a list of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }
};

using Setter = std::function<void(RunConfig&, const Field&)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
    static const std::map<std::string, std::map<std::string, Setter>> table = {
        {"run",
         {
             {"seed", [](RunConfig& c, const Field& f) { c.seed = f.as_u64(); }},
             {"corpus", [](RunConfig& c, const Field& f) { c.corpus = f.as_string(); }},
             {"output_dir", [](RunConfig& c, const Field& f) { c.output_dir = f.as_string(); }},
             {"text_modes", [](RunConfig& c, const Field& f) { c.text_modes = f.as_strings(); }},
             {"folds", [](RunConfig& c, const Field& f) { c.folds = f.as_string(); }},
             {"num_folds", [](RunConfig& c, const Field& f) { c.num_folds = static_cast<int>(f.as_int()); }},
             {"size_threshold",
              [](RunConfig& c, const Field& f) {
                  if (f.v.is_string() && f.v.get<std::string>() == "none") {
                      c.size_threshold.reset();
                  } else {
                      c.size_threshold = f.as_double();
                  }
              }},
             {"deterministic", [](RunConfig& c, const Field& f) { c.deterministic = f.as_bool(); }},
             {"logit_baseline", [](RunConfig& c, const Field& f) { c.logit_baseline = f.as_bool(); }},
             {"heatmaps", [](RunConfig& c, const Field& f) { c.heatmaps = static_cast<int>(f.as_int()); }},
         }},
        {"pipeline",
         {
             {"stemmer", [](RunConfig& c, const Field& f) { c.stemmer = f.as_string(); }},
             {"language", [](RunConfig& c, const Field& f) { c.language = f.as_string(); }},
             {"stopwords_file", [](RunConfig& c, const Field& f) { c.stopwords_file = f.as_string(); }},
             {"entity_dictionary_file", [](RunConfig& c, const Field& f) { c.entity_dictionary_file = f.as_string(); }},
             {"min_count", [](RunConfig& c, const Field& f) { c.min_count = f.as_u64(); }},
             {"entity_min_observations",
              [](RunConfig& c, const Field& f) { c.entity_min_observations = f.as_u64(); }},
             {"entity_capitalized_ratio",
              [](RunConfig& c, const Field& f) { c.entity_capitalized_ratio = f.as_double(); }},
         }},
        {"embeddings",
         {
             {"pretrained_path", [](RunConfig& c, const Field& f) { c.pretrained_path = f.as_string(); }},
             {"stem_pretrained_tokens", [](RunConfig& c, const Field& f) { c.stem_pretrained_tokens = f.as_bool(); }},
             {"train", [](RunConfig& c, const Field& f) { c.train_embeddings = f.as_bool(); }},
             {"window", [](RunConfig& c, const Field& f) { c.skipgram.window = static_cast<int>(f.as_int()); }},
             {"negatives", [](RunConfig& c, const Field& f) { c.skipgram.negatives = static_cast<int>(f.as_int()); }},
             {"subsample_threshold",
              [](RunConfig& c, const Field& f) { c.skipgram.subsample_threshold = f.as_double(); }},
             {"epochs", [](RunConfig& c, const Field& f) { c.skipgram.epochs = static_cast<int>(f.as_int()); }},
             {"learning_rate", [](RunConfig& c, const Field& f) { c.skipgram.learning_rate = f.as_double(); }},
             {"noise_exponent", [](RunConfig& c, const Field& f) { c.skipgram.noise_exponent = f.as_double(); }},
         }},
        {"network",
         {
             {"k", [](RunConfig& c, const Field& f) { c.network.block_size = static_cast<int>(f.as_int()); }},
             {"gamma", [](RunConfig& c, const Field& f) { c.network.filter_width = static_cast<int>(f.as_int()); }},
             {"m", [](RunConfig& c, const Field& f) { c.network.num_filters = static_cast<int>(f.as_int()); }},
             {"tau", [](RunConfig& c, const Field& f) { c.network.pool_size = static_cast<int>(f.as_int()); }},
             {"d", [](RunConfig& c, const Field& f) { c.network.cell_size = static_cast<int>(f.as_int()); }},
             {"v", [](RunConfig& c, const Field& f) { c.network.embedding_dim = static_cast<int>(f.as_int()); }},
             {"hidden1", [](RunConfig& c, const Field& f) { c.network.hidden1 = static_cast<int>(f.as_int()); }},
             {"hidden2", [](RunConfig& c, const Field& f) { c.network.hidden2 = static_cast<int>(f.as_int()); }},
             {"learning_rate", [](RunConfig& c, const Field& f) { c.network.learning_rate = f.as_double(); }},
             {"batch_size", [](RunConfig& c, const Field& f) { c.network.batch_size = static_cast<int>(f.as_int()); }},
             {"max_epochs", [](RunConfig& c, const Field& f) { c.network.max_epochs = static_cast<int>(f.as_int()); }},
             {"validation_fraction",
              [](RunConfig& c, const Field& f) { c.network.validation_fraction = f.as_double(); }},
             {"patience", [](RunConfig& c, const Field& f) { c.network.patience = static_cast<int>(f.as_int()); }},
             {"adam_beta1", [](RunConfig& c, const Field& f) { c.network.adam_beta1 = f.as_double(); }},
             {"adam_beta2", [](RunConfig& c, const Field& f) { c.network.adam_beta2 = f.as_double(); }},
             {"adam_epsilon", [](RunConfig& c, const Field& f) { c.network.adam_epsilon = f.as_double(); }},
             {"fine_tune_embeddings",
              [](RunConfig& c, const Field& f) { c.network.fine_tune_embeddings = f.as_bool(); }},
             {"forget_bias", [](RunConfig& c, const Field& f) { c.network.forget_bias = f.as_double(); }},
         }},
        {"data",
         {
             {"winsor_low", [](RunConfig& c, const Field& f) { c.encoder.low_quantile = f.as_double(); }},
             {"winsor_high", [](RunConfig& c, const Field& f) { c.encoder.high_quantile = f.as_double(); }},
             {"standardize", [](RunConfig& c, const Field& f) { c.encoder.standardize = f.as_bool(); }},
         }},
        {"baselines",
         {
             {"logit_l2", [](RunConfig& c, const Field& f) { c.logit_l2 = f.as_double(); }},
         }},
        {"synth",
         {
             {"n_firms", [](RunConfig& c, const Field& f) { c.synth.n_firms = f.as_u64(); }},
             {"first_year", [](RunConfig& c, const Field& f) { c.synth.first_year = static_cast<int>(f.as_int()); }},
             {"last_year", [](RunConfig& c, const Field& f) { c.synth.last_year = static_cast<int>(f.as_int()); }},
             {"max_years_per_firm",
              [](RunConfig& c, const Field& f) { c.synth.max_years_per_firm = static_cast<int>(f.as_int()); }},
             {"distress_rate", [](RunConfig& c, const Field& f) { c.synth.distress_rate = f.as_double(); }},
             {"signal_strength", [](RunConfig& c, const Field& f) { c.synth.signal_strength = f.as_double(); }},
             {"tabular_signal_strength",
              [](RunConfig& c, const Field& f) { c.synth.tabular_signal_strength = f.as_double(); }},
             {"distress_pool", [](RunConfig& c, const Field& f) { c.synth.distress_pool = f.as_strings(); }},
             {"neutral_pool", [](RunConfig& c, const Field& f) { c.synth.neutral_pool = f.as_strings(); }},
         }},
        {"grid",
         {
             {"k", [](RunConfig& c, const Field& f) { c.grid.block_sizes = f.as_ints(); }},
             {"m", [](RunConfig& c, const Field& f) { c.grid.num_filters = f.as_ints(); }},
             {"tau", [](RunConfig& c, const Field& f) { c.grid.pool_sizes = f.as_ints(); }},
             {"d", [](RunConfig& c, const Field& f) { c.grid.cell_sizes = f.as_ints(); }},
             {"learning_rate", [](RunConfig& c, const Field& f) { c.grid.learning_rates = f.as_doubles(); }},
             {"gamma_ratio", [](RunConfig& c, const Field& f) { c.grid.filter_ratio = f.as_double(); }},
         }},
    };
    return table;
}

std::string render_value(const json& v) {
    if (v.is_string()) {
        std::string out = "\"";
        for (char c : v.get<std::string>()) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\t': out += "\\t"; break;
                default: out += c;
            }
        }
        return out + "\"";
    }
    if (v.is_number_float()) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        std::string s = buf;
        // Keep floats recognisable as floats on reload.
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        return s;
    }
    if (v.is_array()) {
        std::string out = "[";
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + render_value(v[i]);
        return out + "]";
    }
    return v.dump();
}

} // namespace

nlohmann::json parse_config_text(std::string_view text, std::string_view origin) {
    json tree = json::object();
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string where = std::string(origin) + ":" + std::to_string(line_no);
        const std::string stripped = strip_comment(raw);
        const std::string_view line = trim(stripped);
        if (line.empty()) continue;
        if (line.front() == '[') {
            require(line.back() == ']' && line.size() > 2, ErrorKind::config, where + ": malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!tree.contains(section)) tree[section] = json::object();
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string_view::npos, ErrorKind::config, where + ": expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        require(!key.empty(), ErrorKind::config, where + ": empty key");
        require(!section.empty(), ErrorKind::config, where + ": key '" + key + "' appears before any [section]");
        require(!tree[section].contains(key), ErrorKind::config,
                where + ": duplicate key '" + section + "." + key + "'");
        tree[section][key] = ValueParser(line.substr(eq + 1), where).parse_all();
    }
    return tree;
}

std::vector<NetworkConfig> grid_cells(const GridSpec& grid, const NetworkConfig& base) {
    std::vector<NetworkConfig> out;
    for (int k : grid.block_sizes) {
        for (int m : grid.num_filters) {
            for (int tau : grid.pool_sizes) {
                for (int d : grid.cell_sizes) {
                    for (double lr : grid.learning_rates) {
                        NetworkConfig c = base;
                        c.block_size = k;
                        c.filter_width = static_cast<int>(k * grid.filter_ratio);
                        c.num_filters = m;
                        c.pool_size = tau;
                        c.cell_size = d;
                        c.learning_rate = lr;
                        out.push_back(c);
                    }
                }
            }
        }
    }
    return out;
}

RunConfig RunConfig::from_tree(const nlohmann::json& tree) {
    RunConfig c;
    c.synth = SyntheticCorpusSpec::with_default_pools();
    require(tree.is_object(), ErrorKind::config, "config root must be a table of sections");
    const auto& table = setters();
    for (const auto& [section, entries] : tree.items()) {
        const auto sec = table.find(section);
        require(sec != table.end(), ErrorKind::config, "unknown config section [" + section + "]");
        for (const auto& [key, value] : entries.items()) {
            const auto setter = sec->second.find(key);
            require(setter != sec->second.end(), ErrorKind::config, "unknown config key '" + section + "." + key + "'");
            setter->second(c, Field{value, section + "." + key});
        }
    }
    c.validate();
    return c;
}

RunConfig RunConfig::parse(std::string_view text) { return from_tree(parse_config_text(text)); }

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::config, "cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_tree(parse_config_text(buf.str(), path.string()));
}

nlohmann::json RunConfig::to_tree() const {
    json t;
    t["run"] = {{"seed", seed},
                {"corpus", corpus},
                {"output_dir", output_dir},
                {"text_modes", text_modes},
                {"folds", folds},
                {"num_folds", num_folds},
                {"size_threshold", size_threshold ? json(*size_threshold) : json("none")},
                {"deterministic", deterministic},
                {"logit_baseline", logit_baseline},
                {"heatmaps", heatmaps}};
    t["pipeline"] = {{"stemmer", stemmer},
                     {"language", language},
                     {"stopwords_file", stopwords_file},
                     {"entity_dictionary_file", entity_dictionary_file},
                     {"min_count", min_count},
                     {"entity_min_observations", entity_min_observations},
                     {"entity_capitalized_ratio", entity_capitalized_ratio}};
    t["embeddings"] = {{"pretrained_path", pretrained_path},
                       {"stem_pretrained_tokens", stem_pretrained_tokens},
                       {"train", train_embeddings},
                       {"window", skipgram.window},
                       {"negatives", skipgram.negatives},
                       {"subsample_threshold", skipgram.subsample_threshold},
                       {"epochs", skipgram.epochs},
                       {"learning_rate", skipgram.learning_rate},
                       {"noise_exponent", skipgram.noise_exponent}};
    const auto& n = network;
    t["network"] = {{"k", n.block_size},
                    {"gamma", n.filter_width},
                    {"m", n.num_filters},
                    {"tau", n.pool_size},
                    {"d", n.cell_size},
                    {"v", n.embedding_dim},
                    {"hidden1", n.hidden1},
                    {"hidden2", n.hidden2},
                    {"learning_rate", n.learning_rate},
                    {"batch_size", n.batch_size},
                    {"max_epochs", n.max_epochs},
                    {"validation_fraction", n.validation_fraction},
                    {"patience", n.patience},
                    {"adam_beta1", n.adam_beta1},
                    {"adam_beta2", n.adam_beta2},
                    {"adam_epsilon", n.adam_epsilon},
                    {"fine_tune_embeddings", n.fine_tune_embeddings},
                    {"forget_bias", n.forget_bias}};
    t["data"] = {{"winsor_low", encoder.low_quantile},
                 {"winsor_high", encoder.high_quantile},
                 {"standardize", encoder.standardize}};
    t["baselines"] = {{"logit_l2", logit_l2}};
    t["synth"] = {{"n_firms", synth.n_firms},
                  {"first_year", synth.first_year},
                  {"last_year", synth.last_year},
                  {"max_years_per_firm", synth.max_years_per_firm},
                  {"distress_rate", synth.distress_rate},
                  {"signal_strength", synth.signal_strength},
                  {"tabular_signal_strength", synth.tabular_signal_strength},
                  {"distress_pool", synth.distress_pool},
                  {"neutral_pool", synth.neutral_pool}};
    t["grid"] = {{"k", grid.block_sizes},
                 {"m", grid.num_filters},
                 {"tau", grid.pool_sizes},
                 {"d", grid.cell_sizes},
                 {"learning_rate", grid.learning_rates},
                 {"gamma_ratio", grid.filter_ratio}};
    return t;
}

std::string RunConfig::to_text() const {
    const json tree = to_tree();
    std::string out;
    for (const char* section : {"run", "pipeline", "embeddings", "network", "data", "baselines", "synth", "grid"}) {
        out += std::string("[") + section + "]\n";
        for (const auto& [key, value] : tree.at(section).items()) out += key + " = " + render_value(value) + "\n";
        out += "\n";
    }
    return out;
}

NetworkConfig RunConfig::network_for(std::string_view text_mode) const {
    NetworkConfig c = network;
    c.text_mode = parse_text_mode(text_mode);
    c.seed = derive_seed(seed, "network/" + std::string(text_mode));
    return c;
}

void RunConfig::validate() const {
    auto check = [](bool ok, const std::string& msg) { require(ok, ErrorKind::config, msg); };
    check(!text_modes.empty(), "run.text_modes must list at least one mode");
    for (const auto& m : text_modes) network_for(m).validate();
    parse_fold_strategy(folds);
    check(num_folds >= 2, "run.num_folds must be >= 2");
    check(heatmaps >= 0, "run.heatmaps must be >= 0");
    check(!size_threshold || std::isfinite(*size_threshold), "run.size_threshold must be finite");
    make_stemmer(stemmer);
    check(min_count >= 1, "pipeline.min_count must be >= 1");
    check(entity_capitalized_ratio > 0.0 && entity_capitalized_ratio <= 1.0,
          "pipeline.entity_capitalized_ratio must lie in (0, 1]");
    check(skipgram.window >= 1, "embeddings.window must be >= 1");
    check(skipgram.negatives >= 1, "embeddings.negatives must be >= 1");
    check(skipgram.epochs >= 0, "embeddings.epochs must be >= 0");
    check(skipgram.learning_rate > 0.0, "embeddings.learning_rate must be positive");
    check(encoder.low_quantile >= 0.0 && encoder.low_quantile < encoder.high_quantile && encoder.high_quantile <= 1.0,
          "data.winsor_low and data.winsor_high must satisfy 0 <= low < high <= 1");
    check(logit_l2 >= 0.0, "baselines.logit_l2 must be >= 0");
    check(synth.first_year <= synth.last_year, "synth.first_year must not exceed synth.last_year");
    check(synth.distress_rate >= 0.0 && synth.distress_rate <= 1.0, "synth.distress_rate must lie in [0, 1]");
    check(synth.signal_strength >= 0.0 && synth.signal_strength <= 1.0, "synth.signal_strength must lie in [0, 1]");
    check(grid.filter_ratio > 0.0 && grid.filter_ratio < 1.0, "grid.gamma_ratio must lie in (0, 1)");
}

} // namespace textrisk
