#include "textrisk/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "textrisk/error.hpp"
#include "textrisk/random.hpp"

namespace textrisk {

const std::array<const char*, kNumContinuous> kContinuousFeatureNames{
    "accounts_payable",
    "accounts_receivable",
    "change_in_log_size",
    "corporation_tax",
    "current_assets",
    "deferred_tax",
    "depreciation",
    "ebit",
    "equity_to_invested_capital",
    "equity",
    "expected_dividends",
    "financial_assets",
    "financial_income",
    "financing_costs",
    "fixed_costs",
    "industry_avg_net_profit",
    "interest_coverage_ratio",
    "inventory",
    "invested_capital",
    "land_and_buildings",
    "liquid_assets",
    "log_age",
    "log_size",
    "long_term_bank_debt",
    "long_term_debt",
    "long_term_mortgage_debt",
    "net_profit",
    "other_operating_expenses",
    "other_receivables",
    "other_short_debts",
    "personnel_costs",
    "prepayments",
    "provisions",
    "quick_ratio",
    "receivables_from_related_parties",
    "relative_debt_change",
    "retained_earnings",
    "return_on_equity",
    "short_term_bank_debt",
    "short_term_mortgage_debt",
    "tangible_fixed_assets",
    "tax_expenses",
    "total_receivables",
    "auxiliary_continuous",
};

const std::array<const char*, kNumCategorical> kCategoricalFeatureNames{
    "has_prior_distress", "is_private_limited", "large_debt_change", "negative_equity", "region", "sector",
};

namespace {

constexpr std::size_t kLogSizeIndex = 22;
constexpr std::size_t kLogAgeIndex = 21;
constexpr std::size_t kInformativeFeatures = 12;

const std::set<std::string> kRecordFields{
    "firm_id", "year", "continuous", "categorical", "auditor_text", "management_text", "distressed", "firm_size",
};

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

} // namespace

std::string FirmYearRecord::record_id() const { return firm_id + "_" + std::to_string(year); }

void validate_record(const FirmYearRecord& r) {
    const std::string who = "record " + r.record_id();
    require(!r.firm_id.empty(), ErrorKind::data, "record with empty firm_id");
    require(r.continuous.size() == kNumContinuous, ErrorKind::data,
            who + ": expected 44 continuous features, got " + std::to_string(r.continuous.size()));
    require(r.categorical.size() == kNumCategorical, ErrorKind::data,
            who + ": expected 6 categorical features, got " + std::to_string(r.categorical.size()));
    require(std::isfinite(r.firm_size) && r.firm_size > 0.0, ErrorKind::data, who + ": firm_size must be positive");
    require(!is_blank(r.auditor_text), ErrorKind::data, who + ": missing auditor_text");
    require(!is_blank(r.management_text), ErrorKind::data, who + ": missing management_text");
}

nlohmann::json record_to_json(const FirmYearRecord& r) {
    nlohmann::json out = {
        {"firm_id", r.firm_id},
        {"year", r.year},
        {"continuous", r.continuous},
        {"categorical", r.categorical},
        {"auditor_text", r.auditor_text},
        {"management_text", r.management_text},
        {"distressed", r.distressed},
        {"firm_size", r.firm_size},
    };
    return out;
}

FirmYearRecord record_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorKind::data, "corpus line is not a JSON object");
    for (const auto& [key, _] : j.items()) {
        require(kRecordFields.count(key) == 1, ErrorKind::data, "unknown field '" + key + "'");
    }
    for (const auto& key : kRecordFields) {
        require(j.contains(key), ErrorKind::data, "missing field '" + key + "'");
    }
    FirmYearRecord r;
    try {
        r.firm_id = j.at("firm_id").get<std::string>();
        r.year = j.at("year").get<int>();
        r.continuous = j.at("continuous").get<std::vector<double>>();
        r.categorical = j.at("categorical").get<std::vector<std::string>>();
        r.auditor_text = j.at("auditor_text").get<std::string>();
        r.management_text = j.at("management_text").get<std::string>();
        r.distressed = j.at("distressed").get<bool>();
        r.firm_size = j.at("firm_size").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("malformed record: ") + e.what());
    }
    validate_record(r);
    return r;
}

std::vector<FirmYearRecord> parse_corpus(std::istream& in) {
    std::vector<FirmYearRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::data, "corpus line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            fail(e.kind(), "corpus line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<FirmYearRecord> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::data, "cannot open corpus file " + path.string());
    return parse_corpus(in);
}

std::string corpus_to_jsonl(std::span<const FirmYearRecord> records) {
    std::string out;
    for (const auto& r : records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const FirmYearRecord> records) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write corpus file " + path.string());
    out << corpus_to_jsonl(records);
}

// ---------------------------------------------------------------------------
// Feature encoding

double quantile_sorted(std::span<const double> sorted, double q) {
    require(!sorted.empty(), ErrorKind::data, "quantile of empty column");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::size_t FeatureEncoder::output_size() const {
    std::size_t n = winsor_low.size();
    for (std::size_t f = 0; f < category_values.size(); ++f) n += categorical_width(f);
    return n;
}

std::vector<std::string> FeatureEncoder::output_names() const {
    std::vector<std::string> names(kContinuousFeatureNames.begin(), kContinuousFeatureNames.end());
    for (std::size_t f = 0; f < category_values.size(); ++f) {
        for (const auto& v : category_values[f]) names.push_back(std::string(kCategoricalFeatureNames[f]) + "=" + v);
        names.push_back(std::string(kCategoricalFeatureNames[f]) + "=<unseen>");
    }
    return names;
}

nlohmann::json FeatureEncoder::to_json() const {
    return {
        {"format_version", kFormatVersion},
        {"low_quantile", options.low_quantile},
        {"high_quantile", options.high_quantile},
        {"standardize", options.standardize},
        {"winsor_low", winsor_low},
        {"winsor_high", winsor_high},
        {"mean", mean},
        {"stddev", stddev},
        {"category_values", category_values},
    };
}

FeatureEncoder FeatureEncoder::from_json(const nlohmann::json& j) {
    require(j.value("format_version", 0) == kFormatVersion, ErrorKind::data, "unsupported encoder format_version");
    FeatureEncoder e;
    try {
        e.options.low_quantile = j.at("low_quantile").get<double>();
        e.options.high_quantile = j.at("high_quantile").get<double>();
        e.options.standardize = j.at("standardize").get<bool>();
        e.winsor_low = j.at("winsor_low").get<std::vector<double>>();
        e.winsor_high = j.at("winsor_high").get<std::vector<double>>();
        e.mean = j.at("mean").get<std::vector<double>>();
        e.stddev = j.at("stddev").get<std::vector<double>>();
        e.category_values = j.at("category_values").get<std::vector<std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::data, std::string("malformed encoder: ") + ex.what());
    }
    return e;
}

FeatureEncoder fit_encoder(std::span<const FirmYearRecord> records, const EncoderOptions& options) {
    require(!records.empty(), ErrorKind::data, "no training rows");
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        require(rec.continuous.size() == kNumContinuous, ErrorKind::data,
                "row " + std::to_string(r) + " has " + std::to_string(rec.continuous.size()) + " continuous features");
        require(rec.categorical.size() == kNumCategorical, ErrorKind::data,
                "row " + std::to_string(r) + " has " + std::to_string(rec.categorical.size()) + " categorical features");
        for (std::size_t c = 0; c < kNumContinuous; ++c) {
            require(std::isfinite(rec.continuous[c]), ErrorKind::data,
                    "non-finite value at row " + std::to_string(r) + " (" + rec.record_id() + "), column " +
                        std::to_string(c) + " (" + kContinuousFeatureNames[c] + ")");
        }
    }

    FeatureEncoder enc;
    enc.options = options;
    const std::size_t n = records.size();
    std::vector<double> column(n);
    for (std::size_t c = 0; c < kNumContinuous; ++c) {
        for (std::size_t r = 0; r < n; ++r) column[r] = records[r].continuous[c];
        std::sort(column.begin(), column.end());
        const double lo = quantile_sorted(column, options.low_quantile);
        const double hi = quantile_sorted(column, options.high_quantile);
        double sum = 0.0;
        for (double& x : column) {
            x = std::clamp(x, lo, hi);
            sum += x;
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (double x : column) ss += (x - mean) * (x - mean);
        double sd = std::sqrt(ss / static_cast<double>(n));
        if (!(sd > 1e-12)) sd = 1.0;
        enc.winsor_low.push_back(lo);
        enc.winsor_high.push_back(hi);
        enc.mean.push_back(mean);
        enc.stddev.push_back(sd);
    }
    for (std::size_t f = 0; f < kNumCategorical; ++f) {
        std::set<std::string> seen;
        for (const auto& rec : records) seen.insert(rec.categorical[f]);
        enc.category_values.emplace_back(seen.begin(), seen.end());
    }
    return enc;
}

std::vector<double> encode(const FirmYearRecord& record, const FeatureEncoder& enc) {
    std::vector<double> out;
    out.reserve(enc.output_size());
    for (std::size_t c = 0; c < enc.winsor_low.size(); ++c) {
        double x = std::clamp(record.continuous[c], enc.winsor_low[c], enc.winsor_high[c]);
        if (enc.options.standardize) x = (x - enc.mean[c]) / enc.stddev[c];
        out.push_back(x);
    }
    for (std::size_t f = 0; f < enc.category_values.size(); ++f) {
        const auto& values = enc.category_values[f];
        const std::size_t width = enc.categorical_width(f);
        auto it = std::lower_bound(values.begin(), values.end(), record.categorical[f]);
        std::size_t hot = values.size();
        if (it != values.end() && *it == record.categorical[f]) hot = static_cast<std::size_t>(it - values.begin());
        for (std::size_t k = 0; k < width; ++k) out.push_back(k == hot ? 1.0 : 0.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

std::vector<std::string> default_distress_pool() {
    return {"bankruptcy", "insolvency", "liquidity", "uncertainty", "doubt",     "deficit",   "shortfall",
            "default",    "arrears",    "overdue",   "covenant",    "breach",    "jeopardy",  "creditors",
            "dissolution", "suspension", "emphasis", "qualified",   "adverse",   "disclaimer", "refinancing",
            "exhausted",  "impairment", "losses",    "negative",    "lender",    "forbearance", "unpaid"};
}

std::vector<std::string> default_neutral_pool() {
    return {"revenue",     "assets",     "statement",   "accounts",    "financial",  "year",        "company",
            "management",  "board",      "auditor",     "opinion",     "audit",      "standards",   "accordance",
            "position",    "results",    "cash",        "flows",       "ended",      "december",    "present",
            "fair",        "view",       "act",         "danish",      "reporting",  "responsibility", "preparation",
            "internal",    "control",    "material",    "misstatement", "error",     "fraud",       "evidence",
            "sufficient",  "appropriate", "basis",      "policies",    "estimates",  "reasonable",  "assurance",
            "procedures",  "judgment",   "consider",    "relevant",    "design",     "circumstances", "purpose",
            "express",     "effectiveness", "evaluate", "presentation", "overall",   "obtain",      "believe",
            "provide",     "review",     "annual",      "report",      "profit",     "equity",      "balance",
            "sheet",       "income",     "expenses",    "employees",   "customers",  "market",      "products",
            "development", "activities", "principal",   "growth",      "expectations", "outlook",   "satisfactory",
            "stable",      "investments", "subsidiary", "shareholders", "dividend",  "meeting",     "approved",
            "general",     "executive",  "director",    "signed",      "date",       "copenhagen",  "aarhus",
            "note",        "measurement", "recognition", "depreciation", "inventory", "receivables", "payables",
            "tax",         "deferred",   "provisions",  "contracts",   "services",   "trade",       "sector",
            "industry",    "competition", "strategy",   "quality",     "supply",     "production",  "sales",
            "export",      "domestic",   "segment",     "volume",      "price",      "margin",      "costs",
            "staff",       "training",   "software",    "equipment",   "property",   "lease",       "rent",
            "insurance",   "pension",    "salary",      "holiday",     "website",    "office",      "branch",
            "customer",    "partner",    "agreement",   "project",     "construction", "consulting", "transport",
            "retail",      "wholesale",  "agriculture", "fishing",     "energy",     "housing",     "digital",
            "climate",     "environment", "knowledge",  "innovation",  "research",   "technology",  "platform"};
}

SyntheticCorpusSpec SyntheticCorpusSpec::with_default_pools() {
    SyntheticCorpusSpec spec;
    spec.distress_pool = default_distress_pool();
    spec.neutral_pool = default_neutral_pool();
    return spec;
}

namespace {

const std::vector<std::string> kFillerWords{"the",  "of",   "and", "to",   "in",  "that", "is",    "for", "on",
                                            "with", "as",   "be",  "has",  "are", "by",   "this",  "an",  "we",
                                            "our",  "from", "at",  "have", "its", "not",  "which", "it",  "a"};

const std::vector<std::string> kFirmNameStems{"Nordhavn", "Skovbo",  "Lindholm", "Vesterby", "Kragelund", "Solvang",
                                              "Havbakke", "Egeskov", "Bjerring", "Fjordvik", "Rosendal",  "Tranekær"};
const std::vector<std::string> kAuditorNames{"Jensen", "Nielsen", "Hansen", "Pedersen", "Andersen",
                                             "Christensen", "Larsen", "Sørensen", "Rasmussen", "Jørgensen"};
const std::vector<std::string> kRegions{"hovedstaden", "midtjylland", "nordjylland", "sjaelland", "syddanmark"};
const std::vector<std::string> kSectors{"construction", "retail",   "manufacturing", "services",
                                        "transport",    "hospitality", "real_estate", "agriculture"};

// Piecewise-linear quantile function through (0, tail_lo), the three quartiles, (1, tail_hi).
double draw_length(Rng& rng, const std::array<double, 3>& q, double tail_lo, double tail_hi) {
    const std::array<double, 5> xs{0.0, 0.25, 0.5, 0.75, 1.0};
    const std::array<double, 5> ys{tail_lo, q[0], q[1], q[2], tail_hi};
    const double u = rng.uniform();
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (u <= xs[i]) {
            const double t = (u - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + t * (ys[i] - ys[i - 1]);
        }
    }
    return tail_hi;
}

std::string random_number(Rng& rng) {
    switch (rng.below(3)) {
        case 0: return std::to_string(2008 + rng.below(10));
        case 1: {
            const auto thousands = 1 + rng.below(999);
            const auto units = rng.below(1000);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%llu.%03llu", static_cast<unsigned long long>(thousands),
                          static_cast<unsigned long long>(units));
            return buf;
        }
        default: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%02llu.%02llu.%llu", static_cast<unsigned long long>(1 + rng.below(28)),
                          static_cast<unsigned long long>(1 + rng.below(12)),
                          static_cast<unsigned long long>(2008 + rng.below(10)));
            return buf;
        }
    }
}

struct TextContext {
    const std::vector<std::string>* neutral;
    const DiscreteSampler* neutral_sampler;
    const std::vector<std::string>* distress;
    std::vector<std::string> entities;
};

// Builds a report of roughly `length` words in sentences. When `passage_len` is
// positive, a contiguous run of distress-pool words is inserted at a random
// word position.
std::string make_text(Rng& rng, const TextContext& ctx, std::size_t length, std::size_t passage_len) {
    std::vector<std::string> words;
    words.reserve(length + passage_len);
    for (std::size_t i = 0; i < length; ++i) {
        const double u = rng.uniform();
        if (u < 0.35) {
            words.push_back(kFillerWords[rng.below(kFillerWords.size())]);
        } else if (u < 0.38) {
            words.push_back(random_number(rng));
        } else if (u < 0.40 && !ctx.entities.empty()) {
            words.push_back(ctx.entities[rng.below(ctx.entities.size())]);
        } else {
            words.push_back((*ctx.neutral)[ctx.neutral_sampler->sample(rng)]);
        }
    }
    if (passage_len > 0) {
        std::vector<std::string> passage;
        for (std::size_t i = 0; i < passage_len; ++i) passage.push_back((*ctx.distress)[rng.below(ctx.distress->size())]);
        const auto at = static_cast<std::ptrdiff_t>(rng.below(words.size() + 1));
        words.insert(words.begin() + at, passage.begin(), passage.end());
    }

    std::string out;
    std::size_t until_stop = 8 + rng.below(9);
    bool sentence_start = true;
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::string w = words[i];
        if (sentence_start && !w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
        if (!out.empty()) out += ' ';
        out += w;
        sentence_start = false;
        if (--until_stop == 0 || i + 1 == words.size()) {
            out += '.';
            sentence_start = true;
            until_stop = 8 + rng.below(9);
        } else if (rng.bernoulli(0.05)) {
            out += ',';
        }
    }
    return out;
}

} // namespace

std::vector<FirmYearRecord> generate_synthetic(const SyntheticCorpusSpec& spec) {
    require(spec.first_year <= spec.last_year, ErrorKind::config, "synthetic corpus: empty year range");
    require(spec.signal_strength >= 0.0 && spec.signal_strength <= 1.0, ErrorKind::config,
            "synthetic corpus: signal_strength must lie in [0,1]");
    require(spec.tabular_signal_strength >= 0.0 && spec.tabular_signal_strength <= 1.0, ErrorKind::config,
            "synthetic corpus: tabular_signal_strength must lie in [0,1]");
    require(spec.distress_rate >= 0.0 && spec.distress_rate <= 1.0, ErrorKind::config,
            "synthetic corpus: distress_rate must lie in [0,1]");
    require(!spec.distress_pool.empty() && !spec.neutral_pool.empty(), ErrorKind::config,
            "synthetic corpus: token pools must be non-empty");
    {
        std::set<std::string> neutral(spec.neutral_pool.begin(), spec.neutral_pool.end());
        for (const auto& w : spec.distress_pool) {
            require(neutral.count(w) == 0, ErrorKind::config,
                    "synthetic corpus: token '" + w + "' appears in both distress and neutral pools");
        }
    }

    // Zipf-like frequencies so that sub-sampling and vocabulary pruning have
    // something to act on.
    std::vector<double> weights(spec.neutral_pool.size());
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = 1.0 / std::pow(static_cast<double>(i + 1), 0.7);
    const DiscreteSampler neutral_sampler(weights);

    const int n_years = spec.last_year - spec.first_year + 1;
    std::vector<FirmYearRecord> out;
    for (std::size_t firm = 0; firm < spec.n_firms; ++firm) {
        char id[32];
        std::snprintf(id, sizeof id, "F%06zu", firm);
        Rng rng = Rng::stream(spec.seed, std::string("firm/") + id);

        const int start = spec.first_year + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_years)));
        int span = spec.last_year - start + 1;
        if (spec.max_years_per_firm > 0) span = std::min(span, spec.max_years_per_firm);
        const std::string region = kRegions[rng.below(kRegions.size())];
        const std::string sector = kSectors[rng.below(kSectors.size())];
        const bool private_limited = rng.bernoulli(0.7);
        const double base_log_size = 15.0 + 1.1 * rng.normal();
        const double age_years = 1.0 + 30.0 * rng.uniform();

        TextContext ctx{&spec.neutral_pool, &neutral_sampler, &spec.distress_pool, {}};
        ctx.entities.push_back(kFirmNameStems[rng.below(kFirmNameStems.size())]);
        ctx.entities.push_back(kAuditorNames[rng.below(kAuditorNames.size())]);

        for (int k = 0; k < span; ++k) {
            FirmYearRecord rec;
            rec.firm_id = id;
            rec.year = start + k;
            rec.distressed = rng.bernoulli(spec.distress_rate);
            const double effect = rec.distressed ? spec.tabular_signal_strength : 0.0;

            rec.firm_size = std::exp(base_log_size + 0.05 * rng.normal());
            rec.continuous.resize(kNumContinuous);
            for (std::size_t c = 0; c < kNumContinuous; ++c) {
                double z = rng.normal();
                if (c < kInformativeFeatures) z += effect * (c % 2 == 0 ? -1.0 : 1.0);
                const double scale = 1.0 + 0.05 * static_cast<double>(c);
                rec.continuous[c] = (c % 3 == 0) ? scale * std::sinh(1.5 * z) : 0.1 * static_cast<double>(c) + scale * z;
            }
            rec.continuous[kLogSizeIndex] = std::log(rec.firm_size);
            rec.continuous[kLogAgeIndex] = std::log(age_years + k);

            rec.categorical = {
                rng.bernoulli(0.03) ? "1" : "0",
                private_limited ? "1" : "0",
                rng.bernoulli(0.1 + 0.3 * effect) ? "1" : "0",
                rng.bernoulli(0.1 + 0.4 * effect) ? "1" : "0",
                region,
                sector,
            };

            const auto aud_len = static_cast<std::size_t>(
                std::lround(draw_length(rng, kAuditorLengthQuartiles, 150.0, 260.0)));
            const auto man_len = static_cast<std::size_t>(
                std::lround(draw_length(rng, kManagementLengthQuartiles, 12.0, 180.0)));
            std::size_t aud_passage = 0;
            std::size_t man_passage = 0;
            if (rec.distressed && rng.bernoulli(spec.signal_strength)) aud_passage = 6 + rng.below(5);
            if (rec.distressed && rng.bernoulli(0.5 * spec.signal_strength)) man_passage = 3 + rng.below(3);
            rec.auditor_text = make_text(rng, ctx, aud_len, aud_passage);
            rec.management_text = make_text(rng, ctx, man_len, man_passage);
            out.push_back(std::move(rec));
            if (out.back().distressed) break;
        }
    }
    return out;
}

} // namespace textrisk
