#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace textrisk {

inline constexpr std::size_t kNumContinuous = 44;
inline constexpr std::size_t kNumCategorical = 6;

extern const std::array<const char*, kNumContinuous> kContinuousFeatureNames;
extern const std::array<const char*, kNumCategorical> kCategoricalFeatureNames;

// One annual report. `distressed` means distress within two years of publication.
struct FirmYearRecord {
    std::string firm_id;
    int year = 0;
    std::vector<double> continuous;
    std::vector<std::string> categorical;
    std::string auditor_text;
    std::string management_text;
    bool distressed = false;
    double firm_size = 1.0;

    // Stable identifier used in prediction-exchange files and heatmap names.
    std::string record_id() const;

    bool operator==(const FirmYearRecord&) const = default;
};

// Throws Error(data) naming the record when an invariant is violated.
void validate_record(const FirmYearRecord& record);

nlohmann::json record_to_json(const FirmYearRecord& record);
FirmYearRecord record_from_json(const nlohmann::json& j);

// JSONL corpus. Unknown fields and records missing either text segment are rejected.
std::vector<FirmYearRecord> read_corpus(const std::filesystem::path& path);
std::vector<FirmYearRecord> parse_corpus(std::istream& in);
void write_corpus(const std::filesystem::path& path, std::span<const FirmYearRecord> records);
std::string corpus_to_jsonl(std::span<const FirmYearRecord> records);

struct EncoderOptions {
    double low_quantile = 0.05;
    double high_quantile = 0.95;
    bool standardize = true;

    bool operator==(const EncoderOptions&) const = default;
};

// Linear interpolation between order statistics: position q*(n-1) in the sorted column.
double quantile_sorted(std::span<const double> sorted, double q);

struct FeatureEncoder {
    static constexpr int kFormatVersion = 1;

    EncoderOptions options;
    std::vector<double> winsor_low;
    std::vector<double> winsor_high;
    std::vector<double> mean;
    std::vector<double> stddev;
    // Observed values per categorical feature, in one-hot order. The unseen
    // bucket sits directly after the observed values.
    std::vector<std::vector<std::string>> category_values;

    std::size_t output_size() const;
    std::size_t categorical_width(std::size_t feature) const { return category_values[feature].size() + 1; }
    std::vector<std::string> output_names() const;

    nlohmann::json to_json() const;
    static FeatureEncoder from_json(const nlohmann::json& j);

    bool operator==(const FeatureEncoder&) const = default;
};

FeatureEncoder fit_encoder(std::span<const FirmYearRecord> records, const EncoderOptions& options = {});

// h_num: winsorized (and optionally standardized) continuous values followed by
// the one-hot blocks of each categorical feature.
std::vector<double> encode(const FirmYearRecord& record, const FeatureEncoder& enc);

struct SyntheticCorpusSpec {
    std::size_t n_firms = 1000;
    int first_year = 2013;
    int last_year = 2016;
    // 0 means "until the end of the year range".
    int max_years_per_firm = 0;
    std::vector<std::string> distress_pool;
    std::vector<std::string> neutral_pool;
    double distress_rate = 0.1;
    double signal_strength = 0.9;
    double tabular_signal_strength = 0.3;
    std::uint64_t seed = 0;

    // Fills the token pools with the built-in accounting vocabularies.
    static SyntheticCorpusSpec with_default_pools();
};

std::vector<std::string> default_distress_pool();
std::vector<std::string> default_neutral_pool();

// Empirical quartiles of report lengths in words (25/50/75 %).
inline constexpr std::array<double, 3> kAuditorLengthQuartiles{187, 205, 219};
inline constexpr std::array<double, 3> kManagementLengthQuartiles{37, 54, 83};

std::vector<FirmYearRecord> generate_synthetic(const SyntheticCorpusSpec& spec);

} // namespace textrisk
