#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace textrisk {

// Probability that a random positive outscores a random negative, ties counting
// one half. Rank statistic with average ranks, O(n log n).
double auc(std::span<const double> scores, std::span<const double> labels);

// Mean negative Bernoulli log-likelihood, probabilities clamped to [1e-12, 1 - 1e-12].
double log_score(std::span<const double> p_hat, std::span<const double> y);

double mean(std::span<const double> x);
// Sample standard deviation over sqrt(n).
double standard_error(std::span<const double> x);

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

// Two-tailed paired t-test on a - b. Zero-variance differences give p = 1 when
// their mean is zero and p = 0 otherwise.
TTest paired_t_test_detail(std::span<const double> a, std::span<const double> b);
inline double paired_t_test(std::span<const double> a, std::span<const double> b) {
    return paired_t_test_detail(a, b).p;
}

enum class FoldStrategy { by_firm, by_year };

std::string_view to_string(FoldStrategy s);
// Accepts "by-firm" / "by_firm" / "by_firm_k10" and "by-year" / "by_year".
FoldStrategy parse_fold_strategy(std::string_view name);

struct FoldPlan {
    FoldStrategy strategy = FoldStrategy::by_firm;
    std::uint64_t seed = 0;
    int num_folds = 0;
    // Fold id of each record, in record order.
    std::vector<int> assignments;
    // Display label of each fold: its index for by-firm plans, the year for by-year plans.
    std::vector<int> labels;

    std::vector<std::size_t> test_indices(int fold) const;
    std::vector<std::size_t> train_indices(int fold) const;

    nlohmann::json to_json() const;
};

// by_firm: distinct firms (in first-seen order) are shuffled with `seed` and
// dealt round-robin into `num_folds` folds. by_year: one fold per distinct year,
// ascending.
FoldPlan make_folds(std::span<const std::string> firm_ids, std::span<const int> years, FoldStrategy strategy,
                    std::uint64_t seed, int num_folds = 10);

// Out-of-fold predictions of one model, aligned with the record order.
struct PredictionSource {
    std::string name;
    std::vector<double> p_hat;  // NaN marks a missing prediction
};

struct EvalData {
    std::vector<std::string> record_ids;
    std::vector<double> labels;
    std::vector<double> firm_sizes;
};

struct FoldMetrics {
    int fold = 0;
    int label = 0;
    std::size_t n = 0;
    double auc = 0.0;
    double log_score = 0.0;
};

struct ModelSummary {
    std::string name;
    std::vector<FoldMetrics> folds;
    double mean_auc = 0.0;
    double se_auc = 0.0;
    double mean_log_score = 0.0;
    double se_log_score = 0.0;
};

struct Comparison {
    std::string model;
    std::string reference;
    double p_auc = 1.0;
    double p_log_score = 1.0;
};

struct EvalReport {
    std::string strategy;
    std::optional<double> size_threshold;
    std::vector<ModelSummary> models;
    std::vector<Comparison> comparisons;

    const ModelSummary& model(std::string_view name) const;
    // p-value of the AUC difference between two models; 1 when a == b.
    double p_auc(std::string_view a, std::string_view b) const;

    nlohmann::json to_json() const;
    // Plain-text table with one row per model: mean AUC, mean log score and
    // the p-values against each reference model.
    std::string to_table() const;
};

// Scores every model on each fold's held-out records that pass the size
// filter (firm_size > threshold). Comparisons are run for every model against
// each name in `references`; an empty list means every other model.
EvalReport evaluate(std::span<const PredictionSource> models, const FoldPlan& plan, const EvalData& data,
                    std::optional<double> size_threshold = std::nullopt, std::vector<std::string> references = {});

// Prediction-exchange CSV: header "record_id,fold_id,p_hat".
struct ExternalPrediction {
    int fold = 0;
    double p_hat = 0.0;
};
std::map<std::string, ExternalPrediction> read_prediction_csv(const std::filesystem::path& path);
void write_prediction_csv(const std::filesystem::path& path, std::span<const std::string> record_ids,
                          std::span<const int> folds, std::span<const double> p_hat);
// Aligns an exchange file with record order; absent records become NaN.
PredictionSource align_predictions(std::string name, const std::map<std::string, ExternalPrediction>& preds,
                                   std::span<const std::string> record_ids);

} // namespace textrisk
