#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace textrisk {

struct LogitOptions {
    // Ridge penalty on the coefficients; the intercept is never penalized.
    double l2 = 1e-6;
    int max_iterations = 100;
    double tolerance = 1e-8;
};

struct LogitModel {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double l2_penalty = 0.0;
    std::vector<std::string> feature_names;
    int iterations = 0;
    // Penalized log-likelihood after each accepted Newton step, starting at the origin.
    std::vector<double> objective_trace;

    nlohmann::json to_json() const;
    static LogitModel from_json(const nlohmann::json& j);
};

// l2-penalized maximum likelihood by Newton / IRLS with step halving. Labels of
// a single class give zero coefficients and the logit of the smoothed base rate
// (sum(y) + 0.5) / (n + 1).
LogitModel fit_logit(std::span<const std::vector<double>> X, std::span<const double> y, const LogitOptions& options = {},
                     std::vector<std::string> feature_names = {});

double logit_objective(std::span<const std::vector<double>> X, std::span<const double> y, double intercept,
                       std::span<const double> coefficients, double l2);

std::vector<double> predict_logit(const LogitModel& model, std::span<const std::vector<double>> X);
double predict_logit(const LogitModel& model, std::span<const double> x);

} // namespace textrisk
