#include "textrisk/baselines.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "textrisk/error.hpp"
#include "textrisk/network.hpp"

namespace textrisk {

namespace {

void check_inputs(std::span<const std::vector<double>> X, std::span<const double> y) {
    require(!X.empty(), ErrorKind::data, "logit: no training rows");
    require(X.size() == y.size(), ErrorKind::data, "logit: feature rows and labels differ in count");
    const std::size_t p = X.front().size();
    for (std::size_t i = 0; i < X.size(); ++i) {
        require(X[i].size() == p, ErrorKind::data, "logit: row " + std::to_string(i) + " has inconsistent width");
        for (double v : X[i]) {
            require(std::isfinite(v), ErrorKind::data, "logit: non-finite feature in row " + std::to_string(i));
        }
        require(y[i] == 0.0 || y[i] == 1.0, ErrorKind::data, "logit: labels must be 0 or 1");
    }
}

double objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double l2) {
    const Eigen::VectorXd eta = A * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll -= bce_with_logit(eta[i], y[i]);
    return ll - 0.5 * l2 * beta.tail(beta.size() - 1).squaredNorm();
}

bool separates(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        if ((y[i] > 0.5) != (eta[i] > 0.0) || eta[i] == 0.0) return false;
    }
    return true;
}

} // namespace

LogitModel fit_logit(std::span<const std::vector<double>> X, std::span<const double> y, const LogitOptions& options,
                     std::vector<std::string> feature_names) {
    require(options.l2 >= 0.0 && std::isfinite(options.l2), ErrorKind::config, "logit: l2 must be >= 0");
    require(options.max_iterations >= 1, ErrorKind::config, "logit: max_iterations must be >= 1");
    check_inputs(X, y);
    const auto n = static_cast<Eigen::Index>(X.size());
    const auto p = static_cast<Eigen::Index>(X.front().size());
    require(feature_names.empty() || static_cast<Eigen::Index>(feature_names.size()) == p, ErrorKind::data,
            "logit: feature name count differs from feature width");

    LogitModel model;
    model.l2_penalty = options.l2;
    model.feature_names = std::move(feature_names);
    model.coefficients.assign(static_cast<std::size_t>(p), 0.0);

    double positives = 0.0;
    for (double v : y) positives += v;
    if (positives == 0.0 || positives == static_cast<double>(n)) {
        const double rate = (positives + 0.5) / (static_cast<double>(n) + 1.0);
        model.intercept = std::log(rate / (1.0 - rate));
        return model;
    }

    // Design matrix with a leading intercept column.
    Eigen::MatrixXd A(n, p + 1);
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) A(i, j + 1) = X[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        yv[i] = y[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p + 1, options.l2);
    penalty[0] = 0.0;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    double current = objective(A, yv, beta, options.l2);
    model.objective_trace.push_back(current);
    bool converged = false;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd eta = A * beta;
        if (options.l2 == 0.0 && separates(eta, yv)) {
            fail(ErrorKind::numeric, "logit: data are perfectly separable and l2 = 0; set l2 > 0");
        }
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = sigmoid(eta[i]);
            w[i] = mu[i] * (1.0 - mu[i]);
        }
        const Eigen::VectorXd grad = A.transpose() * (yv - mu) - penalty.cwiseProduct(beta);
        if (grad.norm() < options.tolerance) {
            converged = true;
            break;
        }
        Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
        H.diagonal() += penalty;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            step = ldlt.solve(grad);
        } else {
            step = H.completeOrthogonalDecomposition().solve(grad);
        }
        require(step.allFinite(), ErrorKind::numeric, "logit: Newton step is not finite");

        double scale = 1.0;
        Eigen::VectorXd next = beta + step;
        double value = objective(A, yv, next, options.l2);
        for (int halvings = 0; !(value >= current) && halvings < 50; ++halvings) {
            scale *= 0.5;
            next = beta + scale * step;
            value = objective(A, yv, next, options.l2);
        }
        if (!(value >= current)) {
            converged = true;  // no ascent direction left at machine precision
            break;
        }
        const double change = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        current = value;
        model.objective_trace.push_back(current);
        model.iterations = iter + 1;
        if (change < 1e-14 * (1.0 + beta.cwiseAbs().maxCoeff())) {
            converged = true;
            break;
        }
    }
    require(beta.allFinite(), ErrorKind::numeric, "logit: coefficients diverged");
    if (!converged && options.l2 == 0.0 && separates(A * beta, yv)) {
        fail(ErrorKind::numeric, "logit: data are perfectly separable and l2 = 0; set l2 > 0");
    }
    model.intercept = beta[0];
    for (Eigen::Index j = 0; j < p; ++j) model.coefficients[static_cast<std::size_t>(j)] = beta[j + 1];
    return model;
}

double logit_objective(std::span<const std::vector<double>> X, std::span<const double> y, double intercept,
                       std::span<const double> coefficients, double l2) {
    double ll = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double eta = intercept;
        for (std::size_t j = 0; j < coefficients.size(); ++j) eta += coefficients[j] * X[i][j];
        ll -= bce_with_logit(eta, y[i]);
    }
    double sq = 0.0;
    for (double b : coefficients) sq += b * b;
    return ll - 0.5 * l2 * sq;
}

double predict_logit(const LogitModel& model, std::span<const double> x) {
    require(x.size() == model.coefficients.size(), ErrorKind::data,
            "logit: expected " + std::to_string(model.coefficients.size()) + " features, got " +
                std::to_string(x.size()));
    double eta = model.intercept;
    for (std::size_t j = 0; j < x.size(); ++j) eta += model.coefficients[j] * x[j];
    return sigmoid(eta);
}

std::vector<double> predict_logit(const LogitModel& model, std::span<const std::vector<double>> X) {
    std::vector<double> out;
    out.reserve(X.size());
    for (const auto& row : X) out.push_back(predict_logit(model, row));
    return out;
}

nlohmann::json LogitModel::to_json() const {
    return nlohmann::json{{"format_version", 1},
                          {"coefficients", coefficients},
                          {"intercept", intercept},
                          {"l2_penalty", l2_penalty},
                          {"feature_names", feature_names},
                          {"iterations", iterations}};
}

LogitModel LogitModel::from_json(const nlohmann::json& j) {
    LogitModel m;
    try {
        require(j.at("format_version").get<int>() == 1, ErrorKind::data, "logit model: unsupported format_version");
        m.coefficients = j.at("coefficients").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.l2_penalty = j.at("l2_penalty").get<double>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.iterations = j.at("iterations").get<int>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("logit model JSON: ") + e.what());
    }
    return m;
}

} // namespace textrisk
