#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles/statistics.hpp"
#include "support/generators.hpp"
#include "textrisk/baselines.hpp"
#include "textrisk/error.hpp"
#include "textrisk/network.hpp"

using namespace textrisk;

TEST_CASE("logit: monotone one-dimensional fit") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
        const double x = i % 2 == 0 ? -1.0 : 1.0;
        X.push_back({x});
        y.push_back(x > 0 ? 1.0 : 0.0);
    }
    LogitOptions opt;
    opt.l2 = 0.1;
    const auto m = fit_logit(X, y, opt);
    CHECK(m.coefficients[0] > 0.0);

    opt.l2 = 0.0;
    try {
        fit_logit(X, y, opt);
        FAIL("expected a separation error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("l2") != std::string::npos);
    }
}

TEST_CASE("logit: single-class labels give the smoothed base rate") {
    std::vector<std::vector<double>> X{{0.1, 2.0}, {-1.0, 0.5}, {3.0, -2.0}, {0.0, 0.0}};
    const std::vector<double> y(4, 0.0);
    LogitOptions opt;
    opt.l2 = 1.0;
    const auto m = fit_logit(X, y, opt);
    for (double b : m.coefficients) CHECK(b == 0.0);
    const double p = 0.5 / 5.0;
    CHECK(m.intercept == doctest::Approx(std::log(p / (1 - p))));
    CHECK(m.intercept < 0.0);
}

TEST_CASE("logit: matches a Nelder-Mead likelihood oracle") {
    for (int c = 0; c < 10; ++c) {
        auto rng = Rng::stream(31, "logit-oracle/" + std::to_string(c));
        std::vector<std::vector<double>> X;
        for (int i = 0; i < 8; ++i) X.push_back(gen::normals(rng, 2));
        const auto y = gen::labels(rng, 8);
        const double l2 = 0.5;
        LogitOptions opt;
        opt.l2 = l2;
        const auto m = fit_logit(X, y, opt);
        const auto theta = oracle::logit_fit_nelder_mead(X, y, l2);
        CHECK(std::abs(m.intercept - theta[0]) < 1e-4);
        CHECK(std::abs(m.coefficients[0] - theta[1]) < 1e-4);
        CHECK(std::abs(m.coefficients[1] - theta[2]) < 1e-4);
    }
}

TEST_CASE("logit: objective trace never decreases and large l2 shrinks toward the base rate") {
    auto rng = Rng::stream(32, "logit-trace");
    std::vector<std::vector<double>> X;
    for (int i = 0; i < 60; ++i) X.push_back(gen::normals(rng, 3));
    std::vector<double> y;
    for (const auto& x : X) y.push_back(rng.bernoulli(sigmoid(1.5 * x[0] - x[2])) ? 1.0 : 0.0);
    const auto m = fit_logit(X, y, {});
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i) CHECK(m.objective_trace[i] >= m.objective_trace[i - 1]);

    double prev_norm = 1e300;
    const double base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    for (double l2 : {1.0, 100.0, 1e4, 1e7}) {
        LogitOptions opt;
        opt.l2 = l2;
        const auto f = fit_logit(X, y, opt);
        double norm = 0.0;
        for (double b : f.coefficients) norm += b * b;
        CHECK(norm < prev_norm);
        prev_norm = norm;
        if (l2 == 1e7) CHECK(f.intercept == doctest::Approx(std::log(base / (1 - base))).epsilon(1e-3));
    }
}

TEST_CASE("logit prediction") {
    LogitModel zero;
    zero.coefficients = {0.0, 0.0};
    const std::vector<std::vector<double>> X{{1.0, 2.0}, {-3.0, 4.0}};
    for (double p : predict_logit(zero, X)) CHECK(p == 0.5);

    LogitModel m;
    m.coefficients = {0.5, -2.0};
    m.intercept = 0.25;
    const std::vector<double> x{1.0, 0.5};
    CHECK(predict_logit(m, std::span<const double>(x)) == doctest::Approx(1.0 / (1.0 + std::exp(-(0.25 + 0.5 - 1.0)))));
    double last = 0.0;
    for (double v = -5.0; v <= 5.0; v += 0.5) {
        const std::vector<double> row{v, 0.5};
        const double p = predict_logit(m, std::span<const double>(row));
        CHECK(p >= last);
        last = p;
    }
    CHECK_THROWS_AS(predict_logit(m, std::span<const double>(std::vector<double>{1.0})), Error);

    const auto back = LogitModel::from_json(m.to_json());
    CHECK(back.coefficients == m.coefficients);
    CHECK(back.intercept == m.intercept);
}
