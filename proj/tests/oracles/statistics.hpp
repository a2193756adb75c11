#pragma once

// Slow, obviously-correct reference implementations for the evaluation and
// baseline modules. None of them share code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace oracle {

// Every positive-negative pair; ties score one half.
inline double auc_pairwise(std::span<const double> s, std::span<const double> y) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1.0) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0.0) continue;
            pairs += 1.0;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

inline double student_t_density(double x, double df) {
    const double logc = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) - 0.5 * std::log(df * M_PI);
    return std::exp(logc - (df + 1.0) / 2.0 * std::log1p(x * x / df));
}

// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 60) {
    const auto step = [&](auto&& self, double lo, double hi, double flo, double fmid, double fhi, double whole,
                          double eps, int left) -> double {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left_area = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right_area = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        const double delta = left_area + right_area - whole;
        if (left <= 0 || std::abs(delta) <= 15.0 * eps) return left_area + right_area + delta / 15.0;
        return self(self, lo, mid, flo, flm, fmid, left_area, eps / 2.0, left - 1) +
               self(self, mid, hi, fmid, frm, fhi, right_area, eps / 2.0, left - 1);
    };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return step(step, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

// Two-tailed p of a paired t-test by integrating the t density over [0, |t|].
inline double paired_t_p_quadrature(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double m = 0.0;
    for (double x : d) m += x;
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : d) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return m == 0.0 ? 1.0 : 0.0;
    const double t = std::abs(m / (sd / std::sqrt(static_cast<double>(n))));
    const double df = static_cast<double>(n - 1);
    // Split the range so each piece is smooth enough for the adaptive rule.
    double area = 0.0;
    double lo = 0.0;
    while (lo < t) {
        const double hi = std::min(t, lo + 1.0);
        area += simpson([df](double x) { return student_t_density(x, df); }, lo, hi, 1e-15);
        lo = hi;
    }
    return std::clamp(1.0 - 2.0 * area, 0.0, 1.0);
}

// Negative l2-penalized log-likelihood; theta = (intercept, coefficients...).
inline double logit_negloglik(const std::vector<double>& theta, std::span<const std::vector<double>> X,
                              std::span<const double> y, double l2) {
    double nll = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double eta = theta[0];
        for (std::size_t j = 0; j < X[i].size(); ++j) eta += theta[j + 1] * X[i][j];
        // log(1 + e^eta) - y * eta, evaluated stably
        const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        nll += softplus - y[i] * eta;
    }
    double pen = 0.0;
    for (std::size_t j = 1; j < theta.size(); ++j) pen += theta[j] * theta[j];
    return nll + 0.5 * l2 * pen;
}

// Plain Nelder-Mead with restarts.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double scale = 1.0, int restarts = 12,
                                       int max_iter = 20000) {
    const std::size_t n = x0.size();
    for (int r = 0; r < restarts; ++r) {
        std::vector<std::vector<double>> simplex(n + 1, x0);
        for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += scale;
        std::vector<double> fv(n + 1);
        for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);
        for (int it = 0; it < max_iter; ++it) {
            std::vector<std::size_t> order(n + 1);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
            std::vector<std::vector<double>> s2;
            std::vector<double> f2;
            for (auto i : order) {
                s2.push_back(simplex[i]);
                f2.push_back(fv[i]);
            }
            simplex = s2;
            fv = f2;
            double spread = 0.0;
            for (std::size_t i = 1; i <= n; ++i) {
                for (std::size_t j = 0; j < n; ++j) spread = std::max(spread, std::abs(simplex[i][j] - simplex[0][j]));
            }
            if (spread < 1e-11 && std::abs(fv[n] - fv[0]) < 1e-15) break;
            std::vector<double> centroid(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
            }
            auto along = [&](double t) {
                std::vector<double> p(n);
                for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (simplex[n][j] - centroid[j]);
                return p;
            };
            const auto xr = along(-1.0);
            const double fr = f(xr);
            if (fr < fv[0]) {
                const auto xe = along(-2.0);
                const double fe = f(xe);
                if (fe < fr) {
                    simplex[n] = xe;
                    fv[n] = fe;
                } else {
                    simplex[n] = xr;
                    fv[n] = fr;
                }
            } else if (fr < fv[n - 1]) {
                simplex[n] = xr;
                fv[n] = fr;
            } else {
                const bool outside = fr < fv[n];
                const auto xc = along(outside ? -0.5 : 0.5);
                const double fc = f(xc);
                if (fc < (outside ? fr : fv[n])) {
                    simplex[n] = xc;
                    fv[n] = fc;
                } else {
                    for (std::size_t i = 1; i <= n; ++i) {
                        for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                        fv[i] = f(simplex[i]);
                    }
                }
            }
        }
        const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
        x0 = simplex[static_cast<std::size_t>(best)];
        scale *= 0.5;
    }
    return x0;
}

inline std::vector<double> logit_fit_nelder_mead(std::span<const std::vector<double>> X, std::span<const double> y,
                                                 double l2) {
    const std::size_t p = X.empty() ? 0 : X[0].size();
    return nelder_mead([&](const std::vector<double>& th) { return logit_negloglik(th, X, y, l2); },
                       std::vector<double>(p + 1, 0.0));
}

} // namespace oracle
