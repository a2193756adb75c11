#include "textrisk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "textrisk/error.hpp"
#include "textrisk/random.hpp"

namespace textrisk {

double auc(std::span<const double> scores, std::span<const double> labels) {
    require(scores.size() == labels.size(), ErrorKind::data, "AUC: scores and labels differ in length");
    const std::size_t n = scores.size();
    for (double s : scores) require(!std::isnan(s), ErrorKind::data, "AUC: NaN score");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double positives = 0.0;
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // Ranks i+1 .. j share their average.
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t q = i; q < j; ++q) {
            if (labels[order[q]] > 0.5) {
                positives += 1.0;
                rank_sum += avg;
            }
        }
        i = j;
    }
    const double negatives = static_cast<double>(n) - positives;
    require(positives > 0.0 && negatives > 0.0, ErrorKind::data, "AUC undefined: labels contain a single class");
    return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double log_score(std::span<const double> p_hat, std::span<const double> y) {
    require(p_hat.size() == y.size() && !y.empty(), ErrorKind::data, "log score needs equal, non-empty inputs");
    constexpr double eps = 1e-12;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = std::clamp(p_hat[i], eps, 1.0 - eps);
        total -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
    return total / static_cast<double>(y.size());
}

double mean(std::span<const double> x) {
    require(!x.empty(), ErrorKind::data, "mean of an empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double standard_error(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1)) / std::sqrt(static_cast<double>(x.size()));
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 1000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    fail(ErrorKind::numeric, "incomplete beta continued fraction did not converge");
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    require(a > 0.0 && b > 0.0, ErrorKind::numeric, "incomplete beta needs positive shape parameters");
    require(x >= 0.0 && x <= 1.0, ErrorKind::numeric, "incomplete beta argument outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    require(df > 0.0, ErrorKind::numeric, "Student t needs positive degrees of freedom");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t > 0 ? 1.0 - tail : tail;
}

TTest paired_t_test_detail(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::data, "paired t-test needs equally many scores per model");
    require(a.size() >= 2, ErrorKind::data, "paired t-test needs at least two folds");
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    TTest r;
    r.df = static_cast<double>(n - 1);
    const double m = mean(d);
    const double se = standard_error(d);
    if (se == 0.0) {
        r.t = m == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m);
        r.p = m == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.t = m / se;
    r.p = incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
    return r;
}

std::string_view to_string(FoldStrategy s) { return s == FoldStrategy::by_firm ? "by-firm" : "by-year"; }

FoldStrategy parse_fold_strategy(std::string_view name) {
    if (name == "by-firm" || name == "by_firm" || name == "by_firm_k10") return FoldStrategy::by_firm;
    if (name == "by-year" || name == "by_year") return FoldStrategy::by_year;
    fail(ErrorKind::config, "unknown fold strategy '" + std::string(name) + "' (expected by-firm or by-year)");
}

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] != fold) out.push_back(i);
    }
    return out;
}

nlohmann::json FoldPlan::to_json() const {
    return nlohmann::json{{"strategy", std::string(to_string(strategy))},
                          {"seed", seed},
                          {"num_folds", num_folds},
                          {"labels", labels},
                          {"assignments", assignments}};
}

FoldPlan make_folds(std::span<const std::string> firm_ids, std::span<const int> years, FoldStrategy strategy,
                    std::uint64_t seed, int num_folds) {
    require(!firm_ids.empty(), ErrorKind::data, "cannot build folds over an empty corpus");
    require(firm_ids.size() == years.size(), ErrorKind::internal, "firm ids and years differ in length");
    FoldPlan plan;
    plan.strategy = strategy;
    plan.seed = seed;
    plan.assignments.assign(firm_ids.size(), -1);
    if (strategy == FoldStrategy::by_year) {
        std::vector<int> distinct(years.begin(), years.end());
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        plan.labels = distinct;
        plan.num_folds = static_cast<int>(distinct.size());
        for (std::size_t i = 0; i < years.size(); ++i) {
            plan.assignments[i] =
                static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), years[i]) - distinct.begin());
        }
        return plan;
    }
    require(num_folds >= 2, ErrorKind::config, "by-firm cross-validation needs at least two folds");
    std::vector<std::string> firms;
    std::map<std::string, int> fold_of;
    for (const auto& f : firm_ids) {
        if (fold_of.emplace(f, -1).second) firms.push_back(f);
    }
    require(firms.size() >= static_cast<std::size_t>(num_folds), ErrorKind::data,
            "fewer firms (" + std::to_string(firms.size()) + ") than folds (" + std::to_string(num_folds) + ")");
    Rng rng = Rng::stream(seed, "folds/by-firm");
    rng.shuffle(firms);
    for (std::size_t i = 0; i < firms.size(); ++i) fold_of[firms[i]] = static_cast<int>(i % static_cast<std::size_t>(num_folds));
    for (std::size_t i = 0; i < firm_ids.size(); ++i) plan.assignments[i] = fold_of[firm_ids[i]];
    plan.num_folds = num_folds;
    plan.labels.resize(static_cast<std::size_t>(num_folds));
    std::iota(plan.labels.begin(), plan.labels.end(), 0);
    return plan;
}

const ModelSummary& EvalReport::model(std::string_view name) const {
    for (const auto& m : models) {
        if (m.name == name) return m;
    }
    fail(ErrorKind::data, "evaluation report has no model '" + std::string(name) + "'");
}

double EvalReport::p_auc(std::string_view a, std::string_view b) const {
    if (a == b) return 1.0;
    for (const auto& c : comparisons) {
        if ((c.model == a && c.reference == b) || (c.model == b && c.reference == a)) return c.p_auc;
    }
    fail(ErrorKind::data, "no comparison between '" + std::string(a) + "' and '" + std::string(b) + "'");
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["strategy"] = strategy;
    j["size_threshold"] = size_threshold ? nlohmann::json(*size_threshold) : nlohmann::json(nullptr);
    j["models"] = nlohmann::json::array();
    for (const auto& m : models) {
        nlohmann::json folds = nlohmann::json::array();
        for (const auto& f : m.folds) {
            folds.push_back({{"fold", f.fold}, {"label", f.label}, {"n", f.n}, {"auc", f.auc}, {"log_score", f.log_score}});
        }
        j["models"].push_back({{"name", m.name},
                               {"mean_auc", m.mean_auc},
                               {"se_auc", m.se_auc},
                               {"mean_log_score", m.mean_log_score},
                               {"se_log_score", m.se_log_score},
                               {"folds", folds}});
    }
    j["comparisons"] = nlohmann::json::array();
    for (const auto& c : comparisons) {
        j["comparisons"].push_back(
            {{"model", c.model}, {"reference", c.reference}, {"p_auc", c.p_auc}, {"p_log_score", c.p_log_score}});
    }
    return j;
}

std::string EvalReport::to_table() const {
    // Reference columns follow model order.
    std::vector<std::string> refs;
    for (const auto& m : models) {
        for (const auto& c : comparisons) {
            if (c.reference == m.name) {
                refs.push_back(m.name);
                break;
            }
        }
    }
    for (const auto& c : comparisons) {
        if (std::find(refs.begin(), refs.end(), c.reference) == refs.end()) refs.push_back(c.reference);
    }
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %18s %18s", "model", "<AUC> (se)", "<L> (se)");
    out << buf;
    for (const auto& r : refs) {
        std::snprintf(buf, sizeof buf, " %14s", ("p_" + r).c_str());
        out << buf;
    }
    out << '\n';
    for (const auto& m : models) {
        std::snprintf(buf, sizeof buf, "%-16s %9.4f (%.4f) %9.4f (%.4f)", m.name.c_str(), m.mean_auc, m.se_auc,
                      m.mean_log_score, m.se_log_score);
        out << buf;
        for (const auto& r : refs) {
            const Comparison* hit = nullptr;
            for (const auto& c : comparisons) {
                if (c.model == m.name && c.reference == r) hit = &c;
            }
            if (hit != nullptr) {
                std::snprintf(buf, sizeof buf, " %14.4g", hit->p_auc);
            } else {
                std::snprintf(buf, sizeof buf, " %14s", "-");
            }
            out << buf;
        }
        out << '\n';
    }
    out << "folds: " << strategy;
    if (size_threshold) out << ", firm_size > " << *size_threshold;
    out << '\n';
    return out.str();
}

EvalReport evaluate(std::span<const PredictionSource> models, const FoldPlan& plan, const EvalData& data,
                    std::optional<double> size_threshold, std::vector<std::string> references) {
    const std::size_t n = data.labels.size();
    require(!models.empty(), ErrorKind::config, "evaluate: no models given");
    require(plan.assignments.size() == n && data.record_ids.size() == n, ErrorKind::internal,
            "evaluate: fold plan, labels and record ids differ in length");
    require(!size_threshold || data.firm_sizes.size() == n, ErrorKind::data, "evaluate: firm sizes missing");
    for (const auto& m : models) {
        require(m.p_hat.size() == n, ErrorKind::data,
                "model '" + m.name + "' supplies " + std::to_string(m.p_hat.size()) + " predictions for " +
                    std::to_string(n) + " records");
        std::vector<std::string> missing;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(m.p_hat[i])) missing.push_back(data.record_ids[i]);
        }
        if (!missing.empty()) {
            std::string msg = "model '" + m.name + "' is missing predictions for " + std::to_string(missing.size()) +
                              " records:";
            for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 20); ++i) msg += " " + missing[i];
            if (missing.size() > 20) msg += " ...";
            fail(ErrorKind::data, msg);
        }
    }

    EvalReport report;
    report.strategy = std::string(to_string(plan.strategy));
    report.size_threshold = size_threshold;
    std::vector<std::vector<std::size_t>> fold_rows(static_cast<std::size_t>(plan.num_folds));
    for (std::size_t i = 0; i < n; ++i) {
        if (size_threshold && !(data.firm_sizes[i] > *size_threshold)) continue;
        fold_rows[static_cast<std::size_t>(plan.assignments[i])].push_back(i);
    }
    for (int f = 0; f < plan.num_folds; ++f) {
        require(!fold_rows[static_cast<std::size_t>(f)].empty(), ErrorKind::data,
                "fold " + std::to_string(plan.labels[static_cast<std::size_t>(f)]) +
                    " has no records passing the size filter");
    }
    for (const auto& m : models) {
        ModelSummary s;
        s.name = m.name;
        std::vector<double> aucs, logs;
        for (int f = 0; f < plan.num_folds; ++f) {
            const auto& rows = fold_rows[static_cast<std::size_t>(f)];
            std::vector<double> p, y;
            for (std::size_t i : rows) {
                p.push_back(m.p_hat[i]);
                y.push_back(data.labels[i]);
            }
            FoldMetrics fm;
            fm.fold = f;
            fm.label = plan.labels[static_cast<std::size_t>(f)];
            fm.n = rows.size();
            try {
                fm.auc = auc(p, y);
            } catch (const Error& e) {
                fail(e.kind(), "fold " + std::to_string(fm.label) + ": " + e.what());
            }
            fm.log_score = log_score(p, y);
            aucs.push_back(fm.auc);
            logs.push_back(fm.log_score);
            s.folds.push_back(fm);
        }
        s.mean_auc = mean(aucs);
        s.se_auc = standard_error(aucs);
        s.mean_log_score = mean(logs);
        s.se_log_score = standard_error(logs);
        report.models.push_back(std::move(s));
    }
    if (references.empty()) {
        for (const auto& m : models) references.push_back(m.name);
    }
    for (const auto& ref : references) report.model(ref);  // validates the name
    if (plan.num_folds >= 2) {
        for (const auto& m : report.models) {
            for (const auto& ref : references) {
                if (ref == m.name) continue;
                const auto& r = report.model(ref);
                std::vector<double> a1, a2, l1, l2;
                for (std::size_t f = 0; f < m.folds.size(); ++f) {
                    a1.push_back(m.folds[f].auc);
                    a2.push_back(r.folds[f].auc);
                    l1.push_back(m.folds[f].log_score);
                    l2.push_back(r.folds[f].log_score);
                }
                report.comparisons.push_back(Comparison{m.name, ref, paired_t_test(a1, a2), paired_t_test(l1, l2)});
            }
        }
    }
    return report;
}

std::map<std::string, ExternalPrediction> read_prediction_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::data, "cannot open prediction file " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::data, path.string() + ": empty prediction file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line == "record_id,fold_id,p_hat", ErrorKind::data,
            path.string() + ": expected header 'record_id,fold_id,p_hat'");
    std::map<std::string, ExternalPrediction> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path.string() + " line " + std::to_string(line_no);
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        require(c2 != std::string::npos && line.find(',', c2 + 1) == std::string::npos, ErrorKind::data,
                where + ": expected three comma-separated fields");
        ExternalPrediction p;
        try {
            std::size_t used = 0;
            const std::string fold = line.substr(c1 + 1, c2 - c1 - 1);
            p.fold = std::stoi(fold, &used);
            require(used == fold.size(), ErrorKind::data, where + ": bad fold_id");
            const std::string prob = line.substr(c2 + 1);
            p.p_hat = std::stod(prob, &used);
            require(used == prob.size(), ErrorKind::data, where + ": bad p_hat");
        } catch (const std::logic_error&) {
            fail(ErrorKind::data, where + ": unparseable number");
        }
        require(p.p_hat >= 0.0 && p.p_hat <= 1.0, ErrorKind::data, where + ": p_hat outside [0, 1]");
        require(out.emplace(line.substr(0, c1), p).second, ErrorKind::data, where + ": duplicate record_id");
    }
    return out;
}

void write_prediction_csv(const std::filesystem::path& path, std::span<const std::string> record_ids,
                          std::span<const int> folds, std::span<const double> p_hat) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write prediction file " + path.string());
    out << "record_id,fold_id,p_hat\n";
    char buf[64];
    for (std::size_t i = 0; i < record_ids.size(); ++i) {
        std::snprintf(buf, sizeof buf, ",%d,%.17g\n", folds[i], p_hat[i]);
        out << record_ids[i] << buf;
    }
}

PredictionSource align_predictions(std::string name, const std::map<std::string, ExternalPrediction>& preds,
                                   std::span<const std::string> record_ids) {
    PredictionSource src;
    src.name = std::move(name);
    src.p_hat.reserve(record_ids.size());
    for (const auto& id : record_ids) {
        const auto it = preds.find(id);
        src.p_hat.push_back(it == preds.end() ? std::numeric_limits<double>::quiet_NaN() : it->second.p_hat);
    }
    return src;
}

} // namespace textrisk
