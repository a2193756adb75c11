#pragma once

// Invariant suites shared by the unit tests and the acceptance binary. Each
// suite draws `cases` inputs from its own seeded stream and reports the first
// failing case.

#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "support/generators.hpp"
#include "textrisk/data_model.hpp"
#include "textrisk/evaluation.hpp"
#include "textrisk/network.hpp"
#include "textrisk/random.hpp"

namespace props {

struct Result {
    std::string name;
    int cases = 0;
    int failures = 0;
    std::string first_failure;

    bool ok() const { return failures == 0 && cases > 0; }
    void fail(int c, const std::string& why) {
        if (failures++ == 0) first_failure = "case " + std::to_string(c) + ": " + why;
    }
};

inline textrisk::Rng case_rng(const char* suite, int c) {
    return textrisk::Rng::stream(0x5eed, std::string(suite) + "/" + std::to_string(c));
}

// Attention weights: non-negative, zero on masked steps, sum to one. Half the
// cases go through the layer directly, half through a random network.
inline Result attention_normalization(int cases) {
    Result r{"attention normalization", cases};
    for (int c = 0; c < cases; ++c) {
        auto rng = case_rng("attention", c);
        std::vector<double> alpha;
        std::vector<std::uint8_t> mask;
        if (c % 2 == 0) {
            const int T = gen::integer(rng, 1, 12);
            const int d = gen::integer(rng, 1, 8);
            const auto h = gen::normals(rng, static_cast<std::size_t>(T * d), rng.bernoulli(0.2) ? 30.0 : 1.0);
            const auto w = gen::normals(rng, static_cast<std::size_t>(d), 3.0);
            mask.assign(static_cast<std::size_t>(T), 1);
            for (auto& m : mask) m = rng.bernoulli(0.7) ? 1 : 0;
            mask[rng.below(static_cast<std::uint64_t>(T))] = 1;
            alpha = textrisk::attention_forward(h, mask, w, rng.normal(), d).alpha;
        } else {
            auto cfg = gen::small_config(rng);
            cfg.text_mode = textrisk::TextMode::aud;
            const std::size_t V = 6, F = 2;
            const auto params = textrisk::init_params(cfg, V, F, rng.next_u64());
            const auto s = gen::sample(rng, cfg, V, F, gen::integer(rng, 1, 6));
            alpha = textrisk::forward(params, s).attention.alpha;
            mask = s.block_mask;
        }
        double sum = 0.0;
        bool ok = true;
        for (std::size_t t = 0; t < alpha.size(); ++t) {
            const bool live = mask.empty() || mask[t];
            if (alpha[t] < 0.0 || (!live && alpha[t] != 0.0) || !std::isfinite(alpha[t])) ok = false;
            sum += alpha[t];
        }
        if (!ok || std::abs(sum - 1.0) > 1e-6) r.fail(c, "alpha sum " + std::to_string(sum));
    }
    return r;
}

// AUC is unchanged by strictly increasing transforms of the scores.
inline Result auc_monotone_invariance(int cases) {
    Result r{"AUC monotone-transform invariance", cases};
    const std::vector<std::function<double(double)>> maps = {
        [](double x) { return std::exp(x / 10.0); },
        [](double x) { return x * x * x + x; },
        [](double x) { return std::atan(x / 25.0); },
        [](double x) { return 3.5 * x - 7.0; },
        [](double x) { return 1.0 / (1.0 + std::exp(-(x - 20.0) / 5.0)); },
        [](double x) { return std::log1p(x); },
    };
    for (int c = 0; c < cases; ++c) {
        auto rng = case_rng("auc-monotone", c);
        const auto n = static_cast<std::size_t>(gen::integer(rng, 2, 200));
        const auto y = gen::labels(rng, n, rng.uniform(0.05, 0.95));
        const auto s = gen::tied_scores(rng, n, gen::integer(rng, 2, 60));
        const auto& f = maps[static_cast<std::size_t>(c) % maps.size()];
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = f(s[i]);
        const double a = textrisk::auc(s, y);
        const double b = textrisk::auc(t, y);
        if (a != b) r.fail(c, "AUC " + std::to_string(a) + " vs " + std::to_string(b));
    }
    return r;
}

// Encoded continuous values stay inside the fitted winsorization bounds, for
// training rows and for fresh rows alike.
inline Result winsorization_bounds(int cases) {
    Result r{"winsorization bounds", cases};
    for (int c = 0; c < cases; ++c) {
        auto rng = case_rng("winsor", c);
        const auto train = gen::records(rng, static_cast<std::size_t>(gen::integer(rng, 1, 40)));
        textrisk::EncoderOptions opt;
        opt.low_quantile = rng.uniform(0.0, 0.3);
        opt.high_quantile = rng.uniform(0.7, 1.0);
        opt.standardize = false;
        const auto enc = textrisk::fit_encoder(train, opt);
        const auto fresh = gen::records(rng, 5);
        bool ok = true;
        std::string why;
        for (std::size_t j = 0; j < textrisk::kNumContinuous; ++j) {
            if (!(enc.winsor_low[j] <= enc.winsor_high[j])) {
                ok = false;
                why = "low > high in column " + std::to_string(j);
            }
        }
        for (const auto* set : {&train, &fresh}) {
            for (const auto& rec : *set) {
                const auto x = textrisk::encode(rec, enc);
                for (std::size_t j = 0; j < textrisk::kNumContinuous; ++j) {
                    if (x[j] < enc.winsor_low[j] || x[j] > enc.winsor_high[j]) {
                        ok = false;
                        why = "column " + std::to_string(j) + " escapes its bounds";
                    }
                }
            }
        }
        if (!ok) r.fail(c, why);
    }
    return r;
}

// No firm straddles folds; every record lands in exactly one test set.
inline Result fold_integrity(int cases) {
    Result r{"fold integrity", cases};
    for (int c = 0; c < cases; ++c) {
        auto rng = case_rng("folds", c);
        const int firms = gen::integer(rng, 2, 60);
        std::vector<std::string> ids;
        std::vector<int> years;
        for (int f = 0; f < firms; ++f) {
            const int n = gen::integer(rng, 1, 5);
            for (int k = 0; k < n; ++k) {
                ids.push_back("firm" + std::to_string(f));
                years.push_back(2010 + gen::integer(rng, 0, 5));
            }
        }
        // Interleave records so firms are not contiguous.
        for (std::size_t i = ids.size(); i > 1; --i) {
            const auto j = rng.below(i);
            std::swap(ids[i - 1], ids[j]);
            std::swap(years[i - 1], years[j]);
        }
        const bool by_year = c % 4 == 3;
        const int k = gen::integer(rng, 2, std::min(10, firms));
        const auto plan = textrisk::make_folds(ids, years, by_year ? textrisk::FoldStrategy::by_year
                                                                   : textrisk::FoldStrategy::by_firm,
                                               rng.next_u64(), k);
        std::map<std::string, int> firm_fold;
        bool ok = plan.assignments.size() == ids.size();
        std::vector<int> seen(ids.size(), 0);
        for (int f = 0; f < plan.num_folds && ok; ++f) {
            const auto test = plan.test_indices(f);
            const auto train = plan.train_indices(f);
            if (test.empty() || test.size() + train.size() != ids.size()) ok = false;
            for (auto i : test) ++seen[i];
        }
        for (std::size_t i = 0; i < ids.size() && ok; ++i) {
            if (seen[i] != 1) ok = false;
            const int fold = plan.assignments[i];
            if (by_year) {
                if (plan.labels[static_cast<std::size_t>(fold)] != years[i]) ok = false;
            } else {
                auto [it, fresh] = firm_fold.emplace(ids[i], fold);
                if (!fresh && it->second != fold) ok = false;
            }
        }
        if (!ok) r.fail(c, "fold assignment broken");
    }
    return r;
}

// save -> load reproduces every parameter bit for bit, and predictions agree.
inline Result checkpoint_roundtrip(int cases) {
    Result r{"checkpoint round-trip", cases};
    for (int c = 0; c < cases; ++c) {
        auto rng = case_rng("checkpoint", c);
        const auto cfg = gen::small_config(rng);
        const std::size_t V = static_cast<std::size_t>(gen::integer(rng, 6, 20));
        const std::size_t F = static_cast<std::size_t>(gen::integer(rng, 1, 6));
        textrisk::Model m{textrisk::init_params(cfg, V, F, rng.next_u64()), rng.next_u64()};
        // Awkward values: negative zero, subnormals, huge magnitudes.
        for (auto& v : m.params.values) {
            switch (rng.below(12)) {
                case 0: v = -0.0; break;
                case 1: v = 4.9e-324 * static_cast<double>(rng.below(1000)); break;
                case 2: v = rng.normal() * 1e300; break;
                default: break;
            }
        }
        for (std::size_t j = 0; j < cfg.embedding_dim * 1u && cfg.has_text(); ++j) m.params.values[j] = 0.0;
        const std::string bytes = textrisk::checkpoint_bytes(m);
        const auto back = textrisk::model_from_checkpoint(bytes);
        bool ok = back.params.values.size() == m.params.values.size() && back.vocab_hash == m.vocab_hash &&
                  back.config() == m.config() &&
                  std::memcmp(back.params.values.data(), m.params.values.data(),
                              m.params.values.size() * sizeof(double)) == 0 &&
                  textrisk::checkpoint_bytes(back) == bytes;
        if (ok) {
            // Predictions on a sane model (the awkward values can overflow).
            textrisk::Model sane{textrisk::init_params(cfg, V, F, rng.next_u64()), 1};
            const auto again = textrisk::model_from_checkpoint(textrisk::checkpoint_bytes(sane));
            const auto s = gen::sample(rng, cfg, V, F, gen::integer(rng, 1, 3));
            const double a = textrisk::network_logit(sane.params, s);
            const double b = textrisk::network_logit(again.params, s);
            ok = std::memcmp(&a, &b, sizeof a) == 0;
        }
        if (!ok) r.fail(c, "round-trip mismatch");
    }
    return r;
}

inline std::vector<Result> all(int cases) {
    return {attention_normalization(cases), auc_monotone_invariance(cases), winsorization_bounds(cases),
            fold_integrity(cases), checkpoint_roundtrip(cases)};
}

} // namespace props
