#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "linalg.hpp"
#include "textrisk/error.hpp"
#include "textrisk/network.hpp"
#include "textrisk/random.hpp"

namespace textrisk {

std::string_view to_string(TextMode mode) {
    switch (mode) {
        case TextMode::aud: return "aud";
        case TextMode::man: return "man";
        case TextMode::aud_man: return "aud+man";
        case TextMode::none: return "none";
    }
    return "none";
}

TextMode parse_text_mode(std::string_view name) {
    if (name == "aud") return TextMode::aud;
    if (name == "man") return TextMode::man;
    if (name == "aud+man" || name == "aud_man") return TextMode::aud_man;
    if (name == "none") return TextMode::none;
    fail(ErrorKind::config, "unknown text_mode '" + std::string(name) + "' (expected aud, man, aud+man or none)");
}

void NetworkConfig::validate() const {
    auto check = [](bool ok, const std::string& msg) { require(ok, ErrorKind::config, "network config: " + msg); };
    check(block_size >= 2, "k must be >= 2");
    check(filter_width >= 1 && filter_width < block_size, "gamma must satisfy 1 <= gamma < k");
    check(pool_size >= 1 && pooled_length() >= 1, "tau must satisfy 1 <= tau <= k - gamma + 1");
    check(num_filters >= 1, "m must be >= 1");
    check(cell_size >= 1, "d must be >= 1");
    check(embedding_dim >= 1, "v must be >= 1");
    check(hidden1 >= 1 && hidden2 >= 1, "hidden layer sizes must be >= 1");
    check(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
    check(batch_size >= 1, "batch_size must be >= 1");
    check(max_epochs >= 0, "max_epochs must be >= 0");
    check(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation_fraction must lie in [0, 1)");
    check(patience >= 1, "patience must be >= 1");
    check(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, "Adam betas must lie in [0, 1)");
    check(adam_epsilon > 0.0, "Adam epsilon must be positive");
}

nlohmann::json NetworkConfig::to_json() const {
    return nlohmann::json{{"k", block_size},
                          {"gamma", filter_width},
                          {"m", num_filters},
                          {"tau", pool_size},
                          {"d", cell_size},
                          {"v", embedding_dim},
                          {"hidden1", hidden1},
                          {"hidden2", hidden2},
                          {"learning_rate", learning_rate},
                          {"batch_size", batch_size},
                          {"max_epochs", max_epochs},
                          {"validation_fraction", validation_fraction},
                          {"patience", patience},
                          {"text_mode", std::string(to_string(text_mode))},
                          {"seed", seed},
                          {"adam_beta1", adam_beta1},
                          {"adam_beta2", adam_beta2},
                          {"adam_epsilon", adam_epsilon},
                          {"fine_tune_embeddings", fine_tune_embeddings},
                          {"forget_bias", forget_bias}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
    NetworkConfig c;
    try {
        c.block_size = j.at("k").get<int>();
        c.filter_width = j.at("gamma").get<int>();
        c.num_filters = j.at("m").get<int>();
        c.pool_size = j.at("tau").get<int>();
        c.cell_size = j.at("d").get<int>();
        c.embedding_dim = j.at("v").get<int>();
        c.hidden1 = j.at("hidden1").get<int>();
        c.hidden2 = j.at("hidden2").get<int>();
        c.learning_rate = j.at("learning_rate").get<double>();
        c.batch_size = j.at("batch_size").get<int>();
        c.max_epochs = j.at("max_epochs").get<int>();
        c.validation_fraction = j.at("validation_fraction").get<double>();
        c.patience = j.at("patience").get<int>();
        c.text_mode = parse_text_mode(j.at("text_mode").get<std::string>());
        c.seed = j.at("seed").get<std::uint64_t>();
        c.adam_beta1 = j.at("adam_beta1").get<double>();
        c.adam_beta2 = j.at("adam_beta2").get<double>();
        c.adam_epsilon = j.at("adam_epsilon").get<double>();
        c.fine_tune_embeddings = j.at("fine_tune_embeddings").get<bool>();
        c.forget_bias = j.at("forget_bias").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("network config JSON: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Parameters

NetworkParams::NetworkParams(const NetworkConfig& cfg, std::size_t vocab_size, std::size_t num_features)
    : config_(cfg), vocab_size_(vocab_size), num_features_(num_features) {
    cfg.validate();
    const auto v = static_cast<std::size_t>(cfg.embedding_dim);
    const auto d = static_cast<std::size_t>(cfg.cell_size);
    const auto Z = static_cast<std::size_t>(cfg.block_feature_size());
    const auto h1 = static_cast<std::size_t>(cfg.hidden1);
    const auto h2 = static_cast<std::size_t>(cfg.hidden2);
    if (cfg.has_text()) {
        require(vocab_size >= 1, ErrorKind::config, "text model needs a vocabulary");
        layout_.embedding = values.size();
        add_block("embedding", vocab_size, v);
        layout_.dense_begin = values.size();
        layout_.conv = values.size();
        add_block("conv.W", static_cast<std::size_t>(cfg.num_filters),
                  static_cast<std::size_t>(cfg.filter_width) * v);
        layout_.lstm_w = values.size();
        for (const char* g : {"lstm.W_f", "lstm.W_i", "lstm.W_u", "lstm.W_o"}) add_block(g, d, d + Z);
        layout_.lstm_b = values.size();
        for (const char* g : {"lstm.b_f", "lstm.b_i", "lstm.b_u", "lstm.b_o"}) add_block(g, d, 1);
        layout_.att_w = values.size();
        add_block("attention.w", 1, d);
        layout_.att_b = values.size();
        add_block("attention.b", 1, 1);
    }
    const std::size_t n = concat_size();
    require(n > 0, ErrorKind::config, "model has neither text nor numerical input");
    layout_.w1 = values.size();
    add_block("dense1.W", h1, n);
    layout_.b1 = values.size();
    add_block("dense1.b", h1, 1);
    layout_.w2 = values.size();
    add_block("dense2.W", h2, h1);
    layout_.b2 = values.size();
    add_block("dense2.b", h2, 1);
    layout_.w3 = values.size();
    add_block("output.W", 1, h2);
    layout_.b3 = values.size();
    add_block("output.b", 1, 1);
    set_embedding_frozen(!cfg.fine_tune_embeddings);
}

void NetworkParams::add_block(std::string name, std::size_t rows, std::size_t cols) {
    blocks_.push_back(ParamBlock{std::move(name), values.size(), rows, cols, false});
    values.resize(values.size() + rows * cols, 0.0);
}

std::size_t NetworkParams::concat_size() const {
    return (config_.has_text() ? static_cast<std::size_t>(config_.cell_size) : 0) + num_features_;
}

const ParamBlock& NetworkParams::block(std::string_view name) const {
    for (const auto& b : blocks_) {
        if (b.name == name) return b;
    }
    fail(ErrorKind::internal, "no parameter block named '" + std::string(name) + "'");
}

std::span<double> NetworkParams::view(std::string_view name) {
    const auto& b = block(name);
    return std::span<double>(values).subspan(b.offset, b.size());
}

std::span<const double> NetworkParams::view(std::string_view name) const {
    const auto& b = block(name);
    return std::span<const double>(values).subspan(b.offset, b.size());
}

ConvShape NetworkParams::conv_shape() const {
    return ConvShape{config_.block_size, config_.embedding_dim, config_.filter_width, config_.num_filters,
                     config_.pool_size};
}

LstmShape NetworkParams::lstm_shape() const { return LstmShape{config_.cell_size, config_.block_feature_size()}; }

HeadShape NetworkParams::head_shape() const {
    return HeadShape{static_cast<int>(concat_size()), config_.hidden1, config_.hidden2};
}

HeadWeights NetworkParams::head_weights() const {
    const std::span<const double> all(values);
    const auto n = concat_size();
    const auto h1 = static_cast<std::size_t>(config_.hidden1);
    const auto h2 = static_cast<std::size_t>(config_.hidden2);
    return HeadWeights{all.subspan(layout_.w1, h1 * n), all.subspan(layout_.b1, h1), all.subspan(layout_.w2, h2 * h1),
                       all.subspan(layout_.b2, h2),     all.subspan(layout_.w3, h2), all.subspan(layout_.b3, 1)};
}

HeadGrads NetworkParams::head_grads(std::span<double> grad) const {
    const auto n = concat_size();
    const auto h1 = static_cast<std::size_t>(config_.hidden1);
    const auto h2 = static_cast<std::size_t>(config_.hidden2);
    return HeadGrads{grad.subspan(layout_.w1, h1 * n), grad.subspan(layout_.b1, h1), grad.subspan(layout_.w2, h2 * h1),
                     grad.subspan(layout_.b2, h2),     grad.subspan(layout_.w3, h2), grad.subspan(layout_.b3, 1)};
}

void NetworkParams::set_embedding_frozen(bool frozen) {
    for (auto& b : blocks_) {
        if (b.name == "embedding") b.frozen = frozen;
    }
}

NetworkParams init_params(const NetworkConfig& cfg, std::size_t vocab_size, std::size_t num_features,
                          std::uint64_t seed, const EmbeddingMatrix* pretrained) {
    NetworkParams p(cfg, vocab_size, num_features);
    Rng rng = Rng::stream(seed, "network/init");
    auto glorot = [&](std::string_view name, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : p.view(name)) w = rng.uniform(-limit, limit);
    };
    const double v = cfg.embedding_dim;
    const double d = cfg.cell_size;
    const double Z = cfg.block_feature_size();
    if (cfg.has_text()) {
        auto emb = p.view("embedding");
        if (pretrained != nullptr) {
            require(pretrained->rows == vocab_size && pretrained->dim == static_cast<std::size_t>(cfg.embedding_dim),
                    ErrorKind::config, "pretrained embedding shape does not match vocabulary size and v");
            std::copy(pretrained->weights.begin(), pretrained->weights.end(), emb.begin());
        } else {
            Rng emb_rng = Rng::stream(seed, "network/embedding");
            const EmbeddingMatrix e = EmbeddingMatrix::random(vocab_size, static_cast<std::size_t>(cfg.embedding_dim), emb_rng);
            std::copy(e.weights.begin(), e.weights.end(), emb.begin());
        }
        std::fill_n(emb.begin(), cfg.embedding_dim, 0.0);  // PAD row
        glorot("conv.W", cfg.filter_width * v, cfg.filter_width * static_cast<double>(cfg.num_filters));
        for (const char* g : {"lstm.W_f", "lstm.W_i", "lstm.W_u", "lstm.W_o"}) glorot(g, d + Z, d);
        for (double& b : p.view("lstm.b_f")) b = cfg.forget_bias;
        glorot("attention.w", d, 1.0);
    }
    const double n = static_cast<double>(p.concat_size());
    glorot("dense1.W", n, cfg.hidden1);
    glorot("dense2.W", cfg.hidden1, cfg.hidden2);
    glorot("output.W", cfg.hidden2, 1.0);
    return p;
}

EmbeddingMatrix embedding_of(const NetworkParams& params) {
    EmbeddingMatrix e;
    e.rows = params.vocab_size();
    e.dim = static_cast<std::size_t>(params.config().embedding_dim);
    const auto view = params.view("embedding");
    e.weights.assign(view.begin(), view.end());
    e.trainable = params.config().fine_tune_embeddings;
    return e;
}

// ---------------------------------------------------------------------------
// Samples, forward and backward

Sample make_sample(const BlockSequence& blocks, std::vector<double> features, double label) {
    Sample s;
    s.ids = blocks.ids;
    s.num_blocks = blocks.num_blocks;
    s.features = std::move(features);
    s.label = label;
    return s;
}

Sample make_tabular_sample(std::vector<double> features, double label) {
    Sample s;
    s.features = std::move(features);
    s.label = label;
    return s;
}

namespace {

void check_sample(const NetworkParams& params, const Sample& sample) {
    const auto& cfg = params.config();
    require(sample.features.size() == params.num_features(), ErrorKind::data,
            "sample has " + std::to_string(sample.features.size()) + " numerical features, model expects " +
                std::to_string(params.num_features()));
    if (!cfg.has_text()) return;
    require(sample.num_blocks >= 1, ErrorKind::data, "text model needs at least one block per sample");
    require(sample.ids.size() == static_cast<std::size_t>(sample.num_blocks * cfg.block_size), ErrorKind::data,
            "sample token ids do not match num_blocks x k");
    require(sample.block_mask.empty() || sample.block_mask.size() == static_cast<std::size_t>(sample.num_blocks),
            ErrorKind::data, "sample block mask has wrong length");
}

bool block_live(const Sample& s, std::size_t t) { return s.block_mask.empty() || s.block_mask[t] != 0; }

} // namespace

ForwardCache forward(const NetworkParams& params, const Sample& sample) {
    check_sample(params, sample);
    const auto& cfg = params.config();
    const auto& L = params.layout();
    const std::span<const double> theta(params.values);
    ForwardCache cache;
    cache.concat.reserve(params.concat_size());
    if (cfg.has_text()) {
        const auto T = static_cast<std::size_t>(sample.num_blocks);
        const auto k = static_cast<std::size_t>(cfg.block_size);
        const auto v = static_cast<std::size_t>(cfg.embedding_dim);
        const auto d = static_cast<std::size_t>(cfg.cell_size);
        const auto Z = static_cast<std::size_t>(cfg.block_feature_size());
        const ConvShape cs = params.conv_shape();
        const auto conv_w = theta.subspan(L.conv, static_cast<std::size_t>(cfg.num_filters * cfg.filter_width) * v);
        cache.blocks.assign(T * k * v, 0.0);
        cache.conv.resize(T);
        cache.z_seq.assign(T * Z, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            if (!block_live(sample, t)) continue;
            double* B = &cache.blocks[t * k * v];
            for (std::size_t r = 0; r < k; ++r) {
                const TokenId id = sample.ids[t * k + r];
                require(id >= 0 && static_cast<std::size_t>(id) < params.vocab_size(), ErrorKind::data,
                        "token id out of vocabulary range");
                if (id == Vocabulary::kPad) continue;
                const double* e = &theta[L.embedding + static_cast<std::size_t>(id) * v];
                std::copy(e, e + v, B + r * v);
            }
            cache.conv[t] = conv_forward(std::span<const double>(B, k * v), conv_w, cs);
            std::copy(cache.conv[t].z.begin(), cache.conv[t].z.end(), cache.z_seq.begin() + static_cast<std::ptrdiff_t>(t * Z));
        }
        const LstmShape ls = params.lstm_shape();
        cache.lstm = lstm_forward(cache.z_seq, sample.block_mask, theta.subspan(L.lstm_w, 4 * d * (d + Z)),
                                  theta.subspan(L.lstm_b, 4 * d), ls);
        cache.attention = attention_forward(cache.lstm.h, sample.block_mask, theta.subspan(L.att_w, d), theta[L.att_b],
                                            cfg.cell_size);
        cache.concat.insert(cache.concat.end(), cache.attention.h_final.begin(), cache.attention.h_final.end());
    }
    cache.concat.insert(cache.concat.end(), sample.features.begin(), sample.features.end());
    cache.head = head_forward(cache.concat, params.head_weights(), params.head_shape());
    require(std::isfinite(cache.head.logit), ErrorKind::numeric, "non-finite network output");
    return cache;
}

double network_logit(const NetworkParams& params, const Sample& sample) { return forward(params, sample).head.logit; }

void backward(const NetworkParams& params, const Sample& sample, const ForwardCache& cache, double dlogit,
              std::span<double> grad) {
    require(grad.size() == params.size(), ErrorKind::internal, "gradient buffer has wrong size");
    const auto& cfg = params.config();
    const auto& L = params.layout();
    const std::span<const double> theta(params.values);
    std::vector<double> dconcat(params.concat_size(), 0.0);
    head_backward(cache.concat, params.head_weights(), params.head_shape(), cache.head, dlogit, params.head_grads(grad),
                  cfg.has_text() ? std::span<double>(dconcat) : std::span<double>());
    if (!cfg.has_text()) return;

    const auto T = static_cast<std::size_t>(sample.num_blocks);
    const auto k = static_cast<std::size_t>(cfg.block_size);
    const auto v = static_cast<std::size_t>(cfg.embedding_dim);
    const auto d = static_cast<std::size_t>(cfg.cell_size);
    const auto Z = static_cast<std::size_t>(cfg.block_feature_size());

    std::vector<double> dh(T * d, 0.0);
    attention_backward(cache.lstm.h, sample.block_mask, theta.subspan(L.att_w, d), cfg.cell_size, cache.attention,
                       std::span<const double>(dconcat).first(d), dh, grad.subspan(L.att_w, d), grad[L.att_b]);

    std::vector<double> dz(T * Z, 0.0);
    lstm_backward(cache.z_seq, sample.block_mask, theta.subspan(L.lstm_w, 4 * d * (d + Z)), params.lstm_shape(),
                  cache.lstm, dh, grad.subspan(L.lstm_w, 4 * d * (d + Z)), grad.subspan(L.lstm_b, 4 * d), dz);

    const ConvShape cs = params.conv_shape();
    const std::size_t conv_size = static_cast<std::size_t>(cfg.num_filters * cfg.filter_width) * v;
    const bool embed_grad = !params.block("embedding").frozen;
    std::vector<double> dB(embed_grad ? k * v : 0);
    for (std::size_t t = 0; t < T; ++t) {
        if (!block_live(sample, t)) continue;
        std::fill(dB.begin(), dB.end(), 0.0);
        conv_backward(std::span<const double>(cache.blocks).subspan(t * k * v, k * v), theta.subspan(L.conv, conv_size),
                      cs, cache.conv[t], std::span<const double>(dz).subspan(t * Z, Z), grad.subspan(L.conv, conv_size),
                      dB);
        if (!embed_grad) continue;
        for (std::size_t r = 0; r < k; ++r) {
            const TokenId id = sample.ids[t * k + r];
            if (id == Vocabulary::kPad) continue;
            detail::axpy(1.0, &dB[r * v], &grad[L.embedding + static_cast<std::size_t>(id) * v], v);
        }
    }
}

namespace {

// Per-sample gradient kept apart from the batch total: a dense buffer for the
// non-embedding tail plus the embedding rows the sample touches.
class SampleGradient {
public:
    explicit SampleGradient(const NetworkParams& params)
        : params_(params), full_(params.size(), 0.0), dense_begin_(params.layout().dense_begin) {}

    std::span<double> reset(const Sample& sample) {
        std::fill(full_.begin() + static_cast<std::ptrdiff_t>(dense_begin_), full_.end(), 0.0);
        for (TokenId id : rows_) clear_row(id);
        rows_.clear();
        if (params_.config().has_text()) {
            rows_.assign(sample.ids.begin(), sample.ids.end());
            std::sort(rows_.begin(), rows_.end());
            rows_.erase(std::unique(rows_.begin(), rows_.end()), rows_.end());
            for (TokenId id : rows_) {
                require(id >= 0 && static_cast<std::size_t>(id) < params_.vocab_size(), ErrorKind::data,
                        "token id out of vocabulary range");
            }
        }
        return full_;
    }

    void add_to(std::span<double> total) const {
        for (std::size_t i = dense_begin_; i < full_.size(); ++i) total[i] += full_[i];
        const auto v = static_cast<std::size_t>(params_.config().embedding_dim);
        const std::size_t emb = params_.layout().embedding;
        for (TokenId id : rows_) {
            const std::size_t at = emb + static_cast<std::size_t>(id) * v;
            for (std::size_t c = 0; c < v; ++c) total[at + c] += full_[at + c];
        }
    }

private:
    void clear_row(TokenId id) {
        const auto v = static_cast<std::size_t>(params_.config().embedding_dim);
        const std::size_t at = params_.layout().embedding + static_cast<std::size_t>(id) * v;
        std::fill_n(full_.begin() + static_cast<std::ptrdiff_t>(at), v, 0.0);
    }

    const NetworkParams& params_;
    std::vector<double> full_;
    std::size_t dense_begin_;
    std::vector<TokenId> rows_;
};

} // namespace

double accumulate_gradient(const NetworkParams& params, std::span<const Sample> batch, std::span<double> grad) {
    require(grad.size() == params.size(), ErrorKind::internal, "gradient buffer has wrong size");
    SampleGradient scratch(params);
    double loss = 0.0;
    for (const Sample& s : batch) {
        const ForwardCache cache = forward(params, s);
        const double l = bce_with_logit(cache.head.logit, s.label);
        require(std::isfinite(l), ErrorKind::numeric, "non-finite training loss");
        loss += l;
        const std::span<double> g = scratch.reset(s);
        backward(params, s, cache, cache.head.pd - s.label, g);
        scratch.add_to(grad);
    }
    return loss;
}

double loss_and_gradient(const NetworkParams& params, std::span<const Sample> batch, std::span<double> grad) {
    require(!batch.empty(), ErrorKind::internal, "empty batch");
    std::fill(grad.begin(), grad.end(), 0.0);
    const double total = accumulate_gradient(params, batch, grad);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad) g *= scale;
    return total * scale;
}

double batch_loss(const NetworkParams& params, std::span<const Sample> batch) {
    require(!batch.empty(), ErrorKind::internal, "empty batch");
    double total = 0.0;
    for (const Sample& s : batch) total += bce_with_logit(network_logit(params, s), s.label);
    return total / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Optimiser and training

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamOptions& opt,
               std::span<const ParamBlock> blocks) {
    require(params.size() == grads.size(), ErrorKind::internal, "Adam: parameter and gradient sizes differ");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (std::isfinite(grads[i])) continue;
        std::string name = "<flat index " + std::to_string(i) + ">";
        for (const auto& b : blocks) {
            if (i >= b.offset && i < b.offset + b.size()) name = b.name;
        }
        fail(ErrorKind::numeric, "non-finite gradient in parameter block '" + name + "'");
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
    auto update = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double g = grads[i];
            state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
            state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g * g;
            const double mhat = state.m[i] / c1;
            const double vhat = state.v[i] / c2;
            params[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon);
        }
    };
    if (blocks.empty()) {
        update(0, params.size());
        return;
    }
    for (const auto& b : blocks) {
        if (!b.frozen) update(b.offset, b.offset + b.size());
    }
}

std::string TrainingLog::to_csv() const {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,wall_seconds\n";
    char buf[128];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.6f\n", e.epoch, e.train_loss, e.val_loss, e.wall_seconds);
        out << buf;
    }
    return out.str();
}

bool TrainingLog::same_losses(const TrainingLog& other) const {
    if (epochs.size() != other.epochs.size() || best_epoch != other.best_epoch) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& a = epochs[i];
        const auto& b = other.epochs[i];
        if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_loss != b.val_loss) return false;
    }
    return true;
}

TrainResult train(const Dataset& data, const NetworkConfig& cfg, const EmbeddingMatrix* pretrained) {
    cfg.validate();
    const std::size_t n = data.samples.size();
    require(n >= static_cast<std::size_t>(cfg.batch_size), ErrorKind::data,
            "training corpus (" + std::to_string(n) + " records) is smaller than one batch (" +
                std::to_string(cfg.batch_size) + ")");

    TrainResult result;
    result.model.vocab_hash = data.vocab_hash;
    result.model.params = init_params(cfg, data.vocab_size, data.num_features, cfg.seed, pretrained);
    NetworkParams& params = result.model.params;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng split_rng = Rng::stream(cfg.seed, "network/validation-split");
    split_rng.shuffle(order);
    auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
    if (cfg.validation_fraction > 0.0 && n_val == 0 && n >= 2) n_val = 1;
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::vector<Sample> val_set;
    for (std::size_t i : val_idx) val_set.push_back(data.samples[i]);

    const AdamOptions opt{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
    AdamState state;
    std::vector<double> grad(params.size());
    std::vector<Sample> batch;
    Rng batch_rng = Rng::stream(cfg.seed, "network/batches");
    NetworkParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        batch_rng.shuffle(train_idx);
        double epoch_loss = 0.0;
        for (std::size_t lo = 0; lo < train_idx.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi = std::min(train_idx.size(), lo + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = lo; i < hi; ++i) batch.push_back(data.samples[train_idx[i]]);
            epoch_loss += loss_and_gradient(params, batch, grad) * static_cast<double>(batch.size());
            adam_step(params.values, grad, state, opt, params.blocks());
        }
        TrainingLog::Epoch rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(train_idx.size());
        rec.val_loss = val_set.empty() ? rec.train_loss : batch_loss(params, val_set);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.epochs.push_back(rec);
        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best = params;
            result.log.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    params = std::move(best);
    return result;
}

std::vector<double> predict(const Model& model, std::span<const Sample> samples, std::uint64_t vocab_hash) {
    require(!model.config().has_text() || vocab_hash == model.vocab_hash, ErrorKind::data,
            "vocabulary hash differs from the one the model was trained with");
    std::vector<double> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) out.push_back(forward(model.params, s).head.pd);
    return out;
}

double predict_one(const Model& model, const Sample& sample, std::uint64_t vocab_hash) {
    return predict(model, std::span<const Sample>(&sample, 1), vocab_hash).front();
}

AttentionTrace extract_attention(const Model& model, const Sample& sample) {
    const auto& cfg = model.config();
    require(cfg.has_text(), ErrorKind::config, "attention is undefined for text_mode=none");
    const ForwardCache cache = forward(model.params, sample);
    AttentionTrace trace;
    trace.alpha = cache.attention.alpha;
    const auto k = static_cast<std::size_t>(cfg.block_size);
    for (int t = 0; t < sample.num_blocks; ++t) {
        const auto at = sample.ids.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(t) * k);
        trace.block_tokens.emplace_back(at, at + static_cast<std::ptrdiff_t>(k));
    }
    return trace;
}

} // namespace textrisk
