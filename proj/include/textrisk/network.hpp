#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "textrisk/embeddings.hpp"
#include "textrisk/text_pipeline.hpp"

namespace textrisk {

enum class TextMode { aud, man, aud_man, none };

std::string_view to_string(TextMode mode);
// Accepts "aud", "man", "aud+man" and "none".
TextMode parse_text_mode(std::string_view name);

struct NetworkConfig {
    int block_size = 20;      // k
    int filter_width = 10;    // gamma
    int num_filters = 40;     // m
    int pool_size = 4;        // tau
    int cell_size = 100;      // d
    int embedding_dim = 300;  // v
    int hidden1 = 200;
    int hidden2 = 50;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 10;
    double validation_fraction = 0.10;
    int patience = 1;
    TextMode text_mode = TextMode::aud;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    bool fine_tune_embeddings = true;
    double forget_bias = 1.0;

    int conv_length() const { return block_size - filter_width + 1; }
    int pooled_length() const { return block_size - filter_width - pool_size + 2; }
    int block_feature_size() const { return pooled_length() * num_filters; }
    bool has_text() const { return text_mode != TextMode::none; }

    // Throws a config error naming the offending field.
    void validate() const;

    nlohmann::json to_json() const;
    static NetworkConfig from_json(const nlohmann::json& j);

    bool operator==(const NetworkConfig&) const = default;
};

struct ConvShape {
    int k = 0;
    int v = 0;
    int gamma = 0;
    int m = 0;
    int tau = 0;

    int conv_length() const { return k - gamma + 1; }
    int pooled_length() const { return k - gamma - tau + 2; }
    int output_size() const { return pooled_length() * m; }
};

struct ConvResult {
    std::vector<double> x;     // m x conv_length
    std::vector<double> z;     // m x pooled_length, filter-major
    std::vector<int> argmax;   // position in x feeding each z entry
};

// B is k x v row-major; W holds m filters of gamma x v, each row-major.
ConvResult conv_forward(std::span<const double> B, std::span<const double> W, const ConvShape& shape);
// Accumulates into dW (m*gamma*v) and, when non-empty, dB (k*v).
void conv_backward(std::span<const double> B, std::span<const double> W, const ConvShape& shape,
                   const ConvResult& fwd, std::span<const double> dz, std::span<double> dW, std::span<double> dB);

struct LstmShape {
    int d = 0;
    int input = 0;
};

struct LstmResult {
    int steps = 0;
    // All T x d. Masked steps hold copies of the previous h and c, and zero gates.
    std::vector<double> h, c, f, i, u, o, tanh_c;
};

// z_seq is T x input. W stacks W_f, W_i, W_u, W_o, each d x (d + input) acting on
// [h_{t-1}; z_t]; b stacks the four biases. An empty mask means every step is live.
LstmResult lstm_forward(std::span<const double> z_seq, std::span<const std::uint8_t> mask, std::span<const double> W,
                        std::span<const double> b, const LstmShape& shape);
// dh is the gradient arriving at each h_t from above. Accumulates dW, db and,
// when non-empty, dz (T x input).
void lstm_backward(std::span<const double> z_seq, std::span<const std::uint8_t> mask, std::span<const double> W,
                   const LstmShape& shape, const LstmResult& fwd, std::span<const double> dh, std::span<double> dW,
                   std::span<double> db, std::span<double> dz);

struct AttentionResult {
    std::vector<double> scores;
    std::vector<double> alpha;
    std::vector<double> h_final;
};

AttentionResult attention_forward(std::span<const double> h, std::span<const std::uint8_t> mask,
                                  std::span<const double> w, double b, int d);
// Accumulates into dh (T x d), dw and db.
void attention_backward(std::span<const double> h, std::span<const std::uint8_t> mask, std::span<const double> w,
                        int d, const AttentionResult& fwd, std::span<const double> dh_final, std::span<double> dh,
                        std::span<double> dw, double& db);

struct HeadShape {
    int input = 0;
    int hidden1 = 0;
    int hidden2 = 0;
};

template <class T>
struct HeadTensors {
    std::span<T> W1, b1, W2, b2, W3, b3;
};
using HeadWeights = HeadTensors<const double>;
using HeadGrads = HeadTensors<double>;

struct HeadResult {
    std::vector<double> l1;
    std::vector<double> l2;
    double logit = 0.0;
    double pd = 0.5;
};

HeadResult head_forward(std::span<const double> x, const HeadWeights& w, const HeadShape& shape);
// Accumulates parameter gradients and, when non-empty, dx.
void head_backward(std::span<const double> x, const HeadWeights& w, const HeadShape& shape, const HeadResult& fwd,
                   double dlogit, const HeadGrads& g, std::span<double> dx);

double sigmoid(double x);
// Mean BCE of probabilities, clamped to [1e-12, 1 - 1e-12].
double bce_loss(std::span<const double> pd, std::span<const double> y);
// Mean BCE from logits, computed with log-sum-exp.
double bce_with_logits(std::span<const double> logits, std::span<const double> y);
double bce_with_logit(double logit, double y);

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool frozen = false;

    std::size_t size() const { return rows * cols; }
};

// Every trainable tensor in one flat vector. The embedding comes first so the
// remaining blocks form a contiguous dense tail; the four LSTM gate matrices
// are adjacent and act as one stacked 4d x (d + |z|) matrix.
class NetworkParams {
public:
    struct Layout {
        std::size_t embedding = 0, conv = 0, lstm_w = 0, lstm_b = 0, att_w = 0, att_b = 0;
        std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, w3 = 0, b3 = 0;
        std::size_t dense_begin = 0;
    };

    NetworkParams() = default;
    // Zero-filled parameters with the layout implied by cfg.
    NetworkParams(const NetworkConfig& cfg, std::size_t vocab_size, std::size_t num_features);

    std::vector<double> values;

    const NetworkConfig& config() const { return config_; }
    std::size_t vocab_size() const { return vocab_size_; }
    std::size_t num_features() const { return num_features_; }
    std::size_t concat_size() const;
    const Layout& layout() const { return layout_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    const ParamBlock& block(std::string_view name) const;
    std::span<double> view(std::string_view name);
    std::span<const double> view(std::string_view name) const;
    std::size_t size() const { return values.size(); }

    ConvShape conv_shape() const;
    LstmShape lstm_shape() const;
    HeadShape head_shape() const;
    HeadWeights head_weights() const;
    HeadGrads head_grads(std::span<double> grad) const;

    void set_embedding_frozen(bool frozen);

    bool operator==(const NetworkParams& other) const {
        return values == other.values && config_ == other.config_ && vocab_size_ == other.vocab_size_ &&
               num_features_ == other.num_features_;
    }

private:
    void add_block(std::string name, std::size_t rows, std::size_t cols);

    NetworkConfig config_;
    std::size_t vocab_size_ = 0;
    std::size_t num_features_ = 0;
    Layout layout_;
    std::vector<ParamBlock> blocks_;
};

// Glorot-uniform weights, zero biases, forget-gate bias cfg.forget_bias. The
// embedding is copied from `pretrained` when given, else Uniform(-0.5/v, 0.5/v).
NetworkParams init_params(const NetworkConfig& cfg, std::size_t vocab_size, std::size_t num_features,
                          std::uint64_t seed, const EmbeddingMatrix* pretrained = nullptr);

EmbeddingMatrix embedding_of(const NetworkParams& params);

// One encoded firm-year as the network consumes it.
struct Sample {
    std::vector<TokenId> ids;  // num_blocks x k
    int num_blocks = 0;
    // Empty means every block is live; otherwise 1 marks a live block.
    std::vector<std::uint8_t> block_mask;
    std::vector<double> features;
    double label = 0.0;
};

Sample make_sample(const BlockSequence& blocks, std::vector<double> features, double label);
Sample make_tabular_sample(std::vector<double> features, double label);

struct ForwardCache {
    std::vector<double> blocks;  // T x k x v embedded tokens
    std::vector<ConvResult> conv;
    std::vector<double> z_seq;
    LstmResult lstm;
    AttentionResult attention;
    std::vector<double> concat;
    HeadResult head;
};

ForwardCache forward(const NetworkParams& params, const Sample& sample);
double network_logit(const NetworkParams& params, const Sample& sample);

// Adds d(loss)/d(theta) of one sample, for upstream gradient `dlogit`, into grad.
void backward(const NetworkParams& params, const Sample& sample, const ForwardCache& cache, double dlogit,
              std::span<double> grad);

// Adds the per-sample BCE gradients of `batch` into grad. Each sample's
// gradient is formed in isolation before being added, so a duplicated sample
// contributes exactly twice. Returns the summed loss.
double accumulate_gradient(const NetworkParams& params, std::span<const Sample> batch, std::span<double> grad);
// Mean BCE and its gradient; grad is overwritten.
double loss_and_gradient(const NetworkParams& params, std::span<const Sample> batch, std::span<double> grad);
double batch_loss(const NetworkParams& params, std::span<const Sample> batch);

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long step = 0;
};

// Frozen blocks are left untouched. Non-finite gradients raise a numeric error
// naming the block they fall in.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamOptions& opt,
               std::span<const ParamBlock> blocks = {});

struct TrainingLog {
    struct Epoch {
        int epoch = 0;
        double train_loss = 0.0;
        double val_loss = 0.0;
        double wall_seconds = 0.0;
    };
    std::vector<Epoch> epochs;
    int best_epoch = 0;

    std::string to_csv() const;
    // Compares everything except wall-clock time.
    bool same_losses(const TrainingLog& other) const;
};

struct Model {
    NetworkParams params;
    std::uint64_t vocab_hash = 0;

    const NetworkConfig& config() const { return params.config(); }
    bool operator==(const Model&) const = default;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t vocab_size = 0;
    std::size_t num_features = 0;
    std::uint64_t vocab_hash = 0;
};

struct TrainResult {
    Model model;
    TrainingLog log;
};

TrainResult train(const Dataset& data, const NetworkConfig& cfg, const EmbeddingMatrix* pretrained = nullptr);

std::vector<double> predict(const Model& model, std::span<const Sample> samples, std::uint64_t vocab_hash);
double predict_one(const Model& model, const Sample& sample, std::uint64_t vocab_hash);

struct AttentionTrace {
    std::vector<double> alpha;
    std::vector<std::vector<TokenId>> block_tokens;
};

AttentionTrace extract_attention(const Model& model, const Sample& sample);

inline constexpr char kCheckpointMagic[8] = {'T', 'X', 'T', 'R', 'I', 'S', 'K', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string checkpoint_bytes(const Model& model);
Model model_from_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

} // namespace textrisk
