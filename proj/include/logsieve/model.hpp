#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "logsieve/preprocess.hpp"
#include "logsieve/rng.hpp"

namespace logsieve {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct ModelConfig {
    int model_size = 16;
    int num_heads = 2;
    int num_layers = 2;
    int max_len = 32;
    double dropout_rate = 0.05;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    int batch_size = 512;
    int patience_epochs = 5;
    int max_epochs = 100;
    int finetune_epochs = 5;
    /// Fraction of each finetuning batch drawn from the anomalous class.
    double anomaly_batch_fraction = 0.05;
    double mask_sample_frac = 0.15;
    double mask_token_frac = 0.20;
    /// Share of the SL data held out for pretraining validation.
    double sl_val_frac = 0.1;
    /// Trailing share of the target training logs used for threshold selection.
    double threshold_val_frac = 0.1;
    std::uint64_t seed = 42;
    bool positional_encoding = true;

    int ffn_size() const { return 4 * model_size; }
    int head_size() const { return model_size / num_heads; }
    /// Throws Error when the configuration is inconsistent.
    void validate() const;
};

nlohmann::ordered_json to_json(const ModelConfig& c);
/// Fields missing from `j` keep the values in `base`.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct LayerParams {
    Matrix wq, bq, wk, bk, wv, bv, wo, bo;
    Matrix ln1_gain, ln1_bias;
    Matrix w1, b1, w2, b2;
    Matrix ln2_gain, ln2_bias;
};

/// Two stacked linear layers with a ReLU in between.
struct HeadParams {
    Matrix w1, b1, w2, b2;
};

struct EncoderParams {
    Matrix embedding;  // |V| x d
    std::vector<LayerParams> layers;
};

/// Every trainable tensor: embeddings and encoder, head set 1 (severity
/// classifier, width 2) and head set 2 (log representation, width d).
struct Parameters {
    EncoderParams encoder;
    HeadParams set1;
    HeadParams set2;

    /// Named tensors in a fixed order (the serialization order).
    std::vector<std::pair<std::string, Matrix*>> tensors();
    std::vector<std::pair<std::string, const Matrix*>> tensors() const;

    /// Fan-in scaled uniform init for weights, zero biases, unit layer-norm gains.
    static Parameters initialize(const ModelConfig& config, int vocab_size, Rng& rng);
    static Parameters zeros_like(const Parameters& other);
    void set_zero();
};

/// Rounds every parameter to the nearest 32-bit float so that persisted
/// artifacts reload to exactly the in-memory model.
void snap_to_float(Parameters& params);

enum class Phase { pretrain, finetune };

/// Output of head set 2 (x) and the encoder's [LME] vector for one log.
struct LogEmbedding {
    RowVector x;
    RowVector lme;
};

/// Binary cross entropy over a softmax of two logits.
double bce_loss(const RowVector& logits, int label);
/// Gradient of bce_loss with respect to the logits.
RowVector bce_gradient(const RowVector& logits, int label);

/// Squared norm below which the anomalous-class hyperspherical term is clamped.
inline constexpr double kHypersphereEpsilon = 1e-9;

/// label 0: ||x||^2.  label 1: -log(1 - exp(-||x||^2)), with ||x||^2 clamped
/// below by kHypersphereEpsilon.
double hyperspherical_loss(const RowVector& x, int label);
RowVector hyperspherical_gradient(const RowVector& x, int label);

double batch_bce_loss(std::span<const RowVector> logits, std::span<const int> labels);
double batch_hyperspherical_loss(std::span<const RowVector> xs, std::span<const int> labels);

/// Runtime switches for one pass through the network.
struct PassOptions {
    bool training = false;  // enables dropout; requires rng
    Rng* rng = nullptr;
};

/// Encoder output at the [LME] position. Positions masked as [PD] are
/// removed from attention entirely.
RowVector encode_lme(const Parameters& params, const ModelConfig& config, const TokenSequence& seq,
                     PassOptions options = {});

RowVector head_forward(const HeadParams& head, const RowVector& input);

/// Logits (pretrain) or representation x (finetune) for each log.
std::vector<RowVector> forward(const Parameters& params, const ModelConfig& config,
                               std::span<const TokenSequence> batch, Phase phase, PassOptions options = {});

/// Which parameters receive gradients.
enum class GradientScope { all, head_only };

/// Mean loss over the batch (bce for pretrain, hyperspherical for finetune).
/// Gradients of the mean loss are accumulated into `grad`.
double loss_and_gradient(const Parameters& params, const ModelConfig& config,
                         std::span<const TokenSequence> batch, std::span<const int> labels, Phase phase,
                         Parameters& grad, PassOptions options = {}, GradientScope scope = GradientScope::all);

/// Head-only variant working on precomputed [LME] vectors.
double head_loss_and_gradient(const HeadParams& head, std::span<const RowVector> lmes,
                              std::span<const int> labels, Phase phase, HeadParams& grad);

/// Configuration, vocabulary and parameters of a (pre)trained network.
struct TrainedModel {
    ModelConfig config;
    Vocabulary vocab;
    Parameters params;

    TokenSequence encode(const std::vector<std::string>& tokens) const {
        return logsieve::encode(tokens, vocab, config.max_len);
    }
};

/// Inference-mode representation of one log.
LogEmbedding embed(const TrainedModel& model, const TokenSequence& seq);
std::vector<LogEmbedding> embed_batch(const TrainedModel& model, std::span<const TokenSequence> batch);

}  // namespace logsieve
