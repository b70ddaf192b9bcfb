#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "logsieve/model.hpp"
#include "logsieve/types.hpp"

namespace logsieve {

/// Adam with bias correction, epsilon 1e-8 and no weight decay. Tracks one
/// moment pair per tensor of a Parameters layout; only tensors accepted by
/// the filter are stepped.
class Adam {
public:
    using Filter = std::function<bool(const std::string& name)>;

    Adam(const Parameters& layout, double learning_rate, double beta1, double beta2, Filter filter);

    void step(Parameters& params, const Parameters& grad);
    int steps() const { return t_; }

private:
    Parameters m_, v_;
    double lr_, beta1_, beta2_;
    Filter filter_;
    int t_ = 0;
};

/// Tracks validation losses; stop once `patience` consecutive epochs fail to
/// strictly improve on the best loss seen.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}

    /// Records the loss of the next epoch (1-based). Returns true when
    /// training should stop after this epoch.
    bool update(double loss);
    bool improved() const { return improved_; }
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }
    int epochs_seen() const { return epoch_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int stale_ = 0;
    bool improved_ = false;
    double best_loss_ = 0.0;
};

struct PretrainResult {
    TrainedModel model;
    int best_epoch = 0;
    int epochs_run = 0;
    std::vector<double> train_losses;
    std::vector<double> val_losses;
    double val_accuracy = 0.0;  // at best epoch
};

/// Severity-group classification on SL data (embeddings, encoder, head set 1).
/// The vocabulary is built from `train`, which is expected to be masked
/// already. Returns parameters of the best validation epoch.
PretrainResult pretrain(const std::vector<SLSample>& train, const std::vector<SLSample>& val,
                        const ModelConfig& config);

/// Splits SL data into pretraining train/validation, masks the training part
/// and pretrains.
PretrainResult pretrain_from_sl(const std::vector<SLSample>& sl, const ModelConfig& config);

/// Deterministic split: a seeded shuffle, then `val_frac` of each severity
/// group goes to validation.
std::pair<std::vector<SLSample>, std::vector<SLSample>> split_sl(const std::vector<SLSample>& sl, double val_frac,
                                                                 std::uint64_t seed);

struct FinetuneResult {
    HeadParams set2;
    std::vector<double> epoch_losses;
};

/// Hyperspherical training of head set 2 only. Target logs are class 0,
/// anomalous samples class 1; each batch holds a fixed share of class 1.
/// The encoder is evaluated in inference mode and never modified.
FinetuneResult finetune(const TrainedModel& pretrained, const std::vector<TokenSequence>& target_normal,
                        const std::vector<TokenSequence>& anomalous, const ModelConfig& config);

/// Classification accuracy of head set 1 on SL samples.
double severity_accuracy(const TrainedModel& model, const std::vector<SLSample>& samples);

}  // namespace logsieve
