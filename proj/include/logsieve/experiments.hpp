#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "logsieve/artifact.hpp"
#include "logsieve/detector.hpp"
#include "logsieve/evalharness.hpp"
#include "logsieve/training.hpp"

namespace logsieve {

using TokenLists = std::vector<std::vector<std::string>>;

/// Finetunes head set 2 and selects the decision threshold.
///
/// The trailing `threshold_val_frac` of `target_tokens` (chronological) and
/// the same share of `anomalous_tokens` (seeded pick) form the validation set;
/// everything else is used for finetuning.
ModelArtifact fit_detector(const TrainedModel& pretrained, const TokenLists& target_tokens,
                           const TokenLists& anomalous_tokens, const ModelConfig& config,
                           Criterion criterion = Criterion::f1);

/// Abnormal SL samples as token lists.
TokenLists abnormal_tokens(const std::vector<SLSample>& sl);
/// Normalized messages of logs.
TokenLists message_tokens(const std::vector<LabeledLog>& logs);

/// Normalized messages of an externally labeled log file: every line for
/// the generic format, only anomalous lines for bgl/hdfs-style files.
TokenLists load_external_abnormal(const DatasetConfig& source);

std::vector<DetectionResult> detect_logs(const ModelArtifact& artifact, const std::vector<LabeledLog>& logs);

/// How logs are grouped into sequences.
struct SequenceGrouping {
    bool by_key = false;
    std::optional<std::int64_t> window_seconds;

    bool enabled() const { return by_key || window_seconds.has_value(); }
    static SequenceGrouping from(const DatasetConfig& config);
};

struct Sequence {
    std::string id;
    std::vector<std::size_t> members;
};

std::vector<Sequence> make_sequences(const std::vector<LabeledLog>& logs, const SequenceGrouping& grouping);

struct Evaluation {
    MetricsReport line;
    std::optional<MetricsReport> sequence;
    std::size_t sequences = 0;
};

Evaluation evaluate_logs(const ModelArtifact& artifact, const std::vector<LabeledLog>& logs,
                         const SequenceGrouping& grouping);

nlohmann::ordered_json to_json(const Evaluation& e);

enum class AbnormalSource { sl, external };

struct ExperimentData {
    std::vector<SLSample> sl;
    DatasetConfig dataset;
    std::vector<LabeledLog> logs;  // full dataset in file order
    TokenLists external_abnormal;  // used when the source is external
};

struct RatioResult {
    double ratio = 0;
    Evaluation evaluation;
};

/// One finetune + evaluation per anomalous batch fraction, sharing a
/// pretrained model.
std::vector<RatioResult> run_label_ratio_experiment(const std::vector<double>& ratios, const TrainedModel& pretrained,
                                                    const ExperimentData& data, const ModelConfig& config,
                                                    AbnormalSource source = AbnormalSource::sl);

struct SensitivityCell {
    int model_size = 0;
    int batch_size = 0;
    Evaluation evaluation;
    double train_seconds = 0;  // pretraining + finetuning wall clock
};

/// Full pretrain/finetune/evaluate for every (model_size, batch_size) pair.
std::vector<SensitivityCell> run_sensitivity_experiment(const std::vector<int>& model_sizes,
                                                        const std::vector<int>& batch_sizes,
                                                        const ExperimentData& data, const ModelConfig& config);

}  // namespace logsieve
