#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "logsieve/detector.hpp"
#include "logsieve/evalharness.hpp"
#include "logsieve/model.hpp"
#include "logsieve/synthetic.hpp"

/// Entry points behind the `logsieve` subcommands. Each returns the process
/// exit status (0 iff every output was written) and reports to the given
/// streams.
namespace logsieve::cli {

/// Model configuration layered as base <- config file <- flags.
struct ConfigOverrides {
    std::optional<std::filesystem::path> config_file;
    nlohmann::json flags = nlohmann::json::object();  // ModelConfig field name -> value

    ModelConfig resolve(const ModelConfig& base) const;
};

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

int cmd_mine(const std::filesystem::path& src_dir, const std::filesystem::path& out_sl, Streams io);

struct StudyArgs {
    std::filesystem::path sl_file;
    std::filesystem::path out_report;
    std::optional<std::filesystem::path> ngram_table;
    std::optional<std::filesystem::path> lexicon;
    std::vector<int> ns{3, 4, 5};
    std::size_t min_count = 3;
    double tau = 0.1;
};
int cmd_study(const StudyArgs& args, Streams io);

int cmd_pretrain(const std::filesystem::path& sl_file, const std::filesystem::path& out_artifact,
                 const ConfigOverrides& overrides, Streams io);

struct FinetuneArgs {
    std::filesystem::path artifact;
    std::filesystem::path target_logs;
    DatasetFormat format = DatasetFormat::bgl;
    std::filesystem::path sl_file;
    std::filesystem::path out_artifact;
    Criterion criterion = Criterion::f1;
    /// Replaces the abnormal SL samples as the anomalous class.
    std::optional<std::filesystem::path> external_labels;
    DatasetFormat external_format = DatasetFormat::generic;
    ConfigOverrides overrides;
};
int cmd_finetune(const FinetuneArgs& args, Streams io);

struct DetectArgs {
    std::filesystem::path artifact;
    std::filesystem::path log_file;
    DatasetFormat format = DatasetFormat::bgl;
    std::filesystem::path out_verdicts;
    std::optional<std::string> group_key_regex;
    std::optional<std::int64_t> window_seconds;
    /// Defaults to "<out_verdicts>.sequences.jsonl" when grouping is requested.
    std::optional<std::filesystem::path> out_sequences;
};
int cmd_detect(const DetectArgs& args, Streams io);

int cmd_evaluate(const std::filesystem::path& artifact, const std::filesystem::path& dataset_config,
                 const std::filesystem::path& out_report, Streams io);

struct RatioArgs {
    std::filesystem::path sl_file;
    std::filesystem::path dataset_config;
    std::filesystem::path out_report;
    std::vector<double> ratios{0.01, 0.05, 0.10, 0.20};
    std::optional<std::filesystem::path> external_labels;
    DatasetFormat external_format = DatasetFormat::generic;
    /// Reuse an existing pretrained artifact instead of pretraining.
    std::optional<std::filesystem::path> pretrained;
    ConfigOverrides overrides;
};
int cmd_ratio_experiment(const RatioArgs& args, Streams io);

struct SensitivityArgs {
    std::filesystem::path sl_file;
    std::filesystem::path dataset_config;
    std::filesystem::path out_report;
    std::vector<int> model_sizes{16, 64, 256};
    std::vector<int> batch_sizes{32, 64, 256, 512};
    ConfigOverrides overrides;
};
int cmd_sensitivity_experiment(const SensitivityArgs& args, Streams io);

int cmd_synth(const std::filesystem::path& out_dir, const SyntheticSpec& spec, Streams io);

}  // namespace logsieve::cli
