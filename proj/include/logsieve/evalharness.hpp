#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "logsieve/types.hpp"

namespace logsieve {

/// One target-system log with its header stripped.
struct LabeledLog {
    std::int64_t timestamp = 0;  // seconds
    std::string message;
    int label = 0;  // ground truth, evaluation only
    std::optional<std::string> group_key;
    std::size_t line_no = 0;  // 1-based line in the source file
};

struct MetricsReport {
    double precision = 0, recall = 0, f1 = 0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

nlohmann::ordered_json to_json(const MetricsReport& m);

enum class DatasetFormat { bgl, hdfs, generic };

/// Adapter configuration, usually read from a JSON file:
///   {"format": "bgl"|"hdfs"|"generic", "path": "...", "label_file": "...",
///    "group_key_regex": "...", "window_seconds": 21600, "train_frac": 0.8,
///    "evaluate_on": "test"}
/// Relative paths resolve against the config file's directory.
struct DatasetConfig {
    DatasetFormat format = DatasetFormat::generic;
    std::filesystem::path path;
    std::optional<std::filesystem::path> label_file;  // hdfs: BlockId,Label table
    std::optional<std::string> group_key_regex;
    std::optional<std::int64_t> window_seconds;
    double train_frac = 0.8;
    /// Evaluate on the whole file instead of the held-out chronological tail
    /// ("evaluate_on": "all" | "test").
    bool evaluate_all = false;
};

DatasetConfig dataset_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
DatasetConfig load_dataset_config(const std::filesystem::path& path);
std::optional<DatasetFormat> parse_dataset_format(std::string_view s);

/// BGL-style line: "<label> <unix-ts> <date> <node> <time> <node> <type>
/// <component> <level> <message...>"; label "-" is normal.
LabeledLog parse_bgl_line(std::string_view line);
/// HDFS-style line: "<yyMMdd> <HHmmss> <pid> <level> <component>: <message...>".
LabeledLog parse_hdfs_line(std::string_view line);

/// Parses a whole log file with the configured adapter. Group keys come from
/// group_key_regex (HDFS defaults to block ids); HDFS labels come from the
/// label table keyed by block id. Lines keep file order.
std::vector<LabeledLog> load_logs(const DatasetConfig& config);
std::vector<LabeledLog> load_logs(const std::filesystem::path& path, DatasetFormat format,
                                  const std::optional<std::string>& group_key_regex = std::nullopt);

/// BlockId,Label table ("Anomaly" = 1, "Normal" = 0).
std::map<std::string, int> read_block_labels(const std::filesystem::path& path);

/// First ⌊train_frac·N⌋ logs for training, the rest for testing.
std::pair<std::vector<LabeledLog>, std::vector<LabeledLog>> chronological_split(const std::vector<LabeledLog>& logs,
                                                                                double train_frac);

/// Group key -> indices of member logs, in input order.
std::map<std::string, std::vector<std::size_t>> group_by_key(const std::vector<LabeledLog>& logs);

/// Non-overlapping windows [t0 + kT, t0 + (k+1)T) anchored at the first
/// timestamp; empty windows are omitted. Returns index lists.
std::vector<std::vector<std::size_t>> group_by_time_window(const std::vector<LabeledLog>& logs,
                                                           std::int64_t window_seconds);

/// OR over each group's member labels.
std::vector<int> sequence_labels(const std::vector<std::vector<std::size_t>>& groups, std::span<const int> truth);

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> truth);

}  // namespace logsieve
