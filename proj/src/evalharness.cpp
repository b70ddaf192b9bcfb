#include "logsieve/evalharness.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "logsieve/types.hpp"

namespace logsieve {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, std::size_t max_fields, std::string_view& rest) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    auto skip_space = [&] {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    };
    skip_space();
    while (i < line.size() && fields.size() < max_fields) {
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        fields.push_back(line.substr(start, i - start));
        skip_space();
    }
    rest = line.substr(std::min(i, line.size()));
    while (!rest.empty() && (rest.back() == '\r' || rest.back() == '\n')) rest.remove_suffix(1);
    return fields;
}

std::int64_t to_int(std::string_view s, const char* what) {
    std::int64_t v = 0;
    std::istringstream in{std::string(s)};
    if (!(in >> v)) throw Error(std::string("cannot parse ") + what + ": '" + std::string(s) + "'");
    return v;
}

// days since 1970-01-01 for a proleptic Gregorian date
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void attach_group_keys(std::vector<LabeledLog>& logs, const std::optional<std::string>& pattern) {
    if (!pattern) return;
    const std::regex re(*pattern);
    std::smatch m;
    for (auto& log : logs) {
        if (std::regex_search(log.message, m, re)) log.group_key = m.str(0);
    }
}

}  // namespace

nlohmann::ordered_json to_json(const MetricsReport& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"tp", m.tp},
            {"fp", m.fp},               {"fn", m.fn},         {"tn", m.tn}};
}

std::optional<DatasetFormat> parse_dataset_format(std::string_view s) {
    if (s == "bgl") return DatasetFormat::bgl;
    if (s == "hdfs") return DatasetFormat::hdfs;
    if (s == "generic") return DatasetFormat::generic;
    return std::nullopt;
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    DatasetConfig c;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    const auto format = parse_dataset_format(j.value("format", "generic"));
    if (!format) throw Error("unknown dataset format: " + j.value("format", std::string()));
    c.format = *format;
    if (!j.contains("path")) throw Error("dataset config needs a 'path'");
    c.path = resolve(j.at("path").get<std::string>());
    if (j.contains("label_file")) c.label_file = resolve(j.at("label_file").get<std::string>());
    if (j.contains("group_key_regex")) c.group_key_regex = j.at("group_key_regex").get<std::string>();
    if (j.contains("window_seconds")) c.window_seconds = j.at("window_seconds").get<std::int64_t>();
    c.train_frac = j.value("train_frac", 0.8);
    const std::string evaluate_on = j.value("evaluate_on", "test");
    if (evaluate_on != "test" && evaluate_on != "all") throw Error("evaluate_on must be 'test' or 'all'");
    c.evaluate_all = evaluate_on == "all";
    if (c.format == DatasetFormat::hdfs && !c.group_key_regex) c.group_key_regex = "blk_-?[0-9]+";
    return c;
}

DatasetConfig load_dataset_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset config: " + path.string());
    try {
        return dataset_config_from_json(nlohmann::json::parse(in), path.parent_path());
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed dataset config " + path.string() + ": " + e.what());
    }
}

LabeledLog parse_bgl_line(std::string_view line) {
    std::string_view rest;
    const auto fields = split_fields(line, 9, rest);
    if (fields.size() < 9) throw Error("BGL line has fewer than 9 header fields: " + std::string(line));
    LabeledLog log;
    log.label = fields[0] == "-" ? 0 : 1;
    log.timestamp = to_int(fields[1], "BGL timestamp");
    log.message = std::string(rest);
    return log;
}

LabeledLog parse_hdfs_line(std::string_view line) {
    std::string_view rest;
    const auto fields = split_fields(line, 5, rest);
    if (fields.size() < 5 || fields[0].size() != 6 || fields[1].size() != 6)
        throw Error("HDFS line does not start with yyMMdd HHmmss pid level component: " + std::string(line));
    const auto date = to_int(fields[0], "HDFS date");
    const auto time = to_int(fields[1], "HDFS time");
    const std::int64_t days = days_from_civil(2000 + date / 10000, static_cast<unsigned>(date / 100 % 100),
                                              static_cast<unsigned>(date % 100));
    LabeledLog log;
    log.timestamp = days * 86400 + (time / 10000) * 3600 + (time / 100 % 100) * 60 + time % 100;
    log.message = std::string(rest);
    return log;
}

std::map<std::string, int> read_block_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open label file: " + path.string());
    std::map<std::string, int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        const std::string key = line.substr(0, comma);
        const std::string value = line.substr(comma + 1);
        if (value == "Anomaly")
            labels[key] = 1;
        else if (value == "Normal")
            labels[key] = 0;
        // header and unknown rows are skipped
    }
    return labels;
}

std::vector<LabeledLog> load_logs(const std::filesystem::path& path, DatasetFormat format,
                                  const std::optional<std::string>& group_key_regex) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open log file: " + path.string());
    std::vector<LabeledLog> logs;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto before = logs.size();
        switch (format) {
            case DatasetFormat::bgl: logs.push_back(parse_bgl_line(line)); break;
            case DatasetFormat::hdfs: logs.push_back(parse_hdfs_line(line)); break;
            case DatasetFormat::generic: logs.push_back({line_no, line, 0, std::nullopt}); break;
        }
        if (logs.size() > before) logs.back().line_no = static_cast<std::size_t>(line_no);
    }
    std::optional<std::string> pattern = group_key_regex;
    if (!pattern && format == DatasetFormat::hdfs) pattern = "blk_-?[0-9]+";
    attach_group_keys(logs, pattern);
    return logs;
}

std::vector<LabeledLog> load_logs(const DatasetConfig& config) {
    auto logs = load_logs(config.path, config.format, config.group_key_regex);
    if (config.format == DatasetFormat::hdfs && config.label_file) {
        const auto labels = read_block_labels(*config.label_file);
        for (auto& log : logs) {
            if (!log.group_key) continue;
            auto it = labels.find(*log.group_key);
            if (it != labels.end()) log.label = it->second;
        }
    }
    return logs;
}

std::pair<std::vector<LabeledLog>, std::vector<LabeledLog>> chronological_split(const std::vector<LabeledLog>& logs,
                                                                                double train_frac) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error("train_frac must lie in (0, 1)");
    const auto cut = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(logs.size())));
    if (cut == 0 || cut == logs.size()) throw Error("chronological split leaves one side empty");
    return {std::vector<LabeledLog>(logs.begin(), logs.begin() + static_cast<std::ptrdiff_t>(cut)),
            std::vector<LabeledLog>(logs.begin() + static_cast<std::ptrdiff_t>(cut), logs.end())};
}

std::map<std::string, std::vector<std::size_t>> group_by_key(const std::vector<LabeledLog>& logs) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        if (!logs[i].group_key) throw Error("log " + std::to_string(i) + " has no group key");
        groups[*logs[i].group_key].push_back(i);
    }
    return groups;
}

std::vector<std::vector<std::size_t>> group_by_time_window(const std::vector<LabeledLog>& logs,
                                                           std::int64_t window_seconds) {
    if (window_seconds <= 0) throw Error("window_seconds must be positive");
    std::vector<std::vector<std::size_t>> windows;
    if (logs.empty()) return windows;
    const std::int64_t t0 = logs.front().timestamp;
    std::int64_t current = -1;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const std::int64_t offset = logs[i].timestamp - t0;
        if (offset < 0) throw Error("logs are not in chronological order");
        const std::int64_t k = offset / window_seconds;
        if (k != current) {
            if (k < current) throw Error("logs are not in chronological order");
            windows.emplace_back();
            current = k;
        }
        windows.back().push_back(i);
    }
    return windows;
}

std::vector<int> sequence_labels(const std::vector<std::vector<std::size_t>>& groups, std::span<const int> truth) {
    std::vector<int> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        int label = 0;
        for (std::size_t i : g) {
            if (i >= truth.size()) throw Error("group member index out of range");
            label |= truth[i] != 0 ? 1 : 0;
        }
        out.push_back(label);
    }
    return out;
}

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> truth) {
    if (predictions.size() != truth.size()) throw Error("predictions and truth differ in length");
    MetricsReport m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predictions[i] != 0, t = truth[i] != 0;
        if (p && t) ++m.tp;
        else if (p) ++m.fp;
        else if (t) ++m.fn;
        else ++m.tn;
    }
    m.precision = m.tp + m.fp == 0 ? 0.0 : double(m.tp) / double(m.tp + m.fp);
    m.recall = m.tp + m.fn == 0 ? 0.0 : double(m.tp) / double(m.tp + m.fn);
    m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

}  // namespace logsieve
