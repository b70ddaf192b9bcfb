#include "logsieve/experiments.hpp"

#include <chrono>
#include <cmath>

#include "logsieve/preprocess.hpp"

namespace logsieve {

namespace {

std::vector<TokenSequence> encode_lists(const TokenLists& lists, const TrainedModel& model) {
    std::vector<TokenSequence> out;
    out.reserve(lists.size());
    for (const auto& tokens : lists) out.push_back(model.encode(tokens));
    return out;
}

std::vector<int> predictions_of(const std::vector<DetectionResult>& results) {
    std::vector<int> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(r.verdict == Verdict::anomalous ? 1 : 0);
    return out;
}

}  // namespace

ModelArtifact fit_detector(const TrainedModel& pretrained, const TokenLists& target_tokens,
                           const TokenLists& anomalous_tokens, const ModelConfig& config, Criterion criterion) {
    config.validate();
    if (target_tokens.size() < 2) throw Error("need at least two target logs to finetune and validate");
    if (anomalous_tokens.size() < 2) throw Error("need at least two anomalous samples to finetune and validate");

    auto val_count = [&](std::size_t n) {
        const auto k = static_cast<std::size_t>(std::llround(config.threshold_val_frac * static_cast<double>(n)));
        return std::clamp<std::size_t>(k, 1, n - 1);
    };
    const std::size_t target_cut = target_tokens.size() - val_count(target_tokens.size());
    const TokenLists target_fit(target_tokens.begin(), target_tokens.begin() + static_cast<std::ptrdiff_t>(target_cut));
    const TokenLists target_val(target_tokens.begin() + static_cast<std::ptrdiff_t>(target_cut), target_tokens.end());

    std::vector<std::size_t> order(anomalous_tokens.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(config.seed + 3);
    rng.shuffle(order);
    const std::size_t anomalous_val = val_count(anomalous_tokens.size());
    TokenLists anomalous_fit, anomalous_check;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < anomalous_val ? anomalous_check : anomalous_fit).push_back(anomalous_tokens[order[i]]);

    const auto result = finetune(pretrained, encode_lists(target_fit, pretrained),
                                 encode_lists(anomalous_fit, pretrained), config);

    ModelArtifact artifact;
    artifact.model = pretrained;
    artifact.model.config = config;
    artifact.model.params.set2 = result.set2;

    std::vector<double> scores;
    std::vector<int> labels;
    const std::pair<const TokenLists*, int> parts[] = {{&target_val, 0}, {&anomalous_check, 1}};
    for (const auto& [part, label] : parts) {
        for (const auto& seq : encode_lists(*part, artifact.model)) {
            scores.push_back(normality_score(embed(artifact.model, seq).x));
            labels.push_back(label);
        }
    }
    artifact.threshold = select_threshold(scores, labels, criterion);
    return artifact;
}

TokenLists abnormal_tokens(const std::vector<SLSample>& sl) {
    TokenLists out;
    for (const auto& s : sl)
        if (s.group == SeverityGroup::abnormal) out.push_back(s.tokens);
    return out;
}

TokenLists message_tokens(const std::vector<LabeledLog>& logs) {
    TokenLists out;
    out.reserve(logs.size());
    for (const auto& log : logs) out.push_back(normalize_text(log.message));
    return out;
}

TokenLists load_external_abnormal(const DatasetConfig& source) {
    const auto logs = load_logs(source);
    TokenLists out;
    for (const auto& log : logs) {
        if (source.format != DatasetFormat::generic && log.label == 0) continue;
        auto tokens = normalize_text(log.message);
        if (!tokens.empty()) out.push_back(std::move(tokens));
    }
    if (out.empty()) throw Error("external label source contains no anomalous logs: " + source.path.string());
    return out;
}

std::vector<DetectionResult> detect_logs(const ModelArtifact& artifact, const std::vector<LabeledLog>& logs) {
    if (!artifact.threshold) throw Error("artifact has no threshold; run finetune first");
    std::vector<DetectionResult> out;
    out.reserve(logs.size());
    for (const auto& log : logs) {
        const auto seq = artifact.model.encode(normalize_text(log.message));
        out.push_back(detect(embed(artifact.model, seq).x, *artifact.threshold));
    }
    return out;
}

SequenceGrouping SequenceGrouping::from(const DatasetConfig& config) {
    SequenceGrouping g;
    g.by_key = config.group_key_regex.has_value();
    if (!g.by_key) g.window_seconds = config.window_seconds;
    return g;
}

std::vector<Sequence> make_sequences(const std::vector<LabeledLog>& logs, const SequenceGrouping& grouping) {
    std::vector<Sequence> out;
    if (grouping.by_key) {
        // logs without a key do not belong to any sequence
        std::vector<LabeledLog> keyed;
        std::vector<std::size_t> origin;
        for (std::size_t i = 0; i < logs.size(); ++i) {
            if (!logs[i].group_key) continue;
            keyed.push_back(logs[i]);
            origin.push_back(i);
        }
        for (auto& [key, members] : group_by_key(keyed)) {
            Sequence s{key, {}};
            for (std::size_t m : members) s.members.push_back(origin[m]);
            out.push_back(std::move(s));
        }
    } else if (grouping.window_seconds) {
        for (auto& members : group_by_time_window(logs, *grouping.window_seconds))
            out.push_back({"window@" + std::to_string(logs[members.front()].timestamp), std::move(members)});
    }
    return out;
}

Evaluation evaluate_logs(const ModelArtifact& artifact, const std::vector<LabeledLog>& logs,
                         const SequenceGrouping& grouping) {
    const auto results = detect_logs(artifact, logs);
    std::vector<int> truth;
    truth.reserve(logs.size());
    for (const auto& log : logs) truth.push_back(log.label);
    Evaluation e;
    e.line = compute_metrics(predictions_of(results), truth);
    if (grouping.enabled()) {
        const auto sequences = make_sequences(logs, grouping);
        std::vector<std::vector<std::size_t>> groups;
        std::vector<int> predicted;
        for (const auto& s : sequences) {
            groups.push_back(s.members);
            std::vector<DetectionResult> members;
            for (std::size_t i : s.members) members.push_back(results[i]);
            predicted.push_back(aggregate_sequence(members) == Verdict::anomalous ? 1 : 0);
        }
        e.sequence = compute_metrics(predicted, sequence_labels(groups, truth));
        e.sequences = sequences.size();
    }
    return e;
}

nlohmann::ordered_json to_json(const Evaluation& e) {
    nlohmann::ordered_json j;
    j["line"] = to_json(e.line);
    j["sequence"] = e.sequence ? to_json(*e.sequence) : nlohmann::ordered_json(nullptr);
    j["sequences"] = e.sequences;
    return j;
}

std::vector<RatioResult> run_label_ratio_experiment(const std::vector<double>& ratios, const TrainedModel& pretrained,
                                                    const ExperimentData& data, const ModelConfig& config,
                                                    AbnormalSource source) {
    const auto [train, test] = chronological_split(data.logs, data.dataset.train_frac);
    const auto target = message_tokens(train);
    const TokenLists anomalous = source == AbnormalSource::sl ? abnormal_tokens(data.sl) : data.external_abnormal;
    const auto grouping = SequenceGrouping::from(data.dataset);
    std::vector<RatioResult> out;
    for (double ratio : ratios) {
        ModelConfig c = config;
        c.anomaly_batch_fraction = ratio;
        const auto artifact = fit_detector(pretrained, target, anomalous, c);
        out.push_back({ratio, evaluate_logs(artifact, test, grouping)});
    }
    return out;
}

std::vector<SensitivityCell> run_sensitivity_experiment(const std::vector<int>& model_sizes,
                                                        const std::vector<int>& batch_sizes,
                                                        const ExperimentData& data, const ModelConfig& config) {
    const auto [train, test] = chronological_split(data.logs, data.dataset.train_frac);
    const auto target = message_tokens(train);
    const auto anomalous = abnormal_tokens(data.sl);
    const auto grouping = SequenceGrouping::from(data.dataset);
    std::vector<SensitivityCell> out;
    for (int d : model_sizes) {
        for (int b : batch_sizes) {
            ModelConfig c = config;
            c.model_size = d;
            c.batch_size = b;
            const auto start = std::chrono::steady_clock::now();
            const auto pretrained = pretrain_from_sl(data.sl, c);
            const auto artifact = fit_detector(pretrained.model, target, anomalous, c);
            const auto stop = std::chrono::steady_clock::now();
            out.push_back({d, b, evaluate_logs(artifact, test, grouping),
                           std::chrono::duration<double>(stop - start).count()});
        }
    }
    return out;
}

}  // namespace logsieve
