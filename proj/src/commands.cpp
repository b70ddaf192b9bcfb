#include "logsieve/commands.hpp"

#include <fstream>
#include <iostream>

#include "logsieve/artifact.hpp"
#include "logsieve/corpus_study.hpp"
#include "logsieve/experiments.hpp"
#include "logsieve/sl_miner.hpp"
#include "logsieve/training.hpp"

namespace logsieve::cli {

namespace {

template <typename Fn>
int guarded(Streams io, Fn&& fn) {
    try {
        fn();
        return 0;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return 1;
    }
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

std::vector<SLSample> read_nonempty_sl(const std::filesystem::path& path) {
    auto sl = read_sl_dataset(path);
    if (sl.empty()) throw Error("SL dataset is empty: " + path.string());
    return sl;
}

ModelArtifact load_finetuned(const std::filesystem::path& path) {
    auto artifact = ModelArtifact::load(path);
    if (!artifact.finetuned())
        throw Error("artifact has no threshold (pretrained only); run `logsieve finetune` before detection");
    return artifact;
}

}  // namespace

ModelConfig ConfigOverrides::resolve(const ModelConfig& base) const {
    ModelConfig c = base;
    if (config_file) {
        std::ifstream in(*config_file);
        if (!in) throw Error("cannot open config file: " + config_file->string());
        auto j = nlohmann::json::parse(in);
        // accept either a bare config or an artifact-style {"model": {...}}
        c = config_from_json(j.contains("model") ? j.at("model") : j, c);
    }
    c = config_from_json(flags, c);
    c.validate();
    return c;
}

int cmd_mine(const std::filesystem::path& src_dir, const std::filesystem::path& out_sl, Streams io) {
    return guarded(io, [&] {
        const auto instructions = mine_directory(src_dir);
        const auto samples = build_sl_dataset(instructions);
        if (samples.empty()) throw Error("no log instructions with a mapped level found under " + src_dir.string());
        auto out = open_output(out_sl);
        write_sl_dataset(out, samples);
        if (!out) throw Error("failed writing " + out_sl.string());
        const auto abnormal = static_cast<std::size_t>(std::count_if(
            samples.begin(), samples.end(), [](const SLSample& s) { return s.group == SeverityGroup::abnormal; }));
        io.out << "instructions " << instructions.size() << "\nsamples " << samples.size() << "\nnormal "
               << samples.size() - abnormal << "\nabnormal " << abnormal << '\n';
    });
}

int cmd_study(const StudyArgs& args, Streams io) {
    return guarded(io, [&] {
        const auto sl = read_nonempty_sl(args.sl_file);
        StudyOptions options;
        options.ns = args.ns;
        options.min_count = args.min_count;
        options.tau = args.tau;
        std::optional<LexiconScorer> custom;
        if (args.lexicon) custom = LexiconScorer::load(*args.lexicon);
        const auto result = run_study(sl, options, custom ? *custom : LexiconScorer::default_lexicon());
        write_json(args.out_report, to_json(result, options));
        if (args.ngram_table) {
            auto out = open_output(*args.ngram_table);
            write_ngram_table(out, result.records);
        }
        io.out << "ngrams " << result.records.size() << '\n';
        if (result.pooled) io.out << "median_entropy " << result.pooled->median << '\n';
    });
}

int cmd_pretrain(const std::filesystem::path& sl_file, const std::filesystem::path& out_artifact,
                 const ConfigOverrides& overrides, Streams io) {
    return guarded(io, [&] {
        const auto config = overrides.resolve(ModelConfig{});
        const auto sl = read_nonempty_sl(sl_file);
        const auto result = pretrain_from_sl(sl, config);
        ModelArtifact artifact{result.model, std::nullopt};
        artifact.save(out_artifact);
        io.out << "epochs " << result.epochs_run << "\nbest_epoch " << result.best_epoch << "\nval_loss "
               << result.val_losses.at(static_cast<std::size_t>(result.best_epoch - 1)) << "\nval_accuracy "
               << result.val_accuracy << "\nvocabulary " << result.model.vocab.size() << '\n';
    });
}

int cmd_finetune(const FinetuneArgs& args, Streams io) {
    return guarded(io, [&] {
        const auto pretrained = ModelArtifact::load(args.artifact);
        const auto config = args.overrides.resolve(pretrained.model.config);
        const auto logs = load_logs(args.target_logs, args.format);
        TokenLists anomalous;
        if (args.external_labels) {
            DatasetConfig external;
            external.format = args.external_format;
            external.path = *args.external_labels;
            anomalous = load_external_abnormal(external);
        } else {
            anomalous = abnormal_tokens(read_nonempty_sl(args.sl_file));
        }
        const auto artifact = fit_detector(pretrained.model, message_tokens(logs), anomalous, config, args.criterion);
        artifact.save(args.out_artifact);
        io.out << "threshold " << artifact.threshold->a_tilde << '\n'
               << to_string(args.criterion) << "_validation " << artifact.threshold->achieved << '\n';
    });
}

int cmd_detect(const DetectArgs& args, Streams io) {
    return guarded(io, [&] {
        const auto artifact = load_finetuned(args.artifact);
        const auto logs = load_logs(args.log_file, args.format, args.group_key_regex);
        const auto results = detect_logs(artifact, logs);
        {
            auto out = open_output(args.out_verdicts);
            for (std::size_t i = 0; i < logs.size(); ++i) {
                nlohmann::ordered_json j{{"line_no", logs[i].line_no},
                                         {"score", results[i].score},
                                         {"verdict", std::string(to_string(results[i].verdict))}};
                out << j.dump() << '\n';
            }
            if (!out) throw Error("failed writing " + args.out_verdicts.string());
        }
        std::size_t anomalous = 0;
        for (const auto& r : results) anomalous += r.verdict == Verdict::anomalous ? 1 : 0;
        io.out << "logs " << logs.size() << "\nanomalous " << anomalous << '\n';

        SequenceGrouping grouping{args.group_key_regex.has_value(), args.window_seconds};
        if (grouping.by_key) grouping.window_seconds.reset();
        if (!grouping.enabled()) return;
        const auto path = args.out_sequences.value_or(args.out_verdicts.string() + ".sequences.jsonl");
        auto out = open_output(path);
        std::size_t flagged = 0;
        const auto sequences = make_sequences(logs, grouping);
        for (const auto& s : sequences) {
            std::vector<DetectionResult> members;
            for (std::size_t i : s.members) members.push_back(results[i]);
            const Verdict v = aggregate_sequence(members);
            flagged += v == Verdict::anomalous ? 1 : 0;
            out << nlohmann::ordered_json{{"group_id", s.id}, {"verdict", std::string(to_string(v))}}.dump() << '\n';
        }
        if (!out) throw Error("failed writing " + path.string());
        io.out << "sequences " << sequences.size() << "\nanomalous_sequences " << flagged << '\n';
    });
}

int cmd_evaluate(const std::filesystem::path& artifact_dir, const std::filesystem::path& dataset_config,
                 const std::filesystem::path& out_report, Streams io) {
    return guarded(io, [&] {
        const auto artifact = load_finetuned(artifact_dir);
        const auto dataset = load_dataset_config(dataset_config);
        auto logs = load_logs(dataset);
        if (!dataset.evaluate_all) logs = chronological_split(logs, dataset.train_frac).second;
        const auto evaluation = evaluate_logs(artifact, logs, SequenceGrouping::from(dataset));
        auto report = to_json(evaluation);
        report["logs"] = logs.size();
        report["threshold"] = artifact.threshold->a_tilde;
        write_json(out_report, report);
        io.out << "line_f1 " << evaluation.line.f1 << '\n';
        if (evaluation.sequence) io.out << "sequence_f1 " << evaluation.sequence->f1 << '\n';
    });
}

int cmd_ratio_experiment(const RatioArgs& args, Streams io) {
    return guarded(io, [&] {
        ExperimentData data;
        data.sl = read_nonempty_sl(args.sl_file);
        data.dataset = load_dataset_config(args.dataset_config);
        data.logs = load_logs(data.dataset);
        AbnormalSource source = AbnormalSource::sl;
        if (args.external_labels) {
            DatasetConfig external;
            external.format = args.external_format;
            external.path = *args.external_labels;
            data.external_abnormal = load_external_abnormal(external);
            source = AbnormalSource::external;
        }
        TrainedModel pretrained;
        ModelConfig config;
        if (args.pretrained) {
            pretrained = ModelArtifact::load(*args.pretrained).model;
            config = args.overrides.resolve(pretrained.config);
        } else {
            config = args.overrides.resolve(ModelConfig{});
            pretrained = pretrain_from_sl(data.sl, config).model;
        }
        const auto results = run_label_ratio_experiment(args.ratios, pretrained, data, config, source);
        nlohmann::ordered_json report;
        report["abnormal_source"] = source == AbnormalSource::sl ? "sl" : "external";
        report["results"] = nlohmann::ordered_json::array();
        for (const auto& r : results) {
            auto j = to_json(r.evaluation);
            j["ratio"] = r.ratio;
            report["results"].push_back(j);
            io.out << "ratio " << r.ratio << " line_f1 " << r.evaluation.line.f1 << '\n';
        }
        write_json(args.out_report, report);
    });
}

int cmd_sensitivity_experiment(const SensitivityArgs& args, Streams io) {
    return guarded(io, [&] {
        ExperimentData data;
        data.sl = read_nonempty_sl(args.sl_file);
        data.dataset = load_dataset_config(args.dataset_config);
        data.logs = load_logs(data.dataset);
        const auto config = args.overrides.resolve(ModelConfig{});
        const auto cells = run_sensitivity_experiment(args.model_sizes, args.batch_sizes, data, config);
        nlohmann::ordered_json report = nlohmann::ordered_json::array();
        for (const auto& c : cells) {
            auto j = to_json(c.evaluation);
            j["model_size"] = c.model_size;
            j["batch_size"] = c.batch_size;
            j["train_seconds"] = c.train_seconds;
            report.push_back(j);
            io.out << "model_size " << c.model_size << " batch_size " << c.batch_size << " line_f1 "
                   << c.evaluation.line.f1 << " seconds " << c.train_seconds << '\n';
        }
        write_json(args.out_report, report);
    });
}

int cmd_synth(const std::filesystem::path& out_dir, const SyntheticSpec& spec, Streams io) {
    return guarded(io, [&] {
        const auto anomalies = write_synthetic_corpus(out_dir, spec);
        io.out << "target_logs " << spec.target_logs << "\nanomalies " << anomalies << '\n';
    });
}

}  // namespace logsieve::cli
