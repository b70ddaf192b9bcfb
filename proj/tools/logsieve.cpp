#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "logsieve/commands.hpp"

namespace {

using logsieve::cli::ConfigOverrides;

/// Registers one `--<field>` flag per ModelConfig field. Values are kept as
/// strings and converted into JSON overrides after parsing.
class ConfigFlags {
public:
    void attach(CLI::App* app) {
        app->add_option("--config", config_file_, "JSON file with ModelConfig fields");
        const auto defaults = logsieve::to_json(logsieve::ModelConfig{});
        for (const auto& [key, value] : defaults.items()) {
            auto& slot = values_[key];
            app->add_option("--" + key, slot, "default " + value.dump());
        }
    }

    ConfigOverrides overrides() const {
        ConfigOverrides o;
        if (!config_file_.empty()) o.config_file = config_file_;
        const auto defaults = logsieve::to_json(logsieve::ModelConfig{});
        for (const auto& [key, text] : values_) {
            if (text.empty()) continue;
            const auto& kind = defaults.at(key);
            if (kind.is_boolean()) {
                if (text != "true" && text != "false") throw CLI::ValidationError("--" + key, "expected true or false");
                o.flags[key] = text == "true";
            } else if (kind.is_number_unsigned()) {
                o.flags[key] = std::stoull(text);
            } else if (kind.is_number_integer()) {
                o.flags[key] = std::stoll(text);
            } else {
                o.flags[key] = std::stod(text);
            }
        }
        return o;
    }

private:
    std::string config_file_;
    std::map<std::string, std::string> values_;
};

logsieve::DatasetFormat format_of(const std::string& name) {
    auto f = logsieve::parse_dataset_format(name);
    if (!f) throw CLI::ValidationError("--format", "unknown format " + name);
    return *f;
}

const std::vector<std::string> kFormats{"bgl", "hdfs", "generic"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Log anomaly detection from logging instructions in source code"};
    app.require_subcommand(1);
    logsieve::cli::Streams io{std::cout, std::cerr};
    int status = 0;

    auto* mine = app.add_subcommand("mine", "Extract the SL dataset from a source tree");
    std::string mine_src, mine_out;
    mine->add_option("src_dir", mine_src)->required();
    mine->add_option("out_sl", mine_out)->required();
    mine->callback([&] { status = logsieve::cli::cmd_mine(mine_src, mine_out, io); });

    auto* study = app.add_subcommand("study", "N-gram entropy and sentiment study of an SL dataset");
    logsieve::cli::StudyArgs study_args;
    std::string study_table, study_lexicon;
    study->add_option("sl_file", study_args.sl_file)->required();
    study->add_option("out_report", study_args.out_report)->required();
    study->add_option("--ngram-table", study_table, "also write a TSV of all n-grams");
    study->add_option("--lexicon", study_lexicon, "sentiment lexicon file");
    study->add_option("--n", study_args.ns, "n-gram orders")->delimiter(',');
    study->add_option("--min-count", study_args.min_count, "drop n-grams with total count <= this");
    study->add_option("--tau", study_args.tau, "sentiment neutrality band");
    study->callback([&] {
        if (!study_table.empty()) study_args.ngram_table = study_table;
        if (!study_lexicon.empty()) study_args.lexicon = study_lexicon;
        status = logsieve::cli::cmd_study(study_args, io);
    });

    auto* pretrain = app.add_subcommand("pretrain", "Pretrain the encoder on an SL dataset");
    std::string pre_sl, pre_out;
    ConfigFlags pre_flags;
    pretrain->add_option("sl_file", pre_sl)->required();
    pretrain->add_option("out_artifact", pre_out)->required();
    pre_flags.attach(pretrain);
    pretrain->callback([&] { status = logsieve::cli::cmd_pretrain(pre_sl, pre_out, pre_flags.overrides(), io); });

    auto* finetune = app.add_subcommand("finetune", "Finetune on target logs and select the threshold");
    logsieve::cli::FinetuneArgs ft;
    std::string ft_format = "bgl", ft_criterion = "f1", ft_external, ft_external_format = "generic";
    ConfigFlags ft_flags;
    finetune->add_option("artifact", ft.artifact)->required();
    finetune->add_option("target_logs", ft.target_logs)->required();
    finetune->add_option("sl_file", ft.sl_file)->required();
    finetune->add_option("out_artifact", ft.out_artifact)->required();
    finetune->add_option("--format", ft_format, "target log format")->check(CLI::IsMember(kFormats));
    finetune->add_option("--criterion", ft_criterion, "threshold criterion")
        ->check(CLI::IsMember({"f1", "precision", "recall"}));
    finetune->add_option("--external-labels", ft_external, "labeled log file replacing the SL abnormal class");
    finetune->add_option("--external-format", ft_external_format)->check(CLI::IsMember(kFormats));
    ft_flags.attach(finetune);
    finetune->callback([&] {
        ft.format = format_of(ft_format);
        ft.criterion = *logsieve::parse_criterion(ft_criterion);
        if (!ft_external.empty()) ft.external_labels = ft_external;
        ft.external_format = format_of(ft_external_format);
        ft.overrides = ft_flags.overrides();
        status = logsieve::cli::cmd_finetune(ft, io);
    });

    auto* detect = app.add_subcommand("detect", "Score logs and write per-line verdicts");
    logsieve::cli::DetectArgs dt;
    std::string dt_format = "bgl", dt_regex, dt_seq_out;
    std::int64_t dt_window = 0;
    detect->add_option("artifact", dt.artifact)->required();
    detect->add_option("log_file", dt.log_file)->required();
    detect->add_option("out_verdicts", dt.out_verdicts)->required();
    detect->add_option("--format", dt_format)->check(CLI::IsMember(kFormats));
    auto* regex_opt = detect->add_option("--group-key-regex", dt_regex, "group lines into sequences by key");
    detect->add_option("--window-seconds", dt_window, "group lines into fixed time windows")
        ->check(CLI::PositiveNumber)
        ->excludes(regex_opt);
    detect->add_option("--sequences-out", dt_seq_out, "sequence verdict file");
    detect->callback([&] {
        dt.format = format_of(dt_format);
        if (!dt_regex.empty()) dt.group_key_regex = dt_regex;
        if (dt_window > 0) dt.window_seconds = dt_window;
        if (!dt_seq_out.empty()) dt.out_sequences = dt_seq_out;
        status = logsieve::cli::cmd_detect(dt, io);
    });

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a finetuned artifact on a labeled dataset");
    std::string ev_artifact, ev_dataset, ev_out;
    evaluate->add_option("artifact", ev_artifact)->required();
    evaluate->add_option("dataset_config", ev_dataset)->required();
    evaluate->add_option("out_report", ev_out)->required();
    evaluate->callback([&] { status = logsieve::cli::cmd_evaluate(ev_artifact, ev_dataset, ev_out, io); });

    auto* ratio = app.add_subcommand("ratio-exp", "F1 across anomalous batch fractions");
    logsieve::cli::RatioArgs ra;
    std::string ra_external, ra_external_format = "generic", ra_pretrained;
    ConfigFlags ra_flags;
    ratio->add_option("sl_file", ra.sl_file)->required();
    ratio->add_option("dataset_config", ra.dataset_config)->required();
    ratio->add_option("out_report", ra.out_report)->required();
    ratio->add_option("--ratios", ra.ratios)->delimiter(',');
    ratio->add_option("--external-labels", ra_external);
    ratio->add_option("--external-format", ra_external_format)->check(CLI::IsMember(kFormats));
    ratio->add_option("--pretrained", ra_pretrained, "reuse this pretrained artifact");
    ra_flags.attach(ratio);
    ratio->callback([&] {
        if (!ra_external.empty()) ra.external_labels = ra_external;
        ra.external_format = format_of(ra_external_format);
        if (!ra_pretrained.empty()) ra.pretrained = ra_pretrained;
        ra.overrides = ra_flags.overrides();
        status = logsieve::cli::cmd_ratio_experiment(ra, io);
    });

    auto* sens = app.add_subcommand("sensitivity-exp", "F1 and training time across model and batch sizes");
    logsieve::cli::SensitivityArgs se;
    ConfigFlags se_flags;
    sens->add_option("sl_file", se.sl_file)->required();
    sens->add_option("dataset_config", se.dataset_config)->required();
    sens->add_option("out_report", se.out_report)->required();
    sens->add_option("--model-sizes", se.model_sizes)->delimiter(',');
    sens->add_option("--batch-sizes", se.batch_sizes)->delimiter(',');
    se_flags.attach(sens);
    sens->callback([&] {
        se.overrides = se_flags.overrides();
        status = logsieve::cli::cmd_sensitivity_experiment(se, io);
    });

    auto* synth = app.add_subcommand("synth", "Write a synthetic source tree and labeled target log");
    std::string synth_out;
    logsieve::SyntheticSpec spec;
    synth->add_option("out_dir", synth_out)->required();
    synth->add_option("--sl-samples", spec.sl_samples);
    synth->add_option("--target-logs", spec.target_logs);
    synth->add_option("--anomaly-rate", spec.anomaly_rate);
    synth->add_option("--logs-per-block", spec.logs_per_block);
    synth->add_option("--train-frac", spec.train_frac);
    synth->add_option("--seed", spec.seed);
    synth->callback([&] { status = logsieve::cli::cmd_synth(synth_out, spec, io); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return status;
}
