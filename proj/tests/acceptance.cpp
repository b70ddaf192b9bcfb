// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "logsieve/artifact.hpp"
#include "logsieve/commands.hpp"
#include "logsieve/corpus_study.hpp"
#include "logsieve/detector.hpp"
#include "logsieve/evalharness.hpp"
#include "logsieve/experiments.hpp"
#include "logsieve/preprocess.hpp"
#include "gradcheck.hpp"
#include "pipeline_fixture.hpp"

using namespace logsieve;

namespace {

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

// ---------------------------------------------------------------- 1
Outcome gradient_oracle() {
    const double start = cpu_seconds();
    ModelConfig c;
    c.model_size = 8;
    c.num_layers = 2;
    c.num_heads = 2;
    c.max_len = 4;
    const int vocab = 9;
    const auto batch = testing::gradcheck_batch(c.max_len, vocab);
    double worst = 0;
    std::string worst_name;
    for (Phase phase : {Phase::pretrain, Phase::finetune}) {
        const auto checks =
            testing::gradient_check(c, testing::random_parameters(c, vocab, 2024), batch, {0, 1}, phase, 1e-4);
        for (const auto& t : checks)
            if (t.rel_error >= worst) {
                worst = t.rel_error;
                worst_name = (phase == Phase::pretrain ? "bce:" : "hypersphere:") + t.name;
            }
    }
    const double elapsed = cpu_seconds() - start;
    return {worst < 1e-3 && elapsed < 60,
            "max relative error " + fmt(worst) + " (" + worst_name + "), " + fmt(elapsed, 3) + " s"};
}

// ---------------------------------------------------------------- 2
Outcome loss_values() {
    RowVector x(1);
    x << std::sqrt(std::log(2.0));
    const double anomalous = hyperspherical_loss(x, 1);
    RowVector y(3);
    y << 0.5, -1.25, 3.0;
    const double normal = hyperspherical_loss(y, 0);
    RowVector zero = RowVector::Zero(2);
    const double bce = bce_loss(zero, 0);
    const bool ok = std::abs(anomalous - std::log(2.0)) <= 1e-6 && normal == y.squaredNorm() &&
                    std::abs(bce - std::log(2.0)) <= 1e-9;
    return {ok, "L1(ln2)=" + fmt(anomalous, 10) + " L0=" + fmt(normal, 10) + " bce(0,0)=" + fmt(bce, 12)};
}

// ---------------------------------------------------------------- 3
Outcome entropy_oracle() {
    double worst = 0;
    for (int a = 0; a <= 20; ++a)
        for (int b = 0; b <= 20; ++b) {
            if (a + b == 0) continue;
            double h = 0;
            for (int c : {a, b})
                if (c > 0) {
                    const double p = double(c) / double(a + b);
                    h -= p * std::log(p) / std::log(2.0);
                }
            worst = std::max(worst, std::abs(ngram_entropy(a, b) - h));
        }
    const double five_one = ngram_entropy(5, 1);
    return {worst <= 1e-9 && std::abs(five_one - 0.65) <= 1e-4,
            "max deviation " + fmt(worst) + ", H(5,1)=" + fmt(five_one, 6)};
}

// ---------------------------------------------------------------- 4
Outcome threshold_oracle() {
    int fixtures = 0, agree = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed * 7919);
        for (int k = 0; k < 10; ++k, ++fixtures) {
            const std::size_t n = 10 + rng.below(60);
            std::vector<double> scores(n);
            std::vector<int> labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                labels[i] = rng.uniform() < 0.25 ? 1 : 0;
                const double base = labels[i] ? 0.2 : 0.5;
                scores[i] = base + std::round(rng.uniform() * 40) / 50;  // duplicates on purpose
            }
            labels[0] = 1;
            labels[1] = 0;
            const Criterion criterion = static_cast<Criterion>(k % 3);
            // exhaustive sweep: every midpoint of distinct scores plus both sentinels
            std::set<double> distinct(scores.begin(), scores.end());
            std::vector<double> sorted(distinct.begin(), distinct.end());
            std::vector<double> candidates{sorted.front() / 2};
            for (std::size_t i = 1; i < sorted.size(); ++i) candidates.push_back((sorted[i - 1] + sorted[i]) / 2);
            candidates.push_back(sorted.back() + std::max(1.0, std::abs(sorted.back())));
            double best = -1, best_t = 0;
            for (double t : candidates) {
                std::size_t tp = 0, fp = 0, fn = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const bool flagged = scores[i] < t;
                    tp += flagged && labels[i];
                    fp += flagged && !labels[i];
                    fn += !flagged && labels[i];
                }
                const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
                const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
                const double v = criterion == Criterion::precision ? p
                                 : criterion == Criterion::recall  ? r
                                                                   : f1_of(tp, fp, fn);
                if (v > best) best = v, best_t = t;
            }
            const auto got = select_threshold(scores, labels, criterion);
            if (std::abs(got.a_tilde - best_t) <= 1e-12 * std::max(1.0, best_t) &&
                std::abs(got.achieved - best) <= 1e-12)
                ++agree;
        }
    }
    return {agree == fixtures, std::to_string(agree) + "/" + std::to_string(fixtures) + " fixtures agree"};
}

// ---------------------------------------------------------------- 5, 6, 9

struct PipelineRun {
    std::filesystem::path dir;
    double cpu = 0;
    double line_f1 = 0, sequence_f1 = 0;
    std::size_t anomalies = 0;
    bool ok = false;
    std::string error;
};

cli::ConfigOverrides fixture_overrides() {
    cli::ConfigOverrides o;
    o.flags = to_json(testing::fixture_config());
    return o;
}

/// synth -> mine -> pretrain -> finetune -> detect through the command layer,
/// then scores the verdict files against the labels in the test log.
PipelineRun run_pipeline(const std::filesystem::path& dir) {
    PipelineRun run;
    run.dir = dir;
    std::ostringstream sink;
    cli::Streams io{sink, sink};
    const double start = cpu_seconds();
    const bool ok = cli::cmd_synth(dir, SyntheticSpec{}, io) == 0 &&
                    cli::cmd_mine(dir / "src", dir / "sl.jsonl", io) == 0 &&
                    cli::cmd_pretrain(dir / "sl.jsonl", dir / "pretrained", fixture_overrides(), io) == 0 &&
                    cli::cmd_finetune({dir / "pretrained", dir / "target_train.log", DatasetFormat::bgl,
                                       dir / "sl.jsonl", dir / "finetuned"},
                                      io) == 0;
    cli::DetectArgs detect{dir / "finetuned", dir / "target_test.log", DatasetFormat::bgl, dir / "verdicts.jsonl"};
    detect.group_key_regex = "blk_-?[0-9]+";
    detect.out_sequences = dir / "sequences.jsonl";
    if (!ok || cli::cmd_detect(detect, io) != 0) {
        run.error = sink.str();
        return run;
    }
    run.cpu = cpu_seconds() - start;

    // ground truth straight from the raw test log
    std::vector<int> truth;
    std::vector<std::string> blocks;
    const std::regex block(R"(blk_-?[0-9]+)");
    std::ifstream log(dir / "target_test.log");
    for (std::string line; std::getline(log, line);) {
        truth.push_back(line.rfind("- ", 0) == 0 ? 0 : 1);
        std::smatch m;
        blocks.push_back(std::regex_search(line, m, block) ? m.str() : "");
    }
    run.anomalies = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), 1));

    std::size_t tp = 0, fp = 0, fn = 0, i = 0;
    std::ifstream verdicts(dir / "verdicts.jsonl");
    for (std::string line; std::getline(verdicts, line); ++i) {
        const auto j = nlohmann::json::parse(line);
        const bool flagged = j["verdict"] == "anomalous";
        const int t = truth.at(j["line_no"].get<std::size_t>() - 1);
        tp += flagged && t;
        fp += flagged && !t;
        fn += !flagged && t;
    }
    if (i != truth.size()) {
        run.error = "verdict count mismatch";
        return run;
    }
    run.line_f1 = f1_of(tp, fp, fn);

    std::map<std::string, int> block_truth;
    for (std::size_t k = 0; k < truth.size(); ++k) block_truth[blocks[k]] |= truth[k];
    tp = fp = fn = 0;
    std::size_t seen = 0;
    std::ifstream seqs(dir / "sequences.jsonl");
    for (std::string line; std::getline(seqs, line); ++seen) {
        const auto j = nlohmann::json::parse(line);
        const bool flagged = j["verdict"] == "anomalous";
        const int t = block_truth.at(j["group_id"].get<std::string>());
        tp += flagged && t;
        fp += flagged && !t;
        fn += !flagged && t;
    }
    if (seen != block_truth.size()) {
        run.error = "sequence count mismatch";
        return run;
    }
    run.sequence_f1 = f1_of(tp, fp, fn);
    run.ok = true;
    return run;
}

Outcome end_to_end(const PipelineRun& run) {
    if (!run.ok) return {false, "pipeline failed: " + run.error};
    return {run.line_f1 >= 0.95 && run.sequence_f1 >= 0.95 && run.cpu < 300,
            "line F1 " + fmt(run.line_f1) + ", sequence F1 " + fmt(run.sequence_f1) + ", " +
                std::to_string(run.anomalies) + " test anomalies, " + fmt(run.cpu, 3) + " s"};
}

Outcome label_ratio(const PipelineRun& run) {
    if (!run.ok) return {false, "pipeline failed"};
    ExperimentData data;
    data.sl = read_sl_dataset(run.dir / "sl.jsonl");
    data.dataset = load_dataset_config(run.dir / "dataset.json");
    data.logs = load_logs(data.dataset);
    const auto pretrained = ModelArtifact::load(run.dir / "pretrained").model;
    const auto results = run_label_ratio_experiment({0.01, 0.20}, pretrained, data, pretrained.config);
    const double low = results[0].evaluation.line.f1, high = results[1].evaluation.line.f1;
    return {low >= 0.95 * high, "F1@1% " + fmt(low) + " vs F1@20% " + fmt(high)};
}

Outcome determinism(const PipelineRun& first, const std::filesystem::path& second_dir) {
    if (!first.ok) return {false, "pipeline failed"};
    const auto second = run_pipeline(second_dir);
    if (!second.ok) return {false, "second run failed: " + second.error};
    std::vector<std::filesystem::path> files{"sl.jsonl", "verdicts.jsonl", "sequences.jsonl"};
    for (const char* stage : {"pretrained", "finetuned"})
        for (const char* f : {"config.json", "vocab.json", "params.manifest", "params.bin"})
            files.push_back(std::filesystem::path(stage) / f);
    std::size_t identical = 0;
    for (const auto& f : files) identical += slurp(first.dir / f) == slurp(second_dir / f) ? 1 : 0;
    return {identical == files.size(),
            std::to_string(identical) + "/" + std::to_string(files.size()) + " files byte-identical"};
}

// ---------------------------------------------------------------- 7
Outcome masking_statistics() {
    std::vector<SLSample> samples;
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> t;
        for (int k = 0; k < 10; ++k) t.push_back("tok" + std::to_string(k));
        samples.push_back({t, SeverityGroup::normal, ""});
    }
    const double p = 0.15, per_sample = std::ceil(0.20 * 10);
    const double mean = 1000 * p * per_sample;
    const double sigma = per_sample * std::sqrt(1000 * p * (1 - p));
    int inside = 0;
    std::string counts;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::size_t replaced = 0;
        for (const auto& s : mask_for_pretraining(samples, p, 0.20, seed))
            for (const auto& t : s.tokens) replaced += t == kUnkToken;
        inside += std::abs(double(replaced) - mean) <= 3 * sigma;
        counts += (counts.empty() ? "" : ",") + std::to_string(replaced);
    }
    return {inside == 10, "counts [" + counts + "], expected " + fmt(mean) + " +- " + fmt(3 * sigma)};
}

// ---------------------------------------------------------------- 8
Outcome aggregation_and_metrics() {
    Rng rng(99);
    int ok = 0, total = 0;
    for (int trial = 0; trial < 20; ++trial, total += 2) {
        std::vector<DetectionResult> verdicts(1000);
        std::vector<int> pred(1000), truth(1000);
        const double rate = trial % 2 ? 0.0005 : 0.01;
        for (std::size_t i = 0; i < 1000; ++i) {
            verdicts[i].verdict = rng.uniform() < rate ? Verdict::anomalous : Verdict::normal;
            pred[i] = rng.uniform() < 0.2;
            truth[i] = rng.uniform() < 0.1;
        }
        bool fold = false;
        for (const auto& v : verdicts) fold = fold || v.verdict == Verdict::anomalous;
        ok += aggregate_sequence(verdicts) == (fold ? Verdict::anomalous : Verdict::normal);

        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < 1000; ++i) {
            if (pred[i] && truth[i]) ++tp;
            else if (pred[i]) ++fp;
            else if (truth[i]) ++fn;
            else ++tn;
        }
        const auto m = compute_metrics(pred, truth);
        ok += m.tp == tp && m.fp == fp && m.fn == fn && m.tn == tn &&
              std::abs(m.f1 - f1_of(tp, fp, fn)) <= 1e-12 &&
              std::abs(m.precision - double(tp) / double(tp + fp)) <= 1e-12 &&
              std::abs(m.recall - double(tp) / double(tp + fn)) <= 1e-12;
    }
    return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " oracle comparisons agree"};
}

// ---------------------------------------------------------------- 10
Outcome throughput() {
    ModelConfig c;  // d = 16
    TrainedModel model;
    model.config = c;
    std::vector<std::vector<std::string>> corpus;
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        std::vector<std::string> t;
        for (std::size_t k = 0, n = 5 + rng.below(28); k < n; ++k) t.push_back("w" + std::to_string(rng.below(500)));
        corpus.push_back(std::move(t));
    }
    model.vocab = Vocabulary::build(corpus);
    Rng init(1);
    model.params = Parameters::initialize(c, model.vocab.size(), init);
    std::vector<TokenSequence> encoded;
    for (const auto& t : corpus) encoded.push_back(model.encode(t));
    const DecisionThreshold threshold{1.0, Criterion::f1, 0};
    const double start = cpu_seconds();
    std::size_t flagged = 0;
    for (const auto& s : encoded) flagged += detect(embed(model, s).x, threshold).verdict == Verdict::anomalous;
    const double elapsed = cpu_seconds() - start;
    return {elapsed < 60, "10000 logs scored in " + fmt(elapsed, 3) + " s (" + std::to_string(flagged) + " flagged)"};
}

}  // namespace

int main() {
    testing::ScratchDir first("logsieve_acceptance_run1");
    testing::ScratchDir second("logsieve_acceptance_run2");
    PipelineRun run;

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient oracle", gradient_oracle},
        {"loss-value oracle", loss_values},
        {"entropy oracle", entropy_oracle},
        {"threshold oracle", threshold_oracle},
        {"synthetic end-to-end", [&] {
             run = run_pipeline(first.path / "corpus");
             return end_to_end(run);
         }},
        {"label-ratio property", [&] { return label_ratio(run); }},
        {"masking statistics", masking_statistics},
        {"aggregation/metrics oracles", aggregation_and_metrics},
        {"determinism", [&] { return determinism(run, second.path / "corpus"); }},
        {"throughput floor", throughput},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << " " << criteria[i].first << ": "
                  << o.detail << std::endl;
    }
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - failed << "/" << criteria.size()
              << std::endl;
    return failed ? 1 : 0;
}
