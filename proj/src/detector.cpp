#include "logsieve/detector.hpp"

#include <algorithm>
#include <cmath>

#include "logsieve/types.hpp"

namespace logsieve {

std::string_view to_string(Criterion c) {
    switch (c) {
        case Criterion::precision: return "precision";
        case Criterion::recall: return "recall";
        case Criterion::f1: break;
    }
    return "f1";
}

std::optional<Criterion> parse_criterion(std::string_view s) {
    if (s == "f1") return Criterion::f1;
    if (s == "precision") return Criterion::precision;
    if (s == "recall") return Criterion::recall;
    return std::nullopt;
}

std::string_view to_string(Verdict v) { return v == Verdict::normal ? "normal" : "anomalous"; }

double normality_score(const RowVector& x) { return 1.0 / (x.squaredNorm() + kScoreEpsilon); }

namespace {

double criterion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, Criterion criterion) {
    const double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
    switch (criterion) {
        case Criterion::precision: return precision;
        case Criterion::recall: return recall;
        case Criterion::f1: break;
    }
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

}  // namespace

std::vector<double> candidate_thresholds(std::span<const double> scores) {
    if (scores.empty()) return {};
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> out;
    out.reserve(sorted.size() + 1);
    // below-min sentinel: nothing is flagged. It must stay positive.
    out.push_back(sorted.front() / 2.0);
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) out.push_back(sorted[i] + (sorted[i + 1] - sorted[i]) / 2.0);
    out.push_back(sorted.back() + std::max(1.0, std::abs(sorted.back())));
    return out;
}

double criterion_value(std::span<const double> scores, std::span<const int> labels, double threshold,
                       Criterion criterion) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] < threshold;
        if (flagged && labels[i] == 1) ++tp;
        if (flagged && labels[i] == 0) ++fp;
        if (!flagged && labels[i] == 1) ++fn;
    }
    return criterion_from_counts(tp, fp, fn, criterion);
}

DecisionThreshold select_threshold(std::span<const double> scores, std::span<const int> labels, Criterion criterion) {
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0 || positives == labels.size())
        throw Error("threshold selection needs both normal and anomalous validation samples");
    for (double s : scores)
        if (!(s > 0.0) || !std::isfinite(s)) throw Error("normality scores must be positive and finite");

    // Sweep candidates in ascending order; each step moves the scores below
    // the new candidate into the flagged set.
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    const auto candidates = candidate_thresholds(scores);
    std::size_t tp = 0, fp = 0, cursor = 0;
    DecisionThreshold best{candidates.front(), criterion, -1.0};
    for (double t : candidates) {
        while (cursor < order.size() && scores[order[cursor]] < t) {
            (labels[order[cursor]] == 1 ? tp : fp) += 1;
            ++cursor;
        }
        const double value = criterion_from_counts(tp, fp, positives - tp, criterion);
        if (value > best.achieved) best = {t, criterion, value};
    }
    return best;
}

DetectionResult detect_score(double score, const DecisionThreshold& threshold) {
    return {score, score < threshold.a_tilde ? Verdict::anomalous : Verdict::normal};
}

DetectionResult detect(const RowVector& x, const DecisionThreshold& threshold) {
    return detect_score(normality_score(x), threshold);
}

Verdict aggregate_sequence(std::span<const DetectionResult> verdicts) {
    if (verdicts.empty()) throw Error("cannot aggregate an empty sequence");
    return std::any_of(verdicts.begin(), verdicts.end(),
                       [](const DetectionResult& r) { return r.verdict == Verdict::anomalous; })
               ? Verdict::anomalous
               : Verdict::normal;
}

}  // namespace logsieve
