#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "logsieve/detector.hpp"
#include "logsieve/rng.hpp"

using namespace logsieve;

namespace {

// Independent criterion evaluation by direct confusion counting.
double oracle_value(const std::vector<double>& scores, const std::vector<int>& labels, double t, Criterion c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] < t;
        if (flagged && labels[i] == 1) ++tp;
        if (flagged && labels[i] == 0) ++fp;
        if (!flagged && labels[i] == 1) ++fn;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    switch (c) {
        case Criterion::precision: return p;
        case Criterion::recall: return r;
        case Criterion::f1: return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
    return 0;
}

// Exhaustive sweep over every midpoint plus both sentinels.
DecisionThreshold brute_force(const std::vector<double>& scores, const std::vector<int>& labels, Criterion c) {
    std::set<double> distinct(scores.begin(), scores.end());
    std::vector<double> sorted(distinct.begin(), distinct.end());
    std::vector<double> candidates{sorted.front() / 2};
    for (std::size_t i = 1; i < sorted.size(); ++i) candidates.push_back((sorted[i - 1] + sorted[i]) / 2);
    candidates.push_back(sorted.back() + std::max(1.0, std::abs(sorted.back())));
    DecisionThreshold best{0, c, -1};
    for (double t : candidates) {
        const double v = oracle_value(scores, labels, t, c);
        if (v > best.achieved) best = {t, c, v};
    }
    return best;
}

std::vector<DetectionResult> random_results(Rng& rng, std::size_t n, double p_anomalous) {
    std::vector<DetectionResult> out(n);
    for (auto& r : out) r.verdict = rng.uniform() < p_anomalous ? Verdict::anomalous : Verdict::normal;
    return out;
}

}  // namespace

TEST_CASE("normality_score") {
    RowVector x(2);
    x << 2, 0;
    CHECK(std::abs(normality_score(x) - 0.25) < 1e-12);
    CHECK(normality_score(RowVector::Zero(3)) == doctest::Approx(1e12));
    RowVector y(1);
    y << std::sqrt(0.5);
    CHECK(std::abs(normality_score(y) - 2.0) < 1e-11);
}

TEST_CASE("select_threshold on a separated pair") {
    const std::vector<double> scores{0.1, 0.9};
    const std::vector<int> labels{1, 0};
    const auto t = select_threshold(scores, labels);
    CHECK(t.a_tilde == doctest::Approx(0.5));
    CHECK(t.achieved == 1.0);
    CHECK(t.criterion == Criterion::f1);
}

TEST_CASE("select_threshold with all scores equal") {
    const std::vector<double> scores(4, 0.7);
    const std::vector<int> labels{0, 1, 0, 1};
    const auto c = candidate_thresholds(scores);
    REQUIRE(c.size() == 2);
    CHECK(c[0] < 0.7);
    CHECK(c[1] > 0.7);
    // flagging everything gives F1 2/3; flagging nothing gives 0
    const auto t = select_threshold(scores, labels);
    CHECK(t.a_tilde == c[1]);
    CHECK(t.achieved == doctest::Approx(2.0 / 3));
    // recall ties between candidates cannot occur here, precision prefers flagging too
    CHECK(select_threshold(scores, labels, Criterion::precision).a_tilde == c[1]);
}

TEST_CASE("ties go to the smallest threshold") {
    // flagging {0.2} or {0.2, 0.4} both give precision 1
    const std::vector<double> scores{0.2, 0.4, 0.6};
    const std::vector<int> labels{1, 1, 0};
    const auto t = select_threshold(scores, labels, Criterion::precision);
    CHECK(t.a_tilde == doctest::Approx(0.3));
    CHECK(t.achieved == 1.0);
    CHECK(select_threshold(scores, labels, Criterion::recall).a_tilde == doctest::Approx(0.5));
}

TEST_CASE("select_threshold rejects degenerate input") {
    const std::vector<double> s{0.1, 0.2};
    CHECK_THROWS_AS(select_threshold(s, std::vector<int>{0, 0}), Error);
    CHECK_THROWS_AS(select_threshold(s, std::vector<int>{1, 1}), Error);
    CHECK_THROWS_AS(select_threshold(s, std::vector<int>{1}), Error);
    CHECK_THROWS_AS(select_threshold(std::vector<double>{0.0, 1.0}, std::vector<int>{0, 1}), Error);
    CHECK_THROWS_AS(select_threshold(std::vector<double>{NAN, 1.0}, std::vector<int>{0, 1}), Error);
}

TEST_CASE("select_threshold equals the exhaustive sweep") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const std::size_t n = 50;
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.uniform() < 0.3 ? 1 : 0;
            // coarse grid forces duplicate scores
            scores[i] = 0.05 + std::round((labels[i] ? 0.4 : 0.6) * rng.uniform() * 20 + (labels[i] ? 0 : 4)) / 10;
        }
        labels[0] = 1;
        labels[1] = 0;
        for (Criterion c : {Criterion::f1, Criterion::precision, Criterion::recall}) {
            const auto got = select_threshold(scores, labels, c);
            const auto want = brute_force(scores, labels, c);
            CHECK(got.a_tilde == doctest::Approx(want.a_tilde).epsilon(1e-12));
            CHECK(got.achieved == doctest::Approx(want.achieved).epsilon(1e-12));
            CHECK(criterion_value(scores, labels, got.a_tilde, c) == doctest::Approx(want.achieved).epsilon(1e-12));
        }
    }
}

TEST_CASE("detect uses a strict inequality") {
    const DecisionThreshold t{0.5, Criterion::f1, 1.0};
    CHECK(detect_score(0.25, t).verdict == Verdict::anomalous);
    CHECK(detect_score(0.9, t).verdict == Verdict::normal);
    CHECK(detect_score(0.5, t).verdict == Verdict::normal);
    RowVector x(1);
    x << 2;  // score 0.25
    const auto r = detect(x, t);
    CHECK(r.verdict == Verdict::anomalous);
    CHECK(r.score == doctest::Approx(0.25));
}

TEST_CASE("decisions are monotone in the score") {
    Rng rng(4);
    const DecisionThreshold t{0.37, Criterion::f1, 1.0};
    for (int i = 0; i < 500; ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        const double lo = std::min(a, b), hi = std::max(a, b);
        if (detect_score(hi, t).verdict == Verdict::anomalous) CHECK(detect_score(lo, t).verdict == Verdict::anomalous);
    }
}

TEST_CASE("aggregate_sequence") {
    using V = Verdict;
    auto results = [](std::initializer_list<V> vs) {
        std::vector<DetectionResult> out;
        for (V v : vs) out.push_back({0.0, v});
        return out;
    };
    CHECK(aggregate_sequence(results({V::normal, V::normal, V::anomalous})) == V::anomalous);
    CHECK(aggregate_sequence(results({V::normal, V::normal})) == V::normal);
    CHECK_THROWS_AS(aggregate_sequence(std::vector<DetectionResult>{}), Error);

    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const auto fixture = random_results(rng, 1000, 0.002);
        bool fold = false;
        for (const auto& r : fixture) fold = fold || r.verdict == V::anomalous;
        CHECK(aggregate_sequence(fixture) == (fold ? V::anomalous : V::normal));

        // aggregating a concatenation equals OR of the parts
        const auto a = random_results(rng, 1 + rng.below(5), 0.1);
        const auto b = random_results(rng, 1 + rng.below(5), 0.1);
        auto ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        const bool either = aggregate_sequence(a) == V::anomalous || aggregate_sequence(b) == V::anomalous;
        CHECK((aggregate_sequence(ab) == V::anomalous) == either);
    }
}

TEST_CASE("criterion names") {
    CHECK(parse_criterion("f1") == Criterion::f1);
    CHECK(parse_criterion("recall") == Criterion::recall);
    CHECK_FALSE(parse_criterion("auc").has_value());
    CHECK(to_string(Criterion::precision) == "precision");
    CHECK(to_string(Verdict::anomalous) == "anomalous");
}
