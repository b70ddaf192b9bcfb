#include <doctest.h>

#include <cmath>

#include "logsieve/artifact.hpp"
#include "logsieve/training.hpp"

using namespace logsieve;

namespace {

using Tokens = std::vector<std::string>;

// Normal and abnormal samples drawn from disjoint word pools.
std::vector<SLSample> separable_sl(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<SLSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const bool abnormal = i % 2 == 1;
        Tokens t;
        for (std::size_t k = 0, len = 3 + rng.below(5); k < len; ++k)
            t.push_back((abnormal ? "bad" : "good") + std::string(1, char('a' + rng.below(20))));
        out.push_back({t, abnormal ? SeverityGroup::abnormal : SeverityGroup::normal, ""});
    }
    return out;
}

ModelConfig small_config() {
    ModelConfig c;
    c.max_len = 8;
    c.batch_size = 16;
    c.learning_rate = 1e-3;
    c.max_epochs = 20;
    return c;
}

std::vector<TokenSequence> encode_all(const TrainedModel& m, const std::vector<SLSample>& samples,
                                      SeverityGroup group) {
    std::vector<TokenSequence> out;
    for (const auto& s : samples)
        if (s.group == group) out.push_back(m.encode(s.tokens));
    return out;
}

}  // namespace

TEST_CASE("Adam first step moves each entry by about the learning rate") {
    ModelConfig c;
    c.model_size = 4;
    c.num_layers = 1;
    Rng rng(1);
    auto params = Parameters::initialize(c, 5, rng);
    const auto before = params;
    auto grad = Parameters::zeros_like(params);
    grad.set1.w1.setConstant(0.5);
    grad.set2.w1.setConstant(-2.0);
    Adam adam(params, 0.01, 0.9, 0.99, [](const std::string& n) { return n.rfind("set2.", 0) != 0; });
    adam.step(params, grad);
    CHECK(adam.steps() == 1);
    const Matrix delta = params.set1.w1 - before.set1.w1;
    CHECK(delta.maxCoeff() == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(delta.minCoeff() == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(params.set2.w1 == before.set2.w1);  // filtered out
    CHECK(params.encoder.embedding == before.encoder.embedding);  // zero gradient
}

TEST_CASE("Adam matches the reference recurrence over several steps") {
    ModelConfig c;
    c.model_size = 2;
    c.num_heads = 1;
    c.num_layers = 1;
    Rng rng(2);
    auto params = Parameters::initialize(c, 4, rng);
    auto grad = Parameters::zeros_like(params);
    Adam adam(params, 0.1, 0.9, 0.99, [](const std::string&) { return true; });
    double theta = params.set1.b2(0, 0), m = 0, v = 0;
    const double gs[] = {1.0, -0.5, 0.25, 2.0};
    for (int t = 1; t <= 4; ++t) {
        const double g = gs[t - 1];
        grad.set1.b2(0, 0) = g;
        adam.step(params, grad);
        m = 0.9 * m + 0.1 * g;
        v = 0.99 * v + 0.01 * g * g;
        const double mhat = m / (1 - std::pow(0.9, t)), vhat = v / (1 - std::pow(0.99, t));
        theta -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
        CHECK(params.set1.b2(0, 0) == doctest::Approx(theta).epsilon(1e-12));
    }
}

TEST_CASE("EarlyStopping") {
    SUBCASE("strictly increasing losses stop at epoch 1 + patience") {
        EarlyStopping es(5);
        int stopped = 0;
        for (int e = 1; e <= 20 && !stopped; ++e)
            if (es.update(1.0 + e)) stopped = e;
        CHECK(stopped == 6);
        CHECK(es.best_epoch() == 1);
        CHECK(es.best_loss() == 2.0);
    }
    SUBCASE("equal losses are not improvements") {
        EarlyStopping es(2);
        CHECK_FALSE(es.update(1.0));
        CHECK(es.improved());
        CHECK_FALSE(es.update(1.0));
        CHECK_FALSE(es.improved());
        CHECK(es.update(1.0));
        CHECK(es.best_epoch() == 1);
    }
    SUBCASE("improvement resets the counter") {
        EarlyStopping es(2);
        for (double l : {5.0, 6.0, 4.0, 7.0}) CHECK_FALSE(es.update(l));
        CHECK(es.update(8.0));
        CHECK(es.best_epoch() == 3);
        CHECK(es.epochs_seen() == 5);
    }
}

TEST_CASE("split_sl is stratified, disjoint and seeded") {
    const auto sl = separable_sl(101, 3);
    const auto [train, val] = split_sl(sl, 0.1, 5);
    CHECK(train.size() + val.size() == sl.size());
    const auto abnormal_val = std::count_if(val.begin(), val.end(),
                                            [](const SLSample& s) { return s.group == SeverityGroup::abnormal; });
    CHECK(abnormal_val == 5);                              // round(0.1 * 50)
    CHECK(static_cast<long>(val.size()) - abnormal_val == 5);  // round(0.1 * 51)
    const auto again = split_sl(sl, 0.1, 5);
    CHECK(again.first == train);
    CHECK(again.second == val);
    CHECK(split_sl(sl, 0.1, 6).second != val);
}

TEST_CASE("pretraining separates disjoint vocabularies within 20 epochs") {
    const auto sl = separable_sl(200, 11);
    const auto result = pretrain_from_sl(sl, small_config());
    CHECK(result.epochs_run <= 20);
    CHECK(result.val_accuracy >= 0.95);
    CHECK(result.val_losses.size() == static_cast<std::size_t>(result.epochs_run));
    CHECK(result.best_epoch >= 1);
    CHECK(result.val_losses[static_cast<std::size_t>(result.best_epoch - 1)] ==
          *std::min_element(result.val_losses.begin(), result.val_losses.end()));
    CHECK(severity_accuracy(result.model, sl) >= 0.95);
    CHECK(result.model.vocab.contains("gooda"));
}

TEST_CASE("pretraining is deterministic for a fixed seed") {
    const auto sl = separable_sl(120, 4);
    auto config = small_config();
    config.max_epochs = 3;
    const auto a = pretrain_from_sl(sl, config);
    const auto b = pretrain_from_sl(sl, config);
    CHECK(serialize_params(a.model.params) == serialize_params(b.model.params));
    CHECK(a.val_losses == b.val_losses);
    config.seed = 43;
    CHECK(serialize_params(pretrain_from_sl(sl, config).model.params) != serialize_params(a.model.params));
}

TEST_CASE("pretraining input validation") {
    auto sl = separable_sl(40, 1);
    std::vector<SLSample> one_class;
    for (const auto& s : sl)
        if (s.group == SeverityGroup::normal) one_class.push_back(s);
    CHECK_THROWS_AS(pretrain_from_sl(one_class, small_config()), Error);
    CHECK_THROWS_AS(pretrain_from_sl({}, small_config()), Error);
}

TEST_CASE("finetuning") {
    const auto sl = separable_sl(200, 12);
    auto config = small_config();
    const auto pre = pretrain_from_sl(sl, config).model;
    const auto target = encode_all(pre, sl, SeverityGroup::normal);
    const auto anomalous = encode_all(pre, sl, SeverityGroup::abnormal);

    SUBCASE("zero epochs leave head set 2 at its initial value") {
        auto c = config;
        c.finetune_epochs = 0;
        const auto r = finetune(pre, target, anomalous, c);
        CHECK(r.set2.w1 == pre.params.set2.w1);
        CHECK(r.set2.b2 == pre.params.set2.b2);
        CHECK(r.epoch_losses.empty());
    }
    SUBCASE("target logs end up closer to the center than anomalous ones") {
        auto c = config;
        c.finetune_epochs = 10;
        c.anomaly_batch_fraction = 0.2;
        const auto before = serialize_params(pre.params);
        const auto r = finetune(pre, target, anomalous, c);
        CHECK(serialize_params(pre.params) == before);
        TrainedModel tuned = pre;
        tuned.params.set2 = r.set2;
        // only head set 2 may differ from the pretrained model
        auto stripped = tuned.params;
        stripped.set2 = pre.params.set2;
        CHECK(serialize_params(stripped) == before);

        auto mean_norm = [&](const std::vector<TokenSequence>& seqs) {
            double s = 0;
            for (const auto& q : seqs) s += embed(tuned, q).x.norm();
            return s / static_cast<double>(seqs.size());
        };
        CHECK(mean_norm(target) < mean_norm(anomalous));
        CHECK(r.epoch_losses.size() == 10);
        CHECK(r.epoch_losses.back() < r.epoch_losses.front());
    }
    SUBCASE("deterministic") {
        const auto a = finetune(pre, target, anomalous, config);
        const auto b = finetune(pre, target, anomalous, config);
        CHECK(a.set2.w1 == b.set2.w1);
        CHECK(a.epoch_losses == b.epoch_losses);
    }
    SUBCASE("an empty class is rejected") {
        CHECK_THROWS_AS(finetune(pre, target, {}, config), Error);
        CHECK_THROWS_AS(finetune(pre, {}, anomalous, config), Error);
    }
}
