#include "logsieve/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "logsieve/preprocess.hpp"

namespace logsieve {

namespace {

constexpr double kAdamEpsilon = 1e-8;

bool is_set2(const std::string& name) { return name.rfind("set2.", 0) == 0; }

std::vector<TokenSequence> encode_all(const std::vector<SLSample>& samples, const Vocabulary& vocab, int max_len) {
    std::vector<TokenSequence> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(encode(s.tokens, vocab, max_len));
    return out;
}

void require_two_classes(const std::vector<SLSample>& samples, const char* what) {
    if (samples.empty()) throw Error(std::string(what) + " split is empty");
    const bool has_normal = std::any_of(samples.begin(), samples.end(),
                                        [](const SLSample& s) { return s.group == SeverityGroup::normal; });
    const bool has_abnormal = std::any_of(samples.begin(), samples.end(),
                                          [](const SLSample& s) { return s.group == SeverityGroup::abnormal; });
    if (!has_normal || !has_abnormal) throw Error(std::string(what) + " split contains a single severity group");
}

double mean_bce(const TrainedModel& model, const std::vector<TokenSequence>& seqs, const std::vector<int>& labels) {
    auto logits = forward(model.params, model.config, seqs, Phase::pretrain);
    return batch_bce_loss(logits, labels);
}

}  // namespace

Adam::Adam(const Parameters& layout, double learning_rate, double beta1, double beta2, Filter filter)
    : m_(Parameters::zeros_like(layout)),
      v_(Parameters::zeros_like(layout)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      filter_(std::move(filter)) {}

void Adam::step(Parameters& params, const Parameters& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    auto p = params.tensors();
    auto g = grad.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!filter_(p[i].first)) continue;
        const Matrix& gi = *g[i].second;
        *m[i].second = beta1_ * *m[i].second + (1.0 - beta1_) * gi;
        *v[i].second = beta2_ * *v[i].second + (1.0 - beta2_) * gi.cwiseProduct(gi);
        p[i].second->array() -=
            lr_ * (m[i].second->array() / c1) / ((v[i].second->array() / c2).sqrt() + kAdamEpsilon);
    }
}

bool EarlyStopping::update(double loss) {
    ++epoch_;
    improved_ = epoch_ == 1 || loss < best_loss_;
    if (improved_) {
        best_loss_ = loss;
        best_epoch_ = epoch_;
        stale_ = 0;
    } else {
        ++stale_;
    }
    return stale_ >= patience_;
}

std::pair<std::vector<SLSample>, std::vector<SLSample>> split_sl(const std::vector<SLSample>& sl, double val_frac,
                                                                 std::uint64_t seed) {
    std::vector<std::size_t> normal, abnormal;
    for (std::size_t i = 0; i < sl.size(); ++i) (sl[i].group == SeverityGroup::normal ? normal : abnormal).push_back(i);
    Rng rng(seed);
    rng.shuffle(normal);
    rng.shuffle(abnormal);
    std::vector<bool> in_val(sl.size(), false);
    for (auto* group : {&normal, &abnormal}) {
        const auto k = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(group->size())));
        for (std::size_t i = 0; i < k; ++i) in_val[(*group)[i]] = true;
    }
    std::pair<std::vector<SLSample>, std::vector<SLSample>> out;
    for (std::size_t i = 0; i < sl.size(); ++i) (in_val[i] ? out.second : out.first).push_back(sl[i]);
    return out;
}

PretrainResult pretrain(const std::vector<SLSample>& train, const std::vector<SLSample>& val,
                        const ModelConfig& config) {
    config.validate();
    require_two_classes(train, "pretraining train");
    require_two_classes(val, "pretraining validation");

    std::vector<std::vector<std::string>> corpus;
    corpus.reserve(train.size());
    for (const auto& s : train) corpus.push_back(s.tokens);

    Rng rng(config.seed);
    PretrainResult result;
    TrainedModel& model = result.model;
    model.config = config;
    model.vocab = Vocabulary::build(corpus);
    model.params = Parameters::initialize(config, model.vocab.size(), rng);

    const auto train_seqs = encode_all(train, model.vocab, config.max_len);
    const auto val_seqs = encode_all(val, model.vocab, config.max_len);
    std::vector<int> train_labels, val_labels;
    for (const auto& s : train) train_labels.push_back(label_of(s.group));
    for (const auto& s : val) val_labels.push_back(label_of(s.group));

    Adam adam(model.params, config.learning_rate, config.beta1, config.beta2,
              [](const std::string& name) { return !is_set2(name); });
    EarlyStopping stopper(config.patience_epochs);
    Parameters best = model.params;
    Parameters grad = Parameters::zeros_like(model.params);

    std::vector<std::size_t> order(train_seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::vector<TokenSequence> seqs;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                seqs.push_back(train_seqs[order[i]]);
                labels.push_back(train_labels[order[i]]);
            }
            grad.set_zero();
            const double loss = loss_and_gradient(model.params, config, seqs, labels, Phase::pretrain, grad,
                                                  {true, &rng}, GradientScope::all);
            adam.step(model.params, grad);
            epoch_loss += loss * static_cast<double>(end - start);
        }
        result.train_losses.push_back(epoch_loss / static_cast<double>(order.size()));
        const double val_loss = mean_bce(model, val_seqs, val_labels);
        result.val_losses.push_back(val_loss);
        result.epochs_run = epoch;
        const bool stop = stopper.update(val_loss);
        if (stopper.improved()) best = model.params;
        if (stop) break;
    }
    result.best_epoch = stopper.best_epoch();
    model.params = std::move(best);
    snap_to_float(model.params);
    result.val_accuracy = severity_accuracy(model, val);
    return result;
}

PretrainResult pretrain_from_sl(const std::vector<SLSample>& sl, const ModelConfig& config) {
    config.validate();
    auto [train, val] = split_sl(sl, config.sl_val_frac, config.seed);
    auto masked = mask_for_pretraining(train, config.mask_sample_frac, config.mask_token_frac, config.seed + 1);
    return pretrain(masked, val, config);
}

FinetuneResult finetune(const TrainedModel& pretrained, const std::vector<TokenSequence>& target_normal,
                        const std::vector<TokenSequence>& anomalous, const ModelConfig& config) {
    config.validate();
    if (target_normal.empty()) throw Error("finetuning needs target-system logs");
    if (anomalous.empty()) throw Error("finetuning needs samples of the anomalous class");
    if (config.batch_size < 2) throw Error("finetuning batch_size must be at least 2");

    auto lme_of = [&](const std::vector<TokenSequence>& seqs) {
        std::vector<RowVector> out;
        out.reserve(seqs.size());
        for (const auto& s : seqs) out.push_back(encode_lme(pretrained.params, pretrained.config, s));
        return out;
    };
    const auto normal_lme = lme_of(target_normal);
    const auto anomalous_lme = lme_of(anomalous);

    FinetuneResult result;
    Parameters params = pretrained.params;
    Adam adam(params, config.learning_rate, config.beta1, config.beta2, is_set2);
    Parameters grad = Parameters::zeros_like(params);
    Rng rng(config.seed + 2);

    const double r = config.anomaly_batch_fraction;
    const auto batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t full_anomalous =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(r * double(batch))), 1, batch - 1);
    const std::size_t full_normal = batch - full_anomalous;

    std::vector<std::size_t> order(normal_lme.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> anomalous_order(anomalous_lme.size());
    std::iota(anomalous_order.begin(), anomalous_order.end(), std::size_t{0});
    std::size_t anomalous_cursor = anomalous_order.size();

    for (int epoch = 0; epoch < config.finetune_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += full_normal) {
            const std::size_t end = std::min(order.size(), start + full_normal);
            const std::size_t n_normal = end - start;
            const std::size_t n_anomalous =
                n_normal == full_normal
                    ? full_anomalous
                    : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r / (1.0 - r) * double(n_normal))));
            std::vector<RowVector> lmes;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                lmes.push_back(normal_lme[order[i]]);
                labels.push_back(0);
            }
            for (std::size_t k = 0; k < n_anomalous; ++k) {
                if (anomalous_cursor == anomalous_order.size()) {
                    rng.shuffle(anomalous_order);
                    anomalous_cursor = 0;
                }
                lmes.push_back(anomalous_lme[anomalous_order[anomalous_cursor++]]);
                labels.push_back(1);
            }
            grad.set2.w1.setZero();
            grad.set2.b1.setZero();
            grad.set2.w2.setZero();
            grad.set2.b2.setZero();
            const double loss = head_loss_and_gradient(params.set2, lmes, labels, Phase::finetune, grad.set2);
            adam.step(params, grad);
            epoch_loss += loss * static_cast<double>(lmes.size());
            seen += lmes.size();
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(seen));
    }
    snap_to_float(params);
    result.set2 = std::move(params.set2);
    return result;
}

double severity_accuracy(const TrainedModel& model, const std::vector<SLSample>& samples) {
    if (samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& s : samples) {
        const auto seq = model.encode(s.tokens);
        const RowVector logits = head_forward(model.params.set1, encode_lme(model.params, model.config, seq));
        const int predicted = logits(1) > logits(0) ? 1 : 0;
        if (predicted == label_of(s.group)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace logsieve
