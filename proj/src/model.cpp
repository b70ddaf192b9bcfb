#include "logsieve/model.hpp"

#include <cmath>
#include <limits>

#include "logsieve/types.hpp"

namespace logsieve {

namespace {

constexpr double kLayerNormEps = 1e-5;

bool in_open_unit(double v) { return v > 0.0 && v < 1.0; }

Matrix add_bias(Matrix m, const Matrix& bias) {
    m.rowwise() += bias.row(0);
    return m;
}

struct LayerNormCache {
    Matrix xhat;
    Eigen::VectorXd inv_std;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache) {
    const Eigen::VectorXd mean = x.rowwise().mean();
    Matrix centered = x.colwise() - mean;
    const Eigen::VectorXd var = centered.array().square().rowwise().mean();
    cache.inv_std = (var.array() + kLayerNormEps).rsqrt();
    cache.xhat = centered.array().colwise() * cache.inv_std.array();
    Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
    y.rowwise() += bias.row(0);
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain, const LayerNormCache& cache, Matrix& dgain,
                           Matrix& dbias) {
    dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    dbias += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
    const Eigen::VectorXd mean_d = dxhat.rowwise().mean();
    const Eigen::VectorXd mean_dx = (dxhat.array() * cache.xhat.array()).rowwise().mean();
    Matrix dx = dxhat.colwise() - mean_d;
    dx -= (cache.xhat.array().colwise() * mean_dx.array()).matrix();
    return dx.array().colwise() * cache.inv_std.array();
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix mask(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = rng.bernoulli(rate) ? 0.0 : keep;
    return mask;
}

void softmax_rows(Matrix& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
    }
}

struct LayerCache {
    Matrix x, q, k, v;
    std::vector<Matrix> attn;
    Matrix o, drop1;
    LayerNormCache ln1;
    Matrix y1, h, drop2;
    LayerNormCache ln2;
};

struct EncoderTrace {
    std::vector<int> indices;  // active positions only
    Matrix drop0;
    std::vector<LayerCache> layers;
    Matrix out;
    bool training = false;
};

double positional_value(int pos, int dim, int d) {
    const double exponent = static_cast<double>(2 * (dim / 2)) / static_cast<double>(d);
    const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
    return dim % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

void check_sequence(const Parameters& params, const ModelConfig& config, const TokenSequence& seq) {
    const auto expected = static_cast<std::size_t>(config.max_len) + 1;
    if (seq.indices.size() != expected || seq.mask.size() != expected)
        throw Error("token sequence length " + std::to_string(seq.indices.size()) + " does not match max_len + 1 = " +
                    std::to_string(expected));
    const auto vocab = params.encoder.embedding.rows();
    for (int idx : seq.indices)
        if (idx < 0 || idx >= vocab)
            throw Error("token index " + std::to_string(idx) + " outside vocabulary of size " + std::to_string(vocab));
    if (params.encoder.embedding.cols() != config.model_size)
        throw Error("embedding width does not match model_size");
}

Matrix layer_forward(const LayerParams& p, const ModelConfig& config, const Matrix& x, LayerCache& c,
                     const PassOptions& opt) {
    const int dk = config.head_size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const Eigen::Index n = x.rows();
    c.x = x;
    c.q = add_bias(x * p.wq, p.bq);
    c.k = add_bias(x * p.wk, p.bk);
    c.v = add_bias(x * p.wv, p.bv);
    c.o.resize(n, config.model_size);
    c.attn.assign(static_cast<std::size_t>(config.num_heads), Matrix());
    for (int h = 0; h < config.num_heads; ++h) {
        Matrix s = (c.q.middleCols(h * dk, dk) * c.k.middleCols(h * dk, dk).transpose()) * scale;
        softmax_rows(s);
        c.o.middleCols(h * dk, dk) = s * c.v.middleCols(h * dk, dk);
        c.attn[static_cast<std::size_t>(h)] = std::move(s);
    }
    Matrix att = add_bias(c.o * p.wo, p.bo);
    if (opt.training) {
        c.drop1 = dropout_mask(att.rows(), att.cols(), config.dropout_rate, *opt.rng);
        att = att.cwiseProduct(c.drop1);
    }
    c.y1 = layer_norm(x + att, p.ln1_gain, p.ln1_bias, c.ln1);
    c.h = add_bias(c.y1 * p.w1, p.b1);
    Matrix f = add_bias(c.h.cwiseMax(0.0) * p.w2, p.b2);
    if (opt.training) {
        c.drop2 = dropout_mask(f.rows(), f.cols(), config.dropout_rate, *opt.rng);
        f = f.cwiseProduct(c.drop2);
    }
    return layer_norm(c.y1 + f, p.ln2_gain, p.ln2_bias, c.ln2);
}

Matrix layer_backward(const LayerParams& p, const ModelConfig& config, const LayerCache& c, const Matrix& dy2,
                      bool training, LayerParams& g) {
    const int dk = config.head_size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    const Matrix dr2 = layer_norm_backward(dy2, p.ln2_gain, c.ln2, g.ln2_gain, g.ln2_bias);
    Matrix dy1 = dr2;
    const Matrix df = training ? Matrix(dr2.cwiseProduct(c.drop2)) : dr2;
    const Matrix hr = c.h.cwiseMax(0.0);
    g.w2 += hr.transpose() * df;
    g.b2 += df.colwise().sum();
    const Matrix dh = (df * p.w2.transpose()).cwiseProduct((c.h.array() > 0.0).cast<double>().matrix());
    g.w1 += c.y1.transpose() * dh;
    g.b1 += dh.colwise().sum();
    dy1 += dh * p.w1.transpose();

    const Matrix dr1 = layer_norm_backward(dy1, p.ln1_gain, c.ln1, g.ln1_gain, g.ln1_bias);
    Matrix dx = dr1;
    const Matrix datt = training ? Matrix(dr1.cwiseProduct(c.drop1)) : dr1;
    g.wo += c.o.transpose() * datt;
    g.bo += datt.colwise().sum();
    const Matrix dout = datt * p.wo.transpose();

    Matrix dq = Matrix::Zero(c.x.rows(), config.model_size);
    Matrix dkm = Matrix::Zero(c.x.rows(), config.model_size);
    Matrix dv = Matrix::Zero(c.x.rows(), config.model_size);
    for (int h = 0; h < config.num_heads; ++h) {
        const Matrix& a = c.attn[static_cast<std::size_t>(h)];
        const auto doh = dout.middleCols(h * dk, dk);
        const Matrix da = doh * c.v.middleCols(h * dk, dk).transpose();
        dv.middleCols(h * dk, dk) = a.transpose() * doh;
        const Eigen::VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
        const Matrix ds = (a.array() * (da.colwise() - row_dot).array()).matrix() * scale;
        dq.middleCols(h * dk, dk) = ds * c.k.middleCols(h * dk, dk);
        dkm.middleCols(h * dk, dk) = ds.transpose() * c.q.middleCols(h * dk, dk);
    }
    g.wq += c.x.transpose() * dq;
    g.bq += dq.colwise().sum();
    g.wk += c.x.transpose() * dkm;
    g.bk += dkm.colwise().sum();
    g.wv += c.x.transpose() * dv;
    g.bv += dv.colwise().sum();
    dx += dq * p.wq.transpose() + dkm * p.wk.transpose() + dv * p.wv.transpose();
    return dx;
}

EncoderTrace encoder_forward(const Parameters& params, const ModelConfig& config, const TokenSequence& seq,
                             const PassOptions& opt) {
    check_sequence(params, config, seq);
    if (opt.training && opt.rng == nullptr) throw Error("training pass requires a random generator");
    EncoderTrace t;
    t.training = opt.training && config.dropout_rate > 0.0;
    const std::size_t n = seq.active_length();
    t.indices.assign(seq.indices.begin(), seq.indices.begin() + static_cast<std::ptrdiff_t>(n));
    const int d = config.model_size;
    Matrix x(static_cast<Eigen::Index>(n), d);
    for (std::size_t i = 0; i < n; ++i) {
        x.row(static_cast<Eigen::Index>(i)) = params.encoder.embedding.row(t.indices[i]);
        if (config.positional_encoding)
            for (int j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) += positional_value(static_cast<int>(i), j, d);
    }
    PassOptions layer_opt{t.training, opt.rng};
    if (t.training) {
        t.drop0 = dropout_mask(x.rows(), x.cols(), config.dropout_rate, *opt.rng);
        x = x.cwiseProduct(t.drop0);
    }
    t.layers.resize(params.encoder.layers.size());
    for (std::size_t l = 0; l < params.encoder.layers.size(); ++l)
        x = layer_forward(params.encoder.layers[l], config, x, t.layers[l], layer_opt);
    t.out = std::move(x);
    return t;
}

void encoder_backward(const Parameters& params, const ModelConfig& config, const EncoderTrace& t,
                      const RowVector& dlme, Parameters& grad) {
    Matrix dx = Matrix::Zero(t.out.rows(), t.out.cols());
    dx.row(0) = dlme;
    for (std::size_t l = params.encoder.layers.size(); l-- > 0;)
        dx = layer_backward(params.encoder.layers[l], config, t.layers[l], dx, t.training, grad.encoder.layers[l]);
    if (t.training) dx = dx.cwiseProduct(t.drop0);
    for (std::size_t i = 0; i < t.indices.size(); ++i)
        grad.encoder.embedding.row(t.indices[i]) += dx.row(static_cast<Eigen::Index>(i));
}

struct HeadTrace {
    RowVector input, pre, out;
};

HeadTrace head_trace(const HeadParams& head, const RowVector& input) {
    HeadTrace t;
    t.input = input;
    t.pre = input * head.w1 + head.b1;
    t.out = t.pre.cwiseMax(0.0) * head.w2 + head.b2;
    return t;
}

RowVector head_backward(const HeadParams& head, const HeadTrace& t, const RowVector& dout, HeadParams& g) {
    const RowVector hidden = t.pre.cwiseMax(0.0);
    g.w2 += hidden.transpose() * dout;
    g.b2 += dout;
    const RowVector dpre = (dout * head.w2.transpose()).cwiseProduct((t.pre.array() > 0.0).cast<double>().matrix());
    g.w1 += t.input.transpose() * dpre;
    g.b1 += dpre;
    return dpre * head.w1.transpose();
}

double sample_loss(const RowVector& out, int label, Phase phase) {
    return phase == Phase::pretrain ? bce_loss(out, label) : hyperspherical_loss(out, label);
}

RowVector sample_gradient(const RowVector& out, int label, Phase phase) {
    return phase == Phase::pretrain ? bce_gradient(out, label) : hyperspherical_gradient(out, label);
}

void check_label(int label) {
    if (label != 0 && label != 1) throw Error("labels must be 0 or 1");
}

}  // namespace

void ModelConfig::validate() const {
    if (model_size < 1 || num_heads < 1 || num_layers < 0 || max_len < 1)
        throw Error("model_size, num_heads and max_len must be positive");
    if (model_size % num_heads != 0) throw Error("model_size must be divisible by num_heads");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout_rate must lie in [0, 1)");
    if (!in_open_unit(learning_rate) || !in_open_unit(beta1) || !in_open_unit(beta2))
        throw Error("learning_rate, beta1 and beta2 must lie in (0, 1)");
    if (batch_size < 1 || patience_epochs < 1 || max_epochs < 1 || finetune_epochs < 0)
        throw Error("batch_size, patience_epochs and max_epochs must be positive");
    if (!(anomaly_batch_fraction > 0.0 && anomaly_batch_fraction < 1.0))
        throw Error("anomaly_batch_fraction must lie in (0, 1): finetuning needs both classes");
    if (mask_sample_frac < 0 || mask_sample_frac > 1 || mask_token_frac < 0 || mask_token_frac > 1)
        throw Error("masking fractions must lie in [0, 1]");
    if (!in_open_unit(sl_val_frac) || !in_open_unit(threshold_val_frac))
        throw Error("validation fractions must lie in (0, 1)");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
    return {{"model_size", c.model_size},
            {"num_heads", c.num_heads},
            {"num_layers", c.num_layers},
            {"max_len", c.max_len},
            {"dropout_rate", c.dropout_rate},
            {"learning_rate", c.learning_rate},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"batch_size", c.batch_size},
            {"patience_epochs", c.patience_epochs},
            {"max_epochs", c.max_epochs},
            {"finetune_epochs", c.finetune_epochs},
            {"anomaly_batch_fraction", c.anomaly_batch_fraction},
            {"mask_sample_frac", c.mask_sample_frac},
            {"mask_token_frac", c.mask_token_frac},
            {"sl_val_frac", c.sl_val_frac},
            {"threshold_val_frac", c.threshold_val_frac},
            {"seed", c.seed},
            {"positional_encoding", c.positional_encoding}};
}

ModelConfig config_from_json(const nlohmann::json& j, ModelConfig c) {
    if (!j.is_object()) throw Error("model configuration must be a JSON object");
    const auto known = to_json(c);
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw Error("unknown model configuration field: " + key);
    auto read = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
        } catch (const nlohmann::json::exception&) {
            throw Error(std::string("invalid value for model configuration field ") + key + ": " + j.at(key).dump());
        }
    };
    read("model_size", c.model_size);
    read("num_heads", c.num_heads);
    read("num_layers", c.num_layers);
    read("max_len", c.max_len);
    read("dropout_rate", c.dropout_rate);
    read("learning_rate", c.learning_rate);
    read("beta1", c.beta1);
    read("beta2", c.beta2);
    read("batch_size", c.batch_size);
    read("patience_epochs", c.patience_epochs);
    read("max_epochs", c.max_epochs);
    read("finetune_epochs", c.finetune_epochs);
    read("anomaly_batch_fraction", c.anomaly_batch_fraction);
    read("mask_sample_frac", c.mask_sample_frac);
    read("mask_token_frac", c.mask_token_frac);
    read("sl_val_frac", c.sl_val_frac);
    read("threshold_val_frac", c.threshold_val_frac);
    read("seed", c.seed);
    read("positional_encoding", c.positional_encoding);
    return c;
}

std::vector<std::pair<std::string, Matrix*>> Parameters::tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    out.emplace_back("embedding", &encoder.embedding);
    for (std::size_t l = 0; l < encoder.layers.size(); ++l) {
        auto& p = encoder.layers[l];
        const std::string prefix = "encoder.layer" + std::to_string(l) + ".";
        for (auto [name, m] : {std::pair{"attn.wq", &p.wq}, {"attn.bq", &p.bq}, {"attn.wk", &p.wk},
                               {"attn.bk", &p.bk}, {"attn.wv", &p.wv}, {"attn.bv", &p.bv}, {"attn.wo", &p.wo},
                               {"attn.bo", &p.bo}, {"ln1.gain", &p.ln1_gain}, {"ln1.bias", &p.ln1_bias},
                               {"ffn.w1", &p.w1}, {"ffn.b1", &p.b1}, {"ffn.w2", &p.w2}, {"ffn.b2", &p.b2},
                               {"ln2.gain", &p.ln2_gain}, {"ln2.bias", &p.ln2_bias}})
            out.emplace_back(prefix + name, m);
    }
    for (auto [prefix, head] : {std::pair{"set1.", &set1}, {"set2.", &set2}}) {
        out.emplace_back(std::string(prefix) + "w1", &head->w1);
        out.emplace_back(std::string(prefix) + "b1", &head->b1);
        out.emplace_back(std::string(prefix) + "w2", &head->w2);
        out.emplace_back(std::string(prefix) + "b2", &head->b2);
    }
    return out;
}

std::vector<std::pair<std::string, const Matrix*>> Parameters::tensors() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (auto& [name, m] : const_cast<Parameters*>(this)->tensors()) out.emplace_back(name, m);
    return out;
}

Parameters Parameters::initialize(const ModelConfig& config, int vocab_size, Rng& rng) {
    config.validate();
    const int d = config.model_size;
    auto uniform = [&](int rows, int cols, double bound) {
        Matrix m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
        return m;
    };
    auto weight = [&](int fan_in, int fan_out) { return uniform(fan_in, fan_out, 1.0 / std::sqrt(double(fan_in))); };
    auto zeros = [](int cols) { return Matrix(Matrix::Zero(1, cols)); };
    auto ones = [](int cols) { return Matrix(Matrix::Ones(1, cols)); };

    Parameters p;
    p.encoder.embedding = uniform(vocab_size, d, 1.0);
    for (int l = 0; l < config.num_layers; ++l) {
        LayerParams lp;
        lp.wq = weight(d, d);
        lp.bq = zeros(d);
        lp.wk = weight(d, d);
        lp.bk = zeros(d);
        lp.wv = weight(d, d);
        lp.bv = zeros(d);
        lp.wo = weight(d, d);
        lp.bo = zeros(d);
        lp.ln1_gain = ones(d);
        lp.ln1_bias = zeros(d);
        lp.w1 = weight(d, config.ffn_size());
        lp.b1 = zeros(config.ffn_size());
        lp.w2 = weight(config.ffn_size(), d);
        lp.b2 = zeros(d);
        lp.ln2_gain = ones(d);
        lp.ln2_bias = zeros(d);
        p.encoder.layers.push_back(std::move(lp));
    }
    p.set1 = {weight(d, d), zeros(d), weight(d, 2), zeros(2)};
    p.set2 = {weight(d, d), zeros(d), weight(d, d), zeros(d)};
    return p;
}

Parameters Parameters::zeros_like(const Parameters& other) {
    Parameters p = other;
    p.set_zero();
    return p;
}

void Parameters::set_zero() {
    for (auto& [_, m] : tensors()) m->setZero();
}

void snap_to_float(Parameters& params) {
    for (auto& [_, m] : params.tensors())
        m->noalias() = m->cast<float>().cast<double>();
}

double bce_loss(const RowVector& logits, int label) {
    check_label(label);
    if (logits.size() != 2) throw Error("bce_loss expects exactly two logits");
    const double m = logits.maxCoeff();
    const double lse = m + std::log(std::exp(logits(0) - m) + std::exp(logits(1) - m));
    return lse - logits(label);
}

RowVector bce_gradient(const RowVector& logits, int label) {
    check_label(label);
    const double m = logits.maxCoeff();
    RowVector p = (logits.array() - m).exp();
    p /= p.sum();
    p(label) -= 1.0;
    return p;
}

double hyperspherical_loss(const RowVector& x, int label) {
    check_label(label);
    const double sq = x.squaredNorm();
    if (label == 0) return sq;
    return -std::log(-std::expm1(-std::max(sq, kHypersphereEpsilon)));
}

RowVector hyperspherical_gradient(const RowVector& x, int label) {
    check_label(label);
    if (label == 0) return 2.0 * x;
    const double sq = x.squaredNorm();
    if (sq < kHypersphereEpsilon) return RowVector::Zero(x.size());
    return (-2.0 / std::expm1(sq)) * x;
}

double batch_bce_loss(std::span<const RowVector> logits, std::span<const int> labels) {
    if (logits.size() != labels.size() || logits.empty()) throw Error("batch size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += bce_loss(logits[i], labels[i]);
    return sum / static_cast<double>(logits.size());
}

double batch_hyperspherical_loss(std::span<const RowVector> xs, std::span<const int> labels) {
    if (xs.size() != labels.size() || xs.empty()) throw Error("batch size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) sum += hyperspherical_loss(xs[i], labels[i]);
    return sum / static_cast<double>(xs.size());
}

RowVector encode_lme(const Parameters& params, const ModelConfig& config, const TokenSequence& seq,
                     PassOptions options) {
    return encoder_forward(params, config, seq, options).out.row(0);
}

RowVector head_forward(const HeadParams& head, const RowVector& input) {
    return (input * head.w1 + head.b1).cwiseMax(0.0) * head.w2 + head.b2;
}

std::vector<RowVector> forward(const Parameters& params, const ModelConfig& config,
                               std::span<const TokenSequence> batch, Phase phase, PassOptions options) {
    std::vector<RowVector> out;
    out.reserve(batch.size());
    const HeadParams& head = phase == Phase::pretrain ? params.set1 : params.set2;
    for (const auto& seq : batch) out.push_back(head_forward(head, encode_lme(params, config, seq, options)));
    return out;
}

double loss_and_gradient(const Parameters& params, const ModelConfig& config,
                         std::span<const TokenSequence> batch, std::span<const int> labels, Phase phase,
                         Parameters& grad, PassOptions options, GradientScope scope) {
    if (batch.size() != labels.size() || batch.empty()) throw Error("batch and labels must be non-empty and aligned");
    const HeadParams& head = phase == Phase::pretrain ? params.set1 : params.set2;
    HeadParams& head_grad = phase == Phase::pretrain ? grad.set1 : grad.set2;
    const double weight = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const EncoderTrace trace = encoder_forward(params, config, batch[i], options);
        const HeadTrace ht = head_trace(head, trace.out.row(0));
        loss += sample_loss(ht.out, labels[i], phase);
        const RowVector dout = sample_gradient(ht.out, labels[i], phase) * weight;
        const RowVector dlme = head_backward(head, ht, dout, head_grad);
        if (scope == GradientScope::all) encoder_backward(params, config, trace, dlme, grad);
    }
    return loss * weight;
}

double head_loss_and_gradient(const HeadParams& head, std::span<const RowVector> lmes, std::span<const int> labels,
                              Phase phase, HeadParams& grad) {
    if (lmes.size() != labels.size() || lmes.empty()) throw Error("batch and labels must be non-empty and aligned");
    const double weight = 1.0 / static_cast<double>(lmes.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < lmes.size(); ++i) {
        const HeadTrace ht = head_trace(head, lmes[i]);
        loss += sample_loss(ht.out, labels[i], phase);
        head_backward(head, ht, sample_gradient(ht.out, labels[i], phase) * weight, grad);
    }
    return loss * weight;
}

LogEmbedding embed(const TrainedModel& model, const TokenSequence& seq) {
    LogEmbedding e;
    e.lme = encode_lme(model.params, model.config, seq);
    e.x = head_forward(model.params.set2, e.lme);
    return e;
}

std::vector<LogEmbedding> embed_batch(const TrainedModel& model, std::span<const TokenSequence> batch) {
    std::vector<LogEmbedding> out;
    out.reserve(batch.size());
    for (const auto& seq : batch) out.push_back(embed(model, seq));
    return out;
}

}  // namespace logsieve
