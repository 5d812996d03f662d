#include "meeqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "meeqa/errors.hpp"

namespace meeqa {

using ad::Matrix;
using ad::NodePtr;

void ModelDims::validate() const {
    if (vocab_size < 4) throw ConfigError("vocab_size must cover the reserved tokens");
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || max_len < 4)
        throw ConfigError("model dimensions must be positive");
    if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
}

namespace {

Matrix uniform_init(int32_t rows, int32_t cols, int32_t fan_in, std::mt19937_64& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.a) v = dist(rng);
    return m;
}

Matrix fill(int32_t rows, int32_t cols, double value) {
    Matrix m(rows, cols);
    for (double& v : m.a) v = value;
    return m;
}

} // namespace

ModelParams ModelParams::init(const ModelDims& dims, std::mt19937_64& rng) {
    dims.validate();
    const int32_t d = dims.d_model;
    ModelParams p;
    p.dims = dims;
    p.embeddings = uniform_init(dims.vocab_size, d, d, rng);
    p.positions = uniform_init(dims.max_len, d, d, rng);
    for (int32_t i = 0; i < dims.n_layers; ++i) {
        EncoderLayerParams l;
        l.ln1_gain = fill(1, d, 1.0);
        l.ln1_bias = fill(1, d, 0.0);
        l.w_query = uniform_init(d, d, d, rng);
        l.b_query = fill(1, d, 0.0);
        l.w_key = uniform_init(d, d, d, rng);
        l.b_key = fill(1, d, 0.0);
        l.w_value = uniform_init(d, d, d, rng);
        l.b_value = fill(1, d, 0.0);
        l.w_out = uniform_init(d, d, d, rng);
        l.b_out = fill(1, d, 0.0);
        l.ln2_gain = fill(1, d, 1.0);
        l.ln2_bias = fill(1, d, 0.0);
        l.w_ff1 = uniform_init(d, 4 * d, d, rng);
        l.b_ff1 = fill(1, 4 * d, 0.0);
        l.w_ff2 = uniform_init(4 * d, d, 4 * d, rng);
        l.b_ff2 = fill(1, d, 0.0);
        p.layers.push_back(std::move(l));
    }
    p.ln_final_gain = fill(1, d, 1.0);
    p.ln_final_bias = fill(1, d, 0.0);
    p.w_start = uniform_init(d, 1, d, rng);
    p.w_end = uniform_init(d, 1, d, rng);
    p.w_ha = uniform_init(d, 2, d, rng);
    return p;
}

ModelParams ModelParams::init(const ModelDims& dims, uint64_t seed) {
    std::mt19937_64 rng(seed);
    return init(dims, rng);
}

GraphParams GraphParams::wrap(const ModelParams& params) {
    GraphParams g;
    std::unordered_map<std::string, NodePtr> by_name;
    params.for_each_tensor([&](const std::string& name, const Matrix& m) {
        auto node = ad::parameter(m);
        g.ordered.push_back(node);
        by_name[name] = node;
    });
    auto get = [&](const std::string& name) { return by_name.at(name); };
    g.embeddings = get("embeddings");
    g.positions = get("positions");
    for (size_t i = 0; i < params.layers.size(); ++i) {
        std::string base = "layer" + std::to_string(i) + ".";
        GraphLayer l;
        l.ln1_gain = get(base + "ln1_gain");
        l.ln1_bias = get(base + "ln1_bias");
        l.w_query = get(base + "w_query");
        l.b_query = get(base + "b_query");
        l.w_key = get(base + "w_key");
        l.b_key = get(base + "b_key");
        l.w_value = get(base + "w_value");
        l.b_value = get(base + "b_value");
        l.w_out = get(base + "w_out");
        l.b_out = get(base + "b_out");
        l.ln2_gain = get(base + "ln2_gain");
        l.ln2_bias = get(base + "ln2_bias");
        l.w_ff1 = get(base + "w_ff1");
        l.b_ff1 = get(base + "b_ff1");
        l.w_ff2 = get(base + "w_ff2");
        l.b_ff2 = get(base + "b_ff2");
        g.layers.push_back(std::move(l));
    }
    g.ln_final_gain = get("ln_final_gain");
    g.ln_final_bias = get("ln_final_bias");
    g.w_start = get("w_start");
    g.w_end = get("w_end");
    g.w_ha = get("w_ha");
    return g;
}

EncoderGraphOutput encode_graph(const GraphParams& params, const ModelDims& dims,
                                const EncodedInput& input) {
    if (input.n_valid < 1) throw DataError("encode: empty input");
    if (input.n_valid > dims.max_len)
        throw DataError("encode: input longer than the position table");
    std::vector<int32_t> ids(input.token_ids.begin(),
                             input.token_ids.begin() + input.n_valid);
    for (int32_t id : ids)
        if (id < 0 || id >= dims.vocab_size)
            throw DataError("encode: token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(dims.vocab_size));

    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dims.head_dim()));
    NodePtr x = ad::add(ad::gather_rows(params.embeddings, ids),
                        ad::slice_rows(params.positions, 0, input.n_valid));
    for (const auto& l : params.layers) {
        NodePtr h = ad::layer_norm(x, l.ln1_gain, l.ln1_bias, 1e-5);
        NodePtr q = ad::add_row(ad::matmul(h, l.w_query), l.b_query);
        NodePtr k = ad::add_row(ad::matmul(h, l.w_key), l.b_key);
        NodePtr v = ad::add_row(ad::matmul(h, l.w_value), l.b_value);
        std::vector<NodePtr> heads;
        for (int32_t hd = 0; hd < dims.n_heads; ++hd) {
            int32_t c0 = hd * dims.head_dim();
            int32_t c1 = c0 + dims.head_dim();
            NodePtr qh = ad::slice_cols(q, c0, c1);
            NodePtr kh = ad::slice_cols(k, c0, c1);
            NodePtr vh = ad::slice_cols(v, c0, c1);
            NodePtr scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), attn_scale);
            NodePtr attn = ad::softmax_rows(scores);
            heads.push_back(ad::matmul(attn, vh));
        }
        NodePtr merged = dims.n_heads == 1 ? heads[0] : ad::concat_cols(heads);
        NodePtr attn_out = ad::add_row(ad::matmul(merged, l.w_out), l.b_out);
        x = ad::add(x, attn_out);

        NodePtr h2 = ad::layer_norm(x, l.ln2_gain, l.ln2_bias, 1e-5);
        NodePtr ff = ad::add_row(
            ad::matmul(ad::gelu(ad::add_row(ad::matmul(h2, l.w_ff1), l.b_ff1)), l.w_ff2),
            l.b_ff2);
        x = ad::add(x, ff);
    }
    NodePtr tokens = ad::layer_norm(x, params.ln_final_gain, params.ln_final_bias, 1e-5);
    return {tokens, ad::slice_rows(tokens, 0, 1)};
}

EncodeResult encode(const ModelParams& params, const EncodedInput& input) {
    GraphParams g = GraphParams::wrap(params);
    EncoderGraphOutput out = encode_graph(g, params.dims, input);
    EncodeResult res;
    res.token_repr = Matrix(static_cast<int32_t>(input.token_ids.size()), params.dims.d_model);
    for (int32_t i = 0; i < input.n_valid; ++i)
        for (int32_t j = 0; j < params.dims.d_model; ++j)
            res.token_repr.at(i, j) = out.tokens->value.at(i, j);
    res.cls_repr.resize(static_cast<size_t>(params.dims.d_model));
    for (int32_t j = 0; j < params.dims.d_model; ++j)
        res.cls_repr[static_cast<size_t>(j)] = out.cls->value.at(0, j);
    return res;
}

HeadsGraph heads_graph(const GraphParams& params, const EncoderGraphOutput& enc) {
    HeadsGraph h;
    h.start_logits = ad::matmul(enc.tokens, params.w_start);
    h.end_logits = ad::matmul(enc.tokens, params.w_end);
    h.ha_log_probs = ad::log_softmax_row(ad::matmul(enc.cls, params.w_ha));
    h.ha_yes = ad::exp_elem(ad::pick(h.ha_log_probs, 0, 1));
    return h;
}

Predictions heads_forward(const ModelParams& params, const ad::Matrix& token_repr,
                          const std::vector<double>& cls_repr,
                          const std::vector<uint8_t>& valid) {
    const int32_t n = token_repr.rows;
    const int32_t d = params.dims.d_model;
    if (token_repr.cols != d || static_cast<int32_t>(cls_repr.size()) != d)
        throw DataError("heads_forward: representation width mismatch");
    bool any = false;
    for (int32_t i = 0; i < n && i < static_cast<int32_t>(valid.size()); ++i)
        if (valid[static_cast<size_t>(i)]) any = true;
    if (!any) throw DataError("heads_forward: degenerate mask, no valid positions");

    auto masked_softmax = [&](const Matrix& w) {
        std::vector<double> logits(static_cast<size_t>(n), 0.0);
        for (int32_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (int32_t j = 0; j < d; ++j) s += token_repr.at(i, j) * w.at(j, 0);
            logits[static_cast<size_t>(i)] = s;
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (int32_t i = 0; i < n; ++i)
            if (i < static_cast<int32_t>(valid.size()) && valid[static_cast<size_t>(i)])
                mx = std::max(mx, logits[static_cast<size_t>(i)]);
        double sum = 0.0;
        std::vector<double> probs(static_cast<size_t>(n), 0.0);
        for (int32_t i = 0; i < n; ++i) {
            if (i >= static_cast<int32_t>(valid.size()) || !valid[static_cast<size_t>(i)])
                continue;
            probs[static_cast<size_t>(i)] = std::exp(logits[static_cast<size_t>(i)] - mx);
            sum += probs[static_cast<size_t>(i)];
        }
        for (double& p : probs) p /= sum;
        return probs;
    };

    Predictions pred;
    pred.valid.assign(valid.begin(), valid.begin() + std::min<size_t>(valid.size(),
                                                                      static_cast<size_t>(n)));
    pred.valid.resize(static_cast<size_t>(n), 0);
    pred.y_hat_start = masked_softmax(params.w_start);
    pred.y_hat_end = masked_softmax(params.w_end);

    double no = 0.0, yes = 0.0;
    for (int32_t j = 0; j < d; ++j) {
        no += cls_repr[static_cast<size_t>(j)] * params.w_ha.at(j, 0);
        yes += cls_repr[static_cast<size_t>(j)] * params.w_ha.at(j, 1);
    }
    double mx = std::max(no, yes);
    double zy = std::exp(yes - mx), zn = std::exp(no - mx);
    pred.y_hat_has_answer = zy / (zy + zn);
    return pred;
}

void LossWeights::validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0)
        throw ConfigError("loss weights must be non-negative");
    if (alpha == 0 && beta == 0 && gamma == 0)
        throw ConfigError("at least one loss weight must be positive");
}

LossVariant parse_loss_variant(const std::string& name) {
    if (name == "fhl") return LossVariant::FlatHierarchical;
    if (name == "no-ha") return LossVariant::NoHA;
    if (name == "no-pse") return LossVariant::NoPSE;
    if (name == "no-lse") return LossVariant::NoLSE;
    throw ConfigError("unknown loss variant: " + name);
}

std::string loss_variant_name(LossVariant v) {
    switch (v) {
        case LossVariant::FlatHierarchical: return "fhl";
        case LossVariant::NoHA: return "no-ha";
        case LossVariant::NoPSE: return "no-pse";
        case LossVariant::NoLSE: return "no-lse";
    }
    return "fhl";
}

namespace {

double span_cross_entropy(const std::vector<double>& dist, const std::vector<uint8_t>& valid,
                          int32_t target) {
    if (target < 0 || target >= static_cast<int32_t>(dist.size()) ||
        target >= static_cast<int32_t>(valid.size()) || !valid[static_cast<size_t>(target)])
        throw DataError("loss: span target at a masked position");
    double p = std::max(dist[static_cast<size_t>(target)], 1e-300);
    return -std::log(p);
}

struct LossTerms {
    double l_ha = 0.0;
    double l_se = 0.0;
};

LossTerms loss_terms(const Predictions& pred, const SpanTargets& target) {
    LossTerms t;
    t.l_se = 0.5 * (span_cross_entropy(pred.y_hat_start, pred.valid, target.y_start) +
                    span_cross_entropy(pred.y_hat_end, pred.valid, target.y_end));
    double p_yes = std::min(std::max(pred.y_hat_has_answer, 1e-300), 1.0);
    double p_no = std::min(std::max(1.0 - pred.y_hat_has_answer, 1e-300), 1.0);
    t.l_ha = -std::log(target.y_has_answer ? p_yes : p_no);
    return t;
}

} // namespace

double loss_fhl(const Predictions& pred, const SpanTargets& target, const LossWeights& w) {
    LossTerms t = loss_terms(pred, target);
    double y_ha = target.y_has_answer ? 1.0 : 0.0;
    return w.alpha * t.l_ha + w.beta * pred.y_hat_has_answer * t.l_se + w.gamma * y_ha * t.l_se;
}

double loss_ablation(LossVariant variant, const Predictions& pred, const SpanTargets& target,
                     const LossWeights& w) {
    LossTerms t = loss_terms(pred, target);
    double y_ha = target.y_has_answer ? 1.0 : 0.0;
    switch (variant) {
        case LossVariant::FlatHierarchical:
            return w.alpha * t.l_ha + w.beta * pred.y_hat_has_answer * t.l_se +
                   w.gamma * y_ha * t.l_se;
        case LossVariant::NoHA:
            return w.beta * pred.y_hat_has_answer * t.l_se + w.gamma * y_ha * t.l_se;
        case LossVariant::NoPSE:
            return w.alpha * t.l_ha + w.gamma * y_ha * t.l_se;
        case LossVariant::NoLSE:
            return w.alpha * t.l_ha + w.beta * pred.y_hat_has_answer * t.l_se;
    }
    throw ConfigError("unknown loss variant");
}

ad::NodePtr instance_loss_graph(const HeadsGraph& heads, const std::vector<uint8_t>& span_valid,
                                const SpanTargets& target, LossVariant variant,
                                const LossWeights& w) {
    if (target.y_start > target.y_end)
        throw DataError("loss: start target after end target");
    if (target.y_start < 0 || target.y_start >= static_cast<int32_t>(span_valid.size()) ||
        target.y_end >= static_cast<int32_t>(span_valid.size()) ||
        !span_valid[static_cast<size_t>(target.y_start)] ||
        !span_valid[static_cast<size_t>(target.y_end)])
        throw DataError("loss: span target at a masked position");

    NodePtr logp_start = ad::masked_log_softmax(heads.start_logits, span_valid);
    NodePtr logp_end = ad::masked_log_softmax(heads.end_logits, span_valid);
    NodePtr ce_start = ad::scale(ad::pick(logp_start, target.y_start, 0), -1.0);
    NodePtr ce_end = ad::scale(ad::pick(logp_end, target.y_end, 0), -1.0);
    NodePtr l_se = ad::scale(ad::add(ce_start, ce_end), 0.5);
    NodePtr l_ha = ad::scale(ad::pick(heads.ha_log_probs, 0, target.y_has_answer ? 1 : 0), -1.0);

    double y_ha = target.y_has_answer ? 1.0 : 0.0;
    NodePtr beta_term = ad::scale(ad::mul(heads.ha_yes, l_se), w.beta);
    NodePtr gamma_term = ad::scale(l_se, w.gamma * y_ha);
    NodePtr alpha_term = ad::scale(l_ha, w.alpha);
    switch (variant) {
        case LossVariant::FlatHierarchical:
            return ad::add(ad::add(alpha_term, beta_term), gamma_term);
        case LossVariant::NoHA:
            return ad::add(beta_term, gamma_term);
        case LossVariant::NoPSE:
            return ad::add(alpha_term, gamma_term);
        case LossVariant::NoLSE:
            return ad::add(alpha_term, beta_term);
    }
    throw ConfigError("unknown loss variant");
}

AdamWState AdamWState::init(const ModelParams& params) {
    AdamWState s;
    params.for_each_tensor([&](const std::string&, const Matrix& m) {
        s.first_moment.emplace_back(m.rows, m.cols);
        s.second_moment.emplace_back(m.rows, m.cols);
    });
    return s;
}

void adamw_step(ModelParams& params, const std::vector<const Matrix*>& grads,
                AdamWState& state, const OptimizerConfig& config) {
    state.step += 1;
    double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    size_t t = 0;
    params.for_each_tensor([&](const std::string&, Matrix& p) {
        const Matrix& g = *grads[t];
        Matrix& m = state.first_moment[t];
        Matrix& v = state.second_moment[t];
        for (size_t i = 0; i < p.size(); ++i) {
            m.a[i] = config.beta1 * m.a[i] + (1.0 - config.beta1) * g.a[i];
            v.a[i] = config.beta2 * v.a[i] + (1.0 - config.beta2) * g.a[i] * g.a[i];
            double m_hat = m.a[i] / bc1;
            double v_hat = v.a[i] / bc2;
            p.a[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
            p.a[i] -= config.lr * config.weight_decay * p.a[i];
        }
        ++t;
    });
}

namespace {

NodePtr batch_loss_graph(const GraphParams& g, const ModelDims& dims,
                         const std::vector<const EncodedInput*>& batch, LossVariant variant,
                         const LossWeights& weights) {
    NodePtr total;
    for (const EncodedInput* input : batch) {
        EncoderGraphOutput enc = encode_graph(g, dims, *input);
        HeadsGraph heads = heads_graph(g, enc);
        std::vector<uint8_t> span_valid = input->span_target_mask();
        span_valid.resize(static_cast<size_t>(input->n_valid));
        SpanTargets target{input->y_start, input->y_end, input->y_has_answer};
        NodePtr loss = instance_loss_graph(heads, span_valid, target, variant, weights);
        total = total ? ad::add(total, loss) : loss;
    }
    return ad::scale(total, 1.0 / static_cast<double>(batch.size()));
}

} // namespace

double batch_loss_value(const ModelParams& params, const std::vector<const EncodedInput*>& batch,
                        LossVariant variant, const LossWeights& weights) {
    GraphParams g = GraphParams::wrap(params);
    return batch_loss_graph(g, params.dims, batch, variant, weights)->value.a[0];
}

std::vector<Matrix> batch_loss_gradients(const ModelParams& params,
                                         const std::vector<const EncodedInput*>& batch,
                                         LossVariant variant, const LossWeights& weights,
                                         double* loss_out) {
    GraphParams g = GraphParams::wrap(params);
    NodePtr loss = batch_loss_graph(g, params.dims, batch, variant, weights);
    ad::backward(loss);
    if (loss_out) *loss_out = loss->value.a[0];
    std::vector<Matrix> grads;
    grads.reserve(g.ordered.size());
    for (const auto& node : g.ordered) grads.push_back(node->grad);
    return grads;
}

ModelParams train_model(const std::vector<EncodedInput>& data, const ModelDims& dims,
                        const TrainConfig& config, TrainHistory* history) {
    if (data.empty()) throw ConfigError("train: empty dataset");
    if (config.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (config.epochs < 0) throw ConfigError("train: epochs must be >= 0");
    config.weights.validate();

    std::mt19937_64 rng(config.seed);
    ModelParams params = ModelParams::init(dims, rng);
    AdamWState state = AdamWState::init(params);

    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
            std::vector<const EncodedInput*> batch;
            for (size_t i = begin; i < end; ++i) batch.push_back(&data[order[i]]);

            GraphParams g = GraphParams::wrap(params);
            NodePtr loss = batch_loss_graph(g, dims, batch, config.variant, config.weights);
            ad::backward(loss);
            loss_sum += loss->value.a[0] * static_cast<double>(batch.size());

            std::vector<const Matrix*> grads;
            grads.reserve(g.ordered.size());
            for (const auto& node : g.ordered) grads.push_back(&node->grad);
            adamw_step(params, grads, state, config.optim);
        }
        if (history) history->epoch_mean_loss.push_back(loss_sum / static_cast<double>(data.size()));
    }
    return params;
}

InferenceResult run_inference(const ModelParams& params, const EncodedInput& input) {
    GraphParams g = GraphParams::wrap(params);
    EncoderGraphOutput enc = encode_graph(g, params.dims, input);
    HeadsGraph heads = heads_graph(g, enc);
    InferenceResult res;
    res.start_logits.resize(static_cast<size_t>(input.n_valid));
    res.end_logits.resize(static_cast<size_t>(input.n_valid));
    for (int32_t i = 0; i < input.n_valid; ++i) {
        res.start_logits[static_cast<size_t>(i)] = heads.start_logits->value.at(i, 0);
        res.end_logits[static_cast<size_t>(i)] = heads.end_logits->value.at(i, 0);
    }
    res.y_hat_has_answer = heads.ha_yes->value.a[0];
    return res;
}

// checkpoint layout: magic, version, meta json, tensor count, then per tensor
// name, rows, cols and raw little-endian doubles.
namespace {
constexpr char kMagic[4] = {'M', 'Q', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
std::string read_str(std::istream& in) {
    uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}
} // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& meta_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);

    nlohmann::json meta = meta_json.empty() ? nlohmann::json::object()
                                            : nlohmann::json::parse(meta_json);
    meta["dims"] = {{"vocab_size", params.dims.vocab_size},
                    {"d_model", params.dims.d_model},
                    {"n_layers", params.dims.n_layers},
                    {"n_heads", params.dims.n_heads},
                    {"max_len", params.dims.max_len}};
    write_str(out, meta.dump());

    uint64_t count = 0;
    params.for_each_tensor([&](const std::string&, const Matrix&) { ++count; });
    write_u64(out, count);
    params.for_each_tensor([&](const std::string& name, const Matrix& m) {
        write_str(out, name);
        write_u64(out, static_cast<uint64_t>(m.rows));
        write_u64(out, static_cast<uint64_t>(m.cols));
        out.write(reinterpret_cast<const char*>(m.a.data()),
                  static_cast<std::streamsize>(m.a.size() * sizeof(double)));
    });
    if (!out) throw DataError("failed while writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError(path + " is not a checkpoint file");
    uint32_t version = read_u32(in);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.meta_json = read_str(in);
    nlohmann::json meta = nlohmann::json::parse(ck.meta_json);
    ModelDims dims;
    dims.vocab_size = meta["dims"]["vocab_size"].get<int32_t>();
    dims.d_model = meta["dims"]["d_model"].get<int32_t>();
    dims.n_layers = meta["dims"]["n_layers"].get<int32_t>();
    dims.n_heads = meta["dims"]["n_heads"].get<int32_t>();
    dims.max_len = meta["dims"]["max_len"].get<int32_t>();

    // materialize with the right shapes, then fill from the file
    ck.params = ModelParams::init(dims, uint64_t{0});
    uint64_t count = read_u64(in);
    std::unordered_map<std::string, Matrix> tensors;
    for (uint64_t i = 0; i < count; ++i) {
        std::string name = read_str(in);
        uint64_t rows = read_u64(in);
        uint64_t cols = read_u64(in);
        Matrix m(static_cast<int32_t>(rows), static_cast<int32_t>(cols));
        in.read(reinterpret_cast<char*>(m.a.data()),
                static_cast<std::streamsize>(m.a.size() * sizeof(double)));
        tensors[name] = std::move(m);
    }
    if (!in) throw DataError("truncated checkpoint " + path);
    ck.params.for_each_tensor([&](const std::string& name, Matrix& m) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw DataError("checkpoint missing tensor " + name);
        if (!it->second.same_shape(m))
            throw DataError("checkpoint tensor " + name + " has unexpected shape");
        m = std::move(it->second);
    });
    return ck;
}

} // namespace meeqa
