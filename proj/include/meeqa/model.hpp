#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "meeqa/autograd.hpp"
#include "meeqa/representation.hpp"

namespace meeqa {

struct ModelDims {
    int32_t vocab_size = 0;
    int32_t d_model = 64;
    int32_t n_layers = 2;
    int32_t n_heads = 2;
    int32_t max_len = 512;

    void validate() const;
    int32_t head_dim() const { return d_model / n_heads; }
};

struct EncoderLayerParams {
    ad::Matrix ln1_gain, ln1_bias;
    ad::Matrix w_query, b_query, w_key, b_key, w_value, b_value, w_out, b_out;
    ad::Matrix ln2_gain, ln2_bias;
    ad::Matrix w_ff1, b_ff1, w_ff2, b_ff2;
};

// Trainable state: embedding + position tables, the self-attention stack and
// the three head weights (start, end, answerability).
struct ModelParams {
    ModelDims dims;
    ad::Matrix embeddings; // |V| x d
    ad::Matrix positions;  // max_len x d
    std::vector<EncoderLayerParams> layers;
    ad::Matrix ln_final_gain, ln_final_bias;
    ad::Matrix w_start, w_end; // d x 1
    ad::Matrix w_ha;           // d x 2 ({no, yes} map)

    // Symmetric uniform init scaled by 1/sqrt(fan_in), drawn from `rng` in
    // enumeration order.
    static ModelParams init(const ModelDims& dims, std::mt19937_64& rng);
    static ModelParams init(const ModelDims& dims, uint64_t seed);

    template <typename Fn> void for_each_tensor(Fn&& fn);
    template <typename Fn> void for_each_tensor(Fn&& fn) const;
};

// Tape wrappers around the parameters, built once per batch. `ordered`
// follows the for_each_tensor enumeration.
struct GraphLayer {
    ad::NodePtr ln1_gain, ln1_bias;
    ad::NodePtr w_query, b_query, w_key, b_key, w_value, b_value, w_out, b_out;
    ad::NodePtr ln2_gain, ln2_bias;
    ad::NodePtr w_ff1, b_ff1, w_ff2, b_ff2;
};

struct GraphParams {
    std::vector<ad::NodePtr> ordered;
    ad::NodePtr embeddings, positions;
    std::vector<GraphLayer> layers;
    ad::NodePtr ln_final_gain, ln_final_bias;
    ad::NodePtr w_start, w_end, w_ha;

    static GraphParams wrap(const ModelParams& params);
};

// --- forward -----------------------------------------------------------

struct EncoderGraphOutput {
    ad::NodePtr tokens; // n_valid x d
    ad::NodePtr cls;    // 1 x d
};

// Runs the encoder over the valid (non-pad) prefix of the input. Padding
// never influences the output; pad rows of the plain-op result are zero.
EncoderGraphOutput encode_graph(const GraphParams& params, const ModelDims& dims,
                                const EncodedInput& input);

struct EncodeResult {
    ad::Matrix token_repr;         // full length x d; pad rows zero
    std::vector<double> cls_repr;  // d
};
EncodeResult encode(const ModelParams& params, const EncodedInput& input);

struct HeadsGraph {
    ad::NodePtr start_logits, end_logits; // n_valid x 1
    ad::NodePtr ha_log_probs;             // 1 x 2
    ad::NodePtr ha_yes;                   // 1 x 1, P(has answer)
};
HeadsGraph heads_graph(const GraphParams& params, const EncoderGraphOutput& enc);

// Distributions over token positions, masked to the valid set, plus the
// has-answer probability.
struct Predictions {
    std::vector<double> y_hat_start;
    std::vector<double> y_hat_end;
    std::vector<uint8_t> valid;
    double y_hat_has_answer = 0.0;
};

Predictions heads_forward(const ModelParams& params, const ad::Matrix& token_repr,
                          const std::vector<double>& cls_repr,
                          const std::vector<uint8_t>& valid);

// --- losses ------------------------------------------------------------

struct LossWeights {
    double alpha = 0.8;
    double beta = 0.3;
    double gamma = 0.8;
    void validate() const; // non-negative, at least one positive
};

enum class LossVariant { FlatHierarchical, NoHA, NoPSE, NoLSE };
LossVariant parse_loss_variant(const std::string& name);
std::string loss_variant_name(LossVariant v);

struct SpanTargets {
    int32_t y_start = 0;
    int32_t y_end = 0;
    uint8_t y_has_answer = 0;
};

// alpha*L_HA + beta*yhat_HA*L_SE + gamma*y_HA*L_SE for one instance, where
// L_SE averages the start and end cross-entropies.
double loss_fhl(const Predictions& pred, const SpanTargets& target, const LossWeights& w);
// The two-term ablations: NoHA drops the alpha term, NoPSE the beta term,
// NoLSE the gamma term.
double loss_ablation(LossVariant variant, const Predictions& pred, const SpanTargets& target,
                     const LossWeights& w);

// Graph version used by training; gradients flow through yhat_HA in the
// beta term.
ad::NodePtr instance_loss_graph(const HeadsGraph& heads, const std::vector<uint8_t>& span_valid,
                                const SpanTargets& target, LossVariant variant,
                                const LossWeights& w);

// --- optimizer ---------------------------------------------------------

struct OptimizerConfig {
    double lr = 3e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamWState {
    std::vector<ad::Matrix> first_moment;
    std::vector<ad::Matrix> second_moment;
    int64_t step = 0;
    static AdamWState init(const ModelParams& params);
};

// Bias-corrected moment update plus decoupled decay p <- p - lr*wd*p.
// `grads` follows the for_each_tensor enumeration.
void adamw_step(ModelParams& params, const std::vector<const ad::Matrix*>& grads,
                AdamWState& state, const OptimizerConfig& config);

// --- training ----------------------------------------------------------

struct TrainConfig {
    uint64_t seed = 7;
    int epochs = 2;
    int batch_size = 8;
    OptimizerConfig optim;
    LossVariant variant = LossVariant::FlatHierarchical;
    LossWeights weights;
};

struct TrainHistory {
    std::vector<double> epoch_mean_loss;
};

// Deterministic given the seed; one instance per (question, annotation) pair
// is expected in `data`.
ModelParams train_model(const std::vector<EncodedInput>& data, const ModelDims& dims,
                        const TrainConfig& config, TrainHistory* history = nullptr);

// Mean instance loss of the batch under the current parameters (forward only).
double batch_loss_value(const ModelParams& params, const std::vector<const EncodedInput*>& batch,
                        LossVariant variant, const LossWeights& weights);

// Gradients of the mean batch loss for every tensor, enumeration order.
std::vector<ad::Matrix> batch_loss_gradients(const ModelParams& params,
                                             const std::vector<const EncodedInput*>& batch,
                                             LossVariant variant, const LossWeights& weights,
                                             double* loss_out = nullptr);

// --- inference ---------------------------------------------------------

struct InferenceResult {
    std::vector<double> start_logits; // length n_valid
    std::vector<double> end_logits;
    double y_hat_has_answer = 0.0;
};
InferenceResult run_inference(const ModelParams& params, const EncodedInput& input);

// --- checkpoints -------------------------------------------------------

// Versioned binary tensor dump with shape headers and a JSON metadata block.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& meta_json);

struct Checkpoint {
    ModelParams params;
    std::string meta_json;
};
Checkpoint load_checkpoint(const std::string& path);

// --- template bodies ----------------------------------------------------

namespace detail {
template <typename Self, typename Fn>
void visit_tensors(Self& p, Fn&& fn) {
    fn("embeddings", p.embeddings);
    fn("positions", p.positions);
    for (size_t i = 0; i < p.layers.size(); ++i) {
        auto& l = p.layers[i];
        std::string base = "layer" + std::to_string(i) + ".";
        fn(base + "ln1_gain", l.ln1_gain);
        fn(base + "ln1_bias", l.ln1_bias);
        fn(base + "w_query", l.w_query);
        fn(base + "b_query", l.b_query);
        fn(base + "w_key", l.w_key);
        fn(base + "b_key", l.b_key);
        fn(base + "w_value", l.w_value);
        fn(base + "b_value", l.b_value);
        fn(base + "w_out", l.w_out);
        fn(base + "b_out", l.b_out);
        fn(base + "ln2_gain", l.ln2_gain);
        fn(base + "ln2_bias", l.ln2_bias);
        fn(base + "w_ff1", l.w_ff1);
        fn(base + "b_ff1", l.b_ff1);
        fn(base + "w_ff2", l.w_ff2);
        fn(base + "b_ff2", l.b_ff2);
    }
    fn("ln_final_gain", p.ln_final_gain);
    fn("ln_final_bias", p.ln_final_bias);
    fn("w_start", p.w_start);
    fn("w_end", p.w_end);
    fn("w_ha", p.w_ha);
}
} // namespace detail

template <typename Fn>
void ModelParams::for_each_tensor(Fn&& fn) {
    detail::visit_tensors(*this, std::forward<Fn>(fn));
}
template <typename Fn>
void ModelParams::for_each_tensor(Fn&& fn) const {
    detail::visit_tensors(*this, std::forward<Fn>(fn));
}

} // namespace meeqa
