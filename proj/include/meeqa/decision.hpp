#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meeqa/representation.hpp"
#include "meeqa/transcript.hpp"

namespace meeqa {

// Thresholds of the answer decision: no answer is predicted when
// y_hat_HA <= tau1 and P_best <= tau2, both inclusive.
struct DecisionConfig {
    double tau1 = 0.6;
    double tau2 = 0.8;
    int max_answer_len = 200; // tokens

    void validate() const;
    bool operator==(const DecisionConfig&) const = default;
};

enum class Verdict : uint8_t { NoAnswer = 0, Span = 1 };

// Token-level model verdict for one question.
struct SpanPrediction {
    Verdict verdict = Verdict::NoAnswer;
    int32_t start = -1; // token indices, valid when verdict == Span
    int32_t end = -1;
    double p_best = 0.0;
    double y_hat_has_answer = 0.0;
};

struct SpanCandidate {
    int32_t start = 0;
    int32_t end = 0;
    double score = 0.0;
};

// All candidate spans (i, j) with i <= j, j - i + 1 <= max_answer_len and
// both endpoints valid; score = start_logits[i] + end_logits[j].
std::vector<SpanCandidate> candidate_scores(std::span<const double> start_logits,
                                            std::span<const double> end_logits,
                                            std::span<const uint8_t> valid,
                                            int max_answer_len);

struct BestSpan {
    int32_t start = 0;
    int32_t end = 0;
    double p_best = 0.0;
};

// Softmax over the candidates; returns the argmax and its probability. Score
// ties break towards the smallest start, then the smallest end.
BestSpan best_span_probability(const std::vector<SpanCandidate>& candidates);

SpanPrediction decide(double y_hat_has_answer, const BestSpan& best,
                      const DecisionConfig& config);

// --- threshold tuning ----------------------------------------------------

struct DecisionGrids {
    std::vector<double> tau1 = {0.6, 0.7};
    std::vector<double> tau2 = {0.8, 0.9};
    std::vector<int> max_answer_len = {200, 250};
};

// Gold view of one annotation for tuning and evaluation.
struct GoldAnnotationView {
    bool unanswerable = false;
    WordIndexSet words;
};

// Raw per-question model outputs kept for re-deciding under new thresholds.
struct TuningExample {
    double y_hat_has_answer = 0.0;
    std::vector<double> start_logits;
    std::vector<double> end_logits;
    std::vector<uint8_t> candidate_valid;
    std::vector<TokenOrigin> origins; // per token, for span -> word mapping
    std::vector<GoldAnnotationView> gold;
};

// Exhaustive search over the grid; returns the argmax of the all-questions
// F1, ties broken lexicographically (tau1, tau2, max_answer_len ascending).
DecisionConfig tune_decision(const std::vector<TuningExample>& dev,
                             const DecisionGrids& grids = {},
                             double* best_f1 = nullptr);

// All-questions macro F1 of the examples under one decision config.
double decision_config_f1(const std::vector<TuningExample>& dev, const DecisionConfig& config);

} // namespace meeqa
