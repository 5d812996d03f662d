#include "meeqa/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meeqa/errors.hpp"
#include "meeqa/evaluation.hpp"

namespace meeqa {

void DecisionConfig::validate() const {
    if (tau1 < 0.0 || tau1 > 1.0 || tau2 < 0.0 || tau2 > 1.0)
        throw ConfigError("decision thresholds must lie in [0, 1]");
    if (max_answer_len < 1) throw ConfigError("max answer length must be >= 1");
}

std::vector<SpanCandidate> candidate_scores(std::span<const double> start_logits,
                                            std::span<const double> end_logits,
                                            std::span<const uint8_t> valid,
                                            int max_answer_len) {
    if (max_answer_len < 1) throw ConfigError("candidate_scores: max answer length must be >= 1");
    size_t n = std::min(start_logits.size(), end_logits.size());
    std::vector<SpanCandidate> candidates;
    for (size_t i = 0; i < n; ++i) {
        if (i >= valid.size() || !valid[i]) continue;
        size_t stop = std::min(n, i + static_cast<size_t>(max_answer_len));
        for (size_t j = i; j < stop; ++j) {
            if (j >= valid.size() || !valid[j]) continue;
            candidates.push_back({static_cast<int32_t>(i), static_cast<int32_t>(j),
                                  start_logits[i] + end_logits[j]});
        }
    }
    return candidates;
}

BestSpan best_span_probability(const std::vector<SpanCandidate>& candidates) {
    if (candidates.empty())
        throw DataError("best_span_probability: no candidates");
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) mx = std::max(mx, c.score);
    double sum = 0.0;
    for (const auto& c : candidates) sum += std::exp(c.score - mx);

    const SpanCandidate* best = &candidates[0];
    for (const auto& c : candidates) {
        if (c.score > best->score ||
            (c.score == best->score &&
             (c.start < best->start || (c.start == best->start && c.end < best->end))))
            best = &c;
    }
    return {best->start, best->end, std::exp(best->score - mx) / sum};
}

SpanPrediction decide(double y_hat_has_answer, const BestSpan& best,
                      const DecisionConfig& config) {
    config.validate();
    SpanPrediction pred;
    pred.p_best = best.p_best;
    pred.y_hat_has_answer = y_hat_has_answer;
    if (y_hat_has_answer <= config.tau1 && best.p_best <= config.tau2) {
        pred.verdict = Verdict::NoAnswer;
    } else {
        pred.verdict = Verdict::Span;
        pred.start = best.start;
        pred.end = best.end;
    }
    return pred;
}

namespace {

PredictedAnswer decide_example(const TuningExample& ex, const DecisionConfig& config) {
    PredictedAnswer out;
    out.y_hat_has_answer = ex.y_hat_has_answer;
    auto candidates = candidate_scores(ex.start_logits, ex.end_logits, ex.candidate_valid,
                                       config.max_answer_len);
    if (candidates.empty()) {
        out.verdict = Verdict::NoAnswer;
        return out;
    }
    BestSpan best = best_span_probability(candidates);
    SpanPrediction span = decide(ex.y_hat_has_answer, best, config);
    out.p_best = span.p_best;
    if (span.verdict == Verdict::NoAnswer) {
        out.verdict = Verdict::NoAnswer;
        return out;
    }
    out.verdict = Verdict::Span;
    WordIndexSet words;
    for (int32_t t = span.start; t <= span.end; ++t) {
        if (t < 0 || t >= static_cast<int32_t>(ex.origins.size())) continue;
        const auto& o = ex.origins[static_cast<size_t>(t)];
        if (o.utterance >= 0 && o.word >= 0) words.push_back(word_key(o.utterance, o.word));
    }
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    out.span_words = word_set_to_spans(words);
    return out;
}

} // namespace

double decision_config_f1(const std::vector<TuningExample>& dev, const DecisionConfig& config) {
    if (dev.empty()) throw ConfigError("decision tuning: empty dev set");
    double sum = 0.0;
    for (const auto& ex : dev) {
        PredictedAnswer pred = decide_example(ex, config);
        sum += question_score(pred, ex.gold).f1;
    }
    return sum / static_cast<double>(dev.size());
}

DecisionConfig tune_decision(const std::vector<TuningExample>& dev, const DecisionGrids& grids,
                             double* best_f1) {
    if (dev.empty()) throw ConfigError("decision tuning: empty dev set");
    DecisionGrids sorted = grids;
    std::sort(sorted.tau1.begin(), sorted.tau1.end());
    std::sort(sorted.tau2.begin(), sorted.tau2.end());
    std::sort(sorted.max_answer_len.begin(), sorted.max_answer_len.end());
    DecisionConfig best;
    double best_score = -1.0;
    bool first = true;
    for (double tau1 : sorted.tau1)
        for (double tau2 : sorted.tau2)
            for (int m : sorted.max_answer_len) {
                DecisionConfig config{tau1, tau2, m};
                double f1 = decision_config_f1(dev, config);
                if (first || f1 > best_score) {
                    best = config;
                    best_score = f1;
                    first = false;
                }
            }
    if (best_f1) *best_f1 = best_score;
    return best;
}

} // namespace meeqa
