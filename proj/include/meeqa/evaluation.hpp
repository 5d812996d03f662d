#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meeqa/decision.hpp"
#include "meeqa/transcript.hpp"

namespace meeqa {

// Word-level prediction for one question, the unit the metrics operate on.
struct PredictedAnswer {
    std::string question_id;
    Verdict verdict = Verdict::NoAnswer;
    std::vector<AnswerSpan> span_words; // per-utterance word ranges
    double p_best = 0.0;
    double y_hat_has_answer = 0.0;

    WordIndexSet word_set() const { return make_word_set(span_words); }
};

// Index-level F1 between two word sets. Both empty -> 1; exactly one empty -> 0.
double f1_indices(const WordIndexSet& pred, const WordIndexSet& gold);
// 1 iff the index sets are identical (no-answer vs unanswerable counts as 1).
double exact_match(const WordIndexSet& pred, const WordIndexSet& gold);

struct ScorePair {
    double em = 0.0;
    double f1 = 0.0;
};

// Element-wise max over the per-annotation scores. An unanswerable annotation
// scores 1 against a NoAnswer prediction and 0 against a span (and the
// reverse for answerable annotations vs NoAnswer).
ScorePair question_score(const PredictedAnswer& pred,
                         const std::vector<GoldAnnotationView>& annotations);

// Mean of the subset maxima over the n leave-one-out subsets; with a single
// annotation falls back to question_score and sets *fell_back.
ScorePair human_comparable_score(const PredictedAnswer& pred,
                                 const std::vector<GoldAnnotationView>& annotations,
                                 bool* fell_back = nullptr);

// One agreement item: per-judge binary word-inclusion rows of equal length.
struct AgreementItem {
    std::vector<std::vector<uint8_t>> judge_rows;
};

// Krippendorff's alpha for nominal binary data over all pooled units.
// Returns 1 with *degenerate set when the expected disagreement is zero.
double krippendorff_alpha(const std::vector<AgreementItem>& items, bool* degenerate = nullptr);

enum class FirstUtteranceMode { FullUtterance, IncludeSuffix };

// Naive baseline: the whole first utterance after the question. Never
// answers NoAnswer unless the after-window is empty.
PredictedAnswer first_utterance_baseline(const QAInstance& instance,
                                         FirstUtteranceMode mode = FirstUtteranceMode::FullUtterance);

enum class EvalMode { Standard, HumanComparable };
EvalMode parse_eval_mode(const std::string& name);

struct SplitMetrics {
    double em = 0.0; // percentages
    double f1 = 0.0;
    int64_t count = 0;
};

struct EvalReport {
    EvalMode mode = EvalMode::Standard;
    SplitMetrics all, has_answer, no_answer;

    std::string to_table() const;
    std::string to_json() const;
};

// Macro-averaged EM/F1 per split. The NoAns split holds the questions whose
// judges are majority-unanswerable. Predictions align to instances by
// question_id; a missing or duplicate id raises a DataError.
EvalReport evaluate(const std::vector<PredictedAnswer>& predictions,
                    const std::vector<QAInstance>& gold, EvalMode mode);

// Per-annotation gold views (multi-span annotations become word-set unions).
std::vector<GoldAnnotationView> gold_views(const QAInstance& instance);

// Agreement items for a set of instances: one item per question, the word
// universe being its after-window words.
std::vector<AgreementItem> agreement_items(const std::vector<QAInstance>& instances);

} // namespace meeqa
