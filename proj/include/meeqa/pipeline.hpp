#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meeqa/decision.hpp"
#include "meeqa/evaluation.hpp"
#include "meeqa/model.hpp"
#include "meeqa/representation.hpp"
#include "meeqa/transcript.hpp"

namespace meeqa {

struct PipelineOptions {
    RepresentationMode mode;
    int window_before = 1; // utterances before the question (k)
    int window_after = 60; // utterances after the question (l)
    int max_len = 512;
};

// One question with its per-question encoding; questions whose pre-question
// segment does not fit max_len stay around with encodable = false so callers
// can still emit an aligned NoAnswer prediction.
struct QuestionRecord {
    QAInstance instance;
    EncodedInput input;
    bool encodable = false;
};

struct DatasetBundle {
    std::vector<QuestionRecord> questions;
    std::vector<EncodedInput> training_inputs; // one per (question, annotation)
    EncodeStats stats;
};

// Tokens of all rendered segments, for vocabulary building.
std::vector<std::string> collect_tokens(const std::vector<Meeting>& meetings,
                                        const PipelineOptions& options);
Vocabulary build_vocabulary(const std::vector<Meeting>& meetings,
                            const PipelineOptions& options);

DatasetBundle build_dataset(const std::vector<Meeting>& meetings,
                            const PipelineOptions& options, const Vocabulary& vocab);

std::vector<QAInstance> all_instances(const std::vector<Meeting>& meetings, int k, int l);

// Decides every question under `config`; not-encodable questions get a
// NoAnswer prediction. Fans out per question.
std::vector<PredictedAnswer> predict_answers(const ModelParams& params,
                                             const DatasetBundle& bundle,
                                             const DecisionConfig& config);

// Raw logits plus gold views per question, for threshold tuning.
std::vector<TuningExample> make_tuning_examples(const ModelParams& params,
                                                const DatasetBundle& bundle);

// --- grid search ---------------------------------------------------------

struct LossGrids {
    std::vector<double> alpha = {0.7, 0.8};
    std::vector<double> beta = {0.2, 0.3};
    std::vector<double> gamma = {0.7, 0.8};
};

struct GridSearchEntry {
    LossWeights weights;
    DecisionConfig decision;
    double dev_all_f1 = 0.0;
    double dev_all_em = 0.0;
};

struct GridSearchResult {
    std::vector<GridSearchEntry> leaderboard; // sorted by dev_all_f1 descending
};

// Trains one model per (alpha, beta, gamma) combination, tunes the decision
// thresholds on the dev split and ranks by the dev all-questions F1.
GridSearchResult run_grid_search(const std::vector<Meeting>& train,
                                 const std::vector<Meeting>& dev, const PipelineOptions& options,
                                 const ModelDims& dims_template, const TrainConfig& base,
                                 const LossGrids& loss_grids, const DecisionGrids& decision_grids);

// --- predictions file ------------------------------------------------------

// JSONL, one line per question:
//   {"question_id", "verdict": "span"|"no_answer",
//    "span_words": [[utt, start, end], ...] | null, "p_best", "y_hat_ha"}
void write_predictions_file(const std::string& path,
                            const std::vector<PredictedAnswer>& predictions);
std::vector<PredictedAnswer> read_predictions_file(const std::string& path);

} // namespace meeqa
