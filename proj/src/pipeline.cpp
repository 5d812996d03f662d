#include "meeqa/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "meeqa/errors.hpp"
#include "meeqa/threading.hpp"

namespace meeqa {

using nlohmann::json;

std::vector<QAInstance> all_instances(const std::vector<Meeting>& meetings, int k, int l) {
    std::vector<QAInstance> instances;
    for (const auto& m : meetings) {
        auto batch = extract_question_instances(m, k, l);
        for (auto& inst : batch) instances.push_back(std::move(inst));
    }
    return instances;
}

std::vector<std::string> collect_tokens(const std::vector<Meeting>& meetings,
                                        const PipelineOptions& options) {
    std::vector<std::string> tokens;
    for (const auto& inst : all_instances(meetings, options.window_before, options.window_after)) {
        RenderedSequence rendered = render_sequence(normalize_speakers(inst), options.mode);
        for (const auto* seg : {&rendered.segment_before, &rendered.segment_after}) {
            TokenizedText t = tokenize(seg->text);
            for (auto& tok : t.tokens) tokens.push_back(std::move(tok));
        }
    }
    return tokens;
}

Vocabulary build_vocabulary(const std::vector<Meeting>& meetings,
                            const PipelineOptions& options) {
    return Vocabulary::build(collect_tokens(meetings, options));
}

DatasetBundle build_dataset(const std::vector<Meeting>& meetings,
                            const PipelineOptions& options, const Vocabulary& vocab) {
    DatasetBundle bundle;
    for (auto& inst : all_instances(meetings, options.window_before, options.window_after)) {
        RenderedSequence rendered = render_sequence(normalize_speakers(inst), options.mode);

        QuestionRecord record;
        record.instance = inst;
        try {
            record.input = assemble_input(rendered, vocab, std::nullopt, inst.y_has_answer,
                                          options.max_len, &bundle.stats);
            record.input.question_id = inst.question_id;
            record.encodable = true;
        } catch (const DataError&) {
            bundle.stats.skipped_too_long++;
            record.encodable = false;
        }

        if (record.encodable) {
            for (const auto& ann : inst.annotations) {
                std::optional<AnswerSpan> gold;
                if (!ann.is_unanswerable && !ann.spans.empty()) gold = ann.spans.front();
                EncodedInput enc = assemble_input(rendered, vocab, gold, !ann.is_unanswerable,
                                                  options.max_len, &bundle.stats);
                enc.question_id = inst.question_id;
                bundle.training_inputs.push_back(std::move(enc));
            }
        }
        bundle.questions.push_back(std::move(record));
    }
    return bundle;
}

namespace {

PredictedAnswer no_answer_prediction(const std::string& question_id) {
    PredictedAnswer p;
    p.question_id = question_id;
    p.verdict = Verdict::NoAnswer;
    return p;
}

} // namespace

std::vector<PredictedAnswer> predict_answers(const ModelParams& params,
                                             const DatasetBundle& bundle,
                                             const DecisionConfig& config) {
    config.validate();
    std::vector<PredictedAnswer> out(bundle.questions.size());
    parallel_for(static_cast<int64_t>(bundle.questions.size()), [&](int64_t i) {
        const QuestionRecord& record = bundle.questions[static_cast<size_t>(i)];
        if (!record.encodable) {
            out[static_cast<size_t>(i)] = no_answer_prediction(record.instance.question_id);
            return;
        }
        InferenceResult inf = run_inference(params, record.input);
        std::vector<uint8_t> valid = record.input.candidate_mask();
        valid.resize(static_cast<size_t>(record.input.n_valid));
        auto candidates =
            candidate_scores(inf.start_logits, inf.end_logits, valid, config.max_answer_len);
        PredictedAnswer pred;
        pred.question_id = record.instance.question_id;
        pred.y_hat_has_answer = inf.y_hat_has_answer;
        if (candidates.empty()) {
            pred.verdict = Verdict::NoAnswer;
        } else {
            BestSpan best = best_span_probability(candidates);
            SpanPrediction span = decide(inf.y_hat_has_answer, best, config);
            pred.p_best = span.p_best;
            if (span.verdict == Verdict::Span) {
                pred.verdict = Verdict::Span;
                pred.span_words =
                    word_set_to_spans(tokens_to_word_indices(record.input, span.start, span.end));
            } else {
                pred.verdict = Verdict::NoAnswer;
            }
        }
        out[static_cast<size_t>(i)] = std::move(pred);
    });
    return out;
}

std::vector<TuningExample> make_tuning_examples(const ModelParams& params,
                                                const DatasetBundle& bundle) {
    std::vector<TuningExample> out(bundle.questions.size());
    parallel_for(static_cast<int64_t>(bundle.questions.size()), [&](int64_t i) {
        const QuestionRecord& record = bundle.questions[static_cast<size_t>(i)];
        TuningExample ex;
        ex.gold = gold_views(record.instance);
        if (record.encodable) {
            InferenceResult inf = run_inference(params, record.input);
            ex.y_hat_has_answer = inf.y_hat_has_answer;
            ex.start_logits = std::move(inf.start_logits);
            ex.end_logits = std::move(inf.end_logits);
            ex.candidate_valid = record.input.candidate_mask();
            ex.candidate_valid.resize(static_cast<size_t>(record.input.n_valid));
            ex.origins.assign(record.input.origins.begin(),
                              record.input.origins.begin() + record.input.n_valid);
        }
        out[static_cast<size_t>(i)] = std::move(ex);
    });
    return out;
}

GridSearchResult run_grid_search(const std::vector<Meeting>& train,
                                 const std::vector<Meeting>& dev, const PipelineOptions& options,
                                 const ModelDims& dims_template, const TrainConfig& base,
                                 const LossGrids& loss_grids,
                                 const DecisionGrids& decision_grids) {
    Vocabulary vocab = build_vocabulary(train, options);
    ModelDims dims = dims_template;
    dims.vocab_size = vocab.size();
    dims.max_len = options.max_len;

    DatasetBundle train_bundle = build_dataset(train, options, vocab);
    DatasetBundle dev_bundle = build_dataset(dev, options, vocab);
    if (train_bundle.training_inputs.empty())
        throw ConfigError("grid search: no trainable instances in the train split");
    if (dev_bundle.questions.empty())
        throw ConfigError("grid search: empty dev split");

    std::vector<QAInstance> dev_instances;
    for (const auto& q : dev_bundle.questions) dev_instances.push_back(q.instance);

    GridSearchResult result;
    for (double alpha : loss_grids.alpha)
        for (double beta : loss_grids.beta)
            for (double gamma : loss_grids.gamma) {
                TrainConfig config = base;
                config.weights = {alpha, beta, gamma};
                ModelParams params =
                    train_model(train_bundle.training_inputs, dims, config, nullptr);

                auto tuning = make_tuning_examples(params, dev_bundle);
                double tuned_f1 = 0.0;
                DecisionConfig decision = tune_decision(tuning, decision_grids, &tuned_f1);

                auto predictions = predict_answers(params, dev_bundle, decision);
                EvalReport report = evaluate(predictions, dev_instances, EvalMode::Standard);

                GridSearchEntry entry;
                entry.weights = config.weights;
                entry.decision = decision;
                entry.dev_all_f1 = report.all.f1;
                entry.dev_all_em = report.all.em;
                result.leaderboard.push_back(entry);
            }

    std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                     [](const GridSearchEntry& a, const GridSearchEntry& b) {
                         return a.dev_all_f1 > b.dev_all_f1;
                     });
    return result;
}

void write_predictions_file(const std::string& path,
                            const std::vector<PredictedAnswer>& predictions) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write predictions " + path);
    for (const auto& p : predictions) {
        json j;
        j["question_id"] = p.question_id;
        j["verdict"] = p.verdict == Verdict::Span ? "span" : "no_answer";
        if (p.verdict == Verdict::Span) {
            json spans = json::array();
            for (const auto& s : p.span_words)
                spans.push_back({s.utterance, s.word_start, s.word_end});
            j["span_words"] = spans;
        } else {
            j["span_words"] = nullptr;
        }
        j["p_best"] = p.p_best;
        j["y_hat_ha"] = p.y_hat_has_answer;
        out << j.dump() << "\n";
    }
}

std::vector<PredictedAnswer> read_predictions_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open predictions " + path);
    std::vector<PredictedAnswer> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string where = path + " line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(where + ": " + e.what());
        }
        PredictedAnswer p;
        p.question_id = j.value("question_id", std::string{});
        if (p.question_id.empty()) throw DataError(where + ": missing question_id");
        std::string verdict = j.value("verdict", std::string{});
        if (verdict == "span") p.verdict = Verdict::Span;
        else if (verdict == "no_answer") p.verdict = Verdict::NoAnswer;
        else throw DataError(where + ": unknown verdict \"" + verdict + "\"");
        if (j.contains("span_words") && !j["span_words"].is_null()) {
            for (const auto& js : j["span_words"]) {
                if (!js.is_array() || js.size() != 3)
                    throw DataError(where + ": span entry is not [utt, start, end]");
                p.span_words.push_back(
                    {js[0].get<int32_t>(), js[1].get<int32_t>(), js[2].get<int32_t>()});
            }
        }
        p.p_best = j.value("p_best", 0.0);
        p.y_hat_has_answer = j.value("y_hat_ha", 0.0);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace meeqa
