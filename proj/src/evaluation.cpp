#include "meeqa/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <unordered_map>

#include "json.hpp"
#include "meeqa/errors.hpp"
#include "meeqa/threading.hpp"

namespace meeqa {

namespace {

size_t intersection_size(const WordIndexSet& a, const WordIndexSet& b) {
    size_t i = 0, j = 0, n = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (b[j] < a[i]) ++j;
        else { ++n; ++i; ++j; }
    }
    return n;
}

} // namespace

double f1_indices(const WordIndexSet& pred, const WordIndexSet& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    if (pred.empty() || gold.empty()) return 0.0;
    double overlap = static_cast<double>(intersection_size(pred, gold));
    if (overlap == 0.0) return 0.0;
    double precision = overlap / static_cast<double>(pred.size());
    double recall = overlap / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

double exact_match(const WordIndexSet& pred, const WordIndexSet& gold) {
    return pred == gold ? 1.0 : 0.0;
}

namespace {

ScorePair annotation_score(const PredictedAnswer& pred, const GoldAnnotationView& ann) {
    bool no_answer = pred.verdict == Verdict::NoAnswer;
    if (ann.unanswerable) {
        double s = no_answer ? 1.0 : 0.0;
        return {s, s};
    }
    if (no_answer) return {0.0, 0.0};
    WordIndexSet pred_set = pred.word_set();
    return {exact_match(pred_set, ann.words), f1_indices(pred_set, ann.words)};
}

ScorePair max_score(const PredictedAnswer& pred, const std::vector<GoldAnnotationView>& anns,
                    size_t skip_index) {
    ScorePair best{0.0, 0.0};
    bool first = true;
    for (size_t i = 0; i < anns.size(); ++i) {
        if (i == skip_index) continue;
        ScorePair s = annotation_score(pred, anns[i]);
        if (first) {
            best = s;
            first = false;
        } else {
            best.em = std::max(best.em, s.em);
            best.f1 = std::max(best.f1, s.f1);
        }
    }
    return best;
}

} // namespace

ScorePair question_score(const PredictedAnswer& pred,
                         const std::vector<GoldAnnotationView>& annotations) {
    if (annotations.empty()) throw DataError("question_score: no annotations");
    return max_score(pred, annotations, annotations.size());
}

ScorePair human_comparable_score(const PredictedAnswer& pred,
                                 const std::vector<GoldAnnotationView>& annotations,
                                 bool* fell_back) {
    if (annotations.empty()) throw DataError("human_comparable_score: no annotations");
    if (fell_back) *fell_back = false;
    if (annotations.size() < 2) {
        if (fell_back) *fell_back = true;
        return question_score(pred, annotations);
    }
    ScorePair total{0.0, 0.0};
    for (size_t skip = 0; skip < annotations.size(); ++skip) {
        ScorePair s = max_score(pred, annotations, skip);
        total.em += s.em;
        total.f1 += s.f1;
    }
    double n = static_cast<double>(annotations.size());
    return {total.em / n, total.f1 / n};
}

double krippendorff_alpha(const std::vector<AgreementItem>& items, bool* degenerate) {
    if (degenerate) *degenerate = false;
    // coincidence counts over binary values
    double o01 = 0.0, n0 = 0.0, n1 = 0.0;
    for (const auto& item : items) {
        if (item.judge_rows.size() < 2) continue;
        size_t width = item.judge_rows[0].size();
        for (const auto& row : item.judge_rows)
            if (row.size() != width)
                throw DataError("krippendorff_alpha: judge rows differ in length");
        for (size_t w = 0; w < width; ++w) {
            double ones = 0.0;
            double judges = static_cast<double>(item.judge_rows.size());
            for (const auto& row : item.judge_rows)
                if (row[w]) ones += 1.0;
            double zeros = judges - ones;
            // per-unit pairable coincidences, normalized by n_u - 1
            o01 += 2.0 * ones * zeros / (judges - 1.0);
            n0 += zeros;
            n1 += ones;
        }
    }
    double n = n0 + n1;
    if (n < 2.0 || n0 == 0.0 || n1 == 0.0) {
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    double d_observed = o01;
    double d_expected = 2.0 * n0 * n1 / (n - 1.0);
    if (d_expected == 0.0) {
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    return 1.0 - d_observed / d_expected;
}

PredictedAnswer first_utterance_baseline(const QAInstance& instance, FirstUtteranceMode mode) {
    PredictedAnswer out;
    out.question_id = instance.question_id;
    out.y_hat_has_answer = 1.0;
    out.p_best = 1.0;

    const WindowPart* chosen = nullptr;
    for (size_t i = 0; i < instance.after_window.size(); ++i) {
        const WindowPart& p = instance.after_window[i];
        bool is_suffix = i == 0 && p.utterance == instance.q_index;
        if (is_suffix && mode != FirstUtteranceMode::IncludeSuffix) continue;
        if (word_count(p.text) == 0) continue;
        chosen = &p;
        break;
    }
    if (!chosen) {
        out.verdict = Verdict::NoAnswer;
        std::cerr << "warning: first-utterance baseline has no utterance after question "
                  << instance.question_id << "\n";
        return out;
    }
    out.verdict = Verdict::Span;
    out.span_words = {{chosen->utterance, chosen->word_offset,
                       chosen->word_offset + word_count(chosen->text) - 1}};
    return out;
}

EvalMode parse_eval_mode(const std::string& name) {
    if (name == "standard") return EvalMode::Standard;
    if (name == "human-comparable") return EvalMode::HumanComparable;
    throw ConfigError("unknown evaluation mode: " + name);
}

std::vector<GoldAnnotationView> gold_views(const QAInstance& instance) {
    std::vector<GoldAnnotationView> views;
    for (const auto& ann : instance.annotations) {
        GoldAnnotationView v;
        v.unanswerable = ann.is_unanswerable;
        v.words = make_word_set(ann.spans);
        views.push_back(std::move(v));
    }
    return views;
}

std::vector<AgreementItem> agreement_items(const std::vector<QAInstance>& instances) {
    std::vector<AgreementItem> items;
    for (const auto& inst : instances) {
        // word universe: all after-window words
        std::vector<WordKey> universe;
        for (const auto& p : inst.after_window) {
            int32_t words = word_count(p.text);
            for (int32_t w = 0; w < words; ++w)
                universe.push_back(word_key(p.utterance, p.word_offset + w));
        }
        if (universe.empty() || inst.annotations.size() < 2) continue;
        AgreementItem item;
        for (const auto& ann : inst.annotations) {
            WordIndexSet covered = make_word_set(ann.spans);
            std::vector<uint8_t> row(universe.size(), 0);
            for (size_t w = 0; w < universe.size(); ++w)
                if (std::binary_search(covered.begin(), covered.end(), universe[w]))
                    row[w] = 1;
            item.judge_rows.push_back(std::move(row));
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::string EvalReport::to_table() const {
    auto line = [](const std::string& name, const SplitMetrics& m) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-10s %7lld %8.2f %8.2f\n", name.c_str(),
                      static_cast<long long>(m.count), m.em, m.f1);
        return std::string(buf);
    };
    std::string out;
    out += "Split        Count       EM       F1\n";
    out += line("All Data", all);
    out += line("HasAns", has_answer);
    out += line("NoAns", no_answer);
    return out;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["mode"] = mode == EvalMode::Standard ? "standard" : "human-comparable";
    auto split = [](const SplitMetrics& m) {
        return nlohmann::json{{"count", m.count}, {"em", m.em}, {"f1", m.f1}};
    };
    j["all"] = split(all);
    j["has_ans"] = split(has_answer);
    j["no_ans"] = split(no_answer);
    return j.dump(2);
}

EvalReport evaluate(const std::vector<PredictedAnswer>& predictions,
                    const std::vector<QAInstance>& gold, EvalMode mode) {
    std::unordered_map<std::string, const PredictedAnswer*> by_id;
    for (const auto& p : predictions) {
        if (!by_id.emplace(p.question_id, &p).second)
            throw DataError("evaluate: duplicate prediction for " + p.question_id);
    }
    for (const auto& inst : gold)
        if (by_id.find(inst.question_id) == by_id.end())
            throw DataError("evaluate: missing prediction for " + inst.question_id);

    struct Row {
        ScorePair score;
        bool has_answer = true;
    };
    std::vector<Row> rows(gold.size());
    std::atomic<bool> fallback_warned{false};
    parallel_for(static_cast<int64_t>(gold.size()), [&](int64_t i) {
        const QAInstance& inst = gold[static_cast<size_t>(i)];
        const PredictedAnswer& pred = *by_id.at(inst.question_id);
        auto views = gold_views(inst);
        ScorePair s;
        if (mode == EvalMode::Standard) {
            s = question_score(pred, views);
        } else {
            bool fell_back = false;
            s = human_comparable_score(pred, views, &fell_back);
            if (fell_back) fallback_warned.store(true, std::memory_order_relaxed);
        }
        rows[static_cast<size_t>(i)] = {s, inst.y_has_answer};
    });
    if (fallback_warned.load())
        std::cerr << "warning: human-comparable scoring fell back to the standard score "
                     "for questions with a single annotation\n";

    EvalReport report;
    report.mode = mode;
    auto add = [](SplitMetrics& m, const ScorePair& s) {
        m.em += s.em;
        m.f1 += s.f1;
        m.count += 1;
    };
    for (const auto& row : rows) {
        add(report.all, row.score);
        add(row.has_answer ? report.has_answer : report.no_answer, row.score);
    }
    auto finish = [](SplitMetrics& m) {
        if (m.count > 0) {
            m.em = 100.0 * m.em / static_cast<double>(m.count);
            m.f1 = 100.0 * m.f1 / static_cast<double>(m.count);
        }
    };
    finish(report.all);
    finish(report.has_answer);
    finish(report.no_answer);
    return report;
}

} // namespace meeqa
