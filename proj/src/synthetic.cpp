#include "meeqa/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "meeqa/errors.hpp"

namespace meeqa {

namespace {

const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> pool = {
        "budget", "quarter", "report", "design", "review", "option",  "table",
        "window", "margin",  "detail", "number", "moment", "person",  "group",
        "topic",  "issue",   "agenda", "motion", "second", "record",  "update",
        "summary", "action", "item",   "board",  "meeting", "note",   "draft",
        "version", "status", "change", "reason", "result", "point"};
    return pool;
}

std::string sample_words(std::mt19937_64& rng, int count) {
    const auto& pool = word_pool();
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    std::string out;
    for (int i = 0; i < count; ++i) {
        if (!out.empty()) out += " ";
        out += pool[pick(rng)];
    }
    return out;
}

int sample_int(std::mt19937_64& rng, int lo, int hi) {
    std::uniform_int_distribution<int> d(lo, hi);
    return d(rng);
}

} // namespace

std::vector<Meeting> generate_marker_corpus(const SyntheticOptions& options) {
    if (options.n_questions < 1) throw ConfigError("synthetic corpus needs at least one question");
    if (options.judges < 1) throw ConfigError("synthetic corpus needs at least one judge");
    std::mt19937_64 rng(options.seed);

    int n_unanswerable = static_cast<int>(
        std::llround(options.unanswerable_fraction * options.n_questions));
    std::vector<int> order(static_cast<size_t>(options.n_questions));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> unanswerable(static_cast<size_t>(options.n_questions), false);
    for (int i = 0; i < n_unanswerable; ++i) unanswerable[static_cast<size_t>(order[i])] = true;

    std::vector<Meeting> meetings;
    for (int qi = 0; qi < options.n_questions; ++qi) {
        Meeting m;
        m.meeting_id = "synth" + std::to_string(qi);

        std::string question = sample_words(rng, sample_int(rng, 3, 5)) + "?";
        std::string lead;
        if (sample_int(rng, 0, 1) == 1) lead = sample_words(rng, sample_int(rng, 2, 4)) + ".";
        std::string u1 = lead.empty() ? question : lead + " " + question;
        m.utterances.push_back({1, "A", u1});

        bool no_answer = unanswerable[static_cast<size_t>(qi)];
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        bool decoy = no_answer && coin(rng) < options.decoy_fraction;
        std::string reply;
        int32_t answer_start = 0, answer_end = 0;
        if (no_answer && !decoy) {
            reply = sample_words(rng, sample_int(rng, 6, 10)) + ".";
        } else {
            std::string head = decoy ? options.no_answer_cue + " " +
                                           sample_words(rng, sample_int(rng, 1, 2))
                                     : sample_words(rng, sample_int(rng, 2, 4));
            int head_words = word_count(head);
            int answer_len = sample_int(rng, 3, 6);
            reply = head + " " + options.marker + " " + sample_words(rng, answer_len) + ".";
            answer_start = head_words + 1; // marker sits right before the answer
            answer_end = answer_start + answer_len - 1;
        }
        m.utterances.push_back({2, "B", reply});

        m.utterances.push_back({3, "C", sample_words(rng, sample_int(rng, 3, 6)) + "."});

        Question q;
        q.utterance_index = 1;
        q.text = question;
        for (int j = 0; j < options.judges; ++j) {
            AnswerAnnotation ann;
            ann.judge_id = "judge" + std::to_string(j);
            if (no_answer) {
                ann.is_unanswerable = true;
            } else {
                ann.spans.push_back({2, answer_start, answer_end});
            }
            q.annotations.push_back(std::move(ann));
        }
        m.questions.push_back(std::move(q));
        meetings.push_back(std::move(m));
    }
    return meetings;
}

} // namespace meeqa
