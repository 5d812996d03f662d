#include "meeqa/transcript.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>

#include "meeqa/errors.hpp"

namespace meeqa {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t b = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > b) words.push_back(text.substr(b, i - b));
    }
    return words;
}

int32_t word_count(const std::string& text) {
    return static_cast<int32_t>(split_words(text).size());
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    size_t begin = 0;
    size_t i = 0;
    auto is_terminal = [](char c) { return c == '.' || c == '?' || c == '!'; };
    while (i < text.size()) {
        if (is_terminal(text[i])) {
            while (i + 1 < text.size() && is_terminal(text[i + 1])) ++i;
            if (i + 1 >= text.size() ||
                std::isspace(static_cast<unsigned char>(text[i + 1]))) {
                size_t b = begin;
                while (b <= i && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
                if (b <= i) sentences.push_back(text.substr(b, i - b + 1));
                begin = i + 1;
            }
        }
        ++i;
    }
    // trailing text without terminal punctuation still counts as a sentence
    size_t b = begin;
    while (b < text.size() && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    if (b < text.size()) {
        std::string tail = text.substr(b);
        while (!tail.empty() && std::isspace(static_cast<unsigned char>(tail.back())))
            tail.pop_back();
        if (!tail.empty()) sentences.push_back(tail);
    }
    return sentences;
}

int32_t QAInstance::question_word_offset() const { return word_count(prefix); }

int32_t QAInstance::suffix_word_offset() const {
    return word_count(prefix) + word_count(question_text);
}

WordIndexSet make_word_set(const std::vector<AnswerSpan>& spans) {
    WordIndexSet set;
    for (const auto& s : spans)
        for (int32_t w = s.word_start; w <= s.word_end; ++w)
            set.push_back(word_key(s.utterance, w));
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    return set;
}

std::vector<AnswerSpan> word_set_to_spans(const WordIndexSet& words) {
    std::vector<AnswerSpan> spans;
    for (WordKey k : words) {
        int32_t utt = word_key_utterance(k);
        int32_t w = word_key_word(k);
        if (!spans.empty() && spans.back().utterance == utt &&
            spans.back().word_end + 1 == w) {
            spans.back().word_end = w;
        } else {
            spans.push_back({utt, w, w});
        }
    }
    return spans;
}

Meeting merge_consecutive_utterances(const Meeting& meeting) {
    Meeting out;
    out.meeting_id = meeting.meeting_id;

    // old 1-based index -> (new 1-based index, word offset inside merged text)
    std::unordered_map<int32_t, std::pair<int32_t, int32_t>> remap;

    for (const auto& u : meeting.utterances) {
        if (!out.utterances.empty() && out.utterances.back().speaker == u.speaker) {
            Utterance& tail = out.utterances.back();
            int32_t offset = word_count(tail.text);
            if (!tail.text.empty() && !u.text.empty()) tail.text += " ";
            tail.text += u.text;
            remap[u.index] = {tail.index, offset};
        } else {
            Utterance merged = u;
            merged.index = static_cast<int32_t>(out.utterances.size()) + 1;
            remap[u.index] = {merged.index, 0};
            out.utterances.push_back(std::move(merged));
        }
    }

    out.questions = meeting.questions;
    for (auto& q : out.questions) {
        auto it = remap.find(q.utterance_index);
        if (it != remap.end()) q.utterance_index = it->second.first;
        for (auto& ann : q.annotations) {
            for (auto& s : ann.spans) {
                auto sit = remap.find(s.utterance);
                if (sit == remap.end()) continue;
                s.utterance = sit->second.first;
                s.word_start += sit->second.second;
                s.word_end += sit->second.second;
            }
            std::sort(ann.spans.begin(), ann.spans.end(),
                      [](const AnswerSpan& a, const AnswerSpan& b) {
                          return std::tie(a.utterance, a.word_start) <
                                 std::tie(b.utterance, b.word_start);
                      });
        }
    }
    return out;
}

bool derive_answerability_label(const std::vector<AnswerAnnotation>& annotations) {
    if (annotations.empty())
        throw DataError("derive_answerability_label: no annotations given");
    int64_t unanswerable = 0;
    for (const auto& a : annotations)
        if (a.is_unanswerable) ++unanswerable;
    int64_t n = static_cast<int64_t>(annotations.size());
    return !(2 * unanswerable >= n);
}

std::optional<int32_t> find_question_word_offset(const std::string& text,
                                                 const std::string& question) {
    if (question.empty()) return std::nullopt;
    size_t pos = 0;
    while ((pos = text.find(question, pos)) != std::string::npos) {
        bool left_ok =
            pos == 0 || std::isspace(static_cast<unsigned char>(text[pos - 1]));
        size_t end = pos + question.size();
        bool right_ok = end == text.size() ||
                        std::isspace(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) {
            // word index = number of words strictly before pos
            return word_count(text.substr(0, pos));
        }
        pos += 1;
    }
    return std::nullopt;
}

std::vector<QAInstance> extract_question_instances(const Meeting& meeting, int k, int l) {
    if (k < 0) throw ConfigError("extract_question_instances: k must be >= 0");
    if (l < 1) throw ConfigError("extract_question_instances: l must be >= 1");

    std::vector<QAInstance> instances;
    int32_t m = static_cast<int32_t>(meeting.utterances.size());

    for (size_t qi = 0; qi < meeting.questions.size(); ++qi) {
        const Question& q = meeting.questions[qi];
        if (q.utterance_index < 1 || q.utterance_index > m)
            throw DataError("meeting " + meeting.meeting_id + ": question " +
                            std::to_string(qi) + " points at utterance " +
                            std::to_string(q.utterance_index) + " of " +
                            std::to_string(m));
        const Utterance& uq = meeting.utterances[static_cast<size_t>(q.utterance_index - 1)];
        auto offset = find_question_word_offset(uq.text, q.text);
        if (!offset)
            throw DataError("meeting " + meeting.meeting_id +
                            ": question sentence not found in utterance " +
                            std::to_string(q.utterance_index) + ": \"" + q.text + "\"");

        QAInstance inst;
        inst.question_id = meeting.meeting_id + ":" + std::to_string(qi);
        inst.question_text = q.text;
        inst.q_index = q.utterance_index;
        inst.annotations = q.annotations;
        inst.y_has_answer = derive_answerability_label(q.annotations);

        auto words = split_words(uq.text);
        int32_t qoff = *offset;
        int32_t qwords = word_count(q.text);
        auto join = [](const std::vector<std::string>& w, int32_t b, int32_t e) {
            std::string s;
            for (int32_t i = b; i < e; ++i) {
                if (!s.empty()) s += " ";
                s += w[static_cast<size_t>(i)];
            }
            return s;
        };
        inst.prefix = join(words, 0, qoff);
        inst.suffix = join(words, qoff + qwords, static_cast<int32_t>(words.size()));

        int32_t first = std::max(1, q.utterance_index - k);
        for (int32_t u = first; u < q.utterance_index; ++u) {
            const Utterance& cu = meeting.utterances[static_cast<size_t>(u - 1)];
            inst.before_window.push_back({cu.index, cu.speaker, cu.text, 0});
        }
        inst.before_window.push_back({uq.index, uq.speaker, inst.prefix, 0});

        inst.after_window.push_back({uq.index, uq.speaker, inst.suffix, qoff + qwords});
        int32_t last = std::min(m, q.utterance_index + l);
        for (int32_t u = q.utterance_index + 1; u <= last; ++u) {
            const Utterance& cu = meeting.utterances[static_cast<size_t>(u - 1)];
            inst.after_window.push_back({cu.index, cu.speaker, cu.text, 0});
        }
        instances.push_back(std::move(inst));
    }
    return instances;
}

} // namespace meeqa
