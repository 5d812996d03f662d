#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace meeqa {

// One speaker turn. `index` is the 1-based ordinal position within the
// meeting; an utterance may contain several sentences.
struct Utterance {
    int32_t index = 0;
    std::string speaker;
    std::string text;
};

// Inclusive word range inside one utterance. Words are the whitespace-split
// units of the utterance text, 0-based.
struct AnswerSpan {
    int32_t utterance = 0; // 1-based utterance index
    int32_t word_start = 0;
    int32_t word_end = 0; // inclusive

    bool operator==(const AnswerSpan&) const = default;
};

// One judge's answer marking: either a set of spans or an explicit
// unanswerable verdict, never both.
struct AnswerAnnotation {
    std::string judge_id;
    std::vector<AnswerSpan> spans; // sorted by position; empty iff unanswerable
    bool is_unanswerable = false;
};

struct Question {
    int32_t utterance_index = 0; // 1-based
    std::string text;            // ends with '?'
    std::vector<AnswerAnnotation> annotations;
    std::string extra_json; // pass-through fields from ingestion, verbatim
};

struct Meeting {
    std::string meeting_id;
    std::vector<Utterance> utterances;
    std::vector<Question> questions;
};

// One element of a question window: a whole utterance, or the part of the
// question utterance before/after the question sentence. `word_offset` is
// the index of the part's first word within its source utterance.
struct WindowPart {
    int32_t utterance = 0;
    std::string speaker;
    std::string text; // may be empty for the prefix/suffix parts
    int32_t word_offset = 0;
};

// A question with its context windows and gold annotations.
// before_window = (u_{q-k}, ..., u_{q-1}, prefix of u_q); the prefix part is
// always the last element. after_window = (suffix of u_q, u_{q+1}, ..., u_{q+l});
// the suffix part is always the first element.
struct QAInstance {
    std::string question_id;
    std::string question_text;
    int32_t q_index = 0;
    std::string prefix;
    std::string suffix;
    std::vector<WindowPart> before_window;
    std::vector<WindowPart> after_window;
    std::vector<AnswerAnnotation> annotations;
    bool y_has_answer = true; // majority answerability label

    // Word index of the question's first word within u_q.
    int32_t question_word_offset() const;
    // Word index of the suffix's first word within u_q.
    int32_t suffix_word_offset() const;
};

// --- word helpers ------------------------------------------------------

std::vector<std::string> split_words(const std::string& text);
int32_t word_count(const std::string& text);

// Sentences end at a run of {., ?, !} followed by whitespace or end of text.
// Returned sentences keep their terminal punctuation.
std::vector<std::string> split_sentences(const std::string& text);

// Packed (utterance, word) key; sets of these drive the index-level metrics.
using WordKey = uint64_t;
inline WordKey word_key(int32_t utterance, int32_t word) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(utterance)) << 32) |
           static_cast<uint32_t>(word);
}
inline int32_t word_key_utterance(WordKey k) { return static_cast<int32_t>(k >> 32); }
inline int32_t word_key_word(WordKey k) { return static_cast<int32_t>(k & 0xffffffffu); }

// Sorted, duplicate-free.
using WordIndexSet = std::vector<WordKey>;

WordIndexSet make_word_set(const std::vector<AnswerSpan>& spans);
// Groups a sorted word set back into per-utterance contiguous spans.
std::vector<AnswerSpan> word_set_to_spans(const WordIndexSet& words);

// --- operations --------------------------------------------------------

// Collapses runs of same-speaker utterances into one utterance (texts joined
// with a single space), re-assigns indices contiguously and remaps all
// annotation spans and question indices to the merged coordinates.
Meeting merge_consecutive_utterances(const Meeting& meeting);

// Majority answerability: the question is unanswerable iff at least half of
// the judges tagged it as such. Returns the has-answer label.
bool derive_answerability_label(const std::vector<AnswerAnnotation>& annotations);

// Builds one QAInstance per annotated question with k utterances of context
// before and l after, clipped at meeting boundaries.
std::vector<QAInstance> extract_question_instances(const Meeting& meeting, int k, int l);

// Locates `question` as a word-aligned substring of `text`; returns the word
// index of its first word, or nullopt.
std::optional<int32_t> find_question_word_offset(const std::string& text,
                                                 const std::string& question);

} // namespace meeqa
