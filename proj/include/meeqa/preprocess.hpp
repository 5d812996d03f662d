#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "meeqa/transcript.hpp"

namespace meeqa {

// Audit counts for one cleaning run.
struct CleanReport {
    int64_t removed_comments = 0;
    int64_t removed_fillers = 0;
    int64_t removed_repetitions = 0;
    int64_t removed_symbols = 0;
    int64_t merged_spans = 0;
    int64_t dropped_instances = 0; // dropped (question, annotation) pairs
};

struct CleanOptions {
    std::vector<std::string> fillers = {"uh", "um", "hmm", "huh", "er", "erm"};
    bool collapse_repetitions = true;
    // Keep the words "a" and "I" when dropping one-character words; the strict
    // mode removes every one-character alphabetic word.
    bool keep_a_and_i = true;
    bool merge_speakers = true;
};

// Removes <...> and [...] stage comments and transcriber notes of the
// "secretary's note : ..." form, collapsing the surrounding whitespace.
// On an unbalanced bracket the text is left unchanged from that bracket on
// and *unbalanced, when given, is set.
std::string strip_stage_comments(const std::string& text, CleanReport* report = nullptr,
                                 bool* unbalanced = nullptr);

// Drops standalone filler tokens and collapses immediately repeated word
// n-grams (n <= 3, case-insensitive) to a single occurrence.
std::string remove_fillers_and_repetitions(const std::string& text,
                                           const CleanOptions& options = {},
                                           CleanReport* report = nullptr);

// Removes the characters @ _ and all brackets, drops standalone one-character
// alphabetic words (keeping "a"/"I" unless strict), and normalizes whitespace.
std::string normalize_symbols(const std::string& text, const CleanOptions& options = {},
                              CleanReport* report = nullptr);

// Full pipeline on one utterance (strip -> fillers/repetitions -> symbols,
// iterated to a fixpoint) with the old-word -> new-word index map. Removed
// words map to -1.
struct CleanedText {
    std::string text;
    std::vector<int32_t> word_map;
};
CleanedText clean_utterance(const std::string& text, const CleanOptions& options = {},
                            CleanReport* report = nullptr);

// Smallest word range [first, last] whose characters cover the half-open
// character span [begin, end) of `words` joined by single spaces.
std::pair<int32_t, int32_t> complete_partial_highlight(size_t span_begin, size_t span_end,
                                                       const std::vector<std::string>& words);

// Inclusive range of global word indices.
struct GlobalWordRange {
    int64_t begin = 0;
    int64_t end = 0;
    bool operator==(const GlobalWordRange&) const = default;
};

// Merges consecutive spans separated by exactly one word when that word was
// said by the speaker of one of the two spans; applied left to right until a
// fixpoint. `word_speakers[g]` is the speaker id of global word g.
std::vector<GlobalWordRange> merge_multi_span(std::vector<GlobalWordRange> spans,
                                              const std::vector<int32_t>& word_speakers,
                                              CleanReport* report = nullptr);

// Drops annotations whose spans lie entirely before the question and trims
// the before-question portion of the rest. Returns nullopt when no
// annotations survive.
std::optional<QAInstance> filter_pre_question_answers(const QAInstance& instance,
                                                      CleanReport* report = nullptr);

// Whole-meeting pipeline: clean texts, drop emptied utterances, merge
// consecutive same-speaker utterances, remap annotations, drop pre-question
// answers and merge multi-span answers.
Meeting preprocess_meeting(const Meeting& meeting, const CleanOptions& options,
                           CleanReport* report = nullptr);

// Loads a filler lexicon, one token per line; '#' starts a comment.
std::vector<std::string> load_filler_lexicon(const std::string& path);

} // namespace meeqa
