#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meeqa/transcript.hpp"

namespace meeqa {

// Marker-task corpus: the answer is the word span following the marker token
// through the end of its utterance. Unanswerable questions carry no marker;
// a decoy_fraction of them instead keep a marker plus decoy span behind a
// no-answer cue word, so answerability cannot be read off the marker alone.
struct SyntheticOptions {
    int n_questions = 100;
    double unanswerable_fraction = 0.3;
    double decoy_fraction = 0.0;
    int judges = 1;
    uint64_t seed = 1;
    std::string marker = "eureka";
    std::string no_answer_cue = "nevermind";
};

std::vector<Meeting> generate_marker_corpus(const SyntheticOptions& options);

} // namespace meeqa
