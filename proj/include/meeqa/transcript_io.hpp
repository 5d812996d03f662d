#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "meeqa/transcript.hpp"

namespace meeqa {

// JSONL ingestion, one meeting per line:
//   {"meeting_id": ..., "utterances": [{"speaker", "text"}, ...],
//    "questions": [{"utterance_index", "question_text",
//                   "annotations": [{"judge_id", "unanswerable",
//                                    "spans": [[utt, start, end], ...]}]}]}
// Utterance indices are 1-based; span word indices are 0-based inclusive.
// Unknown question fields are preserved and written back verbatim.
std::vector<Meeting> read_meetings_jsonl(std::istream& in, const std::string& source_name);
std::vector<Meeting> read_meetings_file(const std::string& path);

void write_meetings_jsonl(std::ostream& out, const std::vector<Meeting>& meetings);
void write_meetings_file(const std::string& path, const std::vector<Meeting>& meetings);

} // namespace meeqa
