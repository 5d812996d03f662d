#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "meeqa/transcript.hpp"

namespace meeqa::testing {

// The board-meeting exchange used across the representation tests: a chair
// asking who will speak on an agenda item, with one utterance of context on
// each side.
inline Meeting board_meeting() {
    Meeting m;
    m.meeting_id = "board";
    m.utterances = {
        {1, "CHAIRMAN McKAY",
         "And so this is a discussion that will continue. So unless I hear a screaming "
         "objection, I ask that we move onto the next item on the agenda."},
        {2, "MR. POLGAR", "Okay. Thank you."},
        {3, "CHAIRMAN McKAY",
         "Thank you very much. The next item on the agenda is considering and acting on "
         "the change of address notification to diversify investment advisors. Who is "
         "going to speak on that?"},
        {4, "CHAIRMAN McKAY", "Mr. Jeffress, I suspect this will be a short."},
    };
    Question q;
    q.utterance_index = 3;
    q.text = "Who is going to speak on that?";
    AnswerAnnotation ann;
    ann.judge_id = "j1";
    ann.spans = {{4, 0, 9}};
    q.annotations = {ann};
    m.questions = {q};
    return m;
}

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        std::mt19937_64 rng(std::random_device{}());
        path_ = base / ("meeqa_test_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace meeqa::testing
