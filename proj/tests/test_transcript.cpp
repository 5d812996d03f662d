#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "meeqa/errors.hpp"
#include "meeqa/transcript.hpp"
#include "meeqa/transcript_io.hpp"

using namespace meeqa;

namespace {

Meeting make_meeting(const std::vector<std::pair<std::string, std::string>>& turns) {
    Meeting m;
    m.meeting_id = "m";
    int32_t i = 1;
    for (const auto& [speaker, text] : turns) m.utterances.push_back({i++, speaker, text});
    return m;
}

Meeting random_meeting(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_utt(1, 8);
    std::uniform_int_distribution<int> n_words(1, 6);
    std::uniform_int_distribution<int> spk(0, 2);
    static const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta."};
    std::uniform_int_distribution<size_t> w(0, words.size() - 1);
    std::vector<std::pair<std::string, std::string>> turns;
    int utts = n_utt(rng);
    for (int i = 0; i < utts; ++i) {
        std::string text;
        int k = n_words(rng);
        for (int j = 0; j < k; ++j) {
            if (!text.empty()) text += " ";
            text += words[w(rng)];
        }
        turns.push_back({"S" + std::to_string(spk(rng)), text});
    }
    return make_meeting(turns);
}

std::string meeting_signature(const Meeting& m) {
    std::string s;
    for (const auto& u : m.utterances) s += u.speaker + "|" + u.text + "\n";
    return s;
}

} // namespace

TEST_CASE("sentence splitting keeps terminal punctuation") {
    auto s = split_sentences(
        "Thank you very much. The next item on the agenda is considering and acting on the "
        "change of address notification to diversify investment advisors. Who is going to "
        "speak on that?");
    REQUIRE(s.size() == 3);
    CHECK(s[0] == "Thank you very much.");
    CHECK(s[2] == "Who is going to speak on that?");

    CHECK(split_sentences("no terminal punctuation") ==
          std::vector<std::string>{"no terminal punctuation"});
    CHECK(split_sentences("what?! really?") == std::vector<std::string>{"what?!", "really?"});
    CHECK(split_sentences("").empty());
}

TEST_CASE("merge_consecutive_utterances joins same-speaker runs") {
    Meeting m = make_meeting({{"A", "hi"}, {"A", "there"}, {"B", "yes"}});
    Meeting merged = merge_consecutive_utterances(m);
    REQUIRE(merged.utterances.size() == 2);
    CHECK(merged.utterances[0].speaker == "A");
    CHECK(merged.utterances[0].text == "hi there");
    CHECK(merged.utterances[1].text == "yes");
    CHECK(merged.utterances[0].index == 1);
    CHECK(merged.utterances[1].index == 2);
}

TEST_CASE("merge keeps singletons and alternating speakers") {
    Meeting single = merge_consecutive_utterances(make_meeting({{"A", "x"}}));
    REQUIRE(single.utterances.size() == 1);
    CHECK(single.utterances[0].text == "x");

    Meeting alt = merge_consecutive_utterances(
        make_meeting({{"A", "one"}, {"B", "two"}, {"A", "three"}}));
    CHECK(alt.utterances.size() == 3);
}

TEST_CASE("merge remaps annotation spans and question indices") {
    Meeting m = make_meeting({{"A", "first words here"}, {"A", "second part"}, {"B", "done?"}});
    Question q;
    q.utterance_index = 3;
    q.text = "done?";
    AnswerAnnotation ann;
    ann.judge_id = "j";
    ann.spans = {{2, 0, 1}}; // "second part"
    q.annotations = {ann};
    m.questions = {q};

    Meeting merged = merge_consecutive_utterances(m);
    REQUIRE(merged.utterances.size() == 2);
    CHECK(merged.questions[0].utterance_index == 2);
    REQUIRE(merged.questions[0].annotations[0].spans.size() == 1);
    AnswerSpan s = merged.questions[0].annotations[0].spans[0];
    CHECK(s.utterance == 1);
    CHECK(s.word_start == 3); // offset by the 3 words of the first utterance
    CHECK(s.word_end == 4);
}

TEST_CASE("merge is idempotent on random meetings") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        Meeting m = random_meeting(rng);
        Meeting once = merge_consecutive_utterances(m);
        Meeting twice = merge_consecutive_utterances(once);
        CHECK(meeting_signature(once) == meeting_signature(twice));
        for (size_t i = 0; i + 1 < once.utterances.size(); ++i)
            CHECK(once.utterances[i].speaker != once.utterances[i + 1].speaker);
    }
}

TEST_CASE("derive_answerability_label follows the at-least-half rule") {
    auto ann = [](bool unanswerable) {
        AnswerAnnotation a;
        a.judge_id = "j";
        a.is_unanswerable = unanswerable;
        if (!unanswerable) a.spans = {{1, 0, 0}};
        return a;
    };
    CHECK(derive_answerability_label({ann(true), ann(true), ann(false)}) == false);
    CHECK(derive_answerability_label({ann(false), ann(false), ann(false)}) == true);
    CHECK(derive_answerability_label({ann(true), ann(false)}) == false); // half counts
    CHECK(derive_answerability_label({ann(false), ann(true), ann(false)}) == true);
    CHECK_THROWS_AS(derive_answerability_label({}), DataError);
}

TEST_CASE("derive_answerability_label is permutation invariant") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> n_dist(1, 7);
        int n = n_dist(rng);
        std::vector<AnswerAnnotation> anns;
        for (int i = 0; i < n; ++i) {
            AnswerAnnotation a;
            a.is_unanswerable = rng() % 2 == 0;
            if (!a.is_unanswerable) a.spans = {{1, 0, 0}};
            anns.push_back(a);
        }
        bool expected = derive_answerability_label(anns);
        std::shuffle(anns.begin(), anns.end(), rng);
        CHECK(derive_answerability_label(anns) == expected);
    }
}

TEST_CASE("extract_question_instances on the board meeting") {
    Meeting m = meeqa::testing::board_meeting();
    auto instances = extract_question_instances(m, 1, 60);
    REQUIRE(instances.size() == 1);
    const QAInstance& inst = instances[0];

    CHECK(inst.question_id == "board:0");
    CHECK(inst.q_index == 3);
    CHECK(inst.prefix ==
          "Thank you very much. The next item on the agenda is considering and acting on the "
          "change of address notification to diversify investment advisors.");
    CHECK(inst.suffix == "");
    // k=1: one full utterance plus the question prefix
    REQUIRE(inst.before_window.size() == 2);
    CHECK(inst.before_window[0].speaker == "MR. POLGAR");
    CHECK(inst.before_window[0].text == "Okay. Thank you.");
    CHECK(inst.before_window[1].utterance == 3);
    // after window: empty suffix part, then the next utterance
    REQUIRE(inst.after_window.size() == 2);
    CHECK(inst.after_window[0].text == "");
    CHECK(inst.after_window[1].text == "Mr. Jeffress, I suspect this will be a short.");
    CHECK(inst.y_has_answer == true);
}

TEST_CASE("extraction clips windows at meeting boundaries") {
    Meeting m = make_meeting({{"A", "what happened here?"}, {"B", "a lot"}});
    Question q;
    q.utterance_index = 1;
    q.text = "what happened here?";
    AnswerAnnotation ann;
    ann.judge_id = "j";
    ann.spans = {{2, 0, 1}};
    q.annotations = {ann};
    m.questions = {q};

    auto instances = extract_question_instances(m, 2, 60);
    REQUIRE(instances.size() == 1);
    CHECK(instances[0].before_window.size() == 1); // only the (empty) prefix part
    CHECK(instances[0].prefix == "");
    CHECK(instances[0].after_window.size() == 2); // suffix part + the single reply
}

TEST_CASE("extraction keeps all remaining utterances when fewer than l remain") {
    Meeting m = make_meeting({{"A", "start"}, {"A", "why?"}, {"B", "end"}});
    Question q;
    q.utterance_index = 2;
    q.text = "why?";
    AnswerAnnotation ann;
    ann.judge_id = "j";
    ann.is_unanswerable = true;
    q.annotations = {ann};
    m.questions = {q};
    auto instances = extract_question_instances(m, 0, 60);
    REQUIRE(instances.size() == 1);
    CHECK(instances[0].after_window.size() == 2);
    CHECK(instances[0].y_has_answer == false);
}

TEST_CASE("question sentence must be found in the stated utterance") {
    Meeting m = make_meeting({{"A", "nothing to see"}});
    Question q;
    q.utterance_index = 1;
    q.text = "where is it?";
    AnswerAnnotation ann;
    ann.judge_id = "j";
    ann.is_unanswerable = true;
    q.annotations = {ann};
    m.questions = {q};
    CHECK_THROWS_AS(extract_question_instances(m, 1, 60), DataError);
}

TEST_CASE("extraction validates the window parameters") {
    Meeting m = meeqa::testing::board_meeting();
    CHECK_THROWS_AS(extract_question_instances(m, -1, 60), ConfigError);
    CHECK_THROWS_AS(extract_question_instances(m, 1, 0), ConfigError);
}

TEST_CASE("multiple questions in one utterance share windows") {
    Meeting m = make_meeting({{"A", "ready? sure you are ready?"}, {"B", "yes"}});
    AnswerAnnotation ann;
    ann.judge_id = "j";
    ann.is_unanswerable = true;
    Question q1{1, "ready?", {ann}, ""};
    Question q2{1, "sure you are ready?", {ann}, ""};
    m.questions = {q1, q2};
    auto instances = extract_question_instances(m, 1, 10);
    REQUIRE(instances.size() == 2);
    CHECK(instances[0].question_word_offset() == 0);
    CHECK(instances[1].question_word_offset() == 1);
    CHECK(instances[0].suffix == "sure you are ready?");
    CHECK(instances[1].prefix == "ready?");
}

TEST_CASE("window text reconstructs the source utterances when unclipped") {
    std::mt19937_64 rng(11);
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 60; ++trial) {
        Meeting m = random_meeting(rng);
        if (m.utterances.size() < 3) continue;
        size_t qi = 1 + rng() % (m.utterances.size() - 2);
        m.utterances[qi].text += " is that so?";
        Question q;
        q.utterance_index = static_cast<int32_t>(qi + 1);
        q.text = "is that so?";
        AnswerAnnotation ann;
        ann.judge_id = "j";
        ann.is_unanswerable = true;
        q.annotations = {ann};
        m.questions = {q};

        int k = static_cast<int>(qi);
        int l = static_cast<int>(m.utterances.size() - qi - 1);
        if (l < 1) continue;
        ++checked;
        auto instances = extract_question_instances(m, k, l);
        REQUIRE(instances.size() == 1);
        const auto& inst = instances[0];

        std::string joined;
        auto append = [&](const std::string& text) {
            if (text.empty()) return;
            if (!joined.empty()) joined += " ";
            joined += text;
        };
        for (size_t i = 0; i + 1 < inst.before_window.size(); ++i)
            append(inst.before_window[i].text);
        append(inst.prefix);
        append(inst.question_text);
        append(inst.suffix);
        for (size_t i = 1; i < inst.after_window.size(); ++i)
            append(inst.after_window[i].text);

        std::string expected;
        for (const auto& u : m.utterances) {
            if (!expected.empty()) expected += " ";
            expected += u.text;
        }
        CHECK(joined == expected);
    }
    CHECK(checked >= 40);
}

TEST_CASE("word set helpers round-trip spans") {
    std::vector<AnswerSpan> spans = {{1, 0, 2}, {1, 5, 5}, {3, 1, 2}};
    WordIndexSet set = make_word_set(spans);
    CHECK(set.size() == 6);
    CHECK(word_set_to_spans(set) == spans);
}

TEST_CASE("meetings JSONL round-trips") {
    Meeting m = meeqa::testing::board_meeting();
    std::ostringstream out;
    write_meetings_jsonl(out, {m});
    std::istringstream in(out.str());
    auto loaded = read_meetings_jsonl(in, "mem");
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].meeting_id == "board");
    REQUIRE(loaded[0].utterances.size() == 4);
    CHECK(loaded[0].utterances[2].text == m.utterances[2].text);
    REQUIRE(loaded[0].questions.size() == 1);
    CHECK(loaded[0].questions[0].annotations[0].spans[0] == AnswerSpan{4, 0, 9});

    std::ostringstream again;
    write_meetings_jsonl(again, loaded);
    CHECK(again.str() == out.str());
}

TEST_CASE("ingestion errors cite the line number") {
    std::istringstream in("{\"meeting_id\": \"ok\", \"utterances\": []}\nnot json\n");
    try {
        read_meetings_jsonl(in, "data.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("ingestion rejects span/unanswerable contradictions") {
    std::istringstream in(
        R"({"meeting_id":"m","utterances":[{"speaker":"A","text":"hi?"}],)"
        R"("questions":[{"utterance_index":1,"question_text":"hi?",)"
        R"("annotations":[{"judge_id":"j","unanswerable":true,"spans":[[1,0,0]]}]}]})");
    CHECK_THROWS_AS(read_meetings_jsonl(in, "x"), DataError);
}

TEST_CASE("question extras are preserved on rewrite") {
    std::string line =
        R"({"meeting_id":"m","utterances":[{"speaker":"A","text":"why?"}],)"
        R"("questions":[{"utterance_index":1,"question_text":"why?","yes_no":true,)"
        R"("annotations":[{"judge_id":"j","unanswerable":true,"spans":[]}]}]})";
    std::istringstream in(line);
    auto meetings = read_meetings_jsonl(in, "x");
    std::ostringstream out;
    write_meetings_jsonl(out, meetings);
    CHECK(out.str().find("\"yes_no\":true") != std::string::npos);
}
