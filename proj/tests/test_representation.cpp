#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "meeqa/errors.hpp"
#include "meeqa/representation.hpp"

using namespace meeqa;

namespace {

QAInstance board_instance(int k) {
    auto instances = extract_question_instances(meeqa::testing::board_meeting(), k, 60);
    REQUIRE(instances.size() == 1);
    return normalize_speakers(instances[0]);
}

std::vector<std::string> segment_tokens(const RenderedSequence& r) {
    std::vector<std::string> out;
    for (const auto* seg : {&r.segment_before, &r.segment_after}) {
        TokenizedText t = tokenize(seg->text);
        for (auto& tok : t.tokens) out.push_back(std::move(tok));
    }
    return out;
}

const std::string kQuestionSide =
    "SPEAKER_0: Thank you very much. The next item on the agenda is considering and acting "
    "on the change of address notification to diversify investment advisors. Who is going "
    "to speak on that?";
const std::string kReplySide = "Mr. Jeffress, I suspect this will be a short.";

} // namespace

TEST_CASE("normalize_speakers makes the questioner SPEAKER_0") {
    QAInstance inst = board_instance(2);
    CHECK(inst.before_window[0].speaker == "SPEAKER_0"); // chair two turns earlier
    CHECK(inst.before_window[1].speaker == "SPEAKER_1"); // Mr. Polgar
    CHECK(inst.before_window[2].speaker == "SPEAKER_0"); // the questioner
    CHECK(inst.after_window[1].speaker == "SPEAKER_0");
}

TEST_CASE("normalize_speakers numbers a single-speaker window as SPEAKER_0") {
    Meeting m;
    m.meeting_id = "solo";
    m.utterances = {{1, "HOST", "any updates?"}, {2, "HOST", "none at all."}};
    Question q{1, "any updates?", {}, ""};
    AnswerAnnotation ann;
    ann.judge_id = "j";
    ann.is_unanswerable = true;
    q.annotations = {ann};
    m.questions = {q};
    auto inst = normalize_speakers(extract_question_instances(m, 1, 60)[0]);
    for (const auto& p : inst.before_window) CHECK(p.speaker == "SPEAKER_0");
    for (const auto& p : inst.after_window) CHECK(p.speaker == "SPEAKER_0");
}

TEST_CASE("render_sequence: original mode repeats the speaker token") {
    RepresentationMode mode{SpeakerMode::Original, 0, false};
    RenderedSequence r = render_sequence(board_instance(0), mode);
    CHECK(r.segment_before.text == kQuestionSide);
    CHECK(r.segment_after.text == "SPEAKER_0: " + kReplySide);
}

TEST_CASE("render_sequence: switch speakers drops the repeated token") {
    RepresentationMode mode{SpeakerMode::SwitchSpeakers, 0, false};
    RenderedSequence r = render_sequence(board_instance(0), mode);
    CHECK(r.segment_before.text == kQuestionSide);
    CHECK(r.segment_after.text == kReplySide);
}

TEST_CASE("render_sequence: switch speakers with one previous utterance") {
    RepresentationMode mode{SpeakerMode::SwitchSpeakers, 1, false};
    RenderedSequence r = render_sequence(board_instance(1), mode);
    CHECK(r.segment_before.text == "SPEAKER_1: Okay. Thank you. " + kQuestionSide);
    CHECK(r.segment_after.text == kReplySide);
}

TEST_CASE("render_sequence: switch speakers with two previous utterances") {
    RepresentationMode mode{SpeakerMode::SwitchSpeakers, 2, false};
    RenderedSequence r = render_sequence(board_instance(2), mode);
    CHECK(r.segment_before.text ==
          "SPEAKER_0: And so this is a discussion that will continue. So unless I hear a "
          "screaming objection, I ask that we move onto the next item on the agenda. "
          "SPEAKER_1: Okay. Thank you. " +
              kQuestionSide);
    CHECK(r.segment_after.text == kReplySide);
}

TEST_CASE("render_sequence can emit the utterance marker") {
    RepresentationMode mode{SpeakerMode::SwitchSpeakers, 1, true};
    RenderedSequence r = render_sequence(board_instance(1), mode);
    CHECK(r.segment_before.text.rfind("& SPEAKER_1: Okay. Thank you. & SPEAKER_0:", 0) == 0);
}

TEST_CASE("render mode validation") {
    RepresentationMode bad{SpeakerMode::Original, 1, false};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    RepresentationMode worse{SpeakerMode::SwitchSpeakers, 3, false};
    CHECK_THROWS_AS(worse.validate(), ConfigError);
}

TEST_CASE("switch mode emits one prefix per speaker change") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        Meeting m;
        m.meeting_id = "r";
        std::uniform_int_distribution<int> n_utt(2, 9);
        std::uniform_int_distribution<int> spk(0, 2);
        int utts = n_utt(rng);
        for (int i = 0; i < utts; ++i)
            m.utterances.push_back(
                {static_cast<int32_t>(i + 1), "S" + std::to_string(spk(rng)), "words here."});
        m.utterances[0].text = "lead in. why though?";
        Question q{1, "why though?", {}, ""};
        AnswerAnnotation ann;
        ann.judge_id = "j";
        ann.is_unanswerable = true;
        q.annotations = {ann};
        m.questions = {q};

        auto inst = normalize_speakers(extract_question_instances(m, 0, 60)[0]);
        RepresentationMode mode{SpeakerMode::SwitchSpeakers, 0, false};
        RenderedSequence r = render_sequence(inst, mode);

        // rendered utterance order: u_q then the replies
        std::vector<std::string> speakers;
        speakers.push_back(inst.before_window.back().speaker);
        for (size_t i = 1; i < inst.after_window.size(); ++i)
            speakers.push_back(inst.after_window[i].speaker);
        int alternations = 0;
        for (size_t i = 1; i < speakers.size(); ++i)
            if (speakers[i] != speakers[i - 1]) ++alternations;

        int prefixes = 0;
        for (const auto* seg : {&r.segment_before, &r.segment_after})
            for (const auto& o : seg->word_origins)
                if (o.utterance < 0) ++prefixes;
        CHECK(prefixes == 1 + alternations);
    }
}

TEST_CASE("tokenize lowercases and detaches punctuation") {
    TokenizedText t = tokenize("Thank you!");
    CHECK(t.tokens == std::vector<std::string>{"thank", "you", "!"});
    CHECK(t.word_map == std::vector<int32_t>{0, 1, 1});

    CHECK(tokenize("").tokens.empty());

    TokenizedText s = tokenize("SPEAKER_0:");
    CHECK(s.tokens == std::vector<std::string>{"speaker_0", ":"});
    CHECK(s.word_map == std::vector<int32_t>{0, 0});

    TokenizedText h = tokenize("short-term, ok?");
    CHECK(h.tokens == std::vector<std::string>{"short", "-", "term", ",", "ok", "?"});
    CHECK(h.word_map == std::vector<int32_t>{0, 0, 0, 0, 1, 1});
}

TEST_CASE("vocabulary build, save and load") {
    Vocabulary v = Vocabulary::build({"beta", "alpha", "beta", "?"});
    CHECK(v.size() == 7); // 4 reserved + 3 distinct
    CHECK(v.id("?") == 4);    // sorted data tokens follow the reserved ids
    CHECK(v.id("alpha") == 5);
    CHECK(v.id("missing") == Vocabulary::kUnk);
    CHECK(v.token(Vocabulary::kCls) == "[CLS]");

    meeqa::testing::TempDir dir;
    v.save(dir.file("vocab.txt"));
    Vocabulary loaded = Vocabulary::load(dir.file("vocab.txt"));
    CHECK(loaded.size() == v.size());
    CHECK(loaded.id("beta") == v.id("beta"));
}

namespace {

RenderedSequence simple_rendered() {
    // S_B: "speaker_0: why?"  S_A: "the answer words here"
    RenderedSegment before;
    before.text = "SPEAKER_0: why?";
    before.word_origins = {{-1, -1}, {1, 0}};
    RenderedSegment after;
    after.text = "the answer words here";
    after.word_origins = {{2, 0}, {2, 1}, {2, 2}, {2, 3}};
    return {before, after};
}

Vocabulary simple_vocab() {
    return Vocabulary::build(
        {"speaker_0", ":", "why", "?", "the", "answer", "words", "here"});
}

} // namespace

TEST_CASE("assemble_input lays out and pads the sequence") {
    Vocabulary v = simple_vocab();
    EncodedInput enc = assemble_input(simple_rendered(), v, std::nullopt, true, 16);
    REQUIRE(enc.token_ids.size() == 16);
    CHECK(enc.token_ids[0] == Vocabulary::kCls);
    // [CLS] speaker_0 : why ? [SEP] the answer words here [SEP]
    CHECK(enc.n_valid == 11);
    CHECK(enc.kinds[0] == TokenKind::Special);
    CHECK(enc.kinds[1] == TokenKind::SegmentB);
    CHECK(enc.kinds[5] == TokenKind::Special);
    CHECK(enc.kinds[6] == TokenKind::SegmentA);
    CHECK(enc.kinds[10] == TokenKind::Special);
    CHECK(enc.kinds[11] == TokenKind::Pad);
    int seps = 0;
    for (int32_t id : enc.token_ids)
        if (id == Vocabulary::kSep) ++seps;
    CHECK(seps == 2);
    for (size_t i = 0; i < enc.token_ids.size(); ++i)
        CHECK(enc.attention[i] == (enc.kinds[i] != TokenKind::Pad ? 1 : 0));
    CHECK(enc.y_start == enc.cls_index); // no gold span given
    CHECK(enc.y_end == enc.cls_index);
}

TEST_CASE("assemble_input maps a gold span through the offset maps") {
    Vocabulary v = simple_vocab();
    AnswerSpan gold{2, 1, 2}; // "answer words"
    EncodedInput enc = assemble_input(simple_rendered(), v, gold, true, 16);
    // S_A starts at token 6
    CHECK(enc.y_start == 7);
    CHECK(enc.y_end == 8);
    CHECK(!enc.gold_truncated);
    CHECK(enc.y_has_answer == 1);

    auto words = tokens_to_word_indices(enc, enc.y_start, enc.y_end);
    CHECK(words == WordIndexSet{word_key(2, 1), word_key(2, 2)});
}

TEST_CASE("assemble_input truncates the answer side only") {
    Vocabulary v = simple_vocab();
    // budget: 12 - 3 - 5 (S_B tokens) = 4... use max_len 12 -> S_A keeps 4 tokens
    EncodedInput enc = assemble_input(simple_rendered(), v, std::nullopt, true, 12);
    CHECK(enc.n_valid == 11); // everything still fits
    EncodedInput tight = assemble_input(simple_rendered(), v, std::nullopt, true, 10);
    CHECK(tight.n_valid == 10);
    int segment_a = 0;
    for (auto k : tight.kinds)
        if (k == TokenKind::SegmentA) ++segment_a;
    CHECK(segment_a == 3); // one answer token truncated away
}

TEST_CASE("assemble_input falls back to [CLS] when the gold span is truncated") {
    Vocabulary v = simple_vocab();
    AnswerSpan gold{2, 3, 3}; // "here", the last answer word
    EncodeStats stats;
    EncodedInput enc = assemble_input(simple_rendered(), v, gold, true, 10, &stats);
    CHECK(enc.y_start == enc.cls_index);
    CHECK(enc.y_end == enc.cls_index);
    CHECK(enc.gold_truncated);
    CHECK(enc.y_has_answer == 1); // answerability label is untouched
    CHECK(stats.gold_truncated == 1);
}

TEST_CASE("assemble_input rejects an oversized question side") {
    Vocabulary v = simple_vocab();
    CHECK_THROWS_AS(assemble_input(simple_rendered(), v, std::nullopt, true, 6), DataError);
}

TEST_CASE("assemble_input is deterministic") {
    Vocabulary v = simple_vocab();
    EncodedInput a = assemble_input(simple_rendered(), v, std::nullopt, false, 16);
    EncodedInput b = assemble_input(simple_rendered(), v, std::nullopt, false, 16);
    CHECK(a.token_ids == b.token_ids);
}

TEST_CASE("tokens_to_word_indices validates the range") {
    Vocabulary v = simple_vocab();
    EncodedInput enc = assemble_input(simple_rendered(), v, std::nullopt, true, 16);
    CHECK_THROWS_AS(tokens_to_word_indices(enc, 0, 6), DataError);   // touches [CLS]/S_B
    CHECK_THROWS_AS(tokens_to_word_indices(enc, 6, 10), DataError);  // touches [SEP]
    CHECK_THROWS_AS(tokens_to_word_indices(enc, 6, 200), DataError); // out of range
    CHECK(tokens_to_word_indices(enc, 6, 9).size() == 4);
}

TEST_CASE("word to token to word round-trip on random windows") {
    std::mt19937_64 rng(31);
    static const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta",
                                                   "epsilon", "zeta"};
    std::uniform_int_distribution<size_t> pick(0, words.size() - 1);
    for (int trial = 0; trial < 50; ++trial) {
        Meeting m;
        m.meeting_id = "rt";
        m.utterances.push_back({1, "A", "so then. what now?"});
        std::uniform_int_distribution<int> n_words(2, 8);
        std::string reply;
        int reply_words = n_words(rng);
        for (int i = 0; i < reply_words; ++i) {
            if (!reply.empty()) reply += " ";
            reply += words[pick(rng)];
        }
        m.utterances.push_back({2, "B", reply});
        Question q{1, "what now?", {}, ""};
        AnswerAnnotation ann;
        ann.judge_id = "j";
        ann.is_unanswerable = true;
        q.annotations = {ann};
        m.questions = {q};

        auto inst = normalize_speakers(extract_question_instances(m, 1, 60)[0]);
        RenderedSequence r = render_sequence(inst, RepresentationMode{});
        Vocabulary v = Vocabulary::build(segment_tokens(r));
        std::uniform_int_distribution<int> w0(0, reply_words - 1);
        int a = w0(rng), b = w0(rng);
        AnswerSpan gold{2, std::min(a, b), std::max(a, b)};
        EncodedInput enc = assemble_input(r, v, gold, true, 64);
        REQUIRE(!enc.gold_truncated);
        auto round = tokens_to_word_indices(enc, enc.y_start, enc.y_end);
        WordIndexSet expected;
        for (int32_t w = gold.word_start; w <= gold.word_end; ++w)
            expected.push_back(word_key(2, w));
        CHECK(round == expected);
    }
}
