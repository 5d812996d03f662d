#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meeqa/transcript.hpp"

namespace meeqa {

enum class SpeakerMode { Original, SwitchSpeakers };

// How a question instance is rendered into the two input segments.
// Original repeats the speaker token at every utterance start; SwitchSpeakers
// emits it only when the speaker changes. question_k previous utterances are
// rendered into the segment before the question.
struct RepresentationMode {
    SpeakerMode speaker_mode = SpeakerMode::SwitchSpeakers;
    int question_k = 1; // 0..2, >= 1 requires SwitchSpeakers
    bool utterance_marker = false; // also emit "&" before each speaker token

    void validate() const;
};

SpeakerMode parse_speaker_mode(const std::string& name);
std::string speaker_mode_name(SpeakerMode mode);

// Renames speakers to SPEAKER_Z by order of first appearance in the window;
// the questioner is always SPEAKER_0.
QAInstance normalize_speakers(const QAInstance& instance);

// Provenance of one whitespace word of a rendered segment. Speaker tokens and
// utterance markers carry no source word (utterance == -1).
struct SegmentWordOrigin {
    int32_t utterance = -1;
    int32_t word = -1;
};

struct RenderedSegment {
    std::string text;
    std::vector<SegmentWordOrigin> word_origins; // one per whitespace word
};

// The two model input segments: text up to and including the question, and
// the text after it.
struct RenderedSequence {
    RenderedSegment segment_before;
    RenderedSegment segment_after;
};

RenderedSequence render_sequence(const QAInstance& instance, const RepresentationMode& mode);

// Deterministic tokenizer: lowercase, split on whitespace, detach punctuation
// characters (except '_') as single tokens. word_map[t] is the index of token
// t's source word.
struct TokenizedText {
    std::vector<std::string> tokens;
    std::vector<int32_t> word_map;
};
TokenizedText tokenize(const std::string& text);

// Token-per-line vocabulary; line number = id. Ids 0..3 are reserved for
// [PAD], [CLS], [SEP] and <unk>.
class Vocabulary {
public:
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kCls = 1;
    static constexpr int32_t kSep = 2;
    static constexpr int32_t kUnk = 3;

    static const std::vector<std::string>& special_tokens();

    // Builds from a token stream: specials first, then the distinct data
    // tokens in sorted order.
    static Vocabulary build(const std::vector<std::string>& tokens);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    int32_t id(const std::string& token) const; // <unk> fallback
    const std::string& token(int32_t id) const;
    int32_t size() const { return static_cast<int32_t>(tokens_.size()); }

private:
    std::vector<std::string> tokens_;
    std::vector<std::pair<std::string, int32_t>> index_; // sorted by token
};

enum class TokenKind : uint8_t { Special = 0, SegmentB = 1, SegmentA = 2, Pad = 3 };

struct TokenOrigin {
    int32_t utterance = -1;
    int32_t word = -1;
};

// The assembled model input: [CLS] S_B [SEP] S_A [SEP] padded to a fixed
// length, with per-token provenance and the training targets.
struct EncodedInput {
    std::string question_id;
    std::vector<int32_t> token_ids;
    std::vector<TokenKind> kinds;
    std::vector<TokenOrigin> origins;
    std::vector<uint8_t> attention; // 1 = real token, 0 = pad
    int32_t cls_index = 0;
    int32_t n_valid = 0;     // count of non-pad tokens
    int32_t y_start = 0;     // target token indices; cls_index when no answer
    int32_t y_end = 0;
    uint8_t y_has_answer = 0;
    bool gold_truncated = false;

    // 1 for positions a span target may take: [CLS] plus the S_A tokens.
    std::vector<uint8_t> span_target_mask() const;
    // 1 for answer candidate positions: the S_A tokens only.
    std::vector<uint8_t> candidate_mask() const;
};

struct EncodeStats {
    int64_t skipped_too_long = 0;
    int64_t gold_truncated = 0;
};

// Lays out [CLS] S_B [SEP] S_A-tokens (tail-truncated) [SEP] pads. S_B is
// never truncated; if it alone exceeds max_len - 3 a DataError is thrown.
// A gold span that does not survive in S_A falls back to [CLS] targets with
// gold_truncated set.
EncodedInput assemble_input(const RenderedSequence& rendered, const Vocabulary& vocab,
                            const std::optional<AnswerSpan>& gold_span,
                            bool has_answer_label, int max_len,
                            EncodeStats* stats = nullptr);

// The (utterance, word) indices covered by the inclusive token range
// [token_begin, token_end], which must lie inside the S_A segment.
WordIndexSet tokens_to_word_indices(const EncodedInput& encoded, int32_t token_begin,
                                    int32_t token_end);

} // namespace meeqa
