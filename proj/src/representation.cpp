#include "meeqa/representation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "meeqa/errors.hpp"

namespace meeqa {

void RepresentationMode::validate() const {
    if (question_k < 0 || question_k > 2)
        throw ConfigError("question_k must be in {0, 1, 2}");
    if (question_k >= 1 && speaker_mode != SpeakerMode::SwitchSpeakers)
        throw ConfigError("question_k >= 1 requires the switch speaker mode");
}

SpeakerMode parse_speaker_mode(const std::string& name) {
    if (name == "original") return SpeakerMode::Original;
    if (name == "switch") return SpeakerMode::SwitchSpeakers;
    throw ConfigError("unknown speaker mode: " + name);
}

std::string speaker_mode_name(SpeakerMode mode) {
    return mode == SpeakerMode::Original ? "original" : "switch";
}

QAInstance normalize_speakers(const QAInstance& instance) {
    std::map<std::string, int32_t> ids;
    // questioner = speaker of u_q, carried by the prefix part
    for (const auto& p : instance.before_window)
        if (p.utterance == instance.q_index) {
            ids[p.speaker] = 0;
            break;
        }
    auto visit = [&](const WindowPart& p) {
        if (ids.find(p.speaker) == ids.end())
            ids[p.speaker] = static_cast<int32_t>(ids.size());
    };
    for (const auto& p : instance.before_window) visit(p);
    for (const auto& p : instance.after_window) visit(p);

    QAInstance out = instance;
    auto rename = [&](WindowPart& p) {
        p.speaker = "SPEAKER_" + std::to_string(ids[p.speaker]);
    };
    for (auto& p : out.before_window) rename(p);
    for (auto& p : out.after_window) rename(p);
    return out;
}

namespace {

struct SegmentBuilder {
    RenderedSegment seg;

    void add_word(const std::string& w, int32_t utt, int32_t word) {
        if (!seg.text.empty()) seg.text += ' ';
        seg.text += w;
        seg.word_origins.push_back({utt, word});
    }
    void add_text(const std::string& text, int32_t utt, int32_t word_offset) {
        auto words = split_words(text);
        for (size_t i = 0; i < words.size(); ++i)
            add_word(words[i], utt, word_offset + static_cast<int32_t>(i));
    }
};

// One utterance-part in render order with the segment it belongs to.
struct RenderPart {
    const WindowPart* part;
    bool in_segment_before;
};

} // namespace

RenderedSequence render_sequence(const QAInstance& instance, const RepresentationMode& mode) {
    mode.validate();

    // question part rendered as its own piece of u_q
    WindowPart question_part{instance.q_index,
                             instance.before_window.empty()
                                 ? std::string{}
                                 : instance.before_window.back().speaker,
                             instance.question_text, instance.question_word_offset()};

    std::vector<RenderPart> order;
    // last question_k full utterances before u_q, then the prefix part
    size_t n_before = instance.before_window.size(); // includes the prefix part
    size_t full_before = n_before > 0 ? n_before - 1 : 0;
    size_t take = std::min<size_t>(static_cast<size_t>(mode.question_k), full_before);
    for (size_t i = full_before - take; i < full_before; ++i)
        order.push_back({&instance.before_window[i], true});
    if (!instance.before_window.empty())
        order.push_back({&instance.before_window.back(), true});
    order.push_back({&question_part, true});
    for (const auto& p : instance.after_window) order.push_back({&p, false});

    SegmentBuilder before, after;
    const std::string* previous_speaker = nullptr;
    int32_t last_rendered_utterance = -1;
    for (const auto& rp : order) {
        const WindowPart& p = *rp.part;
        if (split_words(p.text).empty()) continue; // empty parts render nothing
        SegmentBuilder& seg = rp.in_segment_before ? before : after;
        bool utterance_start = p.utterance != last_rendered_utterance;
        bool emit_prefix = false;
        if (utterance_start) {
            if (mode.speaker_mode == SpeakerMode::Original)
                emit_prefix = true;
            else
                emit_prefix = previous_speaker == nullptr || *previous_speaker != p.speaker;
        }
        if (emit_prefix) {
            if (mode.utterance_marker) seg.add_word("&", -1, -1);
            seg.add_word(p.speaker + ":", -1, -1);
        }
        seg.add_text(p.text, p.utterance, p.word_offset);
        previous_speaker = &p.speaker;
        last_rendered_utterance = p.utterance;
    }
    return {std::move(before.seg), std::move(after.seg)};
}

TokenizedText tokenize(const std::string& text) {
    TokenizedText out;
    auto words = split_words(text);
    auto is_detached = [](unsigned char c) { return std::ispunct(c) && c != '_'; };
    for (size_t w = 0; w < words.size(); ++w) {
        const std::string& word = words[w];
        size_t i = 0;
        while (i < word.size()) {
            unsigned char c = static_cast<unsigned char>(word[i]);
            if (is_detached(c)) {
                out.tokens.emplace_back(1, word[i]);
                out.word_map.push_back(static_cast<int32_t>(w));
                ++i;
                continue;
            }
            size_t b = i;
            while (i < word.size() &&
                   !is_detached(static_cast<unsigned char>(word[i])))
                ++i;
            std::string piece = word.substr(b, i - b);
            for (char& ch : piece)
                ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            out.tokens.push_back(std::move(piece));
            out.word_map.push_back(static_cast<int32_t>(w));
        }
    }
    return out;
}

const std::vector<std::string>& Vocabulary::special_tokens() {
    static const std::vector<std::string> specials = {"[PAD]", "[CLS]", "[SEP]", "<unk>"};
    return specials;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& tokens) {
    std::vector<std::string> distinct = tokens;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    Vocabulary v;
    v.tokens_ = special_tokens();
    for (auto& t : distinct) {
        if (std::find(special_tokens().begin(), special_tokens().end(), t) ==
            special_tokens().end())
            v.tokens_.push_back(t);
    }
    for (size_t i = 0; i < v.tokens_.size(); ++i)
        v.index_.emplace_back(v.tokens_[i], static_cast<int32_t>(i));
    std::sort(v.index_.begin(), v.index_.end());
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) v.tokens_.push_back(line);
    if (v.tokens_.size() < special_tokens().size())
        throw DataError("vocabulary " + path + " is missing the reserved tokens");
    for (size_t i = 0; i < special_tokens().size(); ++i)
        if (v.tokens_[i] != special_tokens()[i])
            throw DataError("vocabulary " + path + ": line " + std::to_string(i) +
                            " must be " + special_tokens()[i]);
    for (size_t i = 0; i < v.tokens_.size(); ++i)
        v.index_.emplace_back(v.tokens_[i], static_cast<int32_t>(i));
    std::sort(v.index_.begin(), v.index_.end());
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary " + path);
    for (const auto& t : tokens_) out << t << "\n";
}

int32_t Vocabulary::id(const std::string& token) const {
    auto it = std::lower_bound(index_.begin(), index_.end(),
                               std::make_pair(token, int32_t{0}),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it != index_.end() && it->first == token) return it->second;
    return kUnk;
}

const std::string& Vocabulary::token(int32_t id) const {
    return tokens_.at(static_cast<size_t>(id));
}

std::vector<uint8_t> EncodedInput::span_target_mask() const {
    std::vector<uint8_t> mask(token_ids.size(), 0);
    for (size_t i = 0; i < token_ids.size(); ++i)
        if (kinds[i] == TokenKind::SegmentA) mask[i] = 1;
    mask[static_cast<size_t>(cls_index)] = 1;
    return mask;
}

std::vector<uint8_t> EncodedInput::candidate_mask() const {
    std::vector<uint8_t> mask(token_ids.size(), 0);
    for (size_t i = 0; i < token_ids.size(); ++i)
        if (kinds[i] == TokenKind::SegmentA) mask[i] = 1;
    return mask;
}

EncodedInput assemble_input(const RenderedSequence& rendered, const Vocabulary& vocab,
                            const std::optional<AnswerSpan>& gold_span,
                            bool has_answer_label, int max_len, EncodeStats* stats) {
    TokenizedText tok_b = tokenize(rendered.segment_before.text);
    TokenizedText tok_a = tokenize(rendered.segment_after.text);

    if (static_cast<int>(tok_b.tokens.size()) + 3 > max_len)
        throw DataError("question too long: segment before the question has " +
                        std::to_string(tok_b.tokens.size()) + " tokens, limit " +
                        std::to_string(max_len - 3));

    size_t budget_a = static_cast<size_t>(max_len) - 3 - tok_b.tokens.size();
    size_t n_a = std::min(budget_a, tok_a.tokens.size());

    EncodedInput enc;
    enc.token_ids.reserve(static_cast<size_t>(max_len));
    auto push = [&](int32_t id, TokenKind kind, TokenOrigin origin) {
        enc.token_ids.push_back(id);
        enc.kinds.push_back(kind);
        enc.origins.push_back(origin);
        enc.attention.push_back(kind == TokenKind::Pad ? 0 : 1);
    };

    push(Vocabulary::kCls, TokenKind::Special, {});
    for (size_t t = 0; t < tok_b.tokens.size(); ++t) {
        auto o = rendered.segment_before.word_origins[static_cast<size_t>(tok_b.word_map[t])];
        push(vocab.id(tok_b.tokens[t]), TokenKind::SegmentB, {o.utterance, o.word});
    }
    push(Vocabulary::kSep, TokenKind::Special, {});
    for (size_t t = 0; t < n_a; ++t) {
        auto o = rendered.segment_after.word_origins[static_cast<size_t>(tok_a.word_map[t])];
        push(vocab.id(tok_a.tokens[t]), TokenKind::SegmentA, {o.utterance, o.word});
    }
    push(Vocabulary::kSep, TokenKind::Special, {});
    enc.n_valid = static_cast<int32_t>(enc.token_ids.size());
    while (static_cast<int>(enc.token_ids.size()) < max_len)
        push(Vocabulary::kPad, TokenKind::Pad, {});

    enc.cls_index = 0;
    enc.y_has_answer = has_answer_label ? 1 : 0;
    enc.y_start = enc.cls_index;
    enc.y_end = enc.cls_index;
    if (gold_span) {
        int32_t first = -1, last = -1;
        for (int32_t i = 0; i < enc.n_valid; ++i) {
            if (enc.kinds[static_cast<size_t>(i)] != TokenKind::SegmentA) continue;
            const auto& o = enc.origins[static_cast<size_t>(i)];
            if (o.utterance != gold_span->utterance) continue;
            if (o.word == gold_span->word_start && first < 0) first = i;
            if (o.word == gold_span->word_end) last = i;
        }
        if (first >= 0 && last >= first) {
            enc.y_start = first;
            enc.y_end = last;
        } else {
            enc.gold_truncated = true;
            if (stats) stats->gold_truncated++;
        }
    }
    return enc;
}

WordIndexSet tokens_to_word_indices(const EncodedInput& encoded, int32_t token_begin,
                                    int32_t token_end) {
    if (token_begin > token_end || token_begin < 0 ||
        token_end >= static_cast<int32_t>(encoded.token_ids.size()))
        throw DataError("tokens_to_word_indices: invalid token range");
    for (int32_t i = token_begin; i <= token_end; ++i)
        if (encoded.kinds[static_cast<size_t>(i)] != TokenKind::SegmentA)
            throw DataError("tokens_to_word_indices: range leaves the answer segment");

    WordIndexSet set;
    for (int32_t i = token_begin; i <= token_end; ++i) {
        const auto& o = encoded.origins[static_cast<size_t>(i)];
        if (o.utterance >= 0 && o.word >= 0) set.push_back(word_key(o.utterance, o.word));
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    return set;
}

} // namespace meeqa
