#include "meeqa/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <unordered_map>

#include "meeqa/errors.hpp"

namespace meeqa {

namespace {

std::string lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// A cleaning stage result: the new text plus, per output character, the index
// of the character it came from in the stage input. Stages only delete, so
// origins are strictly increasing and stages compose.
struct Staged {
    std::string text;
    std::vector<int32_t> origin;
};

Staged make_staged(const std::string& text) {
    Staged s;
    s.text = text;
    s.origin.resize(text.size());
    for (size_t i = 0; i < text.size(); ++i) s.origin[i] = static_cast<int32_t>(i);
    return s;
}

// Collapses whitespace runs to a single space and trims the ends, keeping
// per-character origins.
Staged collapse_whitespace(const std::string& text, const std::vector<int32_t>& origin) {
    Staged out;
    bool pending_space = false;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.text.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.text += ' ';
            out.origin.push_back(origin[i] > 0 ? origin[i] - 1 : origin[i]);
            pending_space = false;
        }
        out.text += c;
        out.origin.push_back(origin[i]);
    }
    return out;
}

struct WordSlot {
    size_t begin = 0;
    size_t end = 0; // half-open
};

std::vector<WordSlot> word_slots(const std::string& text) {
    std::vector<WordSlot> slots;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t b = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > b) slots.push_back({b, i});
    }
    return slots;
}

// Rebuilds text from the surviving word slots, joined by single spaces.
Staged join_slots(const std::string& text, const std::vector<WordSlot>& slots) {
    Staged out;
    for (const auto& s : slots) {
        if (!out.text.empty()) {
            out.text += ' ';
            out.origin.push_back(static_cast<int32_t>(s.begin) - 1);
        }
        for (size_t i = s.begin; i < s.end; ++i) {
            out.text += text[i];
            out.origin.push_back(static_cast<int32_t>(i));
        }
    }
    return out;
}

std::string strip_outer_punct(const std::string& w) {
    size_t b = 0, e = w.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(w[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1]))) --e;
    return w.substr(b, e - b);
}

Staged strip_stage_comments_stage(const std::string& text, CleanReport* report,
                                  bool* unbalanced) {
    Staged out;
    out.text.reserve(text.size());
    size_t i = 0;
    std::string low = lower(text);
    while (i < text.size()) {
        char c = text[i];
        if (c == '<' || c == '[') {
            char open = c;
            char close = c == '<' ? '>' : ']';
            int depth = 1;
            size_t j = i + 1;
            while (j < text.size() && depth > 0) {
                if (text[j] == open) ++depth;
                else if (text[j] == close) --depth;
                ++j;
            }
            if (depth == 0) {
                if (report) report->removed_comments++;
                i = j;
                continue;
            }
            // unmatched: keep the rest of the text as-is
            if (unbalanced) *unbalanced = true;
            for (; i < text.size(); ++i) {
                out.text += text[i];
                out.origin.push_back(static_cast<int32_t>(i));
            }
            break;
        }
        static const std::string kNote = "secretary's note";
        if ((c == 's' || c == 'S') && low.compare(i, kNote.size(), kNote) == 0) {
            size_t j = i + kNote.size();
            while (j < text.size() && text[j] != '.' && text[j] != '?' && text[j] != '!')
                ++j;
            if (j < text.size()) ++j; // include the terminator
            if (report) report->removed_comments++;
            i = j;
            continue;
        }
        out.text += c;
        out.origin.push_back(static_cast<int32_t>(i));
        ++i;
    }
    return collapse_whitespace(out.text, out.origin);
}

Staged remove_fillers_and_repetitions_stage(const std::string& text,
                                            const CleanOptions& options,
                                            CleanReport* report) {
    auto slots = word_slots(text);

    // filler removal on stripped, lowercased cores
    std::vector<WordSlot> kept;
    for (const auto& s : slots) {
        std::string core = lower(strip_outer_punct(text.substr(s.begin, s.end - s.begin)));
        bool is_filler = !core.empty() &&
                         std::find(options.fillers.begin(), options.fillers.end(), core) !=
                             options.fillers.end();
        if (is_filler) {
            if (report) report->removed_fillers++;
        } else {
            kept.push_back(s);
        }
    }

    if (options.collapse_repetitions) {
        auto word_at = [&](size_t idx) {
            const auto& s = kept[idx];
            return lower(text.substr(s.begin, s.end - s.begin));
        };
        bool changed = true;
        while (changed) {
            changed = false;
            for (size_t i = 0; i < kept.size() && !changed; ++i) {
                for (size_t n = 3; n >= 1 && !changed; --n) {
                    if (i + 2 * n > kept.size()) continue;
                    bool equal = true;
                    for (size_t t = 0; t < n; ++t)
                        if (word_at(i + t) != word_at(i + n + t)) { equal = false; break; }
                    if (equal) {
                        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(i + n),
                                   kept.begin() + static_cast<std::ptrdiff_t>(i + 2 * n));
                        if (report) report->removed_repetitions++;
                        changed = true;
                    }
                }
            }
        }
    }
    return join_slots(text, kept);
}

Staged normalize_symbols_stage(const std::string& text, const CleanOptions& options,
                               CleanReport* report) {
    static const std::string kDrop = "@_()[]{}<>";
    Staged pass1;
    for (size_t i = 0; i < text.size(); ++i) {
        if (kDrop.find(text[i]) != std::string::npos) {
            if (report) report->removed_symbols++;
            continue;
        }
        pass1.text += text[i];
        pass1.origin.push_back(static_cast<int32_t>(i));
    }

    auto slots = word_slots(pass1.text);
    std::vector<WordSlot> kept;
    for (const auto& s : slots) {
        bool drop = false;
        if (s.end - s.begin == 1) {
            char c = pass1.text[s.begin];
            if (std::isalpha(static_cast<unsigned char>(c))) {
                char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                drop = !(options.keep_a_and_i && (l == 'a' || l == 'i'));
            }
        }
        if (drop) {
            if (report) report->removed_symbols++;
        } else {
            kept.push_back(s);
        }
    }
    Staged joined = join_slots(pass1.text, kept);
    // map origins back through pass1
    for (auto& o : joined.origin) o = pass1.origin[static_cast<size_t>(o)];
    return joined;
}

void compose(Staged& base, const Staged& next) {
    Staged out;
    out.text = next.text;
    out.origin.reserve(next.origin.size());
    for (int32_t o : next.origin)
        out.origin.push_back(base.origin[static_cast<size_t>(o)]);
    base = std::move(out);
}

} // namespace

std::string strip_stage_comments(const std::string& text, CleanReport* report,
                                 bool* unbalanced) {
    return strip_stage_comments_stage(text, report, unbalanced).text;
}

std::string remove_fillers_and_repetitions(const std::string& text,
                                           const CleanOptions& options,
                                           CleanReport* report) {
    return remove_fillers_and_repetitions_stage(text, options, report).text;
}

std::string normalize_symbols(const std::string& text, const CleanOptions& options,
                              CleanReport* report) {
    return normalize_symbols_stage(text, options, report).text;
}

CleanedText clean_utterance(const std::string& text, const CleanOptions& options,
                            CleanReport* report) {
    Staged acc = make_staged(text);
    for (int iter = 0; iter < 8; ++iter) {
        std::string before = acc.text;
        compose(acc, strip_stage_comments_stage(acc.text, report, nullptr));
        compose(acc, remove_fillers_and_repetitions_stage(acc.text, options, report));
        compose(acc, normalize_symbols_stage(acc.text, options, report));
        if (acc.text == before) break;
    }

    // char-level survival -> old-word to new-word map
    auto old_slots = word_slots(text);
    auto new_slots = word_slots(acc.text);
    // for each surviving char, which new word contains it
    std::vector<int32_t> char_to_new_word(text.size(), -1);
    for (size_t w = 0; w < new_slots.size(); ++w)
        for (size_t i = new_slots[w].begin; i < new_slots[w].end; ++i) {
            int32_t src = acc.origin[i];
            if (src >= 0 && static_cast<size_t>(src) < text.size())
                char_to_new_word[static_cast<size_t>(src)] = static_cast<int32_t>(w);
        }

    CleanedText out;
    out.text = acc.text;
    out.word_map.assign(old_slots.size(), -1);
    for (size_t w = 0; w < old_slots.size(); ++w) {
        for (size_t i = old_slots[w].begin; i < old_slots[w].end; ++i) {
            if (char_to_new_word[i] >= 0) {
                out.word_map[w] = char_to_new_word[i];
                break;
            }
        }
    }
    return out;
}

std::pair<int32_t, int32_t> complete_partial_highlight(size_t span_begin, size_t span_end,
                                                       const std::vector<std::string>& words) {
    std::string joined;
    std::vector<std::pair<size_t, size_t>> ranges;
    for (const auto& w : words) {
        if (!joined.empty()) joined += ' ';
        ranges.emplace_back(joined.size(), joined.size() + w.size());
        joined += w;
    }
    if (span_begin >= span_end || span_end > joined.size())
        throw DataError("complete_partial_highlight: span outside text");
    int32_t first = -1, last = -1;
    for (size_t i = 0; i < ranges.size(); ++i) {
        bool intersects = ranges[i].first < span_end && span_begin < ranges[i].second;
        if (intersects) {
            if (first < 0) first = static_cast<int32_t>(i);
            last = static_cast<int32_t>(i);
        }
    }
    if (first < 0)
        throw DataError("complete_partial_highlight: span covers no word");
    return {first, last};
}

std::vector<GlobalWordRange> merge_multi_span(std::vector<GlobalWordRange> spans,
                                              const std::vector<int32_t>& word_speakers,
                                              CleanReport* report) {
    for (size_t i = 0; i < spans.size(); ++i) {
        if (spans[i].begin > spans[i].end)
            throw DataError("merge_multi_span: inverted span");
        if (i > 0 && spans[i].begin <= spans[i - 1].end)
            throw DataError("merge_multi_span: spans overlap or are unsorted");
    }
    auto speaker_of = [&](int64_t g) -> int32_t {
        if (g < 0 || g >= static_cast<int64_t>(word_speakers.size())) return -1;
        return word_speakers[static_cast<size_t>(g)];
    };
    auto span_has_speaker = [&](const GlobalWordRange& s, int32_t spk) {
        for (int64_t g = s.begin; g <= s.end; ++g)
            if (speaker_of(g) == spk) return true;
        return false;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i + 1 < spans.size(); ++i) {
            int64_t gap = spans[i + 1].begin - spans[i].end - 1;
            bool merge = false;
            if (gap == 0) {
                merge = true;
            } else if (gap == 1) {
                int32_t spk = speaker_of(spans[i].end + 1);
                merge = spk >= 0 && (span_has_speaker(spans[i], spk) ||
                                     span_has_speaker(spans[i + 1], spk));
            }
            if (merge) {
                spans[i].end = spans[i + 1].end;
                spans.erase(spans.begin() + static_cast<std::ptrdiff_t>(i + 1));
                if (report) report->merged_spans++;
                changed = true;
                break;
            }
        }
    }
    return spans;
}

std::optional<QAInstance> filter_pre_question_answers(const QAInstance& instance,
                                                      CleanReport* report) {
    int32_t q = instance.q_index;
    int32_t suffix_off = instance.suffix_word_offset();
    auto after_question = [&](int32_t utt, int32_t word) {
        return utt > q || (utt == q && word >= suffix_off);
    };

    QAInstance out = instance;
    out.annotations.clear();
    for (const auto& ann : instance.annotations) {
        if (ann.is_unanswerable) {
            out.annotations.push_back(ann);
            continue;
        }
        AnswerAnnotation trimmed = ann;
        trimmed.spans.clear();
        for (const auto& s : ann.spans) {
            if (!after_question(s.utterance, s.word_end)) continue; // entirely before
            AnswerSpan clipped = s;
            if (s.utterance == q && s.word_start < suffix_off)
                clipped.word_start = suffix_off;
            trimmed.spans.push_back(clipped);
        }
        if (trimmed.spans.empty()) {
            if (report) report->dropped_instances++;
        } else {
            out.annotations.push_back(std::move(trimmed));
        }
    }
    if (out.annotations.empty()) return std::nullopt;
    out.y_has_answer = derive_answerability_label(out.annotations);
    return out;
}

namespace {

// Applies the pre-question rule to one question of a meeting. Returns false
// when the whole question must be dropped.
bool filter_question_in_meeting(const Meeting& m, Question& q, CleanReport* report) {
    if (q.utterance_index < 1 ||
        q.utterance_index > static_cast<int32_t>(m.utterances.size()))
        return false;
    const Utterance& uq = m.utterances[static_cast<size_t>(q.utterance_index - 1)];
    auto offset = find_question_word_offset(uq.text, q.text);
    if (!offset) return false;
    int32_t suffix_off = *offset + word_count(q.text);
    int32_t qi = q.utterance_index;

    std::vector<AnswerAnnotation> kept;
    for (auto& ann : q.annotations) {
        if (ann.is_unanswerable) {
            kept.push_back(ann);
            continue;
        }
        AnswerAnnotation trimmed = ann;
        trimmed.spans.clear();
        for (const auto& s : ann.spans) {
            bool after = s.utterance > qi ||
                         (s.utterance == qi && s.word_end >= suffix_off);
            if (!after) continue;
            AnswerSpan clipped = s;
            if (s.utterance == qi && s.word_start < suffix_off)
                clipped.word_start = suffix_off;
            trimmed.spans.push_back(clipped);
        }
        if (trimmed.spans.empty()) {
            if (report) report->dropped_instances++;
        } else {
            kept.push_back(std::move(trimmed));
        }
    }
    q.annotations = std::move(kept);
    if (q.annotations.empty()) return false;
    return true;
}

} // namespace

Meeting preprocess_meeting(const Meeting& meeting, const CleanOptions& options,
                           CleanReport* report) {
    // 1. clean utterance texts, recording per-utterance word maps
    Meeting cleaned;
    cleaned.meeting_id = meeting.meeting_id;
    std::unordered_map<int32_t, std::vector<int32_t>> word_maps;    // old utt -> map
    std::unordered_map<int32_t, int32_t> utt_map;                   // old utt -> new utt
    int32_t next_index = 1;
    for (const auto& u : meeting.utterances) {
        CleanedText ct = clean_utterance(u.text, options, report);
        word_maps[u.index] = ct.word_map;
        if (ct.text.empty()) continue; // drop emptied utterances
        Utterance nu;
        nu.index = next_index++;
        nu.speaker = u.speaker;
        nu.text = std::move(ct.text);
        utt_map[u.index] = nu.index;
        cleaned.utterances.push_back(std::move(nu));
    }

    // 2. remap questions and annotation spans through the word maps
    for (const auto& q : meeting.questions) {
        Question nq = q;
        CleanedText qt = clean_utterance(q.text, options, nullptr);
        if (qt.text.empty()) {
            if (report) report->dropped_instances += static_cast<int64_t>(q.annotations.size());
            continue;
        }
        nq.text = qt.text;
        auto it = utt_map.find(q.utterance_index);
        if (it == utt_map.end()) {
            if (report) report->dropped_instances += static_cast<int64_t>(q.annotations.size());
            continue; // question utterance was emptied
        }
        nq.utterance_index = it->second;

        std::vector<AnswerAnnotation> anns;
        for (const auto& ann : q.annotations) {
            AnswerAnnotation na = ann;
            na.spans.clear();
            for (const auto& s : ann.spans) {
                auto uit = utt_map.find(s.utterance);
                if (uit == utt_map.end()) continue;
                const auto& wm = word_maps[s.utterance];
                int32_t lo = -1, hi = -1;
                for (int32_t w = s.word_start;
                     w <= s.word_end && w < static_cast<int32_t>(wm.size()); ++w) {
                    if (w < 0 || wm[static_cast<size_t>(w)] < 0) continue;
                    int32_t nw = wm[static_cast<size_t>(w)];
                    if (lo < 0) lo = nw;
                    hi = nw;
                }
                if (lo >= 0) na.spans.push_back({uit->second, lo, hi});
            }
            if (na.is_unanswerable || !na.spans.empty()) {
                anns.push_back(std::move(na));
            } else if (report) {
                report->dropped_instances++;
            }
        }
        if (anns.empty()) continue;
        nq.annotations = std::move(anns);
        cleaned.questions.push_back(std::move(nq));
    }

    // 3. merge consecutive same-speaker utterances
    Meeting merged = options.merge_speakers ? merge_consecutive_utterances(cleaned) : cleaned;

    // 4. drop pre-question answers (pair granularity)
    std::vector<Question> surviving;
    for (auto& q : merged.questions) {
        if (filter_question_in_meeting(merged, q, report))
            surviving.push_back(std::move(q));
        else if (report)
            report->dropped_instances += static_cast<int64_t>(q.annotations.size());
    }
    merged.questions = std::move(surviving);

    // 5. merge multi-span answers (one-word gap said by a span speaker)
    std::vector<int64_t> offsets(merged.utterances.size() + 1, 0);
    std::vector<int32_t> word_speakers;
    std::map<std::string, int32_t> speaker_ids;
    for (size_t i = 0; i < merged.utterances.size(); ++i) {
        const auto& u = merged.utterances[i];
        offsets[i + 1] = offsets[i] + word_count(u.text);
        auto [sit, inserted] =
            speaker_ids.emplace(u.speaker, static_cast<int32_t>(speaker_ids.size()));
        (void)inserted;
        for (int32_t w = 0; w < word_count(u.text); ++w)
            word_speakers.push_back(sit->second);
    }
    auto to_global = [&](const AnswerSpan& s) -> GlobalWordRange {
        int64_t base = offsets[static_cast<size_t>(s.utterance - 1)];
        return {base + s.word_start, base + s.word_end};
    };
    auto to_spans = [&](const GlobalWordRange& g) {
        std::vector<AnswerSpan> spans;
        int64_t pos = g.begin;
        while (pos <= g.end) {
            size_t utt = static_cast<size_t>(
                std::upper_bound(offsets.begin(), offsets.end(), pos) - offsets.begin() - 1);
            int64_t utt_end = offsets[utt + 1] - 1;
            int64_t stop = std::min(g.end, utt_end);
            spans.push_back({static_cast<int32_t>(utt + 1),
                             static_cast<int32_t>(pos - offsets[utt]),
                             static_cast<int32_t>(stop - offsets[utt])});
            pos = stop + 1;
        }
        return spans;
    };
    for (auto& q : merged.questions) {
        for (auto& ann : q.annotations) {
            if (ann.spans.size() < 2) continue;
            std::vector<GlobalWordRange> globals;
            for (const auto& s : ann.spans) globals.push_back(to_global(s));
            std::sort(globals.begin(), globals.end(),
                      [](const GlobalWordRange& a, const GlobalWordRange& b) {
                          return a.begin < b.begin;
                      });
            globals = merge_multi_span(globals, word_speakers, report);
            ann.spans.clear();
            for (const auto& g : globals)
                for (const auto& s : to_spans(g)) ann.spans.push_back(s);
        }
    }
    return merged;
}

std::vector<std::string> load_filler_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open filler lexicon " + path);
    std::vector<std::string> fillers;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto words = split_words(line);
        for (auto& w : words) fillers.push_back(lower(w));
    }
    return fillers;
}

} // namespace meeqa
