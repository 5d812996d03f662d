#include "meeqa/transcript_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "meeqa/errors.hpp"

namespace meeqa {

using nlohmann::json;

namespace {

Meeting parse_meeting(const json& j, const std::string& where) {
    if (!j.is_object()) throw DataError(where + ": meeting record is not an object");
    Meeting m;
    m.meeting_id = j.value("meeting_id", std::string{});
    if (m.meeting_id.empty()) throw DataError(where + ": missing meeting_id");

    if (!j.contains("utterances") || !j["utterances"].is_array())
        throw DataError(where + ": missing utterances array");
    int32_t index = 1;
    for (const auto& ju : j["utterances"]) {
        Utterance u;
        u.index = index++;
        u.speaker = ju.value("speaker", std::string{});
        u.text = ju.value("text", std::string{});
        if (u.speaker.empty()) throw DataError(where + ": utterance without speaker");
        m.utterances.push_back(std::move(u));
    }

    if (j.contains("questions")) {
        if (!j["questions"].is_array())
            throw DataError(where + ": questions is not an array");
        for (const auto& jq : j["questions"]) {
            Question q;
            q.utterance_index = jq.value("utterance_index", 0);
            q.text = jq.value("question_text", std::string{});
            if (q.text.empty())
                throw DataError(where + ": question without question_text");
            if (jq.contains("annotations")) {
                for (const auto& ja : jq["annotations"]) {
                    AnswerAnnotation a;
                    a.judge_id = ja.value("judge_id", std::string{});
                    a.is_unanswerable = ja.value("unanswerable", false);
                    if (ja.contains("spans")) {
                        for (const auto& js : ja["spans"]) {
                            if (!js.is_array() || js.size() != 3)
                                throw DataError(where + ": span is not [utt, start, end]");
                            AnswerSpan s;
                            s.utterance = js[0].get<int32_t>();
                            s.word_start = js[1].get<int32_t>();
                            s.word_end = js[2].get<int32_t>();
                            if (s.word_start > s.word_end || s.word_start < 0)
                                throw DataError(where + ": invalid span range");
                            a.spans.push_back(s);
                        }
                    }
                    if (a.is_unanswerable == !a.spans.empty())
                        throw DataError(where +
                                        ": annotation must have spans xor be unanswerable");
                    q.annotations.push_back(std::move(a));
                }
            }
            // preserve unknown fields verbatim
            json extra = json::object();
            for (auto it = jq.begin(); it != jq.end(); ++it) {
                if (it.key() == "utterance_index" || it.key() == "question_text" ||
                    it.key() == "annotations")
                    continue;
                extra[it.key()] = it.value();
            }
            if (!extra.empty()) q.extra_json = extra.dump();
            m.questions.push_back(std::move(q));
        }
    }
    return m;
}

json meeting_to_json(const Meeting& m) {
    json j;
    j["meeting_id"] = m.meeting_id;
    j["utterances"] = json::array();
    for (const auto& u : m.utterances)
        j["utterances"].push_back({{"speaker", u.speaker}, {"text", u.text}});
    j["questions"] = json::array();
    for (const auto& q : m.questions) {
        json jq;
        jq["utterance_index"] = q.utterance_index;
        jq["question_text"] = q.text;
        jq["annotations"] = json::array();
        for (const auto& a : q.annotations) {
            json ja;
            ja["judge_id"] = a.judge_id;
            ja["unanswerable"] = a.is_unanswerable;
            ja["spans"] = json::array();
            for (const auto& s : a.spans)
                ja["spans"].push_back({s.utterance, s.word_start, s.word_end});
            jq["annotations"].push_back(std::move(ja));
        }
        if (!q.extra_json.empty()) {
            json extra = json::parse(q.extra_json);
            for (auto it = extra.begin(); it != extra.end(); ++it)
                jq[it.key()] = it.value();
        }
        j["questions"].push_back(std::move(jq));
    }
    return j;
}

} // namespace

std::vector<Meeting> read_meetings_jsonl(std::istream& in, const std::string& source_name) {
    std::vector<Meeting> meetings;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string where = source_name + " line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(where + ": " + e.what());
        }
        meetings.push_back(parse_meeting(j, where));
    }
    return meetings;
}

std::vector<Meeting> read_meetings_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_meetings_jsonl(in, path);
}

void write_meetings_jsonl(std::ostream& out, const std::vector<Meeting>& meetings) {
    for (const auto& m : meetings) out << meeting_to_json(m).dump() << "\n";
}

void write_meetings_file(const std::string& path, const std::vector<Meeting>& meetings) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    write_meetings_jsonl(out, meetings);
}

} // namespace meeqa
