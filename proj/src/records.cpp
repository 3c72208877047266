#include "boolmrc/records.hpp"

#include <istream>
#include <ostream>

#include "boolmrc/errors.hpp"
#include "boolmrc/text.hpp"

namespace boolmrc {

namespace {

std::size_t offset_field(const json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(0, std::string("missing field '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ParseError(0, std::string("field '") + key + "' not an integer");
    const auto x = v.get<long long>();
    if (x < 0) throw ParseError(0, std::string("field '") + key + "' is negative");
    return static_cast<std::size_t>(x);
}

const json& required(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw ParseError(0, std::string("missing field '") + key + "'");
    return j.at(key);
}

std::string required_string(const json& j, const char* key) {
    const auto& v = required(j, key);
    if (!v.is_string()) throw ParseError(0, std::string("field '") + key + "' not a string");
    return v.get<std::string>();
}

}  // namespace

json to_json(const CharSpan& span) { return json{{"start", span.start}, {"end", span.end}}; }

CharSpan span_from_json(const json& j) {
    if (!j.is_object()) throw ParseError(0, "span is not an object");
    CharSpan s{offset_field(j, "start"), offset_field(j, "end")};
    if (s.start >= s.end) throw ParseError(0, "span start must be below end");
    return s;
}

MrcExample parse_record(const json& record, DatasetSchema schema) {
    if (!record.is_object()) throw ParseError(0, "record is not an object");
    MrcExample ex;
    ex.question.id = required_string(record, "id");
    ex.question.text = required_string(record, "question");
    if (record.contains("language")) ex.question.language = required_string(record, "language");
    ex.document_text = required_string(record, "document");

    const auto& gold = required(record, "gold");
    ex.gold.category = parse_gold_category(required_string(gold, "category"));
    if (gold.contains("yn_label") && !gold.at("yn_label").is_null())
        ex.gold.yn_label = parse_yes_no(required_string(gold, "yn_label"));
    if (gold.contains("minimal_spans")) {
        const auto& spans = gold.at("minimal_spans");
        if (!spans.is_array()) throw ParseError(0, "minimal_spans is not an array");
        for (const auto& s : spans) ex.gold.minimal_spans.push_back(span_from_json(s));
    }
    switch (ex.gold.category) {
        case GoldCategory::YN: ex.question.gold_type = QuestionType::Boolean; break;
        case GoldCategory::MA: ex.question.gold_type = QuestionType::Extractive; break;
        case GoldCategory::NA: break;
    }
    if (record.contains("question_type") && !record.at("question_type").is_null())
        ex.question.gold_type = parse_question_type(required_string(record, "question_type"));

    const auto doc = to_u32(ex.document_text);
    const auto& passages = required(record, "passages");
    if (!passages.is_array()) throw ParseError(0, "passages is not an array");
    for (const auto& pj : passages) {
        const CharSpan s = span_from_json(pj);
        if (s.end > doc.size()) throw ParseError(0, "passage outside document");
        PassageWindow w;
        w.doc_id = ex.question.id;
        w.char_start = s.start;
        w.char_end = s.end;
        const auto sub = std::u32string_view(doc).substr(s.start, s.length());
        w.text = to_utf8(sub);
        w.word_count = whitespace_tokens(sub).size();
        ex.passages.push_back(std::move(w));
    }

    if (gold.contains("passage_index")) {
        const auto idx = offset_field(gold, "passage_index");
        if (idx >= ex.passages.size()) throw ParseError(0, "passage_index out of range");
        ex.gold.gold_passage_id = passage_id(ex, idx);
    } else if (ex.gold.category == GoldCategory::YN && !ex.passages.empty()) {
        ex.gold.gold_passage_id = passage_id(ex, 0);
    }

    if (schema == DatasetSchema::BoolqLike) {
        if (ex.gold.category == GoldCategory::MA)
            throw ParseError(0, "boolq-like records are YN or NA, never MA");
        if (ex.passages.size() != 1)
            throw ParseError(0, "boolq-like records carry exactly one anchor passage");
    }

    try {
        validate(ex);
    } catch (const ValidationError& e) {
        throw ParseError(0, e.what());
    }
    return ex;
}

json to_record(const MrcExample& ex) {
    json passages = json::array();
    for (const auto& p : ex.passages) passages.push_back(to_json(p.span()));
    json gold{{"category", to_string(ex.gold.category)}};
    if (ex.gold.yn_label) gold["yn_label"] = to_string(*ex.gold.yn_label);
    if (!ex.gold.minimal_spans.empty()) {
        json spans = json::array();
        for (const auto& s : ex.gold.minimal_spans) spans.push_back(to_json(s));
        gold["minimal_spans"] = spans;
    }
    if (ex.gold.gold_passage_id) {
        for (std::size_t i = 0; i < ex.passages.size(); ++i) {
            if (passage_id(ex, i) == *ex.gold.gold_passage_id) gold["passage_index"] = i;
        }
    }
    json r{{"id", ex.question.id},
           {"question", ex.question.text},
           {"language", ex.question.language},
           {"document", ex.document_text},
           {"passages", passages},
           {"gold", gold}};
    if (ex.question.gold_type && ex.gold.category == GoldCategory::NA)
        r["question_type"] = to_string(*ex.question.gold_type);
    return r;
}

json to_prediction_record(const FinalAnswer& a) {
    json r{{"id", a.example_id},
           {"kind", to_string(a.kind)},
           {"score", a.normalized_score},
           {"predicted_type", to_string(a.predicted_type)}};
    if (a.span) r["span"] = to_json(*a.span);
    return r;
}

FinalAnswer parse_prediction_record(const json& r) {
    FinalAnswer a;
    a.example_id = required_string(r, "id");
    a.kind = parse_answer_kind(required_string(r, "kind"));
    const auto& score = required(r, "score");
    if (!score.is_number()) throw ParseError(0, "score is not a number");
    a.normalized_score = score.get<double>();
    a.predicted_type = parse_question_type(required_string(r, "predicted_type"));
    if (r.contains("span") && !r.at("span").is_null()) a.span = span_from_json(r.at("span"));
    if (a.kind != AnswerKind::NoAnswer && !a.span)
        throw ParseError(0, "answer kind " + std::string(to_string(a.kind)) + " requires a span");
    return a;
}

namespace {

template <typename T>
std::vector<T> read_lines(std::istream& in, T (*parse)(const json&)) {
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(parse(json::parse(line)));
        } catch (const json::exception& e) {
            throw ParseError(lineno, e.what());
        } catch (const ParseError& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return out;
}

}  // namespace

std::vector<FinalAnswer> read_predictions(std::istream& in) {
    return read_lines<FinalAnswer>(in, parse_prediction_record);
}

void write_predictions(std::ostream& out, const std::vector<FinalAnswer>& answers) {
    for (const auto& a : answers) out << to_prediction_record(a).dump() << '\n';
}

json to_raw_record(const RawPrediction& p) {
    return json{{"id", p.example_id},
                {"span", to_json(p.span)},
                {"raw_score", p.raw_score},
                {"predicted_type", to_string(p.predicted_type)},
                {"type_confidence", p.type_confidence}};
}

RawPrediction parse_raw_record(const json& r) {
    RawPrediction p;
    p.example_id = required_string(r, "id");
    p.span = span_from_json(required(r, "span"));
    const auto& score = required(r, "raw_score");
    if (!score.is_number()) throw ParseError(0, "raw_score is not a number");
    p.raw_score = score.get<double>();
    p.predicted_type = parse_question_type(required_string(r, "predicted_type"));
    if (r.contains("type_confidence")) {
        if (!r.at("type_confidence").is_number()) throw ParseError(0, "type_confidence is not a number");
        p.type_confidence = r.at("type_confidence").get<double>();
    }
    return p;
}

std::vector<RawPrediction> read_raw_predictions(std::istream& in) {
    return read_lines<RawPrediction>(in, parse_raw_record);
}

void write_raw_predictions(std::ostream& out, const std::vector<RawPrediction>& raw) {
    for (const auto& p : raw) out << to_raw_record(p).dump() << '\n';
}

}  // namespace boolmrc
