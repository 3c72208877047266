#include "boolmrc/core.hpp"

#include "boolmrc/errors.hpp"
#include "boolmrc/text.hpp"

namespace boolmrc {

std::string_view to_string(QuestionType t) noexcept {
    return t == QuestionType::Boolean ? "BOOLEAN" : "EXTRACTIVE";
}

std::string_view to_string(YesNo v) noexcept { return v == YesNo::Yes ? "YES" : "NO"; }

std::string_view to_string(GoldCategory c) noexcept {
    switch (c) {
        case GoldCategory::YN: return "YN";
        case GoldCategory::MA: return "MA";
        case GoldCategory::NA: return "NA";
    }
    return "NA";
}

std::string_view to_string(AnswerKind k) noexcept {
    switch (k) {
        case AnswerKind::ExtractiveSpan: return "EXTRACTIVE_SPAN";
        case AnswerKind::BooleanYes: return "BOOLEAN_YES";
        case AnswerKind::BooleanNo: return "BOOLEAN_NO";
        case AnswerKind::NoAnswer: return "NO_ANSWER";
    }
    return "NO_ANSWER";
}

QuestionType parse_question_type(std::string_view s) {
    if (s == "BOOLEAN") return QuestionType::Boolean;
    if (s == "EXTRACTIVE") return QuestionType::Extractive;
    throw ParseError(0, "unknown question type '" + std::string(s) + "'");
}

YesNo parse_yes_no(std::string_view s) {
    if (s == "YES") return YesNo::Yes;
    if (s == "NO") return YesNo::No;
    throw ParseError(0, "unknown yes/no label '" + std::string(s) + "'");
}

GoldCategory parse_gold_category(std::string_view s) {
    if (s == "YN") return GoldCategory::YN;
    if (s == "MA") return GoldCategory::MA;
    if (s == "NA") return GoldCategory::NA;
    throw ParseError(0, "unknown gold category '" + std::string(s) + "'");
}

AnswerKind parse_answer_kind(std::string_view s) {
    for (auto k : {AnswerKind::ExtractiveSpan, AnswerKind::BooleanYes, AnswerKind::BooleanNo,
                   AnswerKind::NoAnswer}) {
        if (s == to_string(k)) return k;
    }
    throw ParseError(0, "unknown answer kind '" + std::string(s) + "'");
}

void validate(const GoldAnnotation& gold) {
    switch (gold.category) {
        case GoldCategory::YN:
            if (!gold.yn_label) throw ValidationError("category YN requires yn_label");
            if (!gold.minimal_spans.empty())
                throw ValidationError("category YN must not carry minimal_spans");
            break;
        case GoldCategory::MA:
            if (gold.yn_label) throw ValidationError("category MA must not carry yn_label");
            if (gold.minimal_spans.empty())
                throw ValidationError("category MA requires at least one minimal span");
            break;
        case GoldCategory::NA:
            if (gold.yn_label || !gold.minimal_spans.empty())
                throw ValidationError("category NA carries neither label nor spans");
            break;
    }
    for (const auto& s : gold.minimal_spans) {
        if (s.start >= s.end) throw ValidationError("empty or inverted minimal span");
    }
}

void validate(const MrcExample& example) {
    if (example.question.id.empty()) throw ValidationError("question id is empty");
    if (trim(example.question.text).empty()) throw ValidationError("question text is blank");
    validate(example.gold);
    if (example.passages.empty()) throw ValidationError("example has no passages");
    const std::size_t len = codepoint_length(example.document_text);
    for (const auto& p : example.passages) {
        if (p.char_start >= p.char_end || p.char_end > len)
            throw ValidationError("passage [" + std::to_string(p.char_start) + "," +
                                  std::to_string(p.char_end) + ") outside document");
        if (slice(example.document_text, p.span()) != p.text)
            throw ValidationError("passage text disagrees with document slice");
    }
    for (const auto& s : example.gold.minimal_spans) {
        if (s.end > len) throw ValidationError("minimal span outside document");
    }
}

}  // namespace boolmrc
