#pragma once
// Domain types shared by every stage of the reading-comprehension pipeline.
//
// Text is carried as UTF-8; every offset (CharSpan, PassageWindow) counts
// Unicode code points, not bytes.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace boolmrc {

enum class QuestionType { Boolean, Extractive };
enum class YesNo { Yes, No };
enum class GoldCategory { YN, MA, NA };
enum class AnswerKind { ExtractiveSpan, BooleanYes, BooleanNo, NoAnswer };

std::string_view to_string(QuestionType t) noexcept;
std::string_view to_string(YesNo v) noexcept;
std::string_view to_string(GoldCategory c) noexcept;
std::string_view to_string(AnswerKind k) noexcept;

// Parsers accept the canonical upper-case names; they throw ParseError otherwise.
QuestionType parse_question_type(std::string_view s);
YesNo parse_yes_no(std::string_view s);
GoldCategory parse_gold_category(std::string_view s);
AnswerKind parse_answer_kind(std::string_view s);

// Half-open code point range [start, end).
struct CharSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - start; }
    bool contains(const CharSpan& other) const noexcept {
        return start <= other.start && other.end <= end;
    }
    bool overlaps(const CharSpan& other) const noexcept {
        return start < other.end && other.start < end;
    }
    friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Question {
    std::string id;
    std::string text;
    std::string language = "en";
    std::optional<QuestionType> gold_type;  // absent for unanswerable gold questions
};

struct PassageWindow {
    std::string doc_id;
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::size_t word_count = 0;

    CharSpan span() const noexcept { return {char_start, char_end}; }
};

struct GoldAnnotation {
    GoldCategory category = GoldCategory::NA;
    std::optional<YesNo> yn_label;
    std::vector<CharSpan> minimal_spans;
    std::optional<std::string> gold_passage_id;

    bool answerable() const noexcept { return category != GoldCategory::NA; }
};

struct MrcExample {
    Question question;
    std::string document_text;
    std::vector<PassageWindow> passages;
    GoldAnnotation gold;
};

struct RawPrediction {
    std::string example_id;
    CharSpan span;        // document relative
    double raw_score = 0.0;
    QuestionType predicted_type = QuestionType::Extractive;
    double type_confidence = 1.0;
};

struct FinalAnswer {
    std::string example_id;
    AnswerKind kind = AnswerKind::NoAnswer;
    std::optional<CharSpan> span;  // answer span, or evidence span for boolean kinds
    double normalized_score = 0.0;
    QuestionType predicted_type = QuestionType::Extractive;

    bool is_boolean() const noexcept {
        return kind == AnswerKind::BooleanYes || kind == AnswerKind::BooleanNo;
    }
};

// Throws ValidationError when the fields implied by the category are not
// exactly the ones populated.
void validate(const GoldAnnotation& gold);
// Passage slices must agree with the document; the question must be non-blank.
void validate(const MrcExample& example);

}  // namespace boolmrc
