#pragma once
// Model roles of the pipeline: span extraction, question typing and
// boolean answering. Implementations must be immutable after construction so
// that one instance can serve concurrent requests.

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>

#include "boolmrc/core.hpp"

namespace boolmrc {

class Dataset;

struct Extraction {
    CharSpan span;  // relative to the text handed to extract()
    double raw_score = 0.0;
};

struct TypePrediction {
    QuestionType type = QuestionType::Extractive;
    double confidence = 0.5;  // confidence in `type`
};

struct YesNoPrediction {
    YesNo label = YesNo::Yes;
    double p_yes = 0.5;  // always P(YES), whatever the label

    double confidence() const noexcept { return label == YesNo::Yes ? p_yes : 1.0 - p_yes; }
};

class SpanExtractorBackend {
public:
    virtual ~SpanExtractorBackend() = default;
    virtual Extraction extract(const Question& question, std::string_view text) const = 0;
    virtual std::string version() const = 0;
};

class QuestionTypeBackend {
public:
    virtual ~QuestionTypeBackend() = default;
    virtual TypePrediction classify(const Question& question) const = 0;
    virtual std::string version() const = 0;
};

class BooleanAnswerBackend {
public:
    virtual ~BooleanAnswerBackend() = default;
    virtual YesNoPrediction classify(const Question& question, std::string_view context) const = 0;
    virtual std::string version() const = 0;
};

// Leading-word cues per language.
struct CueList {
    std::set<std::string> boolean_cues;
    std::set<std::string> wh_cues;
};

class Lexicon {
public:
    // English and the synthetic test language "zz".
    static Lexicon builtin();
    // Reads every cues.<lang>.txt in `dir`; entries extend/override builtin().
    static Lexicon load_directory(const std::filesystem::path& dir);
    // One cue per line below [boolean] or [wh]; '#' starts a comment.
    static CueList parse_cue_file(std::istream& in, const std::string& source_name);

    void set(const std::string& language, CueList cues) { cues_[language] = std::move(cues); }
    // Falls back to the default language when `language` is unknown.
    const CueList& cues_for(const std::string& language) const;
    bool has(const std::string& language) const { return cues_.count(language) > 0; }

    std::string default_language = "en";

private:
    std::map<std::string, CueList> cues_;
};

inline constexpr double kRuleCueConfidence = 0.95;

// First-token rule: boolean cue -> BOOLEAN, wh cue -> EXTRACTIVE, otherwise
// EXTRACTIVE with confidence 0.5. Case-insensitive, punctuation-insensitive.
TypePrediction rule_classify_question(const Question& question, const Lexicon& lexicon);

class RuleQuestionTypeBackend final : public QuestionTypeBackend {
public:
    explicit RuleQuestionTypeBackend(Lexicon lexicon = Lexicon::builtin())
        : lexicon_(std::move(lexicon)) {}
    TypePrediction classify(const Question& question) const override {
        return rule_classify_question(question, lexicon_);
    }
    std::string version() const override { return "rule-cues-v1"; }

private:
    Lexicon lexicon_;
};

inline constexpr double kDefaultYesPrior = 0.8;

class AlwaysYesBackend final : public BooleanAnswerBackend {
public:
    explicit AlwaysYesBackend(double prior = kDefaultYesPrior);
    YesNoPrediction classify(const Question&, std::string_view) const override {
        return {YesNo::Yes, prior_};
    }
    std::string version() const override { return "always-yes"; }

private:
    double prior_;
};

std::shared_ptr<const BooleanAnswerBackend> always_yes_backend(double prior = kDefaultYesPrior);

inline constexpr double kOracleAnswerableScore = 10.0;
inline constexpr double kOracleUnanswerableScore = -10.0;

// Gold-reading test doubles. Examples are looked up by question id, or by
// exact question text when the id is empty or unknown; a miss throws
// LookupError.
class OracleBackends {
public:
    explicit OracleBackends(const Dataset& dataset);

    std::shared_ptr<const SpanExtractorBackend> extractor() const { return extractor_; }
    std::shared_ptr<const QuestionTypeBackend> question_type() const { return qtype_; }
    std::shared_ptr<const BooleanAnswerBackend> boolean() const { return boolean_; }

private:
    std::shared_ptr<const SpanExtractorBackend> extractor_;
    std::shared_ptr<const QuestionTypeBackend> qtype_;
    std::shared_ptr<const BooleanAnswerBackend> boolean_;
};

OracleBackends oracle_backends(const Dataset& dataset);

}  // namespace boolmrc
