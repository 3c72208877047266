#pragma once
// Question routing: type -> span -> normalized score -> threshold ->
// (boolean questions) YES/NO over a widened evidence window.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "boolmrc/backends.hpp"
#include "boolmrc/core.hpp"
#include "boolmrc/normalizer.hpp"
#include "boolmrc/text.hpp"

namespace boolmrc {

// Maps a raw extractor score to a probability; lets the normalizer run
// out of process.
class ScoreNormalizerBackend {
public:
    virtual ~ScoreNormalizerBackend() = default;
    virtual double normalize(double raw_score, QuestionType predicted_type,
                             double type_confidence) const = 0;
    virtual std::string version() const = 0;
};

class LocalNormalizer final : public ScoreNormalizerBackend {
public:
    explicit LocalNormalizer(NormalizerModel model) : model_(model) {}
    double normalize(double raw_score, QuestionType predicted_type,
                     double type_confidence) const override {
        return boolmrc::normalize(model_, raw_score, predicted_type, type_confidence);
    }
    std::string version() const override;
    const NormalizerModel& model() const noexcept { return model_; }

private:
    NormalizerModel model_;
};

class Dataset;

enum class BooleanStrategy { Classifier, AlwaysYes };

std::string_view to_string(BooleanStrategy s) noexcept;
BooleanStrategy parse_boolean_strategy(std::string_view s);

struct PipelineConfig {
    BooleanStrategy boolean_strategy = BooleanStrategy::Classifier;
    double threshold = 0.5;
    std::size_t evidence_left_offset = kDefaultEvidenceOffset;
    std::size_t evidence_right_offset = kDefaultEvidenceOffset;
    std::shared_ptr<const QuestionTypeBackend> qtype_backend;
    std::shared_ptr<const SpanExtractorBackend> extractor_backend;
    std::shared_ptr<const BooleanAnswerBackend> boolean_backend;  // may be null under ALWAYS_YES
    NormalizerModel normalizer;
    std::shared_ptr<const ScoreNormalizerBackend> normalizer_backend;  // overrides `normalizer` when set

    // Threshold in [0,1]; qtype and extractor present; a boolean backend
    // present under CLASSIFIER. Throws ValidationError.
    void validate() const;
};

// Stage names carried by PipelineError.
inline constexpr std::string_view kStageQtype = "qtype";
inline constexpr std::string_view kStageExtract = "extract";
inline constexpr std::string_view kStageNormalize = "normalize";
inline constexpr std::string_view kStageBoolean = "boolean";

struct AnswerTrace {
    RawPrediction raw;
    FinalAnswer answer;
    std::optional<YesNoPrediction> verdict;  // set iff the boolean stage ran
    std::optional<PassageWindow> context;    // the widened classifier context
};

// Throws PipelineError naming the failing stage.
AnswerTrace answer_traced(const PipelineConfig& config, const Question& question,
                          std::string_view document);
FinalAnswer answer(const PipelineConfig& config, const Question& question,
                   std::string_view document);

struct BatchError {
    std::size_t index = 0;
    std::string example_id;
    std::string stage;
    std::string message;
};

struct BatchResult {
    std::vector<FinalAnswer> answers;
    std::vector<std::optional<RawPrediction>> raw;  // empty slot where answering failed
    std::vector<BatchError> errors;
};

// Per-example failures become NO_ANSWER with score 0 and an error entry.
// `threads` > 1 answers examples concurrently; output order is dataset order.
BatchResult answer_batch(const PipelineConfig& config, const Dataset& dataset,
                         unsigned threads = 1);

}  // namespace boolmrc
