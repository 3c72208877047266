#pragma once
// Pipeline backends served by the miniature encoder, and the builders that
// turn datasets into supervision for each task.
//
// Task names and label order:
//   "qtype"   classifier, 0 = BOOLEAN, 1 = EXTRACTIVE
//   "boolean" classifier, 0 = YES, 1 = NO
//   "span"    pointer head; position 0 ([CLS]) marks "no answer here"

#include <memory>
#include <string>
#include <vector>

#include "boolmrc/backends.hpp"
#include "boolmrc/ingestion.hpp"
#include "boolmrc/text.hpp"
#include "boolmrc/tinyformer/inputs.hpp"
#include "boolmrc/tinyformer/model.hpp"
#include "boolmrc/tinyformer/training.hpp"

namespace boolmrc {

inline constexpr const char* kTaskQtype = "qtype";
inline constexpr const char* kTaskBoolean = "boolean";
inline constexpr const char* kTaskSpan = "span";

inline constexpr std::size_t kDefaultMaxAnswerTokens = 30;

using BundlePtr = std::shared_ptr<const tinyformer::ModelBundle>;

class TinyQuestionTypeClassifier final : public QuestionTypeBackend {
public:
    explicit TinyQuestionTypeClassifier(BundlePtr bundle, std::string task = kTaskQtype);
    TypePrediction classify(const Question& question) const override;
    std::string version() const override;

private:
    BundlePtr bundle_;
    std::string task_;
    std::string fingerprint_;
};

// P(YES) is averaged over the context chunks.
class TinyBooleanClassifier final : public BooleanAnswerBackend {
public:
    explicit TinyBooleanClassifier(BundlePtr bundle, std::string task = kTaskBoolean);
    YesNoPrediction classify(const Question& question, std::string_view context) const override;
    std::string version() const override;

private:
    BundlePtr bundle_;
    std::string task_;
    std::string fingerprint_;
};

// Raw score = best span score minus the [CLS] null score, maximized over
// context chunks.
class TinySpanExtractor final : public SpanExtractorBackend {
public:
    explicit TinySpanExtractor(BundlePtr bundle, std::string task = kTaskSpan,
                               std::size_t max_answer_tokens = kDefaultMaxAnswerTokens);
    Extraction extract(const Question& question, std::string_view text) const override;
    std::string version() const override;

private:
    BundlePtr bundle_;
    std::string task_;
    std::size_t max_answer_tokens_;
    std::string fingerprint_;
};

using tinyformer::TrainingExample;

std::vector<TrainingExample> qtype_examples(const tinyformer::EncoderConfig& config,
                                            const std::vector<Question>& questions);
// Questions with a gold type from a dataset (NA questions carry none).
std::vector<Question> typed_questions(const Dataset& dataset);

// Gold-YN examples; the context is the gold passage widened by the offsets.
std::vector<TrainingExample> boolean_examples(const tinyformer::EncoderConfig& config,
                                              const Dataset& dataset,
                                              std::size_t left_offset = kDefaultEvidenceOffset,
                                              std::size_t right_offset = kDefaultEvidenceOffset);

// One example per context chunk. MA targets the first minimal span, YN the
// leading max_answer_tokens of the gold passage; NA and chunks not holding
// the whole target point at [CLS].
std::vector<TrainingExample> span_examples(const tinyformer::EncoderConfig& config,
                                           const Dataset& dataset,
                                           std::size_t max_answer_tokens = kDefaultMaxAnswerTokens);

enum class TrainMode { Separate, Adapter };

TrainMode parse_train_mode(std::string_view s);  // "separate" | "adapter"

tinyformer::HeadSpec head_for_task(const std::string& task);

// Separate: a fresh full stack with the task head, everything trainable.
// Adapter: `base` with its base tensors frozen plus task adapters and head.
tinyformer::ModelBundle prepare_task_bundle(const std::string& task, TrainMode mode,
                                            const tinyformer::EncoderConfig& config,
                                            const tinyformer::ModelBundle* base = nullptr,
                                            const tinyformer::AdapterConfig* adapter = nullptr);

}  // namespace boolmrc
