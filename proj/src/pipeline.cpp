#include "boolmrc/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "boolmrc/errors.hpp"
#include "boolmrc/ingestion.hpp"
#include "boolmrc/tinyformer/inputs.hpp"

namespace boolmrc {

namespace {

template <typename F>
auto run_stage(std::string_view stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PipelineError&) {
        throw;
    } catch (const PeerError& e) {
        throw PipelineError(std::string(stage), e.what(), true);
    } catch (const std::exception& e) {
        throw PipelineError(std::string(stage), e.what());
    }
}

}  // namespace

std::string LocalNormalizer::version() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(tinyformer::fnv1a64(normalizer_to_text(model_))));
    return std::string("normalizer-") + buf;
}

std::string_view to_string(BooleanStrategy s) noexcept {
    return s == BooleanStrategy::Classifier ? "CLASSIFIER" : "ALWAYS_YES";
}

BooleanStrategy parse_boolean_strategy(std::string_view s) {
    if (s == "CLASSIFIER") return BooleanStrategy::Classifier;
    if (s == "ALWAYS_YES") return BooleanStrategy::AlwaysYes;
    throw ParseError(0, "unknown boolean strategy '" + std::string(s) + "'");
}

void PipelineConfig::validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ValidationError("threshold must lie in [0,1]");
    if (!(normalizer.score_std > 0.0)) throw ValidationError("normalizer score_std must be positive");
    if (!qtype_backend) throw ValidationError("pipeline has no question type backend");
    if (!extractor_backend) throw ValidationError("pipeline has no span extractor backend");
    if (boolean_strategy == BooleanStrategy::Classifier && !boolean_backend)
        throw ValidationError("CLASSIFIER strategy needs a boolean backend");
}

AnswerTrace answer_traced(const PipelineConfig& config, const Question& question,
                          std::string_view document) {
    if (trim(question.text).empty()) throw ValidationError("question is empty");
    if (document.empty()) throw ValidationError("document is empty");

    AnswerTrace trace;
    trace.raw.example_id = question.id;
    trace.answer.example_id = question.id;

    const auto type = run_stage(kStageQtype, [&] {
        if (!config.qtype_backend) throw ValidationError("no question type backend configured");
        return config.qtype_backend->classify(question);
    });
    trace.raw.predicted_type = type.type;
    trace.raw.type_confidence = type.confidence;
    trace.answer.predicted_type = type.type;

    const auto extraction = run_stage(kStageExtract, [&] {
        if (!config.extractor_backend) throw ValidationError("no span extractor backend configured");
        auto e = config.extractor_backend->extract(question, document);
        const auto length = codepoint_length(document);
        if (e.span.start >= e.span.end || e.span.end > length)
            throw RangeError("extractor returned span [" + std::to_string(e.span.start) + "," +
                             std::to_string(e.span.end) + ") outside document of length " +
                             std::to_string(length));
        if (!std::isfinite(e.raw_score)) throw RangeError("extractor returned a non-finite score");
        return e;
    });
    trace.raw.span = extraction.span;
    trace.raw.raw_score = extraction.raw_score;

    const double p = run_stage(kStageNormalize, [&] {
        if (config.normalizer_backend)
            return config.normalizer_backend->normalize(extraction.raw_score, type.type, type.confidence);
        return normalize(config.normalizer, extraction.raw_score, type.type, type.confidence);
    });
    trace.answer.normalized_score = p;

    if (p < config.threshold) {
        trace.answer.kind = AnswerKind::NoAnswer;
        return trace;
    }
    trace.answer.span = extraction.span;
    if (type.type == QuestionType::Extractive) {
        trace.answer.kind = AnswerKind::ExtractiveSpan;
        return trace;
    }

    auto context = slice_window(document, extraction.span, config.evidence_left_offset,
                                config.evidence_right_offset, question.id);
    const auto verdict = run_stage(kStageBoolean, [&] {
        if (config.boolean_strategy == BooleanStrategy::AlwaysYes)
            return YesNoPrediction{YesNo::Yes, kDefaultYesPrior};
        if (!config.boolean_backend) throw ValidationError("no boolean backend configured");
        return config.boolean_backend->classify(question, context.text);
    });
    trace.answer.kind = verdict.label == YesNo::Yes ? AnswerKind::BooleanYes : AnswerKind::BooleanNo;
    trace.verdict = verdict;
    trace.context = std::move(context);
    return trace;
}

FinalAnswer answer(const PipelineConfig& config, const Question& question,
                   std::string_view document) {
    return answer_traced(config, question, document).answer;
}

BatchResult answer_batch(const PipelineConfig& config, const Dataset& dataset, unsigned threads) {
    if (dataset.empty()) throw ValidationError("cannot answer an empty dataset");
    const auto& examples = dataset.examples();
    const std::size_t n = examples.size();

    std::vector<FinalAnswer> answers(n);
    std::vector<std::optional<RawPrediction>> raw(n);
    std::vector<std::optional<BatchError>> failures(n);

    auto work = [&](std::size_t i) {
        const auto& ex = examples[i];
        try {
            auto t = answer_traced(config, ex.question, ex.document_text);
            answers[i] = std::move(t.answer);
            raw[i] = std::move(t.raw);
        } catch (const std::exception& e) {
            FinalAnswer fa;
            fa.example_id = ex.question.id;
            fa.kind = AnswerKind::NoAnswer;
            fa.normalized_score = 0.0;
            answers[i] = std::move(fa);
            const auto* pe = dynamic_cast<const PipelineError*>(&e);
            failures[i] = BatchError{i, ex.question.id, pe ? pe->stage() : "input", e.what()};
        }
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) work(i);
            });
        for (auto& th : pool) th.join();
    }

    BatchResult out;
    out.answers = std::move(answers);
    out.raw = std::move(raw);
    for (auto& f : failures)
        if (f) out.errors.push_back(std::move(*f));
    return out;
}

}  // namespace boolmrc
