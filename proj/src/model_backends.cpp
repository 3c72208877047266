#include "boolmrc/model_backends.hpp"

#include "boolmrc/errors.hpp"
#include "boolmrc/text.hpp"
#include "boolmrc/tinyformer/serialization.hpp"

namespace boolmrc {

namespace tf = tinyformer;

namespace {

void require_head(const BundlePtr& bundle, const std::string& task, tf::HeadKind kind) {
    if (!bundle) throw ValidationError("no model bundle for task '" + task + "'");
    const auto it = bundle->heads.find(task);
    if (it == bundle->heads.end())
        throw LookupError("bundle has no head for task '" + task + "'");
    if (it->second.spec.kind != kind)
        throw ValidationError("head '" + task + "' has the wrong kind");
}

}  // namespace

TinyQuestionTypeClassifier::TinyQuestionTypeClassifier(BundlePtr bundle, std::string task)
    : bundle_(std::move(bundle)), task_(std::move(task)) {
    require_head(bundle_, task_, tf::HeadKind::Classifier);
    fingerprint_ = tf::bundle_fingerprint(*bundle_);
}

TypePrediction TinyQuestionTypeClassifier::classify(const Question& question) const {
    const auto in = tf::question_input(bundle_->config, question.text);
    const auto enc = tf::encode(*bundle_, task_, in.tokens);
    const auto p = tf::softmax(tf::classification_head(*bundle_, task_, enc.hidden));
    return p(0) >= p(1) ? TypePrediction{QuestionType::Boolean, p(0)}
                        : TypePrediction{QuestionType::Extractive, p(1)};
}

std::string TinyQuestionTypeClassifier::version() const { return "tiny-" + task_ + "-" + fingerprint_; }

TinyBooleanClassifier::TinyBooleanClassifier(BundlePtr bundle, std::string task)
    : bundle_(std::move(bundle)), task_(std::move(task)) {
    require_head(bundle_, task_, tf::HeadKind::Classifier);
    fingerprint_ = tf::bundle_fingerprint(*bundle_);
}

YesNoPrediction TinyBooleanClassifier::classify(const Question& question,
                                                std::string_view context) const {
    const auto chunks = tf::pair_inputs(bundle_->config, question.text, context);
    double p_yes = 0.0;
    for (const auto& in : chunks) {
        const auto enc = tf::encode(*bundle_, task_, in.tokens);
        p_yes += tf::softmax(tf::classification_head(*bundle_, task_, enc.hidden))(0);
    }
    p_yes /= static_cast<double>(chunks.size());
    return {p_yes >= 0.5 ? YesNo::Yes : YesNo::No, p_yes};
}

std::string TinyBooleanClassifier::version() const { return "tiny-" + task_ + "-" + fingerprint_; }

TinySpanExtractor::TinySpanExtractor(BundlePtr bundle, std::string task, std::size_t max_answer_tokens)
    : bundle_(std::move(bundle)), task_(std::move(task)), max_answer_tokens_(max_answer_tokens) {
    require_head(bundle_, task_, tf::HeadKind::Pointer);
    if (max_answer_tokens_ == 0) throw ValidationError("max answer length must be positive");
    fingerprint_ = tf::bundle_fingerprint(*bundle_);
}

Extraction TinySpanExtractor::extract(const Question& question, std::string_view text) const {
    const auto chunks = tf::pair_inputs(bundle_->config, question.text, text);
    std::optional<Extraction> best;
    for (const auto& in : chunks) {
        if (in.context_spans.empty()) continue;
        const auto enc = tf::encode(*bundle_, task_, in.tokens);
        const auto logits = tf::pointer_head(*bundle_, task_, enc.hidden);
        const auto choice = tf::select_span(logits.start, logits.end, max_answer_tokens_ - 1,
                                            in.context_offset, in.tokens.size() - 1);
        const double null_score = logits.start(0) + logits.end(0);
        const double raw = choice.score - null_score;
        if (!best || raw > best->raw_score) {
            const auto& first = in.context_spans[choice.start - in.context_offset];
            const auto& last = in.context_spans[choice.end - in.context_offset];
            best = Extraction{{first.start, last.end}, raw};
        }
    }
    if (!best) throw ValidationError("text has no words to extract from");
    return *best;
}

std::string TinySpanExtractor::version() const { return "tiny-" + task_ + "-" + fingerprint_; }

std::vector<TrainingExample> qtype_examples(const tf::EncoderConfig& config,
                                            const std::vector<Question>& questions) {
    std::vector<TrainingExample> out;
    out.reserve(questions.size());
    for (const auto& q : questions) {
        if (!q.gold_type) continue;
        TrainingExample ex;
        ex.tokens = tf::question_input(config, q.text).tokens;
        ex.label = *q.gold_type == QuestionType::Boolean ? 0 : 1;
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Question> typed_questions(const Dataset& dataset) {
    std::vector<Question> out;
    for (const auto& ex : dataset.examples())
        if (ex.question.gold_type) out.push_back(ex.question);
    return out;
}

std::vector<TrainingExample> boolean_examples(const tf::EncoderConfig& config, const Dataset& dataset,
                                              std::size_t left_offset, std::size_t right_offset) {
    std::vector<TrainingExample> out;
    for (const auto& ex : dataset.examples()) {
        if (ex.gold.category != GoldCategory::YN || !ex.gold.yn_label) continue;
        const auto window = slice_window(ex.document_text, gold_passage(ex).span(), left_offset,
                                         right_offset);
        for (const auto& in : tf::pair_inputs(config, ex.question.text, window.text)) {
            TrainingExample t;
            t.tokens = in.tokens;
            t.label = *ex.gold.yn_label == YesNo::Yes ? 0 : 1;
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::vector<TrainingExample> span_examples(const tf::EncoderConfig& config, const Dataset& dataset,
                                           std::size_t max_answer_tokens) {
    std::vector<TrainingExample> out;
    for (const auto& ex : dataset.examples()) {
        std::optional<std::pair<std::size_t, std::size_t>> target;  // document token indices
        if (ex.gold.category == GoldCategory::MA && !ex.gold.minimal_spans.empty()) {
            const auto toks = char_span_to_tokens(ex.document_text, ex.gold.minimal_spans.front());
            if (!toks.empty()) target = {toks.front(), toks.back()};
        } else if (ex.gold.category == GoldCategory::YN) {
            const auto toks = char_span_to_tokens(ex.document_text, gold_passage(ex).span());
            if (!toks.empty())
                target = {toks.front(), std::min(toks.back(), toks.front() + max_answer_tokens - 1)};
        }
        const auto doc_tokens = whitespace_tokens(std::string_view(ex.document_text));
        for (const auto& in : tf::pair_inputs(config, ex.question.text, ex.document_text)) {
            TrainingExample t;
            t.tokens = in.tokens;
            if (target && !in.context_spans.empty()) {
                // Locate the chunk's first document token.
                std::size_t base = 0;
                while (base < doc_tokens.size() && doc_tokens[base] != in.context_spans.front()) ++base;
                const std::size_t last = base + in.context_spans.size() - 1;
                if (target->first >= base && target->second <= last) {
                    t.start = static_cast<int>(in.context_offset + target->first - base);
                    t.end = static_cast<int>(in.context_offset + target->second - base);
                }
            }
            out.push_back(std::move(t));
        }
    }
    return out;
}

TrainMode parse_train_mode(std::string_view s) {
    if (s == "separate") return TrainMode::Separate;
    if (s == "adapter") return TrainMode::Adapter;
    throw ParseError(0, "unknown training mode '" + std::string(s) + "'");
}

tf::HeadSpec head_for_task(const std::string& task) {
    if (task == kTaskSpan) return {tf::HeadKind::Pointer, 2};
    if (task == kTaskQtype || task == kTaskBoolean) return {tf::HeadKind::Classifier, 2};
    throw ValidationError("unknown task '" + task + "'");
}

tf::ModelBundle prepare_task_bundle(const std::string& task, TrainMode mode,
                                    const tf::EncoderConfig& config, const tf::ModelBundle* base,
                                    const tf::AdapterConfig* adapter) {
    const auto head = head_for_task(task);
    if (mode == TrainMode::Separate) {
        auto b = tf::add_head(tf::make_bundle(config), task, head);
        b.frozen_base = false;
        return b;
    }
    tf::ModelBundle b = base ? *base : tf::make_bundle(config);
    b.frozen_base = true;
    const auto cfg = adapter ? *adapter : tf::AdapterConfig::defaults_for(b.config);
    b = tf::insert_adapters(std::move(b), task, cfg);
    return tf::add_head(std::move(b), task, head);
}

}  // namespace boolmrc
