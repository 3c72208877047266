#include "boolmrc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "boolmrc/errors.hpp"
#include "boolmrc/text.hpp"

namespace boolmrc {

namespace {

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

double class_f1(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    return harmonic(p, r);
}

std::size_t cell_index(GoldCategory gold, QuestionType predicted, ScorePosition pos) {
    const std::size_t g = static_cast<std::size_t>(gold);
    const std::size_t t = predicted == QuestionType::Boolean ? 0 : 1;
    const std::size_t p = pos == ScorePosition::Above ? 0 : 1;
    return g * 4 + t * 2 + p;
}

std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

double span_f1(CharSpan pred, CharSpan gold, std::string_view text) {
    const auto p = char_span_to_tokens(text, pred);
    const auto g = char_span_to_tokens(text, gold);
    if (p.empty() || g.empty()) return 0.0;
    std::vector<std::size_t> common;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
    if (common.empty()) return 0.0;
    const double precision = static_cast<double>(common.size()) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common.size()) / static_cast<double>(g.size());
    return harmonic(precision, recall);
}

double answer_credit(const FinalAnswer& prediction, const MrcExample& example) {
    const auto& gold = example.gold;
    switch (gold.category) {
        case GoldCategory::NA: return 0.0;
        case GoldCategory::YN:
            if (!gold.yn_label) return 0.0;
            if (prediction.kind == AnswerKind::BooleanYes) return *gold.yn_label == YesNo::Yes ? 1.0 : 0.0;
            if (prediction.kind == AnswerKind::BooleanNo) return *gold.yn_label == YesNo::No ? 1.0 : 0.0;
            return 0.0;
        case GoldCategory::MA: {
            if (prediction.kind != AnswerKind::ExtractiveSpan || !prediction.span) return 0.0;
            double best = 0.0;
            for (const auto& g : gold.minimal_spans)
                best = std::max(best, span_f1(*prediction.span, g, example.document_text));
            return best;
        }
    }
    return 0.0;
}

void check_aligned(std::span<const FinalAnswer> predictions, std::span<const MrcExample> examples) {
    if (predictions.size() != examples.size())
        throw ValidationError("predictions (" + std::to_string(predictions.size()) +
                              ") and gold examples (" + std::to_string(examples.size()) +
                              ") differ in length");
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (!predictions[i].example_id.empty() &&
            predictions[i].example_id != examples[i].question.id)
            throw ValidationError("prediction " + std::to_string(i) + " is for '" +
                                  predictions[i].example_id + "' but gold is '" +
                                  examples[i].question.id + "'");
    }
}

PrfScore minimal_answer_f1(std::span<const FinalAnswer> predictions,
                           std::span<const MrcExample> examples, double threshold) {
    check_aligned(predictions, examples);
    double credit = 0.0;
    std::size_t attempted = 0, answerable = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& p = predictions[i];
        if (examples[i].gold.answerable()) ++answerable;
        if (p.kind == AnswerKind::NoAnswer || p.normalized_score < threshold) continue;
        ++attempted;
        credit += answer_credit(p, examples[i]);
    }
    PrfScore s;
    s.precision = attempted ? credit / static_cast<double>(attempted) : 0.0;
    s.recall = answerable ? credit / static_cast<double>(answerable) : 0.0;
    s.f1 = harmonic(s.precision, s.recall);
    return s;
}

std::map<std::string, PrfScore> minimal_answer_f1_by_language(
    std::span<const FinalAnswer> predictions, std::span<const MrcExample> examples,
    double threshold) {
    check_aligned(predictions, examples);
    std::map<std::string, std::pair<std::vector<FinalAnswer>, std::vector<MrcExample>>> groups;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        auto& g = groups[examples[i].question.language];
        g.first.push_back(predictions[i]);
        g.second.push_back(examples[i]);
    }
    std::map<std::string, PrfScore> out;
    for (const auto& [lang, g] : groups) out[lang] = minimal_answer_f1(g.first, g.second, threshold);
    return out;
}

YesNoF1 yesno_f1(std::span<const std::optional<YesNo>> predicted, std::span<const YesNo> gold) {
    if (gold.empty()) throw ValidationError("yes/no F1 needs at least one gold label");
    if (predicted.size() != gold.size())
        throw ValidationError("yes/no predictions and gold differ in length");
    std::int64_t tp_yes = 0, fp_yes = 0, fn_yes = 0, tp_no = 0, fp_no = 0, fn_no = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto& p = predicted[i];
        if (gold[i] == YesNo::Yes) {
            if (p == YesNo::Yes) ++tp_yes;
            else ++fn_yes;
            if (p == YesNo::No) ++fp_no;
        } else {
            if (p == YesNo::No) ++tp_no;
            else ++fn_no;
            if (p == YesNo::Yes) ++fp_yes;
        }
    }
    return {class_f1(tp_yes, fp_yes, fn_yes), class_f1(tp_no, fp_no, fn_no)};
}

YesNoF1 yesno_f1(std::span<const FinalAnswer> predictions, std::span<const MrcExample> examples) {
    check_aligned(predictions, examples);
    std::vector<std::optional<YesNo>> pred;
    std::vector<YesNo> gold;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& g = examples[i].gold;
        if (g.category != GoldCategory::YN || !g.yn_label) continue;
        gold.push_back(*g.yn_label);
        switch (predictions[i].kind) {
            case AnswerKind::BooleanYes: pred.emplace_back(YesNo::Yes); break;
            case AnswerKind::BooleanNo: pred.emplace_back(YesNo::No); break;
            default: pred.emplace_back(std::nullopt); break;
        }
    }
    return yesno_f1(pred, gold);
}

YesNoF1 majority_baseline(std::span<const YesNo> gold) {
    if (gold.empty()) throw ValidationError("majority baseline needs at least one gold label");
    const auto yes = std::count(gold.begin(), gold.end(), YesNo::Yes);
    const YesNo majority = 2 * yes >= static_cast<std::int64_t>(gold.size()) ? YesNo::Yes : YesNo::No;
    std::vector<std::optional<YesNo>> pred(gold.size(), majority);
    return yesno_f1(pred, gold);
}

std::int64_t& ConfusionMatrix::at(GoldCategory gold, QuestionType predicted, ScorePosition pos) {
    return counts_[cell_index(gold, predicted, pos)];
}

std::int64_t ConfusionMatrix::at(GoldCategory gold, QuestionType predicted,
                                 ScorePosition pos) const {
    return counts_[cell_index(gold, predicted, pos)];
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

ConfusionMatrix confusion_matrix(std::span<const FinalAnswer> predictions,
                                 std::span<const GoldAnnotation> golds, double threshold) {
    if (predictions.size() != golds.size())
        throw ValidationError("predictions and golds differ in length");
    ConfusionMatrix m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto pos = predictions[i].normalized_score >= threshold ? ScorePosition::Above
                                                                      : ScorePosition::Below;
        ++m.at(golds[i].category, predictions[i].predicted_type, pos);
    }
    return m;
}

std::string render_confusion(const ConfusionMatrix& m, std::string_view title) {
    std::ostringstream out;
    constexpr std::size_t w = 8;
    if (!title.empty()) out << title << '\n';
    out << "      |" << pad_left("Boolean (YN)", 2 * w) << " |" << pad_left("Extractive (MA)", 2 * w)
        << '\n';
    out << "gold  |" << pad_left("Above", w) << pad_left("Below", w) << " |" << pad_left("Above", w)
        << pad_left("Below", w) << '\n';
    for (auto g : {GoldCategory::YN, GoldCategory::MA, GoldCategory::NA}) {
        std::string label(to_string(g));
        label.resize(6, ' ');
        out << label << '|';
        out << pad_left(std::to_string(m.at(g, QuestionType::Boolean, ScorePosition::Above)), w)
            << pad_left(std::to_string(m.at(g, QuestionType::Boolean, ScorePosition::Below)), w)
            << " |"
            << pad_left(std::to_string(m.at(g, QuestionType::Extractive, ScorePosition::Above)), w)
            << pad_left(std::to_string(m.at(g, QuestionType::Extractive, ScorePosition::Below)), w)
            << '\n';
    }
    return out.str();
}

std::string histogram_group(QuestionType predicted, bool answerable) {
    return std::string(predicted == QuestionType::Boolean ? "boolean" : "extractive") +
           (answerable ? "/answerable" : "/unanswerable");
}

ScoreHistogram score_histogram(std::span<const RawPrediction> predictions,
                               std::span<const GoldAnnotation> golds, int bins) {
    if (bins < 1) throw ValidationError("histogram needs at least one bin");
    if (predictions.size() != golds.size())
        throw ValidationError("predictions and golds differ in length");
    ScoreHistogram h;
    if (!predictions.empty()) {
        auto [lo, hi] = std::minmax_element(predictions.begin(), predictions.end(),
                                            [](const auto& a, const auto& b) {
                                                return a.raw_score < b.raw_score;
                                            });
        h.min_score = lo->raw_score;
        h.max_score = hi->raw_score;
    }
    const double width = (h.max_score - h.min_score) / bins;
    for (auto t : {QuestionType::Boolean, QuestionType::Extractive}) {
        for (bool a : {true, false}) {
            auto& v = h.groups[histogram_group(t, a)];
            for (int i = 0; i < bins; ++i)
                v.push_back({h.min_score + i * width, i + 1 == bins ? h.max_score : h.min_score + (i + 1) * width, 0});
        }
    }
    const double range = h.max_score - h.min_score;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        int bin = 0;
        if (range > 0.0) {
            bin = static_cast<int>(std::floor((predictions[i].raw_score - h.min_score) / range * bins));
            bin = std::clamp(bin, 0, bins - 1);
        }
        ++h.groups[histogram_group(predictions[i].predicted_type, golds[i].answerable())]
              [static_cast<std::size_t>(bin)].count;
    }
    return h;
}

std::string histogram_csv(const ScoreHistogram& h) {
    std::ostringstream out;
    out << "group,bin_left,bin_right,count\n";
    out.precision(17);
    for (const auto& [group, bins] : h.groups)
        for (const auto& b : bins) out << group << ',' << b.left << ',' << b.right << ',' << b.count << '\n';
    return out.str();
}

double footprint_mib(std::int64_t params) noexcept {
    return static_cast<double>(params) * kBytesPerParam / (1024.0 * 1024.0);
}

std::vector<ParamReport> footprint_report(std::span<const FootprintConfig> configs) {
    std::vector<ParamReport> out;
    for (const auto& c : configs) {
        ParamReport r;
        r.config_name = c.name;
        r.per_component_params = c.components;
        for (const auto& [name, n] : c.components) r.total_params += n;
        r.size_mib = footprint_mib(r.total_params);
        out.push_back(std::move(r));
    }
    return out;
}

std::string render_footprint(std::span<const ParamReport> reports) {
    std::ostringstream out;
    out << "config          # params (x10^6)   size (MiB)\n";
    for (const auto& r : reports) {
        std::string name = r.config_name;
        name.resize(std::max<std::size_t>(name.size(), 16), ' ');
        out << name << pad_left(fixed(static_cast<double>(r.total_params) / 1e6, 6), 16)
            << pad_left(fixed(r.size_mib, 2), 13) << '\n';
    }
    return out.str();
}

std::string render_min_f1(const PrfScore& s, std::string_view label) {
    std::ostringstream out;
    out << label << "  P=" << fixed(100 * s.precision, 1) << "  R=" << fixed(100 * s.recall, 1)
        << "  F1=" << fixed(100 * s.f1, 1) << '\n';
    return out.str();
}

}  // namespace boolmrc
