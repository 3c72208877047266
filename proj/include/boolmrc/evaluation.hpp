#pragma once
// Metrics and report tables: minimal-answer F1, per-class YES/NO F1, the
// answerability confusion matrix, score histograms and parameter footprints.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boolmrc/core.hpp"

namespace boolmrc {

struct PrfScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Token-overlap F1 of two spans over whitespace tokens of `text`.
double span_f1(CharSpan pred, CharSpan gold, std::string_view text);

// Credit an attempted prediction earns: YN gold -> label match, MA gold ->
// best span_f1 over gold spans, NA gold -> 0. Ignores the threshold.
double answer_credit(const FinalAnswer& prediction, const MrcExample& example);

// Attempted iff score >= threshold and kind != NO_ANSWER. precision =
// credit / attempted, recall = credit / answerable gold.
PrfScore minimal_answer_f1(std::span<const FinalAnswer> predictions,
                           std::span<const MrcExample> examples, double threshold);

// Same rule, grouped by question language.
std::map<std::string, PrfScore> minimal_answer_f1_by_language(
    std::span<const FinalAnswer> predictions, std::span<const MrcExample> examples,
    double threshold);

// Throws ValidationError unless both lists have equal length and, where
// prediction ids are set, matching ids.
void check_aligned(std::span<const FinalAnswer> predictions, std::span<const MrcExample> examples);

struct YesNoF1 {
    double f1_yes = 0.0;
    double f1_no = 0.0;
};

// A missing prediction counts against recall of its gold class.
YesNoF1 yesno_f1(std::span<const std::optional<YesNo>> predicted, std::span<const YesNo> gold);
// Restricts to gold-YN examples; BOOLEAN_YES/NO kinds are the predictions.
YesNoF1 yesno_f1(std::span<const FinalAnswer> predictions, std::span<const MrcExample> examples);

// The constant majority-label predictor (ties -> YES).
YesNoF1 majority_baseline(std::span<const YesNo> gold);

enum class ScorePosition { Above, Below };

class ConfusionMatrix {
public:
    std::int64_t& at(GoldCategory gold, QuestionType predicted, ScorePosition pos);
    std::int64_t at(GoldCategory gold, QuestionType predicted, ScorePosition pos) const;
    std::int64_t total() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::array<std::int64_t, 12> counts_{};
};

// Each example lands in the cell (gold category, predicted type, score vs threshold).
ConfusionMatrix confusion_matrix(std::span<const FinalAnswer> predictions,
                                 std::span<const GoldAnnotation> golds, double threshold);

// Rows YN/MA/NA; columns Boolean (YN) above/below, Extractive (MA) above/below.
std::string render_confusion(const ConfusionMatrix& matrix, std::string_view title = {});

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    std::int64_t count = 0;
};

struct ScoreHistogram {
    double min_score = 0.0;
    double max_score = 0.0;
    // Keys: "boolean/answerable", "boolean/unanswerable",
    //       "extractive/answerable", "extractive/unanswerable".
    std::map<std::string, std::vector<HistogramBin>> groups;
};

std::string histogram_group(QuestionType predicted, bool answerable);

// Shared range [min, max] split into `bins` equal bins; the max lands in the last.
ScoreHistogram score_histogram(std::span<const RawPrediction> predictions,
                               std::span<const GoldAnnotation> golds, int bins);

// "group,bin_left,bin_right,count" rows.
std::string histogram_csv(const ScoreHistogram& histogram);

struct ParamReport {
    std::string config_name;
    std::map<std::string, std::int64_t> per_component_params;
    std::int64_t total_params = 0;
    double size_mib = 0.0;
};

inline constexpr double kBytesPerParam = 2.0;

double footprint_mib(std::int64_t params) noexcept;

struct FootprintConfig {
    std::string name;
    std::map<std::string, std::int64_t> components;
};

std::vector<ParamReport> footprint_report(std::span<const FootprintConfig> configs);

// Rows: name, # params (x10^6), size (MiB).
std::string render_footprint(std::span<const ParamReport> reports);

std::string render_min_f1(const PrfScore& score, std::string_view label);

}  // namespace boolmrc
