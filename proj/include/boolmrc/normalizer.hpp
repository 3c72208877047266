#pragma once
// Logistic-regression score normalizer over (standardized raw span score,
// question type) and the answerability threshold sweep.

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "boolmrc/core.hpp"
#include "boolmrc/evaluation.hpp"

namespace boolmrc {

// HardLabel: 1.0 for BOOLEAN, else 0.0. TypeConfidence: the classifier's
// probability that the question is boolean.
enum class QtypeFeature { HardLabel, TypeConfidence };

struct NormalizerModel {
    double weight_score = 0.0;
    double weight_qtype = 0.0;
    double bias = 0.0;
    double score_mean = 0.0;
    double score_std = 1.0;
    QtypeFeature qtype_feature = QtypeFeature::HardLabel;

    friend bool operator==(const NormalizerModel&, const NormalizerModel&) = default;
};

struct NormalizerSample {
    double raw_score = 0.0;
    QuestionType predicted_type = QuestionType::Extractive;
    bool answerable = false;
    double type_confidence = 1.0;
};

struct NormalizerHyper {
    double lr = 0.1;
    int epochs = 500;
    double l2 = 1e-4;
    QtypeFeature qtype_feature = QtypeFeature::HardLabel;
};

struct NormalizerFitLog {
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

using Features = std::array<double, 2>;
// Order: weight_score, weight_qtype, bias.
using NormalizerParams = std::array<double, 3>;

Features featurize(const NormalizerModel& model, double raw_score, QuestionType predicted_type,
                   double type_confidence = 1.0);

double stable_sigmoid(double z) noexcept;

double normalize(const NormalizerModel& model, double raw_score, QuestionType predicted_type,
                 double type_confidence = 1.0);

// Mean logistic loss plus l2/2 * (w_score^2 + w_qtype^2), with the model's
// standardization held fixed. The bias is not regularized.
double normalizer_loss(const NormalizerModel& model, std::span<const NormalizerSample> samples,
                       double l2);
NormalizerParams normalizer_gradient(const NormalizerModel& model,
                                     std::span<const NormalizerSample> samples, double l2);

// Throws ValidationError when only one class is present.
NormalizerModel fit_normalizer(std::span<const NormalizerSample> samples,
                               const NormalizerHyper& hyper = {}, NormalizerFitLog* log = nullptr);

struct ThresholdCalibration {
    double threshold = 0.0;
    double achieved_f1 = 0.0;
    int sweep_points = 0;
};

// Candidates: distinct prediction scores plus 0 and 1. Highest minimal-answer
// F1 wins, ties go to the lowest threshold. With no answerable gold the
// threshold is 1.0.
ThresholdCalibration calibrate_threshold(std::span<const FinalAnswer> predictions,
                                         std::span<const MrcExample> examples);

using ThresholdMetric = std::function<double(double threshold)>;

// Generic sweep over the same grid with a caller-supplied metric.
ThresholdCalibration sweep_threshold(std::span<const double> scores, const ThresholdMetric& metric);

// Sorted distinct scores with 0 and 1 added.
std::vector<double> threshold_grid(std::span<const double> scores);

void save_normalizer(const NormalizerModel& model, const std::filesystem::path& path);
NormalizerModel load_normalizer(const std::filesystem::path& path);
std::string normalizer_to_text(const NormalizerModel& model);
NormalizerModel normalizer_from_text(const std::string& text);

}  // namespace boolmrc
