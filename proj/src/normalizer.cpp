#include "boolmrc/normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "boolmrc/errors.hpp"

namespace boolmrc {

namespace {

using json = nlohmann::json;

double log1p_exp(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logit(const NormalizerModel& m, const NormalizerSample& s) {
    const auto x = featurize(m, s.raw_score, s.predicted_type, s.type_confidence);
    return m.weight_score * x[0] + m.weight_qtype * x[1] + m.bias;
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

Features featurize(const NormalizerModel& model, double raw_score, QuestionType predicted_type,
                   double type_confidence) {
    double q = predicted_type == QuestionType::Boolean ? 1.0 : 0.0;
    if (model.qtype_feature == QtypeFeature::TypeConfidence)
        q = predicted_type == QuestionType::Boolean ? type_confidence : 1.0 - type_confidence;
    return {(raw_score - model.score_mean) / model.score_std, q};
}

double stable_sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double normalize(const NormalizerModel& model, double raw_score, QuestionType predicted_type,
                 double type_confidence) {
    const auto x = featurize(model, raw_score, predicted_type, type_confidence);
    const double p = stable_sigmoid(model.weight_score * x[0] + model.weight_qtype * x[1] + model.bias);
    // Keep the open interval even where the logistic saturates in double precision.
    return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

double normalizer_loss(const NormalizerModel& model, std::span<const NormalizerSample> samples,
                       double l2) {
    if (samples.empty()) throw ValidationError("normalizer loss needs samples");
    double total = 0.0;
    for (const auto& s : samples) {
        const double z = logit(model, s);
        // -log sigma(z) for positives, -log(1 - sigma(z)) for negatives.
        total += s.answerable ? log1p_exp(-z) : log1p_exp(z);
    }
    return total / static_cast<double>(samples.size()) +
           0.5 * l2 * (model.weight_score * model.weight_score + model.weight_qtype * model.weight_qtype);
}

NormalizerParams normalizer_gradient(const NormalizerModel& model,
                                     std::span<const NormalizerSample> samples, double l2) {
    if (samples.empty()) throw ValidationError("normalizer gradient needs samples");
    NormalizerParams g{0.0, 0.0, 0.0};
    for (const auto& s : samples) {
        const auto x = featurize(model, s.raw_score, s.predicted_type, s.type_confidence);
        const double r = stable_sigmoid(model.weight_score * x[0] + model.weight_qtype * x[1] + model.bias) -
                         (s.answerable ? 1.0 : 0.0);
        g[0] += r * x[0];
        g[1] += r * x[1];
        g[2] += r;
    }
    const double n = static_cast<double>(samples.size());
    g[0] = g[0] / n + l2 * model.weight_score;
    g[1] = g[1] / n + l2 * model.weight_qtype;
    g[2] /= n;
    return g;
}

NormalizerModel fit_normalizer(std::span<const NormalizerSample> samples, const NormalizerHyper& hyper,
                               NormalizerFitLog* log) {
    if (samples.empty()) throw ValidationError("normalizer fit needs samples");
    const auto positives = std::count_if(samples.begin(), samples.end(),
                                         [](const auto& s) { return s.answerable; });
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(samples.size()))
        throw ValidationError("normalizer fit needs both answerable and unanswerable examples");
    if (hyper.epochs < 0 || !(hyper.lr > 0.0) || hyper.l2 < 0.0)
        throw ValidationError("normalizer hyperparameters out of range");

    NormalizerModel m;
    m.qtype_feature = hyper.qtype_feature;
    double mean = 0.0;
    for (const auto& s : samples) {
        if (!std::isfinite(s.raw_score)) throw ValidationError("non-finite raw score in normalizer data");
        mean += s.raw_score;
    }
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s.raw_score - mean) * (s.raw_score - mean);
    var /= static_cast<double>(samples.size());
    m.score_mean = mean;
    m.score_std = var > 0.0 ? std::sqrt(var) : 1.0;

    const double initial = normalizer_loss(m, samples, hyper.l2);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        const auto g = normalizer_gradient(m, samples, hyper.l2);
        m.weight_score -= hyper.lr * g[0];
        m.weight_qtype -= hyper.lr * g[1];
        m.bias -= hyper.lr * g[2];
    }
    if (log) {
        log->initial_loss = initial;
        log->final_loss = normalizer_loss(m, samples, hyper.l2);
    }
    return m;
}

std::vector<double> threshold_grid(std::span<const double> scores) {
    std::vector<double> grid(scores.begin(), scores.end());
    grid.push_back(0.0);
    grid.push_back(1.0);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

ThresholdCalibration sweep_threshold(std::span<const double> scores, const ThresholdMetric& metric) {
    const auto grid = threshold_grid(scores);
    ThresholdCalibration best{grid.front(), -1.0, static_cast<int>(grid.size())};
    for (double t : grid) {
        const double f1 = metric(t);
        if (f1 > best.achieved_f1) {
            best.threshold = t;
            best.achieved_f1 = f1;
        }
    }
    return best;
}

ThresholdCalibration calibrate_threshold(std::span<const FinalAnswer> predictions,
                                         std::span<const MrcExample> examples) {
    check_aligned(predictions, examples);
    if (predictions.empty()) throw ValidationError("threshold calibration needs predictions");

    std::vector<double> scores;
    scores.reserve(predictions.size());
    std::size_t answerable = 0;
    // (score, credit) for every prediction that can be attempted.
    std::vector<std::pair<double, double>> attemptable;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        scores.push_back(predictions[i].normalized_score);
        if (examples[i].gold.answerable()) ++answerable;
        if (predictions[i].kind != AnswerKind::NoAnswer)
            attemptable.emplace_back(predictions[i].normalized_score,
                                     answer_credit(predictions[i], examples[i]));
    }
    const auto grid = threshold_grid(scores);
    if (answerable == 0) return {1.0, 0.0, static_cast<int>(grid.size())};

    std::sort(attemptable.begin(), attemptable.end());
    // suffix[k] = credit of attemptable[k..]
    std::vector<double> suffix(attemptable.size() + 1, 0.0);
    for (std::size_t k = attemptable.size(); k-- > 0;) suffix[k] = suffix[k + 1] + attemptable[k].second;

    ThresholdCalibration best{grid.front(), -1.0, static_cast<int>(grid.size())};
    for (double t : grid) {
        const auto first = std::lower_bound(attemptable.begin(), attemptable.end(), t,
                                            [](const auto& a, double v) { return a.first < v; });
        const auto k = static_cast<std::size_t>(first - attemptable.begin());
        const std::size_t attempted = attemptable.size() - k;
        const double credit = suffix[k];
        const double p = attempted ? credit / static_cast<double>(attempted) : 0.0;
        const double r = credit / static_cast<double>(answerable);
        const double f1 = harmonic(p, r);
        if (f1 > best.achieved_f1) {
            best.threshold = t;
            best.achieved_f1 = f1;
        }
    }
    return best;
}

std::string normalizer_to_text(const NormalizerModel& m) {
    json j{{"weight_score", m.weight_score},
           {"weight_qtype", m.weight_qtype},
           {"bias", m.bias},
           {"score_mean", m.score_mean},
           {"score_std", m.score_std}};
    if (m.qtype_feature == QtypeFeature::TypeConfidence) j["qtype_feature"] = "confidence";
    return j.dump(2) + "\n";
}

NormalizerModel normalizer_from_text(const std::string& text) {
    NormalizerModel m;
    try {
        const auto j = json::parse(text);
        m.weight_score = j.at("weight_score").get<double>();
        m.weight_qtype = j.at("weight_qtype").get<double>();
        m.bias = j.at("bias").get<double>();
        m.score_mean = j.at("score_mean").get<double>();
        m.score_std = j.at("score_std").get<double>();
        const std::string feature = j.value("qtype_feature", "label");
        if (feature == "confidence") m.qtype_feature = QtypeFeature::TypeConfidence;
        else if (feature != "label") throw ParseError(0, "unknown qtype_feature '" + feature + "'");
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("normalizer: ") + e.what());
    }
    if (!(m.score_std > 0.0)) throw ValidationError("normalizer score_std must be positive");
    return m;
}

void save_normalizer(const NormalizerModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out.precision(17);
    out << normalizer_to_text(model);
}

NormalizerModel load_normalizer(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read normalizer '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return normalizer_from_text(buf.str());
}

}  // namespace boolmrc
