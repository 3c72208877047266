#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "boolmrc/errors.hpp"
#include "boolmrc/evaluation.hpp"
#include "boolmrc/normalizer.hpp"
#include "boolmrc/synthetic.hpp"

using namespace boolmrc;

namespace {

std::vector<NormalizerSample> samples_of(const std::vector<ScoreSample>& v) {
    std::vector<NormalizerSample> out;
    for (const auto& s : v) out.push_back(s.sample);
    return out;
}

// One-passage example whose answer is the word at `word` (gold MA), or gold
// NA when word < 0.
MrcExample tiny_example(const std::string& id, int word) {
    MrcExample ex;
    ex.question.id = id;
    ex.question.text = "what?";
    ex.document_text = "a b c d";
    ex.passages.push_back({id, "a b c d", 0, 7, 4});
    if (word >= 0) {
        ex.gold.category = GoldCategory::MA;
        ex.gold.minimal_spans.push_back({static_cast<std::size_t>(2 * word), static_cast<std::size_t>(2 * word + 1)});
    }
    return ex;
}

FinalAnswer span_answer(const std::string& id, int word, double score) {
    return {id, AnswerKind::ExtractiveSpan,
            CharSpan{static_cast<std::size_t>(2 * word), static_cast<std::size_t>(2 * word + 1)}, score,
            QuestionType::Extractive};
}

}  // namespace

TEST_CASE("featurize standardizes the score and flags boolean questions") {
    NormalizerModel m;
    m.score_mean = 3.0;
    m.score_std = 2.0;
    CHECK(featurize(m, 3.0, QuestionType::Extractive) == Features{0.0, 0.0});
    CHECK(featurize(m, 5.0, QuestionType::Boolean) == Features{1.0, 1.0});
    CHECK(featurize(m, 5.0, QuestionType::Boolean) == featurize(m, 5.0, QuestionType::Boolean));
    m.qtype_feature = QtypeFeature::TypeConfidence;
    CHECK(featurize(m, 3.0, QuestionType::Boolean, 0.9)[1] == doctest::Approx(0.9));
    CHECK(featurize(m, 3.0, QuestionType::Extractive, 0.9)[1] == doctest::Approx(0.1));
}

TEST_CASE("normalize is a logistic over the features") {
    NormalizerModel m;
    CHECK(normalize(m, 123.0, QuestionType::Boolean) == 0.5);
    m.weight_score = 1.0;
    CHECK(normalize(m, 0.0, QuestionType::Extractive) == 0.5);
    CHECK(normalize(m, std::log(3.0), QuestionType::Extractive) == doctest::Approx(0.75).epsilon(1e-12));
    for (double z : {-1e6, -800.0, -30.0, 0.0, 30.0, 800.0, 1e6}) {
        const double p = normalize(m, z, QuestionType::Boolean);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    CHECK(stable_sigmoid(-1000.0) >= 0.0);
    CHECK(std::isfinite(stable_sigmoid(-1000.0)));
}

TEST_CASE("normalize increases with the raw score when its weight is positive") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> w(0.01, 3.0), x(-20.0, 20.0), b(-2.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        NormalizerModel m;
        m.weight_score = w(rng);
        m.weight_qtype = b(rng);
        m.bias = b(rng);
        m.score_mean = b(rng);
        m.score_std = w(rng);
        double lo = x(rng), hi = x(rng);
        if (lo > hi) std::swap(lo, hi);
        if (lo == hi) continue;
        for (auto t : {QuestionType::Boolean, QuestionType::Extractive}) {
            const double a = normalize(m, lo, t), b = normalize(m, hi, t);
            CHECK(a <= b);
            // Strict away from the clamp.
            if (a > 1e-9 && b < 1.0 - 1e-9) CHECK(a < b);
        }
    }
}

TEST_CASE("the normalizer gradient matches finite differences") {
    const auto data = samples_of(synthetic_scores(300, 4));
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        NormalizerModel m;
        m.weight_score = n(rng);
        m.weight_qtype = n(rng);
        m.bias = n(rng);
        m.score_mean = 2.0;
        m.score_std = 3.0;
        const double l2 = 0.01;
        const auto g = normalizer_gradient(m, data, l2);
        double* params[3] = {&m.weight_score, &m.weight_qtype, &m.bias};
        for (int k = 0; k < 3; ++k) {
            const double saved = *params[k];
            const double h = 1e-5;
            *params[k] = saved + h;
            const double up = normalizer_loss(m, data, l2);
            *params[k] = saved - h;
            const double down = normalizer_loss(m, data, l2);
            *params[k] = saved;
            const double numeric = (up - down) / (2 * h);
            CHECK(std::abs(g[static_cast<std::size_t>(k)] - numeric) /
                      std::max(std::abs(g[static_cast<std::size_t>(k)]) + std::abs(numeric), 1e-8) <
                  1e-6);
        }
    }
}

TEST_CASE("fit learns the direction of the evidence and lowers the loss") {
    std::vector<NormalizerSample> data;
    for (int i = 0; i < 50; ++i) data.push_back({static_cast<double>(i), QuestionType::Extractive, i >= 25});
    NormalizerFitLog log;
    const auto m = fit_normalizer(data, {}, &log);
    CHECK(m.weight_score > 0.0);
    CHECK(log.final_loss <= log.initial_loss);
    CHECK(m.score_mean == doctest::Approx(24.5));
    CHECK(std::isfinite(m.weight_score));

    NormalizerHyper strong;
    strong.l2 = 0.1;
    strong.epochs = 5000;
    const auto bounded = fit_normalizer(data, strong);
    CHECK(std::isfinite(bounded.weight_score));
    CHECK(std::abs(bounded.weight_score) < 20.0);

    std::vector<NormalizerSample> one_class(5, {1.0, QuestionType::Boolean, true});
    CHECK_THROWS_AS(fit_normalizer(one_class), ValidationError);
}

TEST_CASE("uninformative features leave the base rate") {
    std::vector<NormalizerSample> data;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> s(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < 4000; ++i) {
        const auto type = coin(rng) ? QuestionType::Boolean : QuestionType::Extractive;
        data.push_back({s(rng), type, coin(rng)});
    }
    double rate = 0.0;
    for (const auto& d : data) rate += d.answerable;
    rate /= static_cast<double>(data.size());
    const auto m = fit_normalizer(data);
    for (double x : {-2.0, 0.0, 2.0})
        for (auto t : {QuestionType::Boolean, QuestionType::Extractive})
            CHECK(std::abs(normalize(m, x, t) - rate) < 0.05);
}

TEST_CASE("fit is deterministic") {
    const auto data = samples_of(synthetic_scores(400, 1));
    CHECK(fit_normalizer(data) == fit_normalizer(data));
}

TEST_CASE("threshold calibration on a hand-checked grid") {
    std::vector<MrcExample> golds{tiny_example("a", 0), tiny_example("b", 1), tiny_example("c", -1),
                                  tiny_example("d", -1)};
    std::vector<FinalAnswer> preds{span_answer("a", 0, 0.9), span_answer("b", 1, 0.8),
                                   span_answer("c", 2, 0.4), span_answer("d", 3, 0.2)};
    const auto cal = calibrate_threshold(preds, golds);
    CHECK(cal.threshold == 0.8);
    CHECK(cal.achieved_f1 == 1.0);
    CHECK(cal.sweep_points == 6);

    std::vector<MrcExample> all_na{tiny_example("a", -1), tiny_example("b", -1)};
    std::vector<FinalAnswer> two{span_answer("a", 0, 0.9), span_answer("b", 1, 0.3)};
    CHECK(calibrate_threshold(two, all_na).threshold == 1.0);

    std::vector<MrcExample> all_ans{tiny_example("a", 0), tiny_example("b", 1)};
    const auto perfect = calibrate_threshold(two, all_ans);
    CHECK(perfect.threshold == 0.0);
    CHECK(perfect.achieved_f1 == 1.0);

    std::vector<FinalAnswer> misaligned{span_answer("zz", 0, 0.9), span_answer("b", 1, 0.3)};
    CHECK_THROWS_AS(calibrate_threshold(misaligned, all_ans), ValidationError);
}

TEST_CASE("calibrate_threshold agrees with re-evaluating every grid point") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> word(-1, 3), size(1, 30), coarse(0, 10);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<MrcExample> golds;
        std::vector<FinalAnswer> preds;
        const int n = size(rng);
        for (int i = 0; i < n; ++i) {
            const std::string id = "e" + std::to_string(i);
            golds.push_back(tiny_example(id, word(rng)));
            const int w = std::max(0, word(rng));
            auto p = span_answer(id, w, coarse(rng) / 10.0);
            if (coarse(rng) == 0) {
                p.kind = AnswerKind::NoAnswer;
                p.span.reset();
            }
            preds.push_back(p);
        }
        const auto cal = calibrate_threshold(preds, golds);
        std::vector<double> scores;
        for (const auto& p : preds) scores.push_back(p.normalized_score);
        const auto grid = threshold_grid(scores);
        double best = -1.0, best_t = 1.0;
        bool any_answerable = false;
        for (const auto& g : golds) any_answerable |= g.gold.answerable();
        for (double t : grid) {
            const double f1 = minimal_answer_f1(preds, golds, t).f1;
            if (f1 > best) {
                best = f1;
                best_t = t;
            }
        }
        if (!any_answerable) best_t = 1.0;
        CHECK(cal.threshold == best_t);
        if (any_answerable) CHECK(cal.achieved_f1 == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("normalizer models survive a file round trip") {
    NormalizerModel m{0.1 + 0.2, -1.0 / 3.0, 7e-12, 5.5, 0.125, QtypeFeature::TypeConfidence};
    const auto path = std::filesystem::temp_directory_path() / "boolmrc_normalizer.json";
    save_normalizer(m, path);
    CHECK(load_normalizer(path) == m);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(normalizer_from_text("{\"weight_score\": 1}"), ParseError);
    CHECK_THROWS_AS(normalizer_from_text(
                        R"({"weight_score":1,"weight_qtype":0,"bias":0,"score_mean":0,"score_std":0})"),
                    ValidationError);
}
