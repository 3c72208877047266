#include "boolmrc/synthetic.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "boolmrc/errors.hpp"
#include "boolmrc/text.hpp"

namespace boolmrc {

namespace {

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {
        "river",  "stone",  "market", "winter", "signal", "garden", "copper", "valley",
        "harbor", "lantern", "meadow", "engine", "island", "forest", "bridge", "castle",
        "desert", "window", "silver", "thunder", "orchard", "canyon", "glacier", "compass",
        "marble", "pepper", "saddle", "timber", "velvet", "anchor", "basalt", "cobalt",
        "dune",   "ember",  "fjord",  "granite", "hollow", "indigo", "jasper", "kettle"};
    return words;
}

template <typename Rng>
const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
}

template <typename Rng>
std::string random_words(std::size_t n, Rng& rng) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += pick(filler_words(), rng);
    }
    return out;
}

std::vector<std::string> as_vector(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

}  // namespace

std::vector<Question> synthetic_questions(std::size_t n, std::uint64_t seed, const Lexicon& lexicon,
                                          double boolean_fraction) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution boolean(boolean_fraction), english(0.5);
    std::uniform_int_distribution<std::size_t> length(2, 6);
    std::vector<Question> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Question q;
        q.id = "q" + std::to_string(i);
        q.language = english(rng) ? "en" : "zz";
        const auto& cues = lexicon.cues_for(q.language);
        const bool is_boolean = boolean(rng);
        const auto pool = as_vector(is_boolean ? cues.boolean_cues : cues.wh_cues);
        if (pool.empty()) throw ValidationError("lexicon has no cues for '" + q.language + "'");
        std::string cue = pick(pool, rng);
        if (!cue.empty()) cue[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cue[0])));
        q.text = cue + " " + random_words(length(rng), rng) + "?";
        q.gold_type = is_boolean ? QuestionType::Boolean : QuestionType::Extractive;
        out.push_back(std::move(q));
    }
    return out;
}

Dataset synthetic_dataset(std::size_t n, std::uint64_t seed, const MixSpec& mix, std::string name) {
    if (mix.paragraphs == 0 || mix.paragraph_words < 8)
        throw ValidationError("synthetic documents need paragraphs of at least 8 words");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution yes(mix.yes_fraction), boolean_na(0.5);
    std::uniform_int_distribution<std::size_t> para_pick(0, mix.paragraphs - 1);
    std::uniform_int_distribution<std::size_t> answer_len(1, 3);
    const auto en = Lexicon::builtin().cues_for("en");
    const auto bool_cues = as_vector(en.boolean_cues);
    const auto wh_cues = as_vector(en.wh_cues);

    std::vector<MrcExample> examples;
    examples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        MrcExample ex;
        ex.question.id = name + "-" + std::to_string(i);
        std::vector<std::string> paragraphs;
        for (std::size_t p = 0; p < mix.paragraphs; ++p)
            paragraphs.push_back(random_words(mix.paragraph_words, rng) + ".");
        std::size_t offset = 0;
        for (std::size_t p = 0; p < paragraphs.size(); ++p) {
            if (p) {
                ex.document_text += "\n\n";
                offset += 2;
            }
            PassageWindow w;
            w.doc_id = ex.question.id;
            w.text = paragraphs[p];
            w.char_start = offset;
            w.char_end = offset + codepoint_length(paragraphs[p]);
            w.word_count = mix.paragraph_words;
            ex.document_text += paragraphs[p];
            offset = w.char_end;
            ex.passages.push_back(std::move(w));
        }

        const double u = unit(rng);
        const std::size_t gp = para_pick(rng);
        if (u < mix.yn) {
            ex.gold.category = GoldCategory::YN;
            ex.gold.yn_label = yes(rng) ? YesNo::Yes : YesNo::No;
            ex.gold.gold_passage_id = ex.question.id + "#" + std::to_string(gp);
            ex.question.gold_type = QuestionType::Boolean;
            ex.question.text = pick(bool_cues, rng) + " the " + random_words(3, rng) + "?";
        } else if (u < mix.yn + mix.ma) {
            ex.gold.category = GoldCategory::MA;
            ex.gold.gold_passage_id = ex.question.id + "#" + std::to_string(gp);
            ex.question.gold_type = QuestionType::Extractive;
            const auto& passage = ex.passages[gp];
            const auto tokens = whitespace_tokens(passage.text);
            const std::size_t len = answer_len(rng);
            std::uniform_int_distribution<std::size_t> first_pick(3, tokens.size() - len);
            const std::size_t first = first_pick(rng);
            const CharSpan local = tokens_to_char_span(tokens, first, first + len - 1);
            ex.gold.minimal_spans.push_back(
                {passage.char_start + local.start, passage.char_start + local.end});
            const CharSpan context = tokens_to_char_span(tokens, first - 3, first - 1);
            ex.question.text = pick(wh_cues, rng) + " follows " + slice(passage.text, context) + "?";
        } else {
            ex.gold.category = GoldCategory::NA;
            ex.question.text = pick(boolean_na(rng) ? bool_cues : wh_cues, rng) + " the " +
                               random_words(3, rng) + "?";
        }
        ex.question.text[0] =
            static_cast<char>(std::toupper(static_cast<unsigned char>(ex.question.text[0])));
        examples.push_back(std::move(ex));
    }
    return Dataset(std::move(name), std::move(examples));
}

std::vector<ScoreSample> synthetic_scores(std::size_t n, std::uint64_t seed, const ScoreMix& mix) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution na_boolean(mix.na_boolean_fraction);
    std::vector<ScoreSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ScoreSample s;
        const double u = unit(rng);
        double mean, sd;
        if (u < mix.yn) {
            s.gold = GoldCategory::YN;
            s.sample.predicted_type = QuestionType::Boolean;
            s.sample.answerable = true;
            mean = mix.boolean_answerable_mean;
            sd = mix.boolean_answerable_sd;
        } else if (u < mix.yn + mix.ma) {
            s.gold = GoldCategory::MA;
            s.sample.predicted_type = QuestionType::Extractive;
            s.sample.answerable = true;
            mean = mix.extractive_answerable_mean;
            sd = mix.extractive_answerable_sd;
        } else {
            s.gold = GoldCategory::NA;
            s.sample.answerable = false;
            if (na_boolean(rng)) {
                s.sample.predicted_type = QuestionType::Boolean;
                mean = mix.boolean_unanswerable_mean;
                sd = mix.boolean_unanswerable_sd;
            } else {
                s.sample.predicted_type = QuestionType::Extractive;
                mean = mix.extractive_unanswerable_mean;
                sd = mix.extractive_unanswerable_sd;
            }
        }
        s.sample.raw_score = std::normal_distribution<double>(mean, sd)(rng);
        out.push_back(s);
    }
    return out;
}

}  // namespace boolmrc
