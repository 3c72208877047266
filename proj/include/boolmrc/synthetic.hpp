#pragma once
// Seeded generators for desk-scale data: cue-led bilingual questions, mixed
// YN/MA/NA reading-comprehension fixtures and raw-score samples whose
// per-type distributions mimic an extractor that scores boolean questions low.

#include <cstdint>
#include <vector>

#include "boolmrc/backends.hpp"
#include "boolmrc/core.hpp"
#include "boolmrc/ingestion.hpp"
#include "boolmrc/normalizer.hpp"

namespace boolmrc {

// Questions alternate between "en" and "zz" at random; a boolean question
// opens with a boolean cue of its language, an extractive one with a wh cue.
std::vector<Question> synthetic_questions(std::size_t n, std::uint64_t seed,
                                          const Lexicon& lexicon = Lexicon::builtin(),
                                          double boolean_fraction = 0.5);

struct MixSpec {
    double yn = 0.3;
    double ma = 0.4;  // the rest is NA
    double yes_fraction = 0.7;
    std::size_t paragraphs = 3;
    std::size_t paragraph_words = 40;
};

// English-only documents of random words split into paragraphs; every
// paragraph is a passage. MA questions quote the three words before the
// answer.
Dataset synthetic_dataset(std::size_t n, std::uint64_t seed, const MixSpec& mix = {},
                          std::string name = "synthetic");

struct ScoreSample {
    NormalizerSample sample;
    GoldCategory gold = GoldCategory::NA;
};

struct ScoreMix {
    double yn = 0.0604;
    double ma = 0.3712;  // the rest is NA
    // Means and spreads of the raw score per (type, answerable) group. At a
    // raw threshold of 0 they leave 82.4% of answerable and 14.9% of
    // unanswerable extractive scores above, and 23.9% / 2.8% of boolean ones.
    double extractive_answerable_mean = 0.931, extractive_answerable_sd = 1.0;
    double extractive_unanswerable_mean = -1.041, extractive_unanswerable_sd = 1.0;
    double boolean_answerable_mean = -0.709, boolean_answerable_sd = 1.0;
    double boolean_unanswerable_mean = -1.917, boolean_unanswerable_sd = 1.0;
    // NA questions typed BOOLEAN with this probability.
    double na_boolean_fraction = 0.0761;
};

// Gold YN questions are typed BOOLEAN and MA ones EXTRACTIVE.
std::vector<ScoreSample> synthetic_scores(std::size_t n, std::uint64_t seed,
                                          const ScoreMix& mix = {});

}  // namespace boolmrc
