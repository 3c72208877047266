#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "boolmrc/errors.hpp"
#include "boolmrc/ingestion.hpp"
#include "boolmrc/records.hpp"
#include "boolmrc/synthetic.hpp"
#include "boolmrc/text.hpp"

using namespace boolmrc;

namespace {

std::string numbered_words(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
    return s;
}

}  // namespace

TEST_CASE("the demo fixture loads") {
    const auto ds = load_dataset(BOOLMRC_DATA_DIR "/fixtures/demo.jsonl", DatasetSchema::TydiLike);
    REQUIRE(ds.size() == 2);
    const auto& b = ds.at("demo-boolean");
    CHECK(b.gold.yn_label == YesNo::No);
    CHECK(gold_passage(b).text.find("disagreement as to whether the Nile") != std::string::npos);
    const auto& f = ds.at("demo-factoid");
    CHECK(slice(f.document_text, f.gold.minimal_spans.front()) == "almost half of the crust's mass");
    CHECK(ds.language_counts().at("en") == 2);
    CHECK_THROWS_AS(ds.at("nope"), LookupError);
}

TEST_CASE("read_dataset reports the offending line") {
    std::stringstream in;
    const auto ds = synthetic_dataset(3, 1);
    write_dataset(in, ds);
    std::string text = in.str() + "{not json}\n";
    std::stringstream broken(text);
    try {
        read_dataset(broken, DatasetSchema::TydiLike, "x");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
    std::stringstream dup(in.str() + in.str());
    CHECK_THROWS_AS(read_dataset(dup, DatasetSchema::TydiLike, "x"), ValidationError);

    std::stringstream again(in.str());
    const auto back = read_dataset(again, DatasetSchema::TydiLike, "x");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(to_record(back.examples()[i]) == to_record(ds.examples()[i]));
}

TEST_CASE("expand_passage yields target-length windows around the anchor") {
    const std::string doc = numbered_words(1000);
    const auto toks = whitespace_tokens(std::string_view(doc));
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> start(0, 999), len(1, 40);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t a = start(rng);
        const std::size_t b = std::min<std::size_t>(999, a + len(rng) - 1);
        const CharSpan anchor = tokens_to_char_span(toks, a, b);
        for (std::size_t target : {200u, 500u}) {
            const auto e = expand_passage(doc, anchor, target);
            CHECK(e.window.span().contains(anchor));
            CHECK(word_count(e.window.text) == target);
            CHECK(e.window.word_count == target);
            CHECK_FALSE(e.truncated);
            CHECK(slice(doc, e.window.span()) == e.window.text);
        }
    }
    const auto shortdoc = numbered_words(50);
    const auto e = expand_passage(shortdoc, {0, 2}, 200);
    CHECK(e.truncated);
    CHECK(e.window.text == shortdoc);
    CHECK_THROWS_AS(expand_passage(shortdoc, {0, 900}, 200), RangeError);
}

TEST_CASE("expand_passage centres the anchor away from the edges") {
    const std::string doc = numbered_words(100);
    const auto toks = whitespace_tokens(std::string_view(doc));
    // Anchor of 2 words at 50..51 inside a 10-word window: 4 words either side.
    const auto e = expand_passage(doc, tokens_to_char_span(toks, 50, 51), 10);
    CHECK(e.window.text == numbered_words(100).substr(toks[46].start, toks[55].end - toks[46].start));
    // At the very start the window shifts right.
    const auto s = expand_passage(doc, tokens_to_char_span(toks, 0, 0), 10);
    CHECK(s.window.char_start == 0);
    CHECK(word_count(s.window.text) == 10);
}

TEST_CASE("pseudo negatives never touch the anchor") {
    const std::string doc = numbered_words(600);
    const auto toks = whitespace_tokens(std::string_view(doc));
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<std::size_t> start(0, 599);
    std::set<std::size_t> starts;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t a = start(rng);
        const CharSpan anchor = tokens_to_char_span(toks, a, std::min<std::size_t>(599, a + 5));
        const auto w = sample_pseudo_negative(doc, anchor, 200, static_cast<std::uint64_t>(trial));
        if (!w) {
            // Only possible when neither side has 200 free words.
            CHECK(a < 200);
            CHECK(599 - std::min<std::size_t>(599, a + 5) < 200);
            continue;
        }
        CHECK_FALSE(w->span().overlaps(anchor));
        CHECK(word_count(w->text) == 200);
        starts.insert(w->char_start);
    }
    CHECK(starts.size() > 10);
    const auto a = sample_pseudo_negative(doc, tokens_to_char_span(toks, 300, 301), 200, 5);
    const auto b = sample_pseudo_negative(doc, tokens_to_char_span(toks, 300, 301), 200, 5);
    CHECK(a->char_start == b->char_start);
    CHECK_FALSE(sample_pseudo_negative(numbered_words(150), {0, 2}, 200, 1));
}

TEST_CASE("holdout splits are disjoint, sized and seeded") {
    const auto ds = synthetic_dataset(562, 3);
    CHECK(holdout_size(562, 0.1) == 56);
    CHECK(holdout_size(10, 0.5) == 5);
    for (auto key : {PartitionKey::ByExample, PartitionKey::ByFileIndex}) {
        const auto s = split_dataset(ds, {0.1, 9, key});
        CHECK(s.holdout.size() == 56);
        CHECK(s.remainder.size() == 506);
        std::set<std::string> ids;
        for (const auto& e : s.holdout.examples()) ids.insert(e.question.id);
        for (const auto& e : s.remainder.examples()) CHECK(ids.count(e.question.id) == 0);
        const auto again = split_dataset(ds, {0.1, 9, key});
        CHECK(again.holdout.examples().front().question.id == s.holdout.examples().front().question.id);
    }
    const auto lead = split_dataset(ds, {0.1, 9, PartitionKey::ByFileIndex});
    CHECK(lead.holdout.examples().front().question.id == ds.examples().front().question.id);
    const auto other = split_dataset(ds, {0.1, 10, PartitionKey::ByExample});
    const auto first = split_dataset(ds, {0.1, 9, PartitionKey::ByExample});
    bool differs = false;
    for (std::size_t i = 0; i < 56; ++i)
        differs |= other.holdout.examples()[i].question.id != first.holdout.examples()[i].question.id;
    CHECK(differs);
    CHECK_THROWS_AS(split_dataset(ds, {0.0, 1, PartitionKey::ByExample}), ValidationError);
    CHECK_THROWS_AS(split_dataset(ds, {1.0, 1, PartitionKey::ByExample}), ValidationError);
}

TEST_CASE("contiguous folds partition the index range") {
    const auto f = contiguous_folds(10, 3);
    REQUIRE(f.size() == 3);
    CHECK(f[0] == std::pair<std::size_t, std::size_t>{0, 4});
    CHECK(f[1] == std::pair<std::size_t, std::size_t>{4, 7});
    CHECK(f[2] == std::pair<std::size_t, std::size_t>{7, 10});
    CHECK_THROWS_AS(contiguous_folds(10, 1), ValidationError);
}

TEST_CASE("system spans come from the extractor trained on the other folds") {
    MixSpec mix;
    mix.yn = 0.6;
    mix.ma = 0.2;
    const auto ds = synthetic_dataset(30, 5, mix);
    std::vector<std::size_t> training_sizes;
    const auto report = generate_system_spans(
        ds,
        [&](const Dataset& part) {
            training_sizes.push_back(part.size());
            return oracle_backends(ds).extractor();
        },
        3, 10, 10);
    CHECK(training_sizes == std::vector<std::size_t>{20, 20, 20});
    std::size_t yn = 0;
    for (const auto& e : ds.examples()) yn += e.gold.category == GoldCategory::YN;
    CHECK(report.items.size() == yn);
    CHECK(report.skipped_ids.empty());
    CHECK(std::is_sorted(report.items.begin(), report.items.end(),
                         [](const auto& a, const auto& b) { return a.question.id < b.question.id; }));
    for (const auto& item : report.items) {
        const auto& ex = ds.at(item.question.id);
        CHECK(item.window.span().contains(gold_passage(ex).span()));
        CHECK(item.label == *ex.gold.yn_label);
    }
}

TEST_CASE("expand_dataset rebases gold spans into passage-level examples") {
    MixSpec mix;
    mix.paragraphs = 6;
    mix.paragraph_words = 60;
    const auto ds = synthetic_dataset(40, 13, mix);
    const auto r = expand_dataset(ds, {100, true, 4});
    std::size_t answerable = 0;
    for (const auto& e : ds.examples()) answerable += e.gold.answerable();
    CHECK(r.dataset.size() + r.negatives_skipped == 2 * answerable);
    for (const auto& e : r.dataset.examples()) {
        CHECK(word_count(e.document_text) == 100);
        const bool neg = e.question.id.size() > 4 && e.question.id.ends_with("-neg");
        CHECK(e.gold.answerable() != neg);
        const auto& src = ds.at(neg ? e.question.id.substr(0, e.question.id.size() - 4) : e.question.id);
        if (neg) {
            // The gold passage text does not reappear inside the negative window.
            CHECK(e.document_text.find(gold_passage(src).text) == std::string::npos);
        } else {
            CHECK(e.document_text.find(gold_passage(src).text) != std::string::npos);
            for (std::size_t i = 0; i < e.gold.minimal_spans.size(); ++i)
                CHECK(slice(e.document_text, e.gold.minimal_spans[i]) ==
                      slice(src.document_text, src.gold.minimal_spans[i]));
        }
    }
    CHECK_THROWS_AS(expand_dataset(ds, {0, false, 0}), ValidationError);
}
