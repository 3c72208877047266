#include <doctest.h>

#include <random>
#include <sstream>

#include "boolmrc/core.hpp"
#include "boolmrc/errors.hpp"
#include "boolmrc/records.hpp"
#include "boolmrc/text.hpp"

using namespace boolmrc;

TEST_CASE("enum names round trip") {
    for (auto t : {QuestionType::Boolean, QuestionType::Extractive})
        CHECK(parse_question_type(to_string(t)) == t);
    for (auto k : {AnswerKind::ExtractiveSpan, AnswerKind::BooleanYes, AnswerKind::BooleanNo,
                   AnswerKind::NoAnswer})
        CHECK(parse_answer_kind(to_string(k)) == k);
    for (auto c : {GoldCategory::YN, GoldCategory::MA, GoldCategory::NA})
        CHECK(parse_gold_category(to_string(c)) == c);
    CHECK(to_string(AnswerKind::BooleanNo) == "BOOLEAN_NO");
    CHECK_THROWS_AS(parse_yes_no("maybe"), ParseError);
}

TEST_CASE("gold annotations carry exactly the fields of their category") {
    GoldAnnotation g;
    g.category = GoldCategory::YN;
    CHECK_THROWS_AS(validate(g), ValidationError);
    g.yn_label = YesNo::No;
    CHECK_NOTHROW(validate(g));
    g.minimal_spans.push_back({0, 3});
    CHECK_THROWS_AS(validate(g), ValidationError);

    GoldAnnotation ma;
    ma.category = GoldCategory::MA;
    CHECK_THROWS_AS(validate(ma), ValidationError);
    ma.minimal_spans.push_back({2, 5});
    CHECK_NOTHROW(validate(ma));
    ma.minimal_spans.push_back({5, 5});
    CHECK_THROWS_AS(validate(ma), ValidationError);

    GoldAnnotation na;
    CHECK_NOTHROW(validate(na));
    na.yn_label = YesNo::Yes;
    CHECK_THROWS_AS(validate(na), ValidationError);
}

TEST_CASE("offsets count code points") {
    const std::string s = "Pará é 𝄞x";
    CHECK(codepoint_length(s) == 9);
    CHECK(slice(s, {3, 4}) == "á");
    CHECK(slice(s, {7, 9}) == "𝄞x");
    CHECK_THROWS_AS(slice(s, {5, 12}), RangeError);
    CHECK(to_utf8(to_u32(s)) == s);
    // Invalid bytes decode to the replacement character.
    CHECK(to_u32("a\xff" "b") == std::u32string{U'a', U'\uFFFD', U'b'});
}

TEST_CASE("whitespace tokens and their spans") {
    const std::string text = "  the  Nile\tis\nlong ";
    const auto t = whitespace_tokens(std::string_view(text));
    REQUIRE(t.size() == 4);
    CHECK(t[0] == CharSpan{2, 5});
    CHECK(t[1] == CharSpan{7, 11});
    CHECK(word_count(text) == 4);
    CHECK(char_span_to_tokens(text, {8, 13}) == std::vector<std::size_t>{1, 2});
    CHECK(char_span_to_tokens(text, {5, 7}).empty());
    CHECK(tokens_to_char_span(t, 1, 3) == CharSpan{7, 19});
    CHECK(word_count("a b") == 2);
    CHECK(trim("  x y \n") == "x y");
}

TEST_CASE("token spans map back to covering character spans") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> n_words(1, 30), w_len(1, 6), gap(1, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const int n = n_words(rng);
        for (int i = 0; i < n; ++i) {
            text += std::string(static_cast<std::size_t>(gap(rng)), ' ');
            text += std::string(static_cast<std::size_t>(w_len(rng)), 'a' + static_cast<char>(i % 26));
        }
        const auto toks = whitespace_tokens(std::string_view(text));
        REQUIRE(toks.size() == static_cast<std::size_t>(n));
        std::uniform_int_distribution<std::size_t> pick(0, toks.size() - 1);
        std::size_t a = pick(rng), b = pick(rng);
        if (a > b) std::swap(a, b);
        const auto span = tokens_to_char_span(toks, a, b);
        const auto back = char_span_to_tokens(text, span);
        REQUIRE(!back.empty());
        CHECK(back.front() == a);
        CHECK(back.back() == b);
        CHECK(back.size() == b - a + 1);
    }
}

TEST_CASE("slice_window clamps and never cuts a word") {
    const std::string doc = "alpha beta gamma delta epsilon zeta";
    const auto w = slice_window(doc, {11, 16}, 3, 3);  // "gamma"
    CHECK(w.text == "beta gamma delta");
    CHECK(w.char_start == 6);
    CHECK(w.char_end == 22);
    CHECK(w.word_count == 3);
    const auto all = slice_window(doc, {0, 5}, 400, 400);
    CHECK(all.text == doc);
    CHECK(slice_window(doc, {11, 16}, 0, 0).text == "gamma");
    CHECK_THROWS_AS(slice_window(doc, {30, 60}, 1, 1), RangeError);

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> pos(0, doc.size() - 1), off(0, 20);
    for (int i = 0; i < 300; ++i) {
        std::size_t a = pos(rng), b = pos(rng);
        if (a > b) std::swap(a, b);
        const CharSpan s{a, b + 1};
        const auto win = slice_window(doc, s, off(rng), off(rng));
        CHECK(win.span().contains(s));
        CHECK(slice(doc, win.span()) == win.text);
        if (win.char_start > 0) CHECK((doc[win.char_start - 1] == ' ' || doc[win.char_start] == ' '));
        if (win.char_end < doc.size()) CHECK((doc[win.char_end] == ' ' || doc[win.char_end - 1] == ' '));
    }
}

TEST_CASE("dataset records round trip") {
    const std::string line =
        R"({"id":"x1","question":"Is it long?","language":"en","document":"Pará river is long. It flows.",)"
        R"("passages":[{"start":0,"end":19},{"start":20,"end":29}],"gold":{"category":"YN","yn_label":"YES","passage_index":1}})";
    const auto ex = parse_record(json::parse(line), DatasetSchema::TydiLike);
    CHECK(ex.passages[0].text == "Pará river is long.");
    CHECK(ex.passages[1].word_count == 2);
    CHECK(ex.question.gold_type == QuestionType::Boolean);
    CHECK(ex.gold.gold_passage_id == "x1#1");
    const auto again = parse_record(to_record(ex), DatasetSchema::TydiLike);
    CHECK(to_record(again) == to_record(ex));

    auto bad = json::parse(line);
    bad["passages"][0]["end"] = 99;
    CHECK_THROWS_AS(parse_record(bad, DatasetSchema::TydiLike), ParseError);
    CHECK_THROWS_AS(parse_record(json::parse(line), DatasetSchema::BoolqLike), ParseError);
    auto no_id = json::parse(line);
    no_id.erase("id");
    CHECK_THROWS_AS(parse_record(no_id, DatasetSchema::TydiLike), ParseError);
}

TEST_CASE("prediction records round trip") {
    std::vector<FinalAnswer> answers(3);
    answers[0] = {"a", AnswerKind::ExtractiveSpan, CharSpan{3, 9}, 0.75, QuestionType::Extractive};
    answers[1] = {"b", AnswerKind::BooleanNo, CharSpan{0, 4}, 0.6, QuestionType::Boolean};
    answers[2] = {"c", AnswerKind::NoAnswer, std::nullopt, 0.1, QuestionType::Boolean};
    std::stringstream buf;
    write_predictions(buf, answers);
    const auto back = read_predictions(buf);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].example_id == answers[i].example_id);
        CHECK(back[i].kind == answers[i].kind);
        CHECK(back[i].span == answers[i].span);
        CHECK(back[i].normalized_score == answers[i].normalized_score);
        CHECK(back[i].predicted_type == answers[i].predicted_type);
    }
    std::stringstream broken("{\"id\":\"a\"}\n");
    try {
        read_predictions(broken);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
}
