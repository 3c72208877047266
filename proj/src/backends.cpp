#include "boolmrc/backends.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>

#include "boolmrc/errors.hpp"
#include "boolmrc/ingestion.hpp"
#include "boolmrc/text.hpp"

namespace boolmrc {

namespace {

std::string fold_case(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool is_ascii_punct(char32_t c) { return c < 0x80 && std::ispunct(static_cast<int>(c)) && c != '\''; }

// First whitespace token, case-folded, with surrounding punctuation removed.
std::string leading_word(std::string_view text) {
    const auto u = to_u32(text);
    const auto tokens = whitespace_tokens(std::u32string_view(u));
    for (const auto& t : tokens) {
        std::size_t b = t.start, e = t.end;
        while (b < e && is_ascii_punct(u[b])) ++b;
        while (e > b && is_ascii_punct(u[e - 1])) --e;
        if (b < e) return fold_case(to_utf8(std::u32string_view(u).substr(b, e - b)));
    }
    return {};
}

CueList english_cues() {
    return {{"is", "are", "was", "were", "am", "does", "do", "did", "can", "could", "will",
             "would", "should", "shall", "has", "have", "had", "may", "might", "must", "isn't",
             "aren't", "wasn't", "weren't", "doesn't", "don't", "didn't", "can't", "won't"},
            {"who", "what", "when", "where", "why", "which", "whom", "whose", "how"}};
}

// Synthetic test language: boolean questions open with a particle, wh
// questions with an x-word.
CueList zz_cues() {
    return {{"ka", "kaso", "dura", "velo"}, {"ximo", "xala", "xundo", "xepi", "xora"}};
}

// By id when the id is known, else by exact question text (service requests
// carry no id).
const MrcExample& lookup(const Dataset& ds, const Question& q) {
    if (!q.id.empty())
        if (const auto* ex = ds.find(q.id)) return *ex;
    for (const auto& ex : ds.examples())
        if (ex.question.text == q.text) return ex;
    throw LookupError("oracle has no example for question '" + (q.id.empty() ? q.text : q.id) + "'");
}

class OracleExtractor final : public SpanExtractorBackend {
public:
    explicit OracleExtractor(std::shared_ptr<const Dataset> ds) : ds_(std::move(ds)) {}
    Extraction extract(const Question& q, std::string_view text) const override {
        const auto& ex = lookup(*ds_, q);
        switch (ex.gold.category) {
            case GoldCategory::MA:
                return {ex.gold.minimal_spans.front(), kOracleAnswerableScore};
            case GoldCategory::YN:
                return {gold_passage(ex).span(), kOracleAnswerableScore};
            case GoldCategory::NA: break;
        }
        const auto tokens = whitespace_tokens(text);
        const CharSpan any = tokens.empty() ? CharSpan{0, 1} : tokens.front();
        return {any, kOracleUnanswerableScore};
    }
    std::string version() const override { return "oracle"; }

private:
    std::shared_ptr<const Dataset> ds_;
};

class OracleQuestionType final : public QuestionTypeBackend {
public:
    explicit OracleQuestionType(std::shared_ptr<const Dataset> ds) : ds_(std::move(ds)) {}
    TypePrediction classify(const Question& q) const override {
        const auto& ex = lookup(*ds_, q);
        if (ex.question.gold_type) return {*ex.question.gold_type, 1.0};
        return {QuestionType::Extractive, 0.5};
    }
    std::string version() const override { return "oracle"; }

private:
    std::shared_ptr<const Dataset> ds_;
};

class OracleBoolean final : public BooleanAnswerBackend {
public:
    explicit OracleBoolean(std::shared_ptr<const Dataset> ds) : ds_(std::move(ds)) {}
    YesNoPrediction classify(const Question& q, std::string_view) const override {
        const auto& ex = lookup(*ds_, q);
        if (!ex.gold.yn_label) throw LookupError("example '" + q.id + "' has no yes/no label");
        return *ex.gold.yn_label == YesNo::Yes ? YesNoPrediction{YesNo::Yes, 1.0}
                                               : YesNoPrediction{YesNo::No, 0.0};
    }
    std::string version() const override { return "oracle"; }

private:
    std::shared_ptr<const Dataset> ds_;
};

}  // namespace

Lexicon Lexicon::builtin() {
    Lexicon lex;
    lex.set("en", english_cues());
    lex.set("zz", zz_cues());
    return lex;
}

CueList Lexicon::parse_cue_file(std::istream& in, const std::string& source_name) {
    CueList cues;
    std::set<std::string>* section = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string entry = trim(line);
        if (entry.empty()) continue;
        if (entry == "[boolean]") {
            section = &cues.boolean_cues;
        } else if (entry == "[wh]") {
            section = &cues.wh_cues;
        } else if (entry.front() == '[') {
            throw ParseError(lineno, source_name + ": unknown section " + entry);
        } else if (!section) {
            throw ParseError(lineno, source_name + ": cue outside a section");
        } else {
            section->insert(fold_case(entry));
        }
    }
    return cues;
}

Lexicon Lexicon::load_directory(const std::filesystem::path& dir) {
    Lexicon lex = builtin();
    if (!std::filesystem::is_directory(dir))
        throw ValidationError("lexicon directory '" + dir.string() + "' not found");
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("cues.", 0) != 0 || entry.path().extension() != ".txt") continue;
        const std::string lang = name.substr(5, name.size() - 5 - 4);
        std::ifstream in(entry.path());
        lex.set(lang, parse_cue_file(in, name));
    }
    return lex;
}

const CueList& Lexicon::cues_for(const std::string& language) const {
    if (auto it = cues_.find(language); it != cues_.end()) return it->second;
    if (auto it = cues_.find(default_language); it != cues_.end()) return it->second;
    throw LookupError("lexicon has neither '" + language + "' nor the default language");
}

TypePrediction rule_classify_question(const Question& question, const Lexicon& lexicon) {
    const auto& cues = lexicon.cues_for(question.language);
    const std::string first = leading_word(question.text);
    if (cues.boolean_cues.count(first)) return {QuestionType::Boolean, kRuleCueConfidence};
    if (cues.wh_cues.count(first)) return {QuestionType::Extractive, kRuleCueConfidence};
    return {QuestionType::Extractive, 0.5};
}

AlwaysYesBackend::AlwaysYesBackend(double prior) : prior_(prior) {
    if (!(prior >= 0.0 && prior <= 1.0)) throw ValidationError("prior must lie in [0,1]");
}

std::shared_ptr<const BooleanAnswerBackend> always_yes_backend(double prior) {
    return std::make_shared<AlwaysYesBackend>(prior);
}

OracleBackends::OracleBackends(const Dataset& dataset) {
    auto ds = std::make_shared<const Dataset>(dataset);
    extractor_ = std::make_shared<OracleExtractor>(ds);
    qtype_ = std::make_shared<OracleQuestionType>(ds);
    boolean_ = std::make_shared<OracleBoolean>(ds);
}

OracleBackends oracle_backends(const Dataset& dataset) { return OracleBackends(dataset); }

}  // namespace boolmrc
