#include "boolmrc/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "boolmrc/errors.hpp"
#include "boolmrc/records.hpp"
#include "boolmrc/text.hpp"

namespace boolmrc {

DatasetSchema parse_schema(std::string_view s) {
    if (s == "tydi-like") return DatasetSchema::TydiLike;
    if (s == "boolq-like") return DatasetSchema::BoolqLike;
    throw ValidationError("unknown schema '" + std::string(s) + "'");
}

Dataset::Dataset(std::string name, std::vector<MrcExample> examples)
    : name_(std::move(name)), examples_(std::move(examples)) {
    for (std::size_t i = 0; i < examples_.size(); ++i) {
        const auto& ex = examples_[i];
        validate(ex);
        if (!index_.emplace(ex.question.id, i).second)
            throw ValidationError("duplicate example id '" + ex.question.id + "'");
        ++language_counts_[ex.question.language];
    }
}

const MrcExample* Dataset::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &examples_[it->second];
}

const MrcExample& Dataset::at(const std::string& id) const {
    if (const auto* ex = find(id)) return *ex;
    throw LookupError("unknown example id '" + id + "'");
}

std::string passage_id(const MrcExample& example, std::size_t index) {
    return example.question.id + "#" + std::to_string(index);
}

const PassageWindow& gold_passage(const MrcExample& example) {
    if (example.gold.gold_passage_id) {
        for (std::size_t i = 0; i < example.passages.size(); ++i) {
            if (passage_id(example, i) == *example.gold.gold_passage_id)
                return example.passages[i];
        }
    }
    if (example.passages.empty()) throw ValidationError("example has no passages");
    return example.passages.front();
}

Dataset read_dataset(std::istream& in, DatasetSchema schema, std::string name) {
    std::vector<MrcExample> examples;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        MrcExample ex;
        try {
            ex = parse_record(json::parse(line), schema);
        } catch (const json::exception& e) {
            throw ParseError(lineno, e.what());
        } catch (const ParseError& e) {
            throw ParseError(lineno, e.what());
        }
        if (!seen.insert(ex.question.id).second)
            throw ValidationError("line " + std::to_string(lineno) + ": duplicate id '" +
                                  ex.question.id + "'");
        examples.push_back(std::move(ex));
    }
    return Dataset(std::move(name), std::move(examples));
}

Dataset load_dataset(const std::filesystem::path& path, DatasetSchema schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");
    return read_dataset(in, schema, path.stem().string());
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
    for (const auto& ex : dataset.examples()) out << to_record(ex).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    write_dataset(out, dataset);
}

namespace {

PassageWindow window_from_words(const std::u32string& doc, const std::vector<CharSpan>& tokens,
                                std::size_t first, std::size_t count) {
    const CharSpan s = tokens_to_char_span(tokens, first, first + count - 1);
    PassageWindow w;
    w.char_start = s.start;
    w.char_end = s.end;
    w.text = to_utf8(std::u32string_view(doc).substr(s.start, s.length()));
    w.word_count = count;
    return w;
}

struct AnchorWords {
    std::size_t first;
    std::size_t last;
};

AnchorWords anchor_words(const std::vector<CharSpan>& tokens, CharSpan anchor, std::size_t len) {
    if (anchor.start >= anchor.end || anchor.end > len)
        throw RangeError("anchor outside document");
    std::optional<std::size_t> first, last;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].overlaps(anchor)) {
            if (!first) first = i;
            last = i;
        }
    }
    if (!first) throw ValidationError("anchor covers no words");
    return {*first, *last};
}

}  // namespace

ExpandedPassage expand_passage(std::string_view document, CharSpan anchor,
                               std::size_t target_words) {
    const auto doc = to_u32(document);
    const auto tokens = whitespace_tokens(std::u32string_view(doc));
    const auto [a0, a1] = anchor_words(tokens, anchor, doc.size());
    const std::size_t anchor_count = a1 - a0 + 1;
    if (target_words < anchor_count)
        throw ValidationError("target_words " + std::to_string(target_words) +
                              " smaller than anchor (" + std::to_string(anchor_count) + " words)");

    if (tokens.size() <= target_words) {
        ExpandedPassage out{window_from_words(doc, tokens, 0, tokens.size()),
                            tokens.size() < target_words};
        return out;
    }

    // Split the slack evenly around the anchor, then slide inside the document.
    const std::size_t slack = target_words - anchor_count;
    std::size_t first = a0 >= slack / 2 ? a0 - slack / 2 : 0;
    first = std::min(first, tokens.size() - target_words);
    return {window_from_words(doc, tokens, first, target_words), false};
}

std::optional<PassageWindow> sample_pseudo_negative(std::string_view document, CharSpan anchor,
                                                    std::size_t target_words,
                                                    std::uint64_t seed) {
    const auto doc = to_u32(document);
    const auto tokens = whitespace_tokens(std::u32string_view(doc));
    anchor_words(tokens, anchor, doc.size());
    if (target_words == 0 || tokens.size() < target_words) return std::nullopt;

    std::vector<std::size_t> feasible;
    for (std::size_t s = 0; s + target_words <= tokens.size(); ++s) {
        const CharSpan w{tokens[s].start, tokens[s + target_words - 1].end};
        if (!w.overlaps(anchor)) feasible.push_back(s);
    }
    if (feasible.empty()) return std::nullopt;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
    return window_from_words(doc, tokens, feasible[pick(rng)], target_words);
}

namespace {

MrcExample passage_example(const MrcExample& source, std::string id, const PassageWindow& window) {
    MrcExample ex;
    ex.question = source.question;
    ex.question.id = std::move(id);
    ex.document_text = window.text;
    PassageWindow whole = window;
    whole.doc_id = ex.question.id;
    whole.char_start = 0;
    whole.char_end = window.char_end - window.char_start;
    ex.passages.push_back(std::move(whole));
    return ex;
}

}  // namespace

ExpansionReport expand_dataset(const Dataset& dataset, const ExpansionSpec& spec) {
    if (spec.target_words == 0) throw ValidationError("target_words must be positive");
    ExpansionReport report;
    std::vector<MrcExample> out;
    std::uint64_t k = 0;
    for (const auto& ex : dataset.examples()) {
        if (!ex.gold.answerable()) continue;
        const auto anchor = gold_passage(ex).span();
        const auto expanded = expand_passage(ex.document_text, anchor, spec.target_words);
        report.truncated += expanded.truncated;

        auto pos = passage_example(ex, ex.question.id, expanded.window);
        pos.gold = ex.gold;
        pos.gold.minimal_spans.clear();
        for (const auto& m : ex.gold.minimal_spans)
            pos.gold.minimal_spans.push_back(
                {m.start - expanded.window.char_start, m.end - expanded.window.char_start});
        pos.gold.gold_passage_id = passage_id(pos, 0);
        out.push_back(std::move(pos));

        if (spec.pseudo_negatives) {
            const auto w = sample_pseudo_negative(ex.document_text, anchor, spec.target_words,
                                                  spec.seed + 0x9E3779B97F4A7C15ULL * ++k);
            if (!w) {
                ++report.negatives_skipped;
                continue;
            }
            auto neg = passage_example(ex, ex.question.id + "-neg", *w);
            neg.gold = GoldAnnotation{};
            out.push_back(std::move(neg));
        }
    }
    report.dataset = Dataset(dataset.name() + "-expanded", std::move(out));
    return report;
}

std::size_t holdout_size(std::size_t n, double fraction) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

DatasetSplit split_dataset(const Dataset& dataset, const SplitSpec& spec) {
    if (dataset.empty()) throw ValidationError("cannot split an empty dataset");
    if (!(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0))
        throw ValidationError("holdout_fraction must lie strictly between 0 and 1");
    const std::size_t n = dataset.size();
    const std::size_t k = holdout_size(n, spec.holdout_fraction);
    if (k == 0 || k == n)
        throw ValidationError("holdout fraction " + std::to_string(spec.holdout_fraction) +
                              " leaves an empty part for " + std::to_string(n) + " examples");

    std::vector<bool> in_holdout(n, false);
    if (spec.partition_key == PartitionKey::ByFileIndex) {
        for (std::size_t i = 0; i < k; ++i) in_holdout[i] = true;
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(spec.seed);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < k; ++i) in_holdout[order[i]] = true;
    }

    std::vector<MrcExample> rest, held;
    for (std::size_t i = 0; i < n; ++i)
        (in_holdout[i] ? held : rest).push_back(dataset.examples()[i]);
    return {Dataset(dataset.name() + "-remainder", std::move(rest)),
            Dataset(dataset.name() + "-holdout", std::move(held))};
}

std::vector<std::pair<std::size_t, std::size_t>> contiguous_folds(std::size_t n,
                                                                  std::size_t folds) {
    if (folds < 2) throw ValidationError("at least two folds are required");
    if (folds > n) throw ValidationError("more folds than examples");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const std::size_t base = n / folds, extra = n % folds;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < folds; ++k) {
        const std::size_t size = base + (k < extra ? 1 : 0);
        out.emplace_back(begin, begin + size);
        begin += size;
    }
    return out;
}

SystemSpanReport generate_system_spans(const Dataset& dataset, const ExtractorFactory& factory,
                                       std::size_t folds, std::size_t left_offset,
                                       std::size_t right_offset) {
    const auto& examples = dataset.examples();
    if (std::none_of(examples.begin(), examples.end(),
                     [](const auto& e) { return e.gold.category == GoldCategory::YN; }))
        throw ValidationError("dataset has no YN examples");

    SystemSpanReport report;
    for (const auto& [begin, end] : contiguous_folds(examples.size(), folds)) {
        std::vector<MrcExample> training;
        for (std::size_t i = 0; i < examples.size(); ++i)
            if (i < begin || i >= end) training.push_back(examples[i]);

        std::shared_ptr<const SpanExtractorBackend> extractor;
        try {
            extractor = factory(Dataset(dataset.name() + "-fold", std::move(training)));
        } catch (const std::exception&) {
            extractor.reset();
        }
        for (std::size_t i = begin; i < end; ++i) {
            const auto& ex = examples[i];
            if (ex.gold.category != GoldCategory::YN) continue;
            if (!extractor) {
                report.skipped_ids.push_back(ex.question.id);
                continue;
            }
            try {
                const auto extraction = extractor->extract(ex.question, ex.document_text);
                report.items.push_back({ex.question,
                                        slice_window(ex.document_text, extraction.span,
                                                     left_offset, right_offset, ex.question.id),
                                        *ex.gold.yn_label});
            } catch (const std::exception&) {
                report.skipped_ids.push_back(ex.question.id);
            }
        }
    }
    std::sort(report.items.begin(), report.items.end(),
              [](const auto& a, const auto& b) { return a.question.id < b.question.id; });
    std::sort(report.skipped_ids.begin(), report.skipped_ids.end());
    return report;
}

}  // namespace boolmrc
