#pragma once
// Dataset readers, passage expansion and data splits.
//
// Record format: one JSON object per line,
//   {"id", "question", "language", "document",
//    "passages": [{"start", "end"}],
//    "gold": {"category": "YN"|"MA"|"NA", "yn_label"?, "minimal_spans"?, "passage_index"?},
//    "question_type"?}
// Offsets are code points into "document".

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "boolmrc/backends.hpp"
#include "boolmrc/core.hpp"

namespace boolmrc {

enum class DatasetSchema { TydiLike, BoolqLike };

DatasetSchema parse_schema(std::string_view s);  // "tydi-like" | "boolq-like"

class Dataset {
public:
    Dataset() = default;
    // Throws ValidationError on duplicate ids or invalid examples.
    Dataset(std::string name, std::vector<MrcExample> examples);

    const std::string& name() const noexcept { return name_; }
    const std::vector<MrcExample>& examples() const noexcept { return examples_; }
    const std::map<std::string, std::size_t>& language_counts() const noexcept {
        return language_counts_;
    }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }

    const MrcExample* find(const std::string& id) const;
    const MrcExample& at(const std::string& id) const;  // LookupError when absent

private:
    std::string name_;
    std::vector<MrcExample> examples_;
    std::map<std::string, std::size_t> language_counts_;
    std::map<std::string, std::size_t> index_;
};

// Id of passage `index` of `example`: "<question id>#<index>".
std::string passage_id(const MrcExample& example, std::size_t index);
// The passage named by gold_passage_id, else the first passage.
const PassageWindow& gold_passage(const MrcExample& example);

// Parse errors carry the 1-based line number of the offending record.
Dataset read_dataset(std::istream& in, DatasetSchema schema, std::string name);
Dataset load_dataset(const std::filesystem::path& path, DatasetSchema schema);
void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

struct ExpandedPassage {
    PassageWindow window;
    bool truncated = false;  // document had fewer than target_words words
};

// Window of exactly target_words words centred on the anchor's word midpoint,
// shifted inward at document edges. Always contains the whole anchor.
ExpandedPassage expand_passage(std::string_view document, CharSpan anchor,
                               std::size_t target_words);

// Uniform draw among target_words windows sharing no character with the
// anchor; nullopt when no such window exists.
std::optional<PassageWindow> sample_pseudo_negative(std::string_view document, CharSpan anchor,
                                                    std::size_t target_words,
                                                    std::uint64_t seed);

struct ExpansionSpec {
    std::size_t target_words = 200;
    bool pseudo_negatives = false;
    std::uint64_t seed = 0;
};

struct ExpansionReport {
    Dataset dataset;
    std::size_t truncated = 0;          // documents shorter than target_words
    std::size_t negatives_skipped = 0;  // no non-overlapping window existed
};

// Passage-level dataset: every answerable example becomes one example whose
// document is the expanded window around its gold passage (spans rebased).
// With pseudo_negatives, each also yields an NA example "<id>-neg" holding a
// window that shares no character with the gold passage. NA inputs are dropped.
ExpansionReport expand_dataset(const Dataset& dataset, const ExpansionSpec& spec);

enum class PartitionKey { ByExample, ByFileIndex };

struct SplitSpec {
    double holdout_fraction = 0.1;
    std::uint64_t seed = 0;
    // ByExample: seeded shuffle. ByFileIndex: the holdout is the leading
    // block in file order (e.g. "files 0-4" of a dev set).
    PartitionKey partition_key = PartitionKey::ByExample;
};

struct DatasetSplit {
    Dataset remainder;
    Dataset holdout;  // round(holdout_fraction * N) examples
};

std::size_t holdout_size(std::size_t n, double fraction);

// Both parts keep the original relative order.
DatasetSplit split_dataset(const Dataset& dataset, const SplitSpec& spec);

struct SystemSpanExample {
    Question question;
    PassageWindow window;
    YesNo label = YesNo::Yes;
};

struct SystemSpanReport {
    std::vector<SystemSpanExample> items;  // sorted by question id
    std::vector<std::string> skipped_ids;  // extractor failures
};

// Builds the extractor for one fold from that fold's training part.
using ExtractorFactory =
    std::function<std::shared_ptr<const SpanExtractorBackend>(const Dataset& training_part)>;

// Fold k holds out the k-th contiguous block of the dataset. Each YN example
// in the held-out block is answered by the extractor built on the other
// blocks, and the span is widened by slice_window.
SystemSpanReport generate_system_spans(const Dataset& dataset, const ExtractorFactory& factory,
                                       std::size_t folds,
                                       std::size_t left_offset = 400,
                                       std::size_t right_offset = 400);

// Fold boundaries used by generate_system_spans: [begin, end) per fold.
std::vector<std::pair<std::size_t, std::size_t>> contiguous_folds(std::size_t n,
                                                                  std::size_t folds);

}  // namespace boolmrc
