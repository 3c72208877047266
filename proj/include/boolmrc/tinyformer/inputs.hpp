#pragma once
// Hash-bucket tokenisation and model input layout:
//   [CLS] question tokens [SEP] context tokens
// Tokens are whitespace words; the bucket key is the ASCII-lower-cased word
// with surrounding ASCII punctuation removed, hashed with 64-bit FNV-1a.

#include <cstddef>
#include <string_view>
#include <vector>

#include "boolmrc/core.hpp"
#include "boolmrc/tinyformer/bundle.hpp"

namespace boolmrc::tinyformer {

inline constexpr int kClsId = 0;
inline constexpr int kSepId = 1;
inline constexpr int kReservedIds = 2;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
int bucket_of(std::string_view word, int vocab_buckets);

struct ModelInput {
    std::vector<int> tokens;
    std::size_t context_offset = 0;       // index in `tokens` of the first context token
    std::vector<CharSpan> context_spans;  // code point spans into the context text
    bool truncated = false;
};

// [CLS] question, cut to max_seq_len.
ModelInput question_input(const EncoderConfig& config, std::string_view question);

// Question/context pairs; long contexts become overlapping chunks (half-window
// stride) so every context word appears in at least one chunk.
std::vector<ModelInput> pair_inputs(const EncoderConfig& config, std::string_view question,
                                    std::string_view context);

}  // namespace boolmrc::tinyformer
