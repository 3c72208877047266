#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "boolmrc/core.hpp"

namespace boolmrc {

// Invalid UTF-8 sequences decode to U+FFFD.
std::u32string to_u32(std::string_view utf8);
std::string to_utf8(std::u32string_view text);

std::size_t codepoint_length(std::string_view utf8);

bool is_space(char32_t c) noexcept;

std::string trim(std::string_view utf8);

// Extracts [span.start, span.end) in code points. Throws RangeError when the
// span does not fit.
std::string slice(std::string_view utf8, CharSpan span);

// Whitespace-delimited tokens as code point spans.
std::vector<CharSpan> whitespace_tokens(std::u32string_view text);
std::vector<CharSpan> whitespace_tokens(std::string_view utf8);

std::size_t word_count(std::string_view utf8);

// Indices of the whitespace tokens overlapping `span`, ascending.
std::vector<std::size_t> char_span_to_tokens(std::string_view text, CharSpan span);

// Smallest span covering tokens [first, last] (inclusive).
CharSpan tokens_to_char_span(const std::vector<CharSpan>& tokens, std::size_t first,
                             std::size_t last);

// Default evidence window offset (characters each side).
inline constexpr std::size_t kDefaultEvidenceOffset = 400;

// Widens `span` by the given offsets, clamps to the document and snaps both
// ends outward so that no word is cut in half.
PassageWindow slice_window(std::string_view document, CharSpan span, std::size_t left_offset,
                           std::size_t right_offset, std::string doc_id = {});

}  // namespace boolmrc
