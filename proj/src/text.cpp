#include "boolmrc/text.hpp"

#include <algorithm>

#include "boolmrc/errors.hpp"

namespace boolmrc {

std::u32string to_u32(std::string_view utf8) {
    std::u32string out;
    out.reserve(utf8.size());
    std::size_t i = 0;
    const std::size_t n = utf8.size();
    while (i < n) {
        const auto b0 = static_cast<unsigned char>(utf8[i]);
        int extra = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            extra = 1;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            extra = 2;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            extra = 3;
        } else {
            out.push_back(U'\uFFFD');
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k <= extra; ++k) {
            if (i + k >= n) {
                ok = false;
                break;
            }
            const auto b = static_cast<unsigned char>(utf8[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
            out.push_back(U'\uFFFD');
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(extra) + 1;
    }
    return out;
}

std::string to_utf8(std::u32string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char32_t c : text) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

std::size_t codepoint_length(std::string_view utf8) { return to_u32(utf8).size(); }

bool is_space(char32_t c) noexcept {
    switch (c) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

std::string trim(std::string_view utf8) {
    const auto u = to_u32(utf8);
    std::size_t b = 0, e = u.size();
    while (b < e && is_space(u[b])) ++b;
    while (e > b && is_space(u[e - 1])) --e;
    return to_utf8(std::u32string_view(u).substr(b, e - b));
}

std::string slice(std::string_view utf8, CharSpan span) {
    const auto u = to_u32(utf8);
    if (span.start > span.end || span.end > u.size())
        throw RangeError("span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                         ") outside text of length " + std::to_string(u.size()));
    return to_utf8(std::u32string_view(u).substr(span.start, span.length()));
}

std::vector<CharSpan> whitespace_tokens(std::u32string_view text) {
    std::vector<CharSpan> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        if (i == text.size()) break;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        tokens.push_back({start, i});
    }
    return tokens;
}

std::vector<CharSpan> whitespace_tokens(std::string_view utf8) {
    return whitespace_tokens(std::u32string_view(to_u32(utf8)));
}

std::size_t word_count(std::string_view utf8) { return whitespace_tokens(utf8).size(); }

std::vector<std::size_t> char_span_to_tokens(std::string_view text, CharSpan span) {
    const auto u = to_u32(text);
    if (span.start > span.end || span.end > u.size())
        throw RangeError("span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                         ") outside text of length " + std::to_string(u.size()));
    std::vector<std::size_t> out;
    const auto tokens = whitespace_tokens(std::u32string_view(u));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].overlaps(span)) out.push_back(i);
    }
    return out;
}

CharSpan tokens_to_char_span(const std::vector<CharSpan>& tokens, std::size_t first,
                             std::size_t last) {
    if (first > last || last >= tokens.size())
        throw RangeError("token range [" + std::to_string(first) + "," + std::to_string(last) +
                         "] outside " + std::to_string(tokens.size()) + " tokens");
    return {tokens[first].start, tokens[last].end};
}

PassageWindow slice_window(std::string_view document, CharSpan span, std::size_t left_offset,
                           std::size_t right_offset, std::string doc_id) {
    const auto u = to_u32(document);
    const std::size_t len = u.size();
    if (span.start >= span.end || span.end > len)
        throw RangeError("span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                         ") outside document of length " + std::to_string(len));

    std::size_t begin = span.start > left_offset ? span.start - left_offset : 0;
    std::size_t end = std::min(len, span.end + std::min(right_offset, len));

    // Snap outward: never start or stop inside a word.
    while (begin > 0 && !is_space(u[begin - 1]) && !is_space(u[begin])) --begin;
    while (end < len && !is_space(u[end - 1]) && !is_space(u[end])) ++end;

    PassageWindow w;
    w.doc_id = std::move(doc_id);
    w.char_start = begin;
    w.char_end = end;
    w.text = to_utf8(std::u32string_view(u).substr(begin, end - begin));
    w.word_count = whitespace_tokens(std::u32string_view(u).substr(begin, end - begin)).size();
    return w;
}

}  // namespace boolmrc
