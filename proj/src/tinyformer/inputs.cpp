#include "boolmrc/tinyformer/inputs.hpp"

#include <algorithm>
#include <cctype>

#include "boolmrc/text.hpp"

namespace boolmrc::tinyformer {

namespace {

std::string bucket_key(std::string_view word) {
    std::size_t b = 0, e = word.size();
    auto punct = [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return u < 0x80 && std::ispunct(u) && c != '\'';
    };
    while (b < e && punct(word[b])) ++b;
    while (e > b && punct(word[e - 1])) --e;
    if (b == e) {
        b = 0;
        e = word.size();
    }
    std::string key(word.substr(b, e - b));
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
        return static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    });
    return key;
}

std::vector<int> word_ids(const EncoderConfig& config, std::string_view text,
                          std::vector<CharSpan>* spans) {
    const auto u = to_u32(text);
    const auto tokens = whitespace_tokens(std::u32string_view(u));
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        ids.push_back(
            bucket_of(to_utf8(std::u32string_view(u).substr(t.start, t.length())), config.vocab_buckets));
    }
    if (spans) *spans = tokens;
    return ids;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

int bucket_of(std::string_view word, int vocab_buckets) {
    const auto span = static_cast<std::uint64_t>(vocab_buckets - kReservedIds);
    return kReservedIds + static_cast<int>(fnv1a64(bucket_key(word)) % span);
}

ModelInput question_input(const EncoderConfig& config, std::string_view question) {
    ModelInput in;
    const auto ids = word_ids(config, question, nullptr);
    const auto room = static_cast<std::size_t>(config.max_seq_len - 1);
    in.tokens.push_back(kClsId);
    in.tokens.insert(in.tokens.end(), ids.begin(), ids.begin() + static_cast<long>(std::min(room, ids.size())));
    in.truncated = ids.size() > room;
    in.context_offset = in.tokens.size();
    return in;
}

std::vector<ModelInput> pair_inputs(const EncoderConfig& config, std::string_view question,
                                    std::string_view context) {
    const auto q_ids = word_ids(config, question, nullptr);
    std::vector<CharSpan> spans;
    const auto c_ids = word_ids(config, context, &spans);

    const auto max_len = static_cast<std::size_t>(config.max_seq_len);
    const std::size_t q_room = std::max<std::size_t>(1, max_len / 2 - 1);
    const std::size_t q_len = std::min(q_room, q_ids.size());
    const std::size_t budget = max_len > q_len + 2 ? max_len - q_len - 2 : 1;
    const std::size_t stride = std::max<std::size_t>(1, budget / 2);

    std::vector<ModelInput> chunks;
    std::size_t begin = 0;
    do {
        const std::size_t end = std::min(c_ids.size(), begin + budget);
        ModelInput in;
        in.tokens.push_back(kClsId);
        in.tokens.insert(in.tokens.end(), q_ids.begin(), q_ids.begin() + static_cast<long>(q_len));
        in.tokens.push_back(kSepId);
        in.context_offset = in.tokens.size();
        in.tokens.insert(in.tokens.end(), c_ids.begin() + static_cast<long>(begin),
                         c_ids.begin() + static_cast<long>(end));
        in.context_spans.assign(spans.begin() + static_cast<long>(begin),
                                spans.begin() + static_cast<long>(end));
        in.truncated = q_len < q_ids.size();
        chunks.push_back(std::move(in));
        if (end >= c_ids.size()) break;
        begin += stride;
    } while (true);
    return chunks;
}

}  // namespace boolmrc::tinyformer
