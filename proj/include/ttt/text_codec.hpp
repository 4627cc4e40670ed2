#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ttt {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kSep = 2;
inline constexpr TokenId kEos = 3;
inline constexpr TokenId kUnk = 4;
inline constexpr int kSpecialCount = 5;
inline constexpr int kDefaultMaxLen = 48;

/// Lowercases, splits ? , . ! : into standalone tokens, collapses whitespace.
std::string normalize(std::string_view text);
std::vector<std::string> split_words(std::string_view normalized);

/// Word-level vocabulary: ids 0..4 are <pad> <bos> <sep> <eos> <unk>, then content words sorted.
class Vocabulary {
public:
    Vocabulary() = default;
    /// Takes the full ordered token list including the five specials. Throws ParseError if malformed.
    explicit Vocabulary(std::vector<std::string> tokens);

    /// Throws EmptyCorpus if `texts` is empty.
    static Vocabulary build(std::span<const std::string> texts);

    static Vocabulary from_json(std::string_view json_text);
    std::string to_json() const;
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    TokenId id(std::string_view word) const;
    const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Normalizes then maps each word, unknown words to <unk>.
std::vector<TokenId> encode(std::string_view text, const Vocabulary& vocab);
/// Joins non-special tokens with single spaces.
std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab);

/// BOS question SEP answer EOS. loss_mask[t] is set when ids[t + 1] is an answer token or EOS.
struct FormattedPair {
    std::vector<TokenId> ids;
    std::vector<std::uint8_t> loss_mask;  // same length as ids; last entry always 0
    int sep_position = 0;
};

/// Throws TooLong when the sequence exceeds max_len.
FormattedPair format_pair(std::string_view question, std::string_view answer, const Vocabulary& vocab,
                          int max_len = kDefaultMaxLen);

}  // namespace ttt
