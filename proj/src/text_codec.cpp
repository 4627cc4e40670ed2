#include "ttt/text_codec.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ttt/error.hpp"

namespace ttt {

namespace {

const std::vector<std::string>& special_tokens() {
    static const std::vector<std::string> specials{"<pad>", "<bos>", "<sep>", "<eos>", "<unk>"};
    return specials;
}

bool is_split_punct(char c) { return c == '?' || c == ',' || c == '.' || c == '!' || c == ':'; }

}  // namespace

std::string normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 8);
    bool pending_space = false;
    auto emit = [&](char c) {
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    };
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            pending_space = true;
        } else if (is_split_punct(raw)) {
            pending_space = true;
            emit(raw);
            pending_space = true;
        } else {
            emit(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

std::vector<std::string> split_words(std::string_view normalized) {
    std::vector<std::string> words;
    std::size_t pos = 0;
    while (pos < normalized.size()) {
        const std::size_t end = normalized.find(' ', pos);
        const std::size_t stop = end == std::string_view::npos ? normalized.size() : end;
        if (stop > pos) words.emplace_back(normalized.substr(pos, stop - pos));
        pos = stop + 1;
    }
    return words;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    const auto& specials = special_tokens();
    if (tokens_.size() < specials.size() || !std::equal(specials.begin(), specials.end(), tokens_.begin())) {
        throw Error(ErrorCode::ParseError, "vocabulary must start with the five special tokens");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
            throw Error(ErrorCode::ParseError, "duplicate vocabulary token '" + tokens_[i] + "'");
        }
    }
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
    if (texts.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build a vocabulary from no text");
    std::set<std::string> words;
    for (const auto& text : texts) {
        for (auto& w : split_words(normalize(text))) words.insert(std::move(w));
    }
    std::vector<std::string> tokens = special_tokens();
    for (const auto& w : words) {
        if (std::find(tokens.begin(), tokens.end(), w) == tokens.end()) tokens.push_back(w);
    }
    return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::from_json(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("vocab json: ") + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorCode::ParseError, "vocab json must be an array of strings");
    std::vector<std::string> tokens;
    for (const auto& t : doc) {
        if (!t.is_string()) throw Error(ErrorCode::ParseError, "vocab json must be an array of strings");
        tokens.push_back(t.get<std::string>());
    }
    return Vocabulary(std::move(tokens));
}

std::string Vocabulary::to_json() const { return nlohmann::json(tokens_).dump(); }

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
    out << to_json() << '\n';
}

TokenId Vocabulary::id(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> encode(std::string_view text, const Vocabulary& vocab) {
    std::vector<TokenId> ids;
    for (const auto& w : split_words(normalize(text))) ids.push_back(vocab.id(w));
    return ids;
}

std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
    std::string out;
    for (TokenId id : ids) {
        if (id < kSpecialCount || id >= vocab.size()) continue;
        if (!out.empty()) out.push_back(' ');
        out += vocab.token(id);
    }
    return out;
}

FormattedPair format_pair(std::string_view question, std::string_view answer, const Vocabulary& vocab,
                          int max_len) {
    const auto q = encode(question, vocab);
    const auto a = encode(answer, vocab);
    const std::size_t length = q.size() + a.size() + 3;
    if (length > static_cast<std::size_t>(max_len)) {
        throw Error(ErrorCode::TooLong, "pair needs " + std::to_string(length) + " tokens (max " +
                                            std::to_string(max_len) + "): '" + std::string(question) + "' / '" +
                                            std::string(answer) + "'");
    }
    FormattedPair pair;
    pair.ids.reserve(length);
    pair.ids.push_back(kBos);
    pair.ids.insert(pair.ids.end(), q.begin(), q.end());
    pair.sep_position = static_cast<int>(pair.ids.size());
    pair.ids.push_back(kSep);
    pair.ids.insert(pair.ids.end(), a.begin(), a.end());
    pair.ids.push_back(kEos);
    pair.loss_mask.assign(length, 0);
    for (std::size_t t = static_cast<std::size_t>(pair.sep_position); t + 1 < length; ++t) pair.loss_mask[t] = 1;
    return pair;
}

}  // namespace ttt
