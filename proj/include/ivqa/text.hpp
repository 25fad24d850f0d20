#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ivqa/tensor.hpp"

namespace ivqa {

using Tokens = std::vector<std::string>;
using TokenIds = std::vector<std::size_t>;

inline const std::map<std::string, std::string>& number_words() {
    static const std::map<std::string, std::string> m = {
        {"zero", "0"}, {"one", "1"}, {"two", "2"},   {"three", "3"}, {"four", "4"}, {"five", "5"},
        {"six", "6"},  {"seven", "7"}, {"eight", "8"}, {"nine", "9"}, {"ten", "10"},
    };
    return m;
}

// Lowercase, strip punctuation except "?", split on whitespace. A trailing
// "?" becomes its own final token. Number words are normalized to digit
// strings so counting answers match across phrasings.
inline Tokens tokenize(const std::string& text) {
    bool ends_question = false;
    for (auto it = text.rbegin(); it != text.rend(); ++it) {
        if (std::isspace(static_cast<unsigned char>(*it))) continue;
        ends_question = (*it == '?');
        break;
    }
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u))
            cleaned.push_back(static_cast<char>(std::tolower(u)));
        else if (std::isspace(u) || c == '?')
            cleaned.push_back(' ');
        // other punctuation dropped
    }
    Tokens out;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && cleaned[i] == ' ') ++i;
        std::size_t j = i;
        while (j < cleaned.size() && cleaned[j] != ' ') ++j;
        if (j > i) {
            std::string tok = cleaned.substr(i, j - i);
            auto it = number_words().find(tok);
            out.push_back(it == number_words().end() ? tok : it->second);
        }
        i = j;
    }
    if (ends_question) out.push_back("?");
    return out;
}

inline std::string join_tokens(const Tokens& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out += ' ';
        out += toks[i];
    }
    return out;
}

enum class AnswerType { yes_no, number, color, shape, other };

inline std::string answer_type_name(AnswerType t) {
    switch (t) {
        case AnswerType::yes_no: return "yes/no";
        case AnswerType::number: return "number";
        case AnswerType::color: return "color";
        case AnswerType::shape: return "shape";
        case AnswerType::other: return "other";
    }
    return "other";
}

inline AnswerType answer_type_from_name(const std::string& s) {
    if (s == "yes/no") return AnswerType::yes_no;
    if (s == "number") return AnswerType::number;
    if (s == "color") return AnswerType::color;
    if (s == "shape") return AnswerType::shape;
    if (s == "other") return AnswerType::other;
    throw DataError("unknown answer_type: " + s);
}

// Per-dataset lexicons extending the base {yes/no, number, other} typing.
// The micro-world profile fills colors and shapes; an ingested real
// dataset may leave them empty.
struct TypingProfile {
    std::vector<std::string> colors;
    std::vector<std::string> shapes;

    bool is_color(const std::string& w) const {
        return std::find(colors.begin(), colors.end(), w) != colors.end();
    }
    bool is_shape(const std::string& w) const {
        return std::find(shapes.begin(), shapes.end(), w) != shapes.end();
    }
};

inline bool is_digit_token(const std::string& w) {
    if (w.empty()) return false;
    for (char c : w)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

inline AnswerType answer_type_of(const Tokens& answer, const TypingProfile& profile = {}) {
    if (answer.empty()) throw DataError("answer_type_of: empty answer");
    if (answer.size() == 1) {
        const std::string& w = answer[0];
        if (w == "yes" || w == "no") return AnswerType::yes_no;
        if (is_digit_token(w) || number_words().count(w)) return AnswerType::number;
        if (profile.is_color(w)) return AnswerType::color;
        if (profile.is_shape(w)) return AnswerType::shape;
    }
    return AnswerType::other;
}

// Token/id bijection with fixed reserved ids.
class Vocabulary {
  public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kBos = 1;
    static constexpr std::size_t kEos = 2;
    static constexpr std::size_t kUnk = 3;

    Vocabulary() {
        for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) push(t);
    }

    // Deterministic construction: tokens sorted by (frequency desc, lex asc).
    static Vocabulary build(const std::vector<Tokens>& corpus, std::size_t min_freq = 1) {
        std::map<std::string, std::size_t> freq;
        for (const auto& sent : corpus)
            for (const auto& tok : sent) ++freq[tok];
        std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Vocabulary v;
        for (const auto& [tok, n] : items)
            if (n >= min_freq) v.push(tok);
        return v;
    }

    std::size_t size() const { return id_to_token_.size(); }

    std::size_t id_of(const std::string& tok) const {
        auto it = token_to_id_.find(tok);
        return it == token_to_id_.end() ? kUnk : it->second;
    }
    const std::string& token_of(std::size_t id) const {
        if (id >= id_to_token_.size()) throw DataError("token id out of range");
        return id_to_token_[id];
    }

    TokenIds encode(const Tokens& toks) const {
        TokenIds out;
        out.reserve(toks.size());
        for (const auto& t : toks) out.push_back(id_of(t));
        return out;
    }
    Tokens decode(const TokenIds& ids) const {
        Tokens out;
        out.reserve(ids.size());
        for (std::size_t id : ids) out.push_back(token_of(id));
        return out;
    }

    const std::vector<std::string>& tokens() const { return id_to_token_; }

    static Vocabulary from_tokens(const std::vector<std::string>& toks) {
        Vocabulary v;
        if (toks.size() < 4 || toks[0] != "<pad>" || toks[1] != "<bos>" || toks[2] != "<eos>" ||
            toks[3] != "<unk>")
            throw DataError("vocabulary token list missing reserved prefix");
        for (std::size_t i = 4; i < toks.size(); ++i) v.push(toks[i]);
        return v;
    }

    // FNV-1a over the token list; recorded in model cards.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (const auto& t : id_to_token_) {
            for (char c : t) {
                h ^= static_cast<unsigned char>(c);
                h *= 1099511628211ull;
            }
            h ^= '\n';
            h *= 1099511628211ull;
        }
        return h;
    }

  private:
    void push(const std::string& tok) {
        if (token_to_id_.count(tok)) return;
        token_to_id_[tok] = id_to_token_.size();
        id_to_token_.push_back(tok);
    }

    std::unordered_map<std::string, std::size_t> token_to_id_;
    std::vector<std::string> id_to_token_;
};

}  // namespace ivqa
