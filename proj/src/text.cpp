#include "roster/text.hpp"

#include <algorithm>
#include <cctype>

namespace roster {

namespace {

const std::set<std::string>& stop_words() {
    static const std::set<std::string> words = {
        "a",    "an",   "the",  "to",   "of",   "in",   "on",   "at",  "for",
        "by",   "with", "and",  "or",   "is",   "are",  "was",  "were", "be",
        "been", "it",   "its",  "this", "that", "as",   "from", "into", "not",
        "no",   "has",  "have", "had",  "will", "would", "can",  "could", "do",
        "does", "did"};
    return words;
}

} // namespace

std::set<std::string> tokenize(const std::string& text) {
    std::set<std::string> out;
    std::string token;
    auto flush = [&] {
        if (!token.empty() && stop_words().count(token) == 0) out.insert(token);
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& x : a) common += b.count(x);
    const std::size_t uni = a.size() + b.size() - common;
    return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace roster
