#pragma once
#include <set>
#include <string>
#include <vector>

namespace roster {

/// Lowercased alphanumeric/underscore tokens with stop-words removed.
std::set<std::string> tokenize(const std::string& text);

/// |A ∩ B| / |A ∪ B|; 0 when the union is empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

} // namespace roster
