#pragma once
#include <cstdint>
#include <string>

#include <json.hpp>

namespace roster {

// All structured values in the runtime use insertion-ordered JSON so that
// serialization is byte-stable for identical values.
using Json = nlohmann::ordered_json;

/// Canonical text form shared by scenario files, snapshots and golden traces.
inline std::string canonical_text(const Json& j) { return j.dump(2); }

/// Compact single-line form used for log records (one record per line).
inline std::string line_text(const Json& j) { return j.dump(); }

/// FNV-1a 64-bit digest, rendered as 16 hex chars.
std::string digest(const std::string& bytes);

inline std::string digest(const Json& j) { return digest(canonical_text(j)); }

/// 1-based line number of a byte offset in `text` (for parse diagnostics).
std::size_t line_of_offset(const std::string& text, std::size_t offset);

/// Parse with a location-carrying ScenarioError instead of a raw json exception.
Json parse_json(const std::string& text, const std::string& origin);

} // namespace roster
