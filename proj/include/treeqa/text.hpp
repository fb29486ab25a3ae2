#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace treeqa::text {

// Collapse whitespace runs to single spaces and trim both ends.
std::string normalize_ws(std::string_view s);

// Trim ASCII whitespace from both ends.
std::string trim(std::string_view s);

std::string to_lower(std::string_view s);

// Lowercase, split on non-alphanumeric runs, drop empties.
std::vector<std::string> tokenize(std::string_view s);

// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

} // namespace treeqa::text
