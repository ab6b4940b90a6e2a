#pragma once

// Flat key=value files: one pair per line, '#' starts a comment, blank lines
// ignored, whitespace around keys and values trimmed.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace past::config {

using Pairs = std::vector<std::pair<std::string, std::string>>;

// FormatError naming the line on a line without '='.
Pairs parse(std::istream& in);
Pairs parse_file(const std::filesystem::path& path);

// Splits "key=value"; FormatError if there is no '=' or the key is empty.
std::pair<std::string, std::string> split_assignment(std::string_view s);

double to_double(std::string_view key, std::string_view value);
std::int64_t to_int(std::string_view key, std::string_view value);
std::uint64_t to_uint(std::string_view key, std::string_view value);
bool to_bool(std::string_view key, std::string_view value);

}  // namespace past::config
