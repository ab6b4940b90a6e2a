#include "past/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>

#include "past/errors.hpp"

namespace past::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, const char* want) {
  throw DomainError("config key '" + std::string(key) + "': expected " + want + ", got '" + std::string(value) + "'");
}

}  // namespace

std::pair<std::string, std::string> split_assignment(std::string_view s) {
  const auto eq = s.find('=');
  if (eq == std::string_view::npos) throw FormatError("expected key=value, got '" + std::string(s) + "'");
  const auto key = trim(s.substr(0, eq));
  if (key.empty()) throw FormatError("empty key in '" + std::string(s) + "'");
  return {std::string(key), std::string(trim(s.substr(eq + 1)))};
}

Pairs parse(std::istream& in) {
  Pairs out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = trim(v);
    if (v.empty()) continue;
    try {
      out.push_back(split_assignment(v));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Pairs parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path.string());
  return parse(in);
}

double to_double(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad(key, value, "a number");
  return v;
}

std::int64_t to_int(std::string_view key, std::string_view value) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) bad(key, value, "an integer");
  return v;
}

std::uint64_t to_uint(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) bad(key, value, "an unsigned integer");
  return v;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  bad(key, value, "a boolean");
}

}  // namespace past::config
