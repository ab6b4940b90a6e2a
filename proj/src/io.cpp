#include "past/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace past::io {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_int(std::string_view s, std::string_view what) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw FormatError("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return value;
}

double parse_double(std::string_view s, std::string_view what) {
  // std::from_chars for double is not available in libstdc++ 11.
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
    throw FormatError("bad " + std::string(what) + " '" + tmp + "'");
  }
  return v;
}

bool skip_line(std::string_view line) {
  while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
  return line.empty() || line.front() == '#' || line == "\r";
}

template <typename T, typename Parse>
std::vector<T> read_lines(std::istream& in, Parse parse) {
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    try {
      out.push_back(parse(line));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

}  // namespace

Edge parse_edge_line(std::string_view line) {
  auto fields = split_fields(line);
  if (fields.size() < 3) throw FormatError("edge needs object_id,timestamp,location_id");
  Edge e;
  e.object_id = parse_int<ObjectId>(fields[0], "object id");
  e.timestamp = parse_int<Timestamp>(fields[1], "timestamp");
  e.location_id = parse_int<LocationId>(fields[2], "location id");
  if (e.timestamp < 0) throw FormatError("negative timestamp");
  for (std::size_t i = 3; i < fields.size(); ++i) e.extra.push_back(parse_int<std::uint64_t>(fields[i], "extra"));
  return e;
}

LocationVertex parse_location_line(std::string_view line) {
  auto fields = split_fields(line);
  if (fields.size() != 3) throw FormatError("location needs id,x,y");
  LocationVertex l;
  l.id = parse_int<LocationId>(fields[0], "location id");
  l.x = parse_double(fields[1], "x");
  l.y = parse_double(fields[2], "y");
  return l;
}

std::vector<Edge> read_edges(std::istream& in) { return read_lines<Edge>(in, parse_edge_line); }

std::vector<Edge> read_edges(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_edges(in);
}

std::vector<LocationVertex> read_locations(std::istream& in) {
  return read_lines<LocationVertex>(in, parse_location_line);
}

std::vector<LocationVertex> read_locations(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_locations(in);
}

void write_edges(std::ostream& out, std::span<const Edge> edges) {
  std::string line;
  for (const auto& e : edges) {
    line.clear();
    line += std::to_string(e.object_id);
    line += ',';
    line += std::to_string(e.timestamp);
    line += ',';
    line += std::to_string(e.location_id);
    for (auto v : e.extra) {
      line += ',';
      line += std::to_string(v);
    }
    line += '\n';
    out << line;
  }
}

void write_edges(const std::filesystem::path& path, std::span<const Edge> edges) {
  auto out = open_out(path);
  write_edges(out, edges);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_locations(std::ostream& out, std::span<const LocationVertex> locations) {
  for (const auto& l : locations) {
    out << l.id << ',' << format_double(l.x) << ',' << format_double(l.y) << '\n';
  }
}

void write_locations(const std::filesystem::path& path, std::span<const LocationVertex> locations) {
  auto out = open_out(path);
  write_locations(out, locations);
}

}  // namespace past::io
