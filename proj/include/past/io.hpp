#pragma once

// Text formats shared by the CLI and the generator.
//   edges:     object_id,timestamp,location_id[,extra...]   (decimal integers)
//   locations: id,x,y
// Blank lines and lines starting with '#' are ignored.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "past/model.hpp"

namespace past::io {

Edge parse_edge_line(std::string_view line);
LocationVertex parse_location_line(std::string_view line);

std::vector<Edge> read_edges(std::istream& in);
std::vector<Edge> read_edges(const std::filesystem::path& path);
std::vector<LocationVertex> read_locations(std::istream& in);
std::vector<LocationVertex> read_locations(const std::filesystem::path& path);

void write_edges(std::ostream& out, std::span<const Edge> edges);
void write_edges(const std::filesystem::path& path, std::span<const Edge> edges);
void write_locations(std::ostream& out, std::span<const LocationVertex> locations);
void write_locations(const std::filesystem::path& path, std::span<const LocationVertex> locations);

// Round-trip exact decimal rendering of a double.
std::string format_double(double v);

}  // namespace past::io
