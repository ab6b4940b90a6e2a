#include "past/model.hpp"

#include <cmath>
#include <string>

namespace past {

RegionGrid::RegionGrid(Point origin, double cell_width, std::uint32_t cols, std::uint32_t rows)
    : origin_(origin), cell_width_(cell_width), cols_(cols), rows_(rows) {
  if (!(cell_width > 0.0) || !std::isfinite(cell_width)) throw DomainError("cell width must be positive");
  if (cols == 0 || rows == 0) throw DomainError("grid needs at least one column and one row");
  if (static_cast<std::uint64_t>(cols) * rows > 0xffffffffULL) throw DomainError("grid has too many regions");
}

bool RegionGrid::contains(Point p) const {
  return p.x >= origin_.x && p.y >= origin_.y && p.x <= max_x() && p.y <= max_y();
}

Point RegionGrid::center(RegionId r) const {
  return {origin_.x + (col_of(r) + 0.5) * cell_width_, origin_.y + (row_of(r) + 0.5) * cell_width_};
}

std::uint32_t RegionGrid::col_at(double x) const {
  const double c = std::floor((x - origin_.x) / cell_width_);
  if (c <= 0.0) return 0;
  if (c >= cols_ - 1) return cols_ - 1;
  return static_cast<std::uint32_t>(c);
}

std::uint32_t RegionGrid::row_at(double y) const {
  const double r = std::floor((y - origin_.y) / cell_width_);
  if (r <= 0.0) return 0;
  if (r >= rows_ - 1) return rows_ - 1;
  return static_cast<std::uint32_t>(r);
}

void Thresholds::validate() const {
  if (!(th_time > 0.0) || !(th_dist > 0.0) || !(th_velocity > 0.0)) {
    throw DomainError("thresholds must be strictly positive");
  }
}

double dist(Point a, Point b) { return std::hypot(b.x - a.x, b.y - a.y); }

RegionId loc_to_region(Point p, const RegionGrid& grid) {
  if (!grid.contains(p)) {
    throw DomainError("coordinate (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") is outside the universe");
  }
  return grid.region_id(grid.col_at(p.x), grid.row_at(p.y));
}

TimeRangeIndex time_range_of(Timestamp ts, const TimeDiscretization& d) {
  d.validate();
  if (ts < 0) throw DomainError("negative timestamp");
  return ts / d.tru_seconds;
}

LocationCatalog::LocationCatalog(std::vector<LocationVertex> locations) : locations_(std::move(locations)) {
  index_.reserve(locations_.size());
  for (std::size_t i = 0; i < locations_.size(); ++i) {
    if (!index_.emplace(locations_[i].id, i).second) {
      throw DomainError("duplicate location id " + std::to_string(locations_[i].id));
    }
  }
}

const LocationVertex& LocationCatalog::at(LocationId id) const {
  const auto* l = find(id);
  if (l == nullptr) throw LookupError("unknown location id " + std::to_string(id));
  return *l;
}

const LocationVertex* LocationCatalog::find(LocationId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &locations_[it->second];
}

}  // namespace past
