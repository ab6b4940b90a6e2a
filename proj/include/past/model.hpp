#pragma once

// Core domain types of the spatio-temporal graph: location and object
// vertices, event edges, the region grid over the spatial universe and the
// time discretization used to cut edges into sub-partitions.

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "past/errors.hpp"

namespace past {

using LocationId = std::uint64_t;
using ObjectId = std::uint64_t;
using Timestamp = std::int64_t;  // seconds since epoch, >= 0
using TimeRangeIndex = std::int64_t;
using WorkerId = std::uint32_t;
using RegionId = std::uint32_t;
using SlotId = std::uint32_t;

using PropertyBag = std::map<std::string, std::string>;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct LocationVertex {
  LocationId id = 0;
  double x = 0.0;  // planar meters
  double y = 0.0;
  PropertyBag properties;

  Point point() const { return {x, y}; }
};

struct ObjectVertex {
  ObjectId id = 0;
  PropertyBag properties;
};

struct Edge {
  ObjectId object_id = 0;
  Timestamp timestamp = 0;
  LocationId location_id = 0;
  std::vector<std::uint64_t> extra;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Total order used inside storage blocks: (timestamp, object, location, extra).
inline bool storage_order_less(const Edge& a, const Edge& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.object_id != b.object_id) return a.object_id < b.object_id;
  if (a.location_id != b.location_id) return a.location_id < b.location_id;
  return a.extra < b.extra;
}

// Square-cell grid over the universe. Region id = row * cols + col.
class RegionGrid {
 public:
  RegionGrid() = default;
  RegionGrid(Point origin, double cell_width, std::uint32_t cols, std::uint32_t rows);

  Point origin() const { return origin_; }
  double cell_width() const { return cell_width_; }
  std::uint32_t cols() const { return cols_; }
  std::uint32_t rows() const { return rows_; }
  std::uint32_t region_count() const { return cols_ * rows_; }

  double max_x() const { return origin_.x + cell_width_ * cols_; }
  double max_y() const { return origin_.y + cell_width_ * rows_; }
  bool contains(Point p) const;

  RegionId region_id(std::uint32_t col, std::uint32_t row) const { return row * cols_ + col; }
  std::uint32_t col_of(RegionId r) const { return r % cols_; }
  std::uint32_t row_of(RegionId r) const { return r / cols_; }
  Point center(RegionId r) const;

  // Column / row holding a coordinate, clamped into [0, cols) / [0, rows).
  // Callers must have checked contains().
  std::uint32_t col_at(double x) const;
  std::uint32_t row_at(double y) const;

  friend bool operator==(const RegionGrid&, const RegionGrid&) = default;

 private:
  Point origin_{};
  double cell_width_ = 1.0;
  std::uint32_t cols_ = 1;
  std::uint32_t rows_ = 1;
};

struct TimeDiscretization {
  std::int64_t tru_seconds = 3600;

  void validate() const {
    if (tru_seconds <= 0) throw DomainError("TRU must be positive");
  }
};

struct Thresholds {
  double th_time = 7 * 3600.0;   // seconds
  double th_dist = 100.0;        // meters
  double th_velocity = 120000.0 / 3600.0;  // meters per second

  void validate() const;
};

double dist(Point a, Point b);
inline double dist(const LocationVertex& a, const LocationVertex& b) {
  return dist(a.point(), b.point());
}

// Half-open cells; a point on the universe's max edge falls in the last cell.
RegionId loc_to_region(Point p, const RegionGrid& grid);
inline RegionId loc_to_region(const LocationVertex& l, const RegionGrid& grid) {
  return loc_to_region(l.point(), grid);
}

TimeRangeIndex time_range_of(Timestamp ts, const TimeDiscretization& d);

// Location set V_L, replicated on every worker.
class LocationCatalog {
 public:
  LocationCatalog() = default;
  explicit LocationCatalog(std::vector<LocationVertex> locations);

  const LocationVertex& at(LocationId id) const;
  const LocationVertex* find(LocationId id) const;
  bool contains(LocationId id) const { return index_.count(id) != 0; }
  std::size_t size() const { return locations_.size(); }
  std::span<const LocationVertex> all() const { return locations_; }

 private:
  std::vector<LocationVertex> locations_;
  std::unordered_map<LocationId, std::size_t> index_;
};

}  // namespace past
