#pragma once

// ClusterPlan: the routing state every node agrees on. Built once by the
// coordinator from the location catalog, then shared read-only.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "past/model.hpp"
#include "past/partition.hpp"

namespace past {

enum class SpatialMapping : std::uint8_t { Bounded, Unbounded };

struct PlanParams {
  std::uint32_t workers = 4;
  std::uint32_t slot_bits = 10;
  RegionGrid grid{{0.0, 0.0}, 1000.0, 128, 128};
  std::uint32_t unit_width = 8;  // b
  TimeDiscretization time{3600};
  SpatialMapping mapping = SpatialMapping::Bounded;
};

struct EdgeRoute {
  WorkerId st = 0;                 // w_s: owner of the location's unit
  WorkerId kt = 0;                 // w_k: primary of the object's slot
  std::optional<WorkerId> extra;   // w_f: set iff w_s == w_k
  WorkerId st_replica = 0;         // second spatio-temporal copy
  RegionId region = 0;
  SlotId slot = 0;
};

class ClusterPlan {
 public:
  ClusterPlan() = default;

  static ClusterPlan build(const PlanParams& params, std::shared_ptr<const LocationCatalog> catalog);

  std::uint32_t workers() const { return workers_; }
  std::uint32_t slot_bits() const { return slot_bits_; }
  const RegionGrid& grid() const { return grid_; }
  const TimeDiscretization& time() const { return time_; }
  SpatialMapping mapping() const { return mapping_; }
  const UnitAssignment& units() const { return units_; }
  SlotMap slots() const { return SlotMap(slot_bits_, workers_); }
  const LocationCatalog& catalog() const { return *catalog_; }
  std::shared_ptr<const LocationCatalog> catalog_ptr() const { return catalog_; }

  WorkerId worker_of_region(RegionId r) const { return units_.worker_of_region(r); }
  WorkerId worker_of_slot(SlotId s) const { return s % workers_; }
  RegionId region_of_location(LocationId id) const;  // LookupError if unknown
  std::vector<RegionId> regions_of_worker(WorkerId w) const;
  std::vector<SlotId> slots_of_worker(WorkerId w) const;

  // Versioned text snapshot. Floats are written as hex literals so the
  // snapshot round-trips bit-exactly. The catalog is not part of it.
  std::string snapshot() const;
  static ClusterPlan from_snapshot(std::string_view text, std::shared_ptr<const LocationCatalog> catalog);

  friend bool same_routing(const ClusterPlan& a, const ClusterPlan& b);

 private:
  void index_locations();

  std::uint32_t workers_ = 1;
  std::uint32_t slot_bits_ = 0;
  RegionGrid grid_;
  TimeDiscretization time_;
  SpatialMapping mapping_ = SpatialMapping::Bounded;
  UnitAssignment units_;
  std::shared_ptr<const LocationCatalog> catalog_;
  std::unordered_map<LocationId, RegionId> region_of_location_;
};

bool same_routing(const ClusterPlan& a, const ClusterPlan& b);

EdgeRoute edge_route(const Edge& e, const ClusterPlan& plan);

}  // namespace past
