#pragma once

// Partition maps: spatial (region -> unit -> worker), key (object -> slot ->
// worker), replica placement, and the parameter bounds for the unit width b.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "past/model.hpp"

namespace past {

// Morton code: col bits on even positions, row bits on odd positions.
std::uint64_t z_encode(std::uint64_t col, std::uint64_t row);

struct RegionWeights {
  std::vector<std::uint64_t> weights;  // indexed by region id

  std::uint64_t total() const;
  std::uint64_t max() const;
};

RegionWeights region_weights(std::span<const LocationVertex> locations, const RegionGrid& grid);

// Result of the contiguous z-order greedy mapping.
struct ZOrderAssignment {
  std::vector<RegionId> z_order;            // regions sorted by z-code
  std::vector<WorkerId> worker_of_region;   // indexed by region id
  std::vector<std::uint64_t> machine_weight;
};

ZOrderAssignment unbounded_mapping(std::uint32_t workers, const RegionGrid& grid, const RegionWeights& w);

struct AssignmentStep {
  std::uint32_t unit = 0;
  WorkerId worker = 0;
  std::uint64_t unit_weight = 0;
  std::uint64_t load_before = 0;

  friend bool operator==(const AssignmentStep&, const AssignmentStep&) = default;
};

struct UnitAssignment {
  std::uint32_t b = 1;
  std::uint32_t units_x = 1;
  std::uint32_t units_y = 1;
  std::vector<std::uint32_t> unit_of_region;
  std::vector<std::uint64_t> unit_weight;
  std::vector<WorkerId> worker_of_unit;
  std::vector<std::uint64_t> machine_weight;
  std::vector<AssignmentStep> decision_log;  // one entry per unit, in assignment order

  std::uint32_t unit_count() const { return units_x * units_y; }
  WorkerId worker_of_region(RegionId r) const { return worker_of_unit[unit_of_region[r]]; }

  friend bool operator==(const UnitAssignment&, const UnitAssignment&) = default;
};

// Units of b x b regions (ragged at the right/top edge), heaviest first, each
// to the currently lightest worker. Ties: ascending unit id, lowest worker id.
UnitAssignment bounded_mapping(std::uint32_t workers, const RegionGrid& grid, const RegionWeights& w,
                               std::uint32_t b);

// Re-express a z-order assignment as b = 1 units so the cluster plan has a
// single routing table shape.
UnitAssignment as_unit_assignment(const ZOrderAssignment& z, const RegionGrid& grid, const RegionWeights& w);

// Replays a decision log and checks every step picked a minimally loaded
// worker. Returns the index of the first bad step, or nullopt.
std::optional<std::size_t> audit_decision_log(const UnitAssignment& a, std::uint32_t workers);

struct BoundParams {
  double epsilon1 = 0.001;
  double epsilon2 = 0.064;
  double alpha = 0.88;
  double distance = 100.0;      // D = TH_dist
  double region_width = 100.0;  // a
};

struct BRange {
  std::uint64_t b_min = 0;
  std::uint64_t b_max = 0;

  bool feasible() const { return b_min <= b_max; }
};

// b_min = ceil(D / (2a(1 - sqrt(alpha')))), alpha' = max(alpha, (2a-D)^2 / 4a^2)
// b_max = floor(sqrt(eps2 / eps1))
BRange b_range(const BoundParams& p);

// Lower bound on P[l_nr in U | l in U, dist(l, l_nr) <= D]:
//   1 - (4baD - D^2) / (4 b^2 a^2)
double sf_lower_bound(double b, double a, double d);

// splitmix64 finalizer; fixed so every process maps ids identically.
std::uint64_t mix64(std::uint64_t x);

SlotId slot_of(ObjectId object_id, std::uint32_t slot_bits);

class SlotMap {
 public:
  SlotMap(std::uint32_t slot_bits, std::uint32_t workers);

  std::uint32_t slot_bits() const { return bits_; }
  std::uint32_t workers() const { return workers_; }
  std::uint64_t slot_count() const { return std::uint64_t{1} << bits_; }

  WorkerId primary_of_slot(SlotId s) const { return s % workers_; }
  std::array<WorkerId, 3> replicas_of_slot(SlotId s) const;
  WorkerId primary_of_object(ObjectId o) const { return primary_of_slot(slot_of(o, bits_)); }

 private:
  std::uint32_t bits_;
  std::uint32_t workers_;
};

}  // namespace past
