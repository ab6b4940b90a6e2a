#pragma once

// Synthetic shopper workload and the brute-force reference evaluator.
//
// Locations cluster around planted area centers whose sizes follow a Zipf
// law. Each object belongs to one area (chosen in proportion to the area's
// location count) and is either a frequent or an infrequent visitor. For
// every week and every visit opportunity, it visits a uniformly chosen
// location of its area at a uniform time in that week with its class's
// probability. Clones additionally visit the area farthest from home, twice
// as fast as the velocity threshold allows.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "past/model.hpp"

namespace past {

inline constexpr ObjectId kFirstObjectId = 1'000'000'000;
inline constexpr std::int64_t kWeekSeconds = 7 * 24 * 3600;

struct GenConfig {
  std::uint64_t n_locations = 10000;
  std::uint64_t n_objects = 1000;
  std::uint64_t n_areas = 100;
  double frequent_fraction = 0.4;
  double p_visit_frequent = 0.8;
  double p_visit_infrequent = 0.2;
  std::uint64_t period_days = 28;
  std::uint64_t visits_per_period = 1;  // visit opportunities per week
  std::uint64_t n_clones = 0;
  std::uint64_t seed = 1;

  // Universe and shape knobs.
  RegionGrid universe{{0.0, 0.0}, 1000.0, 128, 128};
  double area_radius = 500.0;  // std-dev of location offsets around a center, meters
  double zipf_exponent = 1.0;
  Timestamp t0 = 0;
  double clone_velocity = 120000.0 / 3600.0;  // threshold clones must beat, m/s

  void validate() const;
  std::uint64_t weeks() const { return (period_days + 6) / 7; }
  // Sets one field from its key=value spelling; false if the key is unknown.
  bool set(std::string_view key, std::string_view value);
};

struct Area {
  Point center;
  std::vector<LocationId> locations;
};

struct ObjectProfile {
  ObjectId id = 0;
  std::uint32_t area = 0;
  bool frequent = false;
};

struct Dataset {
  GenConfig config;
  std::vector<Area> areas;
  std::vector<LocationVertex> locations;
  std::vector<ObjectProfile> objects;
  std::vector<Edge> edges;           // storage order
  std::vector<ObjectId> clone_ids;   // ascending
};

// Centers and locations; fills `areas` with each area's location ids.
std::vector<LocationVertex> gen_locations(const GenConfig& cfg, std::vector<Area>& areas);
std::vector<ObjectProfile> gen_objects(const GenConfig& cfg, const std::vector<Area>& areas);
std::vector<Edge> gen_edges(const GenConfig& cfg, const std::vector<Area>& areas,
                            const std::vector<ObjectProfile>& objects);
// Adds one far-area visit per clone on top of its normal trace and returns the
// clone ids. Edges stay in storage order.
std::vector<ObjectId> inject_clones(const GenConfig& cfg, const std::vector<Area>& areas,
                                    const std::vector<ObjectProfile>& objects,
                                    const std::vector<LocationVertex>& locations, std::vector<Edge>& edges);

Dataset generate(const GenConfig& cfg);

// Ground truth: clone ids, then per-object edge counts.
void write_ground_truth(std::ostream& out, const Dataset& d);

// ---------------------------------------------------------------------------

// The whole graph in memory, for brute-force reference answers.
class OracleGraph {
 public:
  static constexpr std::size_t kMaxEdges = 200000;

  // DomainError if the graph exceeds kMaxEdges.
  OracleGraph(std::vector<Edge> edges, std::shared_ptr<const LocationCatalog> catalog);

  const std::vector<Edge>& edges() const { return edges_; }
  const LocationCatalog& catalog() const { return *catalog_; }
  std::vector<ObjectId> objects() const;

 private:
  std::vector<Edge> edges_;
  std::shared_ptr<const LocationCatalog> catalog_;
};

struct OracleTraceEntry {
  ObjectId object_id = 0;
  Timestamp timestamp = 0;
  LocationId location_id = 0;
  friend bool operator==(const OracleTraceEntry&, const OracleTraceEntry&) = default;
};

std::vector<OracleTraceEntry> oracle_q1(const OracleGraph& g, ObjectId o, Timestamp t_s, Timestamp t_e);
std::uint64_t oracle_q2(const OracleGraph& g, ObjectId o1, ObjectId o2, Timestamp t_s, Timestamp t_e,
                        const Thresholds& th);
// (object, score) by descending score then ascending id.
std::vector<std::pair<ObjectId, std::uint64_t>> oracle_q3(const OracleGraph& g, ObjectId o, Timestamp t_s,
                                                          Timestamp t_e, const Thresholds& th);
std::vector<ObjectId> oracle_q4(const OracleGraph& g, Timestamp t_s, Timestamp t_e, const Thresholds& th);

}  // namespace past
