#pragma once

// Executors for the four query types over a cluster's block stores.
//
// Plans:
//   ST    scans the spatio-temporal partition of every worker
//   KT    scans key-temporal slots (one slot for trace lookups, all slots otherwise)
//   KTST  Q3 only: fetch the object's trace through its slot, then scan only the
//         regions within th_dist of a trace location, in the time ranges that
//         can hold a similar edge
//
// Every executor returns the same answer under every plan it supports; the
// plans differ in which blocks they read and what they ship between workers.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "past/cluster_plan.hpp"
#include "past/storage.hpp"

namespace past {

enum class QueryKind : std::uint8_t { Q1 = 1, Q2 = 2, Q3 = 3, Q4 = 4 };
enum class PlanKind : std::uint8_t { ST, KT, KTST };

std::string_view to_string(QueryKind q);  // "Q1" .. "Q4"
std::string_view to_string(PlanKind p);
// Accepts "st", "kt", "ktst" and "kt+st" (case-insensitive).
PlanKind parse_plan_kind(std::string_view s);
QueryKind parse_query_kind(std::string_view s);
bool plan_supported(QueryKind q, PlanKind p);
std::vector<PlanKind> supported_plans(QueryKind q);

struct TraceEntry {
  ObjectId object_id = 0;
  Timestamp timestamp = 0;
  LocationId location_id = 0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

// Trace order: timestamp, then location, then object.
bool trace_order_less(const TraceEntry& a, const TraceEntry& b);

struct SimilarityResult {
  ObjectId object_id = 0;
  std::uint64_t score = 0;

  friend bool operator==(const SimilarityResult&, const SimilarityResult&) = default;
};

// Fine grid used by the distance pre-filter. Cells are eta x eta squares
// anchored at `origin`.
struct FilterGrid {
  double eta = 1.0;
  Point origin{};

  FilterGrid() = default;
  explicit FilterGrid(double eta, Point origin = {});
  std::int64_t gx(double x) const;
  std::int64_t gy(double y) const;
};

// max(0, (|d_gx - d_gy| - 2) * eta) with d_gx, d_gy the absolute differences
// of the two points' fine-grid coordinates. Never exceeds dist(l1, l2).
double grid_distance_lower_bound(Point l1, Point l2, const FilterGrid& fg);

// [tr - d_T, tr + d_T] clipped at 0, d_T = ceil(th_time / TRU).
std::vector<TimeRangeIndex> candidate_time_ranges(TimeRangeIndex tr, double th_time, const TimeDiscretization& d);

// |t2 - t1| <= th_time and dist(l1, l2) <= th_dist. LookupError on unknown locations.
bool edge_similar(const Edge& e1, const Edge& e2, const Thresholds& th, const LocationCatalog& catalog);

// dist / |dt| > th_velocity; with dt = 0, any positive distance qualifies.
bool velocity_exceeds(double distance, Timestamp dt, const Thresholds& th);

struct QueryOptions {
  Thresholds thresholds{};
  std::optional<double> eta;  // default: region width / 64
  bool filters = true;        // grid lower bound + candidate time ranges
  bool parallel = false;      // one thread per worker sub-task
};

struct QueryStats {
  QueryKind query = QueryKind::Q1;
  PlanKind plan = PlanKind::ST;
  StoreStats store{};
  std::uint32_t workers_touched = 0;
  std::uint64_t regions_scanned = 0;  // KTST: the fan-out region count
  std::uint64_t pair_checks = 0;      // candidate pairs examined
  std::uint64_t dist_evals = 0;       // exact distance computations
  std::uint64_t bytes_shuffled = 0;   // bytes moved between workers
  double seconds = 0.0;
};

// Wire size of one (object, timestamp, location) entry.
inline constexpr std::uint64_t kTraceEntryBytes = 24;

class QueryEngine {
 public:
  // stores[w] must be worker w's store.
  QueryEngine(std::shared_ptr<const ClusterPlan> plan, std::vector<BlockStore*> stores, QueryOptions options = {});

  const ClusterPlan& plan() const { return *plan_; }
  const QueryOptions& options() const { return options_; }
  const FilterGrid& filter_grid() const { return fine_; }

  std::vector<TraceEntry> q1_trace(ObjectId o, Timestamp t_s, Timestamp t_e, PlanKind plan,
                                   QueryStats* stats = nullptr) const;
  // With o1 == o2, counts unordered pairs of distinct edges.
  std::uint64_t q2_similarity(ObjectId o1, ObjectId o2, Timestamp t_s, Timestamp t_e, PlanKind plan,
                              QueryStats* stats = nullptr) const;
  // Descending score, ties by ascending object id.
  std::vector<SimilarityResult> q3_similar_objects(ObjectId o, Timestamp t_s, Timestamp t_e, PlanKind plan,
                                                   QueryStats* stats = nullptr) const;
  // Ascending object ids.
  std::vector<ObjectId> q4_clones(Timestamp t_s, Timestamp t_e, PlanKind plan, QueryStats* stats = nullptr) const;

  // Regions intersecting the th_dist square around any trace location.
  std::vector<RegionId> relevant_regions(const std::vector<TraceEntry>& trace) const;

 private:
  struct Located;
  struct WorkerScan;

  std::vector<Located> scan_st(WorkerId w, Timestamp t_s, Timestamp t_e, StoreStats* sink) const;
  std::vector<Located> scan_kt(WorkerId w, std::span<const SlotId> slots, Timestamp t_s, Timestamp t_e,
                               StoreStats* sink) const;
  std::vector<TraceEntry> trace_via_slot(ObjectId o, Timestamp t_s, Timestamp t_e, QueryStats& st) const;
  Located locate(const TraceEntry& e) const;

  template <class Fn>
  void for_each_worker(const std::vector<WorkerId>& workers, Fn&& fn) const;

  std::shared_ptr<const ClusterPlan> plan_;
  std::vector<BlockStore*> stores_;
  QueryOptions options_;
  FilterGrid fine_;
};

}  // namespace past
