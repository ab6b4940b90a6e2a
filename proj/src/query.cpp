#include "past/query.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "past/errors.hpp"
#include "past/partition.hpp"

namespace past {

std::string_view to_string(QueryKind q) {
  switch (q) {
    case QueryKind::Q1: return "Q1";
    case QueryKind::Q2: return "Q2";
    case QueryKind::Q3: return "Q3";
    case QueryKind::Q4: return "Q4";
  }
  return "?";
}

std::string_view to_string(PlanKind p) {
  switch (p) {
    case PlanKind::ST: return "st";
    case PlanKind::KT: return "kt";
    case PlanKind::KTST: return "ktst";
  }
  return "?";
}

PlanKind parse_plan_kind(std::string_view s) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "st") return PlanKind::ST;
  if (lower == "kt") return PlanKind::KT;
  if (lower == "ktst" || lower == "kt+st") return PlanKind::KTST;
  throw DomainError("unknown plan kind '" + std::string(s) + "'");
}

QueryKind parse_query_kind(std::string_view s) {
  if (s == "1" || s == "q1" || s == "Q1") return QueryKind::Q1;
  if (s == "2" || s == "q2" || s == "Q2") return QueryKind::Q2;
  if (s == "3" || s == "q3" || s == "Q3") return QueryKind::Q3;
  if (s == "4" || s == "q4" || s == "Q4") return QueryKind::Q4;
  throw DomainError("unknown query '" + std::string(s) + "'");
}

bool plan_supported(QueryKind q, PlanKind p) { return p != PlanKind::KTST || q == QueryKind::Q3; }

std::vector<PlanKind> supported_plans(QueryKind q) {
  if (q == QueryKind::Q3) return {PlanKind::ST, PlanKind::KT, PlanKind::KTST};
  return {PlanKind::ST, PlanKind::KT};
}

bool trace_order_less(const TraceEntry& a, const TraceEntry& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.location_id != b.location_id) return a.location_id < b.location_id;
  return a.object_id < b.object_id;
}

FilterGrid::FilterGrid(double eta_, Point origin_) : eta(eta_), origin(origin_) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("filter grid eta must be positive");
}

std::int64_t FilterGrid::gx(double x) const { return static_cast<std::int64_t>(std::floor((x - origin.x) / eta)); }
std::int64_t FilterGrid::gy(double y) const { return static_cast<std::int64_t>(std::floor((y - origin.y) / eta)); }

namespace {

double lower_bound_from_cells(std::int64_t gx1, std::int64_t gy1, std::int64_t gx2, std::int64_t gy2, double eta) {
  const std::int64_t dgx = gx1 > gx2 ? gx1 - gx2 : gx2 - gx1;
  const std::int64_t dgy = gy1 > gy2 ? gy1 - gy2 : gy2 - gy1;
  const std::int64_t d = dgx > dgy ? dgx - dgy : dgy - dgx;
  return std::max<double>(0.0, static_cast<double>(d - 2) * eta);
}

}  // namespace

double grid_distance_lower_bound(Point l1, Point l2, const FilterGrid& fg) {
  if (!(fg.eta > 0.0)) throw DomainError("filter grid eta must be positive");
  return lower_bound_from_cells(fg.gx(l1.x), fg.gy(l1.y), fg.gx(l2.x), fg.gy(l2.y), fg.eta);
}

std::vector<TimeRangeIndex> candidate_time_ranges(TimeRangeIndex tr, double th_time, const TimeDiscretization& d) {
  d.validate();
  if (!(th_time >= 0.0)) throw DomainError("th_time must be non-negative");
  const auto d_t = static_cast<TimeRangeIndex>(std::ceil(th_time / static_cast<double>(d.tru_seconds)));
  std::vector<TimeRangeIndex> out;
  for (TimeRangeIndex k = std::max<TimeRangeIndex>(0, tr - d_t); k <= tr + d_t; ++k) out.push_back(k);
  return out;
}

bool edge_similar(const Edge& e1, const Edge& e2, const Thresholds& th, const LocationCatalog& catalog) {
  const auto& l1 = catalog.at(e1.location_id);
  const auto& l2 = catalog.at(e2.location_id);
  const auto dt = std::llabs(e2.timestamp - e1.timestamp);
  return static_cast<double>(dt) <= th.th_time && dist(l1, l2) <= th.th_dist;
}

bool velocity_exceeds(double distance, Timestamp dt, const Thresholds& th) {
  if (dt < 0) dt = -dt;
  if (dt == 0) return distance > 0.0;
  return distance / static_cast<double>(dt) > th.th_velocity;
}

// ---------------------------------------------------------------------------

struct QueryEngine::Located {
  TraceEntry e;
  Point p;
  TimeRangeIndex tr = 0;
  std::int64_t gx = 0;
  std::int64_t gy = 0;
};

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint32_t kQueryColumns[] = {column::kObject, column::kTimestamp, column::kLocation};

struct JoinCounters {
  std::uint64_t pair_checks = 0;
  std::uint64_t dist_evals = 0;

  JoinCounters& operator+=(const JoinCounters& o) {
    pair_checks += o.pair_checks;
    dist_evals += o.dist_evals;
    return *this;
  }
};

// Counts, for a probe edge, how many edges of a fixed trace are similar to it.
template <class L>
class TraceIndex {
 public:
  TraceIndex(const std::vector<L>& trace, const Thresholds& th, const TimeDiscretization& time,
             const FilterGrid& fine, bool filters)
      : trace_(trace), th_(th), time_(time), fine_(fine), filters_(filters) {
    if (filters_) {
      for (const auto& t : trace_) by_range_[t.tr].push_back(&t);
    }
  }

  std::uint64_t count(const L& c, JoinCounters& k) const {
    std::uint64_t n = 0;
    if (!filters_) {
      for (const auto& t : trace_) n += similar(t, c, k);
      return n;
    }
    for (auto tr : candidate_time_ranges(c.tr, th_.th_time, time_)) {
      auto it = by_range_.find(tr);
      if (it == by_range_.end()) continue;
      for (const auto* t : it->second) n += similar(*t, c, k);
    }
    return n;
  }

 private:
  bool similar(const L& a, const L& b, JoinCounters& k) const {
    ++k.pair_checks;
    const auto dt = std::llabs(a.e.timestamp - b.e.timestamp);
    if (static_cast<double>(dt) > th_.th_time) return false;
    if (filters_ && lower_bound_from_cells(a.gx, a.gy, b.gx, b.gy, fine_.eta) > th_.th_dist) return false;
    ++k.dist_evals;
    return dist(a.p, b.p) <= th_.th_dist;
  }

  const std::vector<L>& trace_;
  const Thresholds& th_;
  const TimeDiscretization& time_;
  const FilterGrid& fine_;
  bool filters_;
  std::unordered_map<TimeRangeIndex, std::vector<const L*>> by_range_;
};

TimeRangeIndex tr_floor(Timestamp t, const TimeDiscretization& d) { return time_range_of(std::max<Timestamp>(t, 0), d); }

void check_range(Timestamp t_s, Timestamp t_e) {
  if (t_s > t_e) throw DomainError("query range needs t_s <= t_e");
}

std::vector<std::uint64_t> widen(const std::vector<std::uint32_t>& v) { return {v.begin(), v.end()}; }

// Sorts and merges inclusive intervals in place.
void normalize(std::vector<TimeInterval>& v) {
  std::sort(v.begin(), v.end(), [](const TimeInterval& a, const TimeInterval& b) { return a.lo < b.lo; });
  std::vector<TimeInterval> out;
  for (const auto& i : v) {
    if (!out.empty() && i.lo <= out.back().hi + 1) {
      out.back().hi = std::max(out.back().hi, i.hi);
    } else {
      out.push_back(i);
    }
  }
  v = std::move(out);
}

class StatsTimer {
 public:
  StatsTimer(QueryStats& st, QueryStats* out, QueryKind q, PlanKind p) : st_(st), out_(out), start_(Clock::now()) {
    st_.query = q;
    st_.plan = p;
  }
  ~StatsTimer() {
    st_.seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    if (out_) *out_ = st_;
  }

 private:
  QueryStats& st_;
  QueryStats* out_;
  Clock::time_point start_;
};

}  // namespace

struct QueryEngine::WorkerScan {
  StoreStats store{};
  JoinCounters join{};
  std::vector<Located> edges;
};

QueryEngine::QueryEngine(std::shared_ptr<const ClusterPlan> plan, std::vector<BlockStore*> stores,
                         QueryOptions options)
    : plan_(std::move(plan)), stores_(std::move(stores)), options_(options) {
  if (!plan_) throw DomainError("query engine needs a cluster plan");
  if (stores_.size() != plan_->workers()) throw DomainError("one store per worker required");
  for (WorkerId w = 0; w < stores_.size(); ++w) {
    if (!stores_[w] || stores_[w]->node() != w) throw DomainError("store " + std::to_string(w) + " is not worker " + std::to_string(w) + "'s");
  }
  options_.thresholds.validate();
  const double eta = options_.eta.value_or(plan_->grid().cell_width() / 64.0);
  fine_ = FilterGrid(eta, plan_->grid().origin());
  options_.eta = eta;
}

template <class Fn>
void QueryEngine::for_each_worker(const std::vector<WorkerId>& workers, Fn&& fn) const {
  if (!options_.parallel || workers.size() < 2) {
    for (auto w : workers) fn(w);
    return;
  }
  std::vector<std::thread> threads;
  std::exception_ptr failure;
  std::mutex m;
  for (auto w : workers) {
    threads.emplace_back([&, w] {
      try {
        fn(w);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

QueryEngine::Located QueryEngine::locate(const TraceEntry& e) const {
  const auto& loc = plan_->catalog().at(e.location_id);
  const Point p = loc.point();
  return {e, p, time_range_of(e.timestamp, plan_->time()), fine_.gx(p.x), fine_.gy(p.y)};
}

namespace {

template <class Out>
void collect(const ColumnData& cols, Timestamp t_s, Timestamp t_e, Out&& out) {
  const auto& obj = cols.column(column::kObject);
  const auto& ts = cols.column(column::kTimestamp);
  const auto& loc = cols.column(column::kLocation);
  for (std::size_t i = 0; i < cols.edge_count; ++i) {
    const auto t = static_cast<Timestamp>(ts[i]);
    if (t < t_s || t > t_e) continue;
    out(TraceEntry{obj[i], t, loc[i]});
  }
}

}  // namespace

std::vector<QueryEngine::Located> QueryEngine::scan_st(WorkerId w, Timestamp t_s, Timestamp t_e,
                                                       StoreStats* sink) const {
  std::vector<Located> out;
  if (t_e < 0) return out;
  const auto regions = widen(plan_->regions_of_worker(w));
  stores_[w]->scan_range(
      Method::SpatioTemporal, regions, tr_floor(t_s, plan_->time()), tr_floor(t_e, plan_->time()), kQueryColumns,
      [&](const RowKey&, const ColumnData& c) { collect(c, t_s, t_e, [&](const TraceEntry& e) { out.push_back(locate(e)); }); },
      Table::Primary, sink);
  return out;
}

std::vector<QueryEngine::Located> QueryEngine::scan_kt(WorkerId w, std::span<const SlotId> slots, Timestamp t_s,
                                                       Timestamp t_e, StoreStats* sink) const {
  std::vector<Located> out;
  if (t_e < 0) return out;
  const std::vector<std::uint64_t> ids(slots.begin(), slots.end());
  stores_[w]->scan_range(
      Method::KeyTemporal, ids, tr_floor(t_s, plan_->time()), tr_floor(t_e, plan_->time()), kQueryColumns,
      [&](const RowKey&, const ColumnData& c) { collect(c, t_s, t_e, [&](const TraceEntry& e) { out.push_back(locate(e)); }); },
      Table::Primary, sink);
  return out;
}

namespace {

std::vector<WorkerId> all_workers(std::uint32_t n) {
  std::vector<WorkerId> v(n);
  for (WorkerId w = 0; w < n; ++w) v[w] = w;
  return v;
}

}  // namespace

std::vector<TraceEntry> QueryEngine::trace_via_slot(ObjectId o, Timestamp t_s, Timestamp t_e, QueryStats& st) const {
  const SlotId slot = slot_of(o, plan_->slot_bits());
  const WorkerId w = plan_->worker_of_slot(slot);
  std::vector<TraceEntry> out;
  for (const auto& l : scan_kt(w, {&slot, 1}, t_s, t_e, &st.store)) {
    if (l.e.object_id == o) out.push_back(l.e);
  }
  ++st.workers_touched;
  std::sort(out.begin(), out.end(), trace_order_less);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<TraceEntry> QueryEngine::q1_trace(ObjectId o, Timestamp t_s, Timestamp t_e, PlanKind plan,
                                              QueryStats* stats) const {
  check_range(t_s, t_e);
  if (!plan_supported(QueryKind::Q1, plan)) throw DomainError("Q1 supports the st and kt plans");
  QueryStats st;
  StatsTimer timer(st, stats, QueryKind::Q1, plan);
  if (plan == PlanKind::KT) return trace_via_slot(o, t_s, t_e, st);

  const auto workers = all_workers(plan_->workers());
  std::vector<WorkerScan> parts(workers.size());
  for_each_worker(workers, [&](WorkerId w) {
    for (auto& l : scan_st(w, t_s, t_e, &parts[w].store)) {
      if (l.e.object_id == o) parts[w].edges.push_back(l);
    }
  });
  std::vector<TraceEntry> out;
  for (const auto& p : parts) {
    st.store += p.store;
    for (const auto& l : p.edges) out.push_back(l.e);
    st.bytes_shuffled += p.edges.size() * kTraceEntryBytes;
  }
  st.workers_touched = plan_->workers();
  std::sort(out.begin(), out.end(), trace_order_less);
  return out;
}

std::uint64_t QueryEngine::q2_similarity(ObjectId o1, ObjectId o2, Timestamp t_s, Timestamp t_e, PlanKind plan,
                                         QueryStats* stats) const {
  check_range(t_s, t_e);
  if (!plan_supported(QueryKind::Q2, plan)) throw DomainError("Q2 supports the st and kt plans");
  QueryStats st;
  StatsTimer timer(st, stats, QueryKind::Q2, plan);

  std::vector<Located> t1, t2;
  if (plan == PlanKind::KT) {
    std::map<WorkerId, std::vector<SlotId>> wanted;
    for (ObjectId o : {o1, o2}) {
      const SlotId s = slot_of(o, plan_->slot_bits());
      auto& v = wanted[plan_->worker_of_slot(s)];
      if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    }
    for (const auto& [w, slots] : wanted) {
      for (auto& l : scan_kt(w, slots, t_s, t_e, &st.store)) {
        if (l.e.object_id == o1) t1.push_back(l);
        if (l.e.object_id == o2 && o1 != o2) t2.push_back(l);
      }
    }
    st.workers_touched = static_cast<std::uint32_t>(wanted.size());
  } else {
    const auto workers = all_workers(plan_->workers());
    std::vector<WorkerScan> parts(workers.size());
    std::vector<WorkerScan> parts2(workers.size());
    for_each_worker(workers, [&](WorkerId w) {
      for (auto& l : scan_st(w, t_s, t_e, &parts[w].store)) {
        if (l.e.object_id == o1) parts[w].edges.push_back(l);
        if (l.e.object_id == o2 && o1 != o2) parts2[w].edges.push_back(l);
      }
    });
    for (WorkerId w = 0; w < workers.size(); ++w) {
      st.store += parts[w].store;
      t1.insert(t1.end(), parts[w].edges.begin(), parts[w].edges.end());
      t2.insert(t2.end(), parts2[w].edges.begin(), parts2[w].edges.end());
    }
    st.workers_touched = plan_->workers();
  }
  st.bytes_shuffled += (t1.size() + t2.size()) * kTraceEntryBytes;

  TraceIndex<Located> index(t1, options_.thresholds, plan_->time(), fine_, options_.filters);
  JoinCounters k;
  std::uint64_t n = 0;
  if (o1 == o2) {
    // Ordered pairs including each edge with itself, folded to unordered distinct pairs.
    for (const auto& c : t1) n += index.count(c, k);
    n = (n - t1.size()) / 2;
  } else {
    for (const auto& c : t2) n += index.count(c, k);
  }
  st.pair_checks = k.pair_checks;
  st.dist_evals = k.dist_evals;
  return n;
}

namespace {

std::vector<SimilarityResult> rank(const std::unordered_map<ObjectId, std::uint64_t>& scores) {
  std::vector<SimilarityResult> out;
  for (const auto& [o, s] : scores) {
    if (s > 0) out.push_back({o, s});
  }
  std::sort(out.begin(), out.end(), [](const SimilarityResult& a, const SimilarityResult& b) {
    return a.score != b.score ? a.score > b.score : a.object_id < b.object_id;
  });
  return out;
}

}  // namespace

std::vector<RegionId> QueryEngine::relevant_regions(const std::vector<TraceEntry>& trace) const {
  const auto& g = plan_->grid();
  const double r = options_.thresholds.th_dist;
  std::vector<RegionId> out;
  for (const auto& e : trace) {
    const Point p = plan_->catalog().at(e.location_id).point();
    const auto c0 = g.col_at(std::max(p.x - r, g.origin().x));
    const auto c1 = g.col_at(std::min(p.x + r, g.max_x()));
    const auto r0 = g.row_at(std::max(p.y - r, g.origin().y));
    const auto r1 = g.row_at(std::min(p.y + r, g.max_y()));
    for (auto row = r0; row <= r1; ++row) {
      for (auto col = c0; col <= c1; ++col) out.push_back(g.region_id(col, row));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<SimilarityResult> QueryEngine::q3_similar_objects(ObjectId o, Timestamp t_s, Timestamp t_e,
                                                              PlanKind plan, QueryStats* stats) const {
  check_range(t_s, t_e);
  QueryStats st;
  StatsTimer timer(st, stats, QueryKind::Q3, plan);
  const auto& th = options_.thresholds;
  const auto& time = plan_->time();

  if (plan == PlanKind::KTST) {
    const auto trace = trace_via_slot(o, t_s, t_e, st);
    if (trace.empty()) return {};
    std::vector<Located> located;
    for (const auto& e : trace) located.push_back(locate(e));

    // Per region, the time ranges that can hold an edge similar to a trace edge located nearby.
    const auto tr_s = tr_floor(t_s, time), tr_e = tr_floor(t_e, time);
    std::map<RegionId, std::vector<TimeInterval>> wanted;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      TimeInterval span{tr_s, tr_e};
      if (options_.filters) {
        const auto c = candidate_time_ranges(located[i].tr, th.th_time, time);
        span = {std::max(c.front(), tr_s), std::min(c.back(), tr_e)};
      }
      if (span.lo > span.hi) continue;
      for (auto r : relevant_regions({trace[i]})) wanted[r].push_back(span);
    }
    std::map<WorkerId, std::vector<std::pair<RegionId, std::vector<TimeInterval>>>> by_worker;
    for (auto& [r, iv] : wanted) {
      normalize(iv);
      by_worker[plan_->worker_of_region(r)].emplace_back(r, iv);
    }
    st.regions_scanned = wanted.size();

    std::vector<WorkerId> workers;
    for (const auto& [w, v] : by_worker) workers.push_back(w);
    std::vector<WorkerScan> parts(plan_->workers());
    std::vector<std::unordered_map<ObjectId, std::uint64_t>> partial(plan_->workers());
    TraceIndex<Located> index(located, th, time, fine_, options_.filters);
    for_each_worker(workers, [&](WorkerId w) {
      auto& part = parts[w];
      for (const auto& [r, iv] : by_worker.at(w)) {
        const std::uint64_t pid = r;
        stores_[w]->scan(
            Method::SpatioTemporal, {&pid, 1}, iv, kQueryColumns,
            [&](const RowKey&, const ColumnData& c) {
              collect(c, t_s, t_e, [&](const TraceEntry& e) {
                if (e.object_id == o) return;
                if (const auto n = index.count(locate(e), part.join)) partial[w][e.object_id] += n;
              });
            },
            Table::Primary, &part.store);
      }
    });
    std::unordered_map<ObjectId, std::uint64_t> scores;
    for (auto w : workers) {
      st.store += parts[w].store;
      st.pair_checks += parts[w].join.pair_checks;
      st.dist_evals += parts[w].join.dist_evals;
      for (const auto& [obj, s] : partial[w]) scores[obj] += s;
      st.bytes_shuffled += (trace.size() + partial[w].size()) * kTraceEntryBytes;
    }
    st.workers_touched += static_cast<std::uint32_t>(workers.size());
    return rank(scores);
  }

  // ST and KT: every worker scans its whole partition for the range, the
  // object's edges are gathered and broadcast, and each worker joins locally.
  const auto workers = all_workers(plan_->workers());
  std::vector<WorkerScan> parts(workers.size());
  for_each_worker(workers, [&](WorkerId w) {
    if (plan == PlanKind::ST) {
      parts[w].edges = scan_st(w, t_s, t_e, &parts[w].store);
    } else {
      const auto slots = plan_->slots_of_worker(w);
      parts[w].edges = scan_kt(w, slots, t_s, t_e, &parts[w].store);
    }
  });
  std::vector<Located> trace;
  for (const auto& p : parts) {
    for (const auto& l : p.edges) {
      if (l.e.object_id == o) trace.push_back(l);
    }
  }
  std::sort(trace.begin(), trace.end(), [](const Located& a, const Located& b) { return trace_order_less(a.e, b.e); });
  st.workers_touched = plan_->workers();
  for (const auto& p : parts) st.store += p.store;
  if (trace.empty()) return {};

  TraceIndex<Located> index(trace, th, time, fine_, options_.filters);
  std::vector<std::unordered_map<ObjectId, std::uint64_t>> partial(workers.size());
  for_each_worker(workers, [&](WorkerId w) {
    for (const auto& l : parts[w].edges) {
      if (l.e.object_id == o) continue;
      if (const auto n = index.count(l, parts[w].join)) partial[w][l.e.object_id] += n;
    }
  });
  std::unordered_map<ObjectId, std::uint64_t> scores;
  for (auto w : workers) {
    st.pair_checks += parts[w].join.pair_checks;
    st.dist_evals += parts[w].join.dist_evals;
    for (const auto& [obj, s] : partial[w]) scores[obj] += s;
    st.bytes_shuffled += (trace.size() * (workers.size() - 1) / workers.size() + partial[w].size()) * kTraceEntryBytes;
  }
  return rank(scores);
}

std::vector<ObjectId> QueryEngine::q4_clones(Timestamp t_s, Timestamp t_e, PlanKind plan, QueryStats* stats) const {
  check_range(t_s, t_e);
  if (!plan_supported(QueryKind::Q4, plan)) throw DomainError("Q4 supports the st and kt plans");
  QueryStats st;
  StatsTimer timer(st, stats, QueryKind::Q4, plan);
  const auto& th = options_.thresholds;
  const auto workers = all_workers(plan_->workers());

  // Edges grouped by the worker that evaluates their object: the slot owner.
  std::vector<WorkerScan> parts(workers.size());
  std::vector<std::vector<std::vector<Located>>> routed(workers.size(), std::vector<std::vector<Located>>(workers.size()));
  for_each_worker(workers, [&](WorkerId w) {
    auto edges = plan == PlanKind::KT ? scan_kt(w, plan_->slots_of_worker(w), t_s, t_e, &parts[w].store)
                                      : scan_st(w, t_s, t_e, &parts[w].store);
    for (auto& l : edges) {
      routed[w][plan_->worker_of_slot(slot_of(l.e.object_id, plan_->slot_bits()))].push_back(std::move(l));
    }
  });
  for (WorkerId from = 0; from < workers.size(); ++from) {
    for (WorkerId to = 0; to < workers.size(); ++to) {
      if (from != to) st.bytes_shuffled += routed[from][to].size() * kTraceEntryBytes;
    }
  }

  std::vector<std::vector<ObjectId>> found(workers.size());
  for_each_worker(workers, [&](WorkerId w) {
    std::unordered_map<ObjectId, std::vector<const Located*>> per_object;
    for (WorkerId from = 0; from < workers.size(); ++from) {
      for (const auto& l : routed[from][w]) per_object[l.e.object_id].push_back(&l);
    }
    auto& k = parts[w].join;
    for (const auto& [obj, es] : per_object) {
      bool clone = false;
      for (std::size_t i = 0; i < es.size() && !clone; ++i) {
        for (std::size_t j = i + 1; j < es.size() && !clone; ++j) {
          ++k.pair_checks;
          ++k.dist_evals;
          clone = velocity_exceeds(dist(es[i]->p, es[j]->p), es[j]->e.timestamp - es[i]->e.timestamp, th);
        }
      }
      if (clone) found[w].push_back(obj);
    }
  });

  std::vector<ObjectId> out;
  for (auto w : workers) {
    st.store += parts[w].store;
    st.pair_checks += parts[w].join.pair_checks;
    st.dist_evals += parts[w].join.dist_evals;
    out.insert(out.end(), found[w].begin(), found[w].end());
  }
  st.workers_touched = plan_->workers();
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace past
