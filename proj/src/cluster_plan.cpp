#include "past/cluster_plan.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace past {

namespace {

constexpr std::string_view kSnapshotMagic = "past-cluster-plan";
constexpr int kSnapshotVersion = 1;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw FormatError("bad float in plan snapshot: " + s);
  return v;
}

template <typename T>
void write_list(std::ostream& out, std::string_view name, const std::vector<T>& values) {
  out << name << ' ' << values.size();
  for (const auto& v : values) out << ' ' << v;
  out << '\n';
}

class SnapshotReader {
 public:
  explicit SnapshotReader(std::string_view text) : in_(std::string(text)) {}

  void expect(std::string_view word) {
    std::string got;
    if (!(in_ >> got) || got != word) {
      throw FormatError("plan snapshot: expected '" + std::string(word) + "', got '" + got + "'");
    }
  }

  template <typename T>
  T value() {
    T v{};
    if (!(in_ >> v)) throw FormatError("plan snapshot truncated");
    return v;
  }

  template <typename T>
  std::vector<T> list(std::string_view name) {
    expect(name);
    auto n = value<std::size_t>();
    std::vector<T> out(n);
    for (auto& v : out) v = value<T>();
    return out;
  }

 private:
  std::istringstream in_;
};

}  // namespace

ClusterPlan ClusterPlan::build(const PlanParams& params, std::shared_ptr<const LocationCatalog> catalog) {
  if (params.workers == 0) throw DomainError("cluster needs at least one worker");
  if (catalog == nullptr) throw DomainError("cluster plan needs a location catalog");
  params.time.validate();

  ClusterPlan plan;
  plan.workers_ = params.workers;
  plan.slot_bits_ = params.slot_bits;
  plan.grid_ = params.grid;
  plan.time_ = params.time;
  plan.mapping_ = params.mapping;
  plan.catalog_ = std::move(catalog);
  SlotMap check(params.slot_bits, params.workers);
  (void)check;

  auto weights = region_weights(plan.catalog_->all(), plan.grid_);
  if (params.mapping == SpatialMapping::Bounded) {
    plan.units_ = bounded_mapping(params.workers, plan.grid_, weights, params.unit_width);
  } else {
    plan.units_ = as_unit_assignment(unbounded_mapping(params.workers, plan.grid_, weights), plan.grid_, weights);
  }
  plan.index_locations();
  return plan;
}

void ClusterPlan::index_locations() {
  region_of_location_.clear();
  if (catalog_ == nullptr) return;
  region_of_location_.reserve(catalog_->size());
  for (const auto& l : catalog_->all()) region_of_location_.emplace(l.id, loc_to_region(l, grid_));
}

RegionId ClusterPlan::region_of_location(LocationId id) const {
  auto it = region_of_location_.find(id);
  if (it == region_of_location_.end()) throw LookupError("unknown location id " + std::to_string(id));
  return it->second;
}

std::vector<RegionId> ClusterPlan::regions_of_worker(WorkerId w) const {
  std::vector<RegionId> out;
  for (RegionId r = 0; r < grid_.region_count(); ++r) {
    if (worker_of_region(r) == w) out.push_back(r);
  }
  return out;
}

std::vector<SlotId> ClusterPlan::slots_of_worker(WorkerId w) const {
  std::vector<SlotId> out;
  const std::uint64_t n = std::uint64_t{1} << slot_bits_;
  for (std::uint64_t s = w; s < n; s += workers_) out.push_back(static_cast<SlotId>(s));
  return out;
}

std::string ClusterPlan::snapshot() const {
  std::ostringstream out;
  out << kSnapshotMagic << ' ' << kSnapshotVersion << '\n';
  out << "workers " << workers_ << '\n';
  out << "slot_bits " << slot_bits_ << '\n';
  out << "tru " << time_.tru_seconds << '\n';
  out << "mapping " << (mapping_ == SpatialMapping::Bounded ? "bounded" : "unbounded") << '\n';
  out << "grid " << hex_double(grid_.origin().x) << ' ' << hex_double(grid_.origin().y) << ' '
      << hex_double(grid_.cell_width()) << ' ' << grid_.cols() << ' ' << grid_.rows() << '\n';
  out << "b " << units_.b << '\n';
  out << "units " << units_.units_x << ' ' << units_.units_y << '\n';
  write_list(out, "unit_weight", units_.unit_weight);
  write_list(out, "worker_of_unit", units_.worker_of_unit);
  write_list(out, "machine_weight", units_.machine_weight);
  out << "decisions " << units_.decision_log.size() << '\n';
  for (const auto& s : units_.decision_log) {
    out << s.unit << ' ' << s.worker << ' ' << s.unit_weight << ' ' << s.load_before << '\n';
  }
  out << "end\n";
  return out.str();
}

ClusterPlan ClusterPlan::from_snapshot(std::string_view text, std::shared_ptr<const LocationCatalog> catalog) {
  SnapshotReader in(text);
  in.expect(kSnapshotMagic);
  if (in.value<int>() != kSnapshotVersion) throw FormatError("unsupported plan snapshot version");

  ClusterPlan plan;
  in.expect("workers");
  plan.workers_ = in.value<std::uint32_t>();
  in.expect("slot_bits");
  plan.slot_bits_ = in.value<std::uint32_t>();
  in.expect("tru");
  plan.time_.tru_seconds = in.value<std::int64_t>();
  in.expect("mapping");
  auto mapping = in.value<std::string>();
  if (mapping != "bounded" && mapping != "unbounded") throw FormatError("unknown mapping " + mapping);
  plan.mapping_ = mapping == "bounded" ? SpatialMapping::Bounded : SpatialMapping::Unbounded;
  in.expect("grid");
  const double ox = parse_hex_double(in.value<std::string>());
  const double oy = parse_hex_double(in.value<std::string>());
  const double a = parse_hex_double(in.value<std::string>());
  const auto cols = in.value<std::uint32_t>();
  const auto rows = in.value<std::uint32_t>();
  plan.grid_ = RegionGrid({ox, oy}, a, cols, rows);
  in.expect("b");
  plan.units_.b = in.value<std::uint32_t>();
  in.expect("units");
  plan.units_.units_x = in.value<std::uint32_t>();
  plan.units_.units_y = in.value<std::uint32_t>();
  plan.units_.unit_weight = in.list<std::uint64_t>("unit_weight");
  plan.units_.worker_of_unit = in.list<WorkerId>("worker_of_unit");
  plan.units_.machine_weight = in.list<std::uint64_t>("machine_weight");
  in.expect("decisions");
  auto n = in.value<std::size_t>();
  plan.units_.decision_log.resize(n);
  for (auto& s : plan.units_.decision_log) {
    s.unit = in.value<std::uint32_t>();
    s.worker = in.value<WorkerId>();
    s.unit_weight = in.value<std::uint64_t>();
    s.load_before = in.value<std::uint64_t>();
  }
  in.expect("end");

  const auto b = plan.units_.b;
  if (b == 0 || plan.workers_ == 0) throw FormatError("plan snapshot has b = 0 or no workers");
  if (plan.units_.units_x != (cols + b - 1) / b || plan.units_.units_y != (rows + b - 1) / b ||
      plan.units_.worker_of_unit.size() != plan.units_.unit_count() ||
      plan.units_.unit_weight.size() != plan.units_.unit_count() ||
      plan.units_.machine_weight.size() != plan.workers_) {
    throw FormatError("plan snapshot tables are inconsistent with the grid");
  }
  for (auto w : plan.units_.worker_of_unit) {
    if (w >= plan.workers_) throw FormatError("plan snapshot maps a unit to an unknown worker");
  }
  plan.units_.unit_of_region.resize(plan.grid_.region_count());
  for (RegionId r = 0; r < plan.grid_.region_count(); ++r) {
    plan.units_.unit_of_region[r] = (plan.grid_.row_of(r) / b) * plan.units_.units_x + plan.grid_.col_of(r) / b;
  }
  plan.catalog_ = std::move(catalog);
  plan.index_locations();
  return plan;
}

bool same_routing(const ClusterPlan& a, const ClusterPlan& b) {
  return a.workers_ == b.workers_ && a.slot_bits_ == b.slot_bits_ && a.grid_ == b.grid_ &&
         a.time_.tru_seconds == b.time_.tru_seconds && a.mapping_ == b.mapping_ && a.units_ == b.units_;
}

EdgeRoute edge_route(const Edge& e, const ClusterPlan& plan) {
  EdgeRoute r;
  r.region = plan.region_of_location(e.location_id);
  r.slot = slot_of(e.object_id, plan.slot_bits());
  r.st = plan.worker_of_region(r.region);
  r.kt = plan.worker_of_slot(r.slot);
  r.st_replica = (r.st + 1) % plan.workers();
  if (r.st == r.kt) r.extra = (r.st + 1) % plan.workers();
  return r;
}

}  // namespace past
