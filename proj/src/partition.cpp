#include "past/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace past {

namespace {

std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0xffffffffULL;
  v = (v | (v << 16)) & 0x0000ffff0000ffffULL;
  v = (v | (v << 8)) & 0x00ff00ff00ff00ffULL;
  v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0fULL;
  v = (v | (v << 2)) & 0x3333333333333333ULL;
  v = (v | (v << 1)) & 0x5555555555555555ULL;
  return v;
}

// Absorbs floating noise in closed forms whose exact value is an integer.
constexpr double kRoundingSlack = 1e-9;

}  // namespace

std::uint64_t z_encode(std::uint64_t col, std::uint64_t row) {
  if (col > 0xffffffffULL || row > 0xffffffffULL) throw DomainError("z_encode coordinate exceeds 32 bits");
  return spread_bits(col) | (spread_bits(row) << 1);
}

std::uint64_t RegionWeights::total() const { return std::accumulate(weights.begin(), weights.end(), std::uint64_t{0}); }

std::uint64_t RegionWeights::max() const {
  return weights.empty() ? 0 : *std::max_element(weights.begin(), weights.end());
}

RegionWeights region_weights(std::span<const LocationVertex> locations, const RegionGrid& grid) {
  RegionWeights w;
  w.weights.assign(grid.region_count(), 0);
  for (const auto& l : locations) ++w.weights[loc_to_region(l, grid)];
  return w;
}

ZOrderAssignment unbounded_mapping(std::uint32_t workers, const RegionGrid& grid, const RegionWeights& w) {
  if (workers == 0) throw DomainError("unbounded_mapping needs at least one worker");
  if (w.weights.size() != grid.region_count()) throw DomainError("weights do not match the grid");

  ZOrderAssignment out;
  out.z_order.resize(grid.region_count());
  std::iota(out.z_order.begin(), out.z_order.end(), RegionId{0});
  std::vector<std::uint64_t> codes(grid.region_count());
  for (RegionId r = 0; r < grid.region_count(); ++r) codes[r] = z_encode(grid.col_of(r), grid.row_of(r));
  std::sort(out.z_order.begin(), out.z_order.end(), [&](RegionId a, RegionId b) { return codes[a] < codes[b]; });

  out.worker_of_region.assign(grid.region_count(), 0);
  out.machine_weight.assign(workers, 0);

  // sum >= |V_L| / M, kept in integers: sum * M >= |V_L|.
  const std::uint64_t total = w.total();
  WorkerId next = 0;
  std::uint64_t sum = 0;
  std::vector<RegionId> rset;
  auto assign = [&] {
    // Only zero-weight tails can run past the last worker; they stay on it.
    const WorkerId target = std::min<WorkerId>(next, workers - 1);
    for (auto r : rset) out.worker_of_region[r] = target;
    out.machine_weight[target] += sum;
    ++next;
    sum = 0;
    rset.clear();
  };
  for (auto r : out.z_order) {
    sum += w.weights[r];
    rset.push_back(r);
    if (sum * workers >= total) assign();
  }
  if (!rset.empty()) assign();
  return out;
}

UnitAssignment bounded_mapping(std::uint32_t workers, const RegionGrid& grid, const RegionWeights& w,
                               std::uint32_t b) {
  if (workers == 0) throw DomainError("bounded_mapping needs at least one worker");
  if (b == 0) throw DomainError("unit width b must be at least 1");
  if (w.weights.size() != grid.region_count()) throw DomainError("weights do not match the grid");

  UnitAssignment a;
  a.b = b;
  a.units_x = (grid.cols() + b - 1) / b;
  a.units_y = (grid.rows() + b - 1) / b;
  a.unit_of_region.resize(grid.region_count());
  a.unit_weight.assign(a.unit_count(), 0);
  for (RegionId r = 0; r < grid.region_count(); ++r) {
    const std::uint32_t u = (grid.row_of(r) / b) * a.units_x + grid.col_of(r) / b;
    a.unit_of_region[r] = u;
    a.unit_weight[u] += w.weights[r];
  }

  std::vector<std::uint32_t> order(a.unit_count());
  std::iota(order.begin(), order.end(), 0U);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t x, std::uint32_t y) { return a.unit_weight[x] > a.unit_weight[y]; });

  a.worker_of_unit.assign(a.unit_count(), 0);
  a.machine_weight.assign(workers, 0);
  a.decision_log.reserve(a.unit_count());
  for (auto u : order) {
    // min_element returns the first minimum: lowest worker id on ties.
    auto it = std::min_element(a.machine_weight.begin(), a.machine_weight.end());
    const auto worker = static_cast<WorkerId>(it - a.machine_weight.begin());
    a.decision_log.push_back({u, worker, a.unit_weight[u], *it});
    a.worker_of_unit[u] = worker;
    *it += a.unit_weight[u];
  }
  return a;
}

UnitAssignment as_unit_assignment(const ZOrderAssignment& z, const RegionGrid& grid, const RegionWeights& w) {
  UnitAssignment a;
  a.b = 1;
  a.units_x = grid.cols();
  a.units_y = grid.rows();
  a.unit_of_region.resize(grid.region_count());
  std::iota(a.unit_of_region.begin(), a.unit_of_region.end(), 0U);
  a.unit_weight = w.weights;
  a.worker_of_unit = z.worker_of_region;
  a.machine_weight = z.machine_weight;
  return a;
}

std::optional<std::size_t> audit_decision_log(const UnitAssignment& a, std::uint32_t workers) {
  std::vector<std::uint64_t> loads(workers, 0);
  std::uint64_t previous = std::numeric_limits<std::uint64_t>::max();
  for (std::size_t i = 0; i < a.decision_log.size(); ++i) {
    const auto& step = a.decision_log[i];
    if (step.worker >= workers || step.unit >= a.unit_count()) return i;
    if (step.unit_weight != a.unit_weight[step.unit] || step.unit_weight > previous) return i;
    if (loads[step.worker] != step.load_before) return i;
    if (step.load_before != *std::min_element(loads.begin(), loads.end())) return i;
    if (a.worker_of_unit[step.unit] != step.worker) return i;
    loads[step.worker] += step.unit_weight;
    previous = step.unit_weight;
  }
  if (loads != a.machine_weight) return a.decision_log.size();
  return std::nullopt;
}

BRange b_range(const BoundParams& p) {
  if (!(p.epsilon1 > 0.0) || !(p.epsilon2 > 0.0)) throw DomainError("epsilon1 and epsilon2 must be positive");
  if (!(p.alpha > 0.0) || !(p.alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!(p.distance > 0.0) || !(p.region_width > 0.0)) throw DomainError("D and a must be positive");

  const double a = p.region_width;
  const double d = p.distance;
  const double alpha_prime = std::max(p.alpha, (2 * a - d) * (2 * a - d) / (4 * a * a));
  if (alpha_prime >= 1.0) throw DomainError("alpha' reached 1; no finite lower bound on b");

  const double lower = d / (2 * a * (1 - std::sqrt(alpha_prime)));
  const double upper = std::sqrt(p.epsilon2 / p.epsilon1);
  BRange r;
  r.b_min = static_cast<std::uint64_t>(std::max(1.0, std::ceil(lower - kRoundingSlack)));
  r.b_max = static_cast<std::uint64_t>(std::floor(upper + kRoundingSlack));
  return r;
}

double sf_lower_bound(double b, double a, double d) {
  if (!(b >= 1.0) || !(a > 0.0) || !(d >= 0.0)) throw DomainError("sf_lower_bound needs b >= 1, a > 0, D >= 0");
  if (b * a < d) throw DomainError("unit width b*a must be at least D");
  return 1.0 - (4 * b * a * d - d * d) / (4 * b * b * a * a);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SlotId slot_of(ObjectId object_id, std::uint32_t slot_bits) {
  if (slot_bits > 32) throw DomainError("slot bits must be at most 32");
  if (slot_bits == 0) return 0;
  const std::uint64_t mask = (std::uint64_t{1} << slot_bits) - 1;
  return static_cast<SlotId>(mix64(object_id) & mask);
}

SlotMap::SlotMap(std::uint32_t slot_bits, std::uint32_t workers) : bits_(slot_bits), workers_(workers) {
  if (slot_bits > 32) throw DomainError("slot bits must be at most 32");
  if (workers == 0) throw DomainError("slot map needs at least one worker");
}

std::array<WorkerId, 3> SlotMap::replicas_of_slot(SlotId s) const {
  const WorkerId w = primary_of_slot(s);
  return {w, (w + 1) % workers_, (w + 2) % workers_};
}

}  // namespace past
