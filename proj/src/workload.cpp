#include "past/workload.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <tuple>
#include <unordered_map>

#include "past/config.hpp"
#include "past/errors.hpp"
#include "past/rng.hpp"

namespace past {

namespace {

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1]");
}

// Index drawn with probability proportional to weights (cumulative, last = total).
std::size_t draw(Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

// Independent sub-streams per generation stage.
Rng stage_rng(std::uint64_t seed, std::uint64_t stage) {
  return Rng(seed * 0x9E3779B97F4A7C15ULL + stage * 0xBF58476D1CE4E5B9ULL + 1);
}

double clamp_into(double v, double lo, double hi) {
  // Keep strictly inside the universe's half-open cells.
  return std::clamp(v, lo, std::nextafter(hi, lo));
}

}  // namespace

void GenConfig::validate() const {
  if (n_locations == 0 || n_objects == 0 || n_areas == 0) throw DomainError("counts must be positive");
  if (n_areas > n_locations) throw DomainError("n_areas cannot exceed n_locations");
  if (period_days == 0 || visits_per_period == 0) throw DomainError("period_days and visits_per_period must be positive");
  require_probability(frequent_fraction, "frequent_fraction");
  require_probability(p_visit_frequent, "p_visit_frequent");
  require_probability(p_visit_infrequent, "p_visit_infrequent");
  if (n_clones > n_objects) throw DomainError("n_clones cannot exceed n_objects");
  if (!(area_radius >= 0.0) || !(zipf_exponent >= 0.0)) throw DomainError("area_radius and zipf_exponent must be >= 0");
  if (t0 < 0) throw DomainError("t0 must be non-negative");
  if (!(clone_velocity > 0.0)) throw DomainError("clone_velocity must be positive");
}

bool GenConfig::set(std::string_view key, std::string_view value) {
  if (key == "n_locations") n_locations = config::to_uint(key, value);
  else if (key == "n_objects") n_objects = config::to_uint(key, value);
  else if (key == "n_areas") n_areas = config::to_uint(key, value);
  else if (key == "frequent_fraction") frequent_fraction = config::to_double(key, value);
  else if (key == "p_visit_frequent") p_visit_frequent = config::to_double(key, value);
  else if (key == "p_visit_infrequent") p_visit_infrequent = config::to_double(key, value);
  else if (key == "period_days") period_days = config::to_uint(key, value);
  else if (key == "visits_per_period") visits_per_period = config::to_uint(key, value);
  else if (key == "n_clones") n_clones = config::to_uint(key, value);
  else if (key == "seed") seed = config::to_uint(key, value);
  else if (key == "area_radius") area_radius = config::to_double(key, value);
  else if (key == "zipf_exponent") zipf_exponent = config::to_double(key, value);
  else if (key == "t0") t0 = static_cast<Timestamp>(config::to_uint(key, value));
  else if (key == "clone_velocity") clone_velocity = config::to_double(key, value);
  else return false;
  return true;
}

std::vector<LocationVertex> gen_locations(const GenConfig& cfg, std::vector<Area>& areas) {
  cfg.validate();
  const auto& u = cfg.universe;
  Rng rng = stage_rng(cfg.seed, 1);

  areas.assign(cfg.n_areas, {});
  for (auto& a : areas) a.center = {rng.uniform(u.origin().x, u.max_x()), rng.uniform(u.origin().y, u.max_y())};

  // Zipf sizes: area i gets weight 1 / (i + 1)^s. Every area keeps at least
  // one location so that every area can host objects.
  std::vector<double> cumulative;
  double total = 0.0;
  for (std::uint64_t i = 0; i < cfg.n_areas; ++i) {
    total += 1.0 / std::pow(static_cast<double>(i + 1), cfg.zipf_exponent);
    cumulative.push_back(total);
  }
  std::vector<std::uint32_t> area_of(cfg.n_locations);
  for (std::uint64_t i = 0; i < cfg.n_locations; ++i) {
    area_of[i] = i < cfg.n_areas ? static_cast<std::uint32_t>(i) : static_cast<std::uint32_t>(draw(rng, cumulative));
  }

  std::vector<LocationVertex> out;
  out.reserve(cfg.n_locations);
  for (std::uint64_t i = 0; i < cfg.n_locations; ++i) {
    auto& area = areas[area_of[i]];
    const double x = clamp_into(rng.normal(area.center.x, cfg.area_radius), u.origin().x, u.max_x());
    const double y = clamp_into(rng.normal(area.center.y, cfg.area_radius), u.origin().y, u.max_y());
    const LocationId id = i + 1;
    out.push_back({id, x, y, {{"area", std::to_string(area_of[i])}}});
    area.locations.push_back(id);
  }
  return out;
}

std::vector<ObjectProfile> gen_objects(const GenConfig& cfg, const std::vector<Area>& areas) {
  Rng rng = stage_rng(cfg.seed, 2);
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& a : areas) {
    total += static_cast<double>(a.locations.size());
    cumulative.push_back(total);
  }
  if (total == 0.0) throw DomainError("no locations to assign objects to");
  std::vector<ObjectProfile> out;
  out.reserve(cfg.n_objects);
  for (std::uint64_t i = 0; i < cfg.n_objects; ++i) {
    const auto area = static_cast<std::uint32_t>(draw(rng, cumulative));
    out.push_back({kFirstObjectId + i, area, rng.bernoulli(cfg.frequent_fraction)});
  }
  return out;
}

std::vector<Edge> gen_edges(const GenConfig& cfg, const std::vector<Area>& areas,
                            const std::vector<ObjectProfile>& objects) {
  Rng rng = stage_rng(cfg.seed, 3);
  std::vector<Edge> out;
  for (const auto& o : objects) {
    const auto& locs = areas.at(o.area).locations;
    const double p = o.frequent ? cfg.p_visit_frequent : cfg.p_visit_infrequent;
    for (std::uint64_t w = 0; w < cfg.weeks(); ++w) {
      for (std::uint64_t v = 0; v < cfg.visits_per_period; ++v) {
        if (!rng.bernoulli(p)) continue;
        const LocationId loc = locs[rng.below(locs.size())];
        const Timestamp ts = cfg.t0 + static_cast<Timestamp>(w) * kWeekSeconds +
                             static_cast<Timestamp>(rng.below(static_cast<std::uint64_t>(kWeekSeconds)));
        out.push_back({o.id, ts, loc, {}});
      }
    }
  }
  std::sort(out.begin(), out.end(), storage_order_less);
  return out;
}

std::vector<ObjectId> inject_clones(const GenConfig& cfg, const std::vector<Area>& areas,
                                    const std::vector<ObjectProfile>& objects,
                                    const std::vector<LocationVertex>& locations, std::vector<Edge>& edges) {
  if (cfg.n_clones == 0) return {};
  if (cfg.n_clones > objects.size()) throw DomainError("more clones than objects");
  Rng rng = stage_rng(cfg.seed, 4);

  std::unordered_map<LocationId, Point> where;
  for (const auto& l : locations) where.emplace(l.id, l.point());
  std::unordered_map<ObjectId, std::vector<const Edge*>> by_object;
  for (const auto& e : edges) by_object[e.object_id].push_back(&e);

  std::vector<std::size_t> order(objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<Edge> added;
  std::vector<ObjectId> clones;
  const Timestamp span = static_cast<Timestamp>(cfg.weeks()) * kWeekSeconds;
  for (std::size_t k = 0; k < cfg.n_clones; ++k) {
    const auto& o = objects[order[k]];
    const auto& home = areas.at(o.area);

    std::size_t far = o.area;
    double best = -1.0;
    for (std::size_t a = 0; a < areas.size(); ++a) {
      if (areas[a].locations.empty()) continue;
      const double d = dist(home.center, areas[a].center);
      if (d > best) {
        best = d;
        far = a;
      }
    }

    // Anchor: an existing visit, or a fresh home visit when the object has none.
    Edge anchor;
    const auto it = by_object.find(o.id);
    if (it != by_object.end() && !it->second.empty()) {
      anchor = *it->second[rng.below(it->second.size())];
    } else {
      anchor = {o.id, cfg.t0 + static_cast<Timestamp>(rng.below(static_cast<std::uint64_t>(span))),
                home.locations[rng.below(home.locations.size())], {}};
      added.push_back(anchor);
    }
    const auto& far_locs = areas[far].locations;
    const LocationId target = far_locs[rng.below(far_locs.size())];
    const double d = dist(where.at(anchor.location_id), where.at(target));
    // Twice the allowed speed; the pair also qualifies when d rounds dt to 0.
    const auto dt = static_cast<Timestamp>(std::floor(d / (2.0 * cfg.clone_velocity)));
    added.push_back({o.id, anchor.timestamp + dt, target, {}});
    clones.push_back(o.id);
  }
  edges.insert(edges.end(), added.begin(), added.end());
  std::sort(edges.begin(), edges.end(), storage_order_less);
  std::sort(clones.begin(), clones.end());
  return clones;
}

Dataset generate(const GenConfig& cfg) {
  Dataset d;
  d.config = cfg;
  d.locations = gen_locations(cfg, d.areas);
  d.objects = gen_objects(cfg, d.areas);
  d.edges = gen_edges(cfg, d.areas, d.objects);
  d.clone_ids = inject_clones(cfg, d.areas, d.objects, d.locations, d.edges);
  return d;
}

void write_ground_truth(std::ostream& out, const Dataset& d) {
  out << "# clones\n";
  for (auto id : d.clone_ids) out << "clone " << id << '\n';
  std::map<ObjectId, std::uint64_t> counts;
  for (const auto& o : d.objects) counts[o.id] = 0;
  for (const auto& e : d.edges) ++counts[e.object_id];
  out << "# object edge_count\n";
  for (const auto& [id, n] : counts) out << "edges " << id << ' ' << n << '\n';
}

// ---------------------------------------------------------------------------

OracleGraph::OracleGraph(std::vector<Edge> edges, std::shared_ptr<const LocationCatalog> catalog)
    : edges_(std::move(edges)), catalog_(std::move(catalog)) {
  if (edges_.size() > kMaxEdges) {
    throw DomainError("oracle refuses " + std::to_string(edges_.size()) + " edges (cap " + std::to_string(kMaxEdges) + ")");
  }
  if (!catalog_) throw DomainError("oracle needs a location catalog");
}

std::vector<ObjectId> OracleGraph::objects() const {
  std::vector<ObjectId> out;
  for (const auto& e : edges_) out.push_back(e.object_id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

bool in_range(const Edge& e, Timestamp t_s, Timestamp t_e) { return e.timestamp >= t_s && e.timestamp <= t_e; }

std::vector<const Edge*> trace_of(const OracleGraph& g, ObjectId o, Timestamp t_s, Timestamp t_e) {
  std::vector<const Edge*> out;
  for (const auto& e : g.edges()) {
    if (e.object_id == o && in_range(e, t_s, t_e)) out.push_back(&e);
  }
  return out;
}

bool similar(const OracleGraph& g, const Edge& a, const Edge& b, const Thresholds& th) {
  const double dt = std::fabs(static_cast<double>(a.timestamp - b.timestamp));
  return dt <= th.th_time && dist(g.catalog().at(a.location_id), g.catalog().at(b.location_id)) <= th.th_dist;
}

}  // namespace

std::vector<OracleTraceEntry> oracle_q1(const OracleGraph& g, ObjectId o, Timestamp t_s, Timestamp t_e) {
  std::vector<OracleTraceEntry> out;
  for (const auto* e : trace_of(g, o, t_s, t_e)) out.push_back({e->object_id, e->timestamp, e->location_id});
  std::sort(out.begin(), out.end(), [](const OracleTraceEntry& a, const OracleTraceEntry& b) {
    return std::tie(a.timestamp, a.location_id) < std::tie(b.timestamp, b.location_id);
  });
  return out;
}

std::uint64_t oracle_q2(const OracleGraph& g, ObjectId o1, ObjectId o2, Timestamp t_s, Timestamp t_e,
                        const Thresholds& th) {
  const auto a = trace_of(g, o1, t_s, t_e);
  std::uint64_t n = 0;
  if (o1 == o2) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = i + 1; j < a.size(); ++j) n += similar(g, *a[i], *a[j], th);
    }
    return n;
  }
  const auto b = trace_of(g, o2, t_s, t_e);
  for (const auto* x : a) {
    for (const auto* y : b) n += similar(g, *x, *y, th);
  }
  return n;
}

std::vector<std::pair<ObjectId, std::uint64_t>> oracle_q3(const OracleGraph& g, ObjectId o, Timestamp t_s,
                                                          Timestamp t_e, const Thresholds& th) {
  const auto mine = trace_of(g, o, t_s, t_e);
  std::map<ObjectId, std::uint64_t> score;
  for (const auto& e : g.edges()) {
    if (e.object_id == o || !in_range(e, t_s, t_e)) continue;
    for (const auto* m : mine) {
      if (similar(g, *m, e, th)) ++score[e.object_id];
    }
  }
  std::vector<std::pair<ObjectId, std::uint64_t>> out(score.begin(), score.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::vector<ObjectId> oracle_q4(const OracleGraph& g, Timestamp t_s, Timestamp t_e, const Thresholds& th) {
  std::map<ObjectId, std::vector<const Edge*>> by_object;
  for (const auto& e : g.edges()) {
    if (in_range(e, t_s, t_e)) by_object[e.object_id].push_back(&e);
  }
  std::vector<ObjectId> out;
  for (const auto& [o, es] : by_object) {
    bool clone = false;
    for (std::size_t i = 0; i < es.size() && !clone; ++i) {
      for (std::size_t j = 0; j < es.size() && !clone; ++j) {
        if (i == j) continue;
        const double d = dist(g.catalog().at(es[i]->location_id), g.catalog().at(es[j]->location_id));
        const auto dt = es[i]->timestamp - es[j]->timestamp;
        clone = dt == 0 ? d > 0.0 : d / std::fabs(static_cast<double>(dt)) > th.th_velocity;
      }
    }
    if (clone) out.push_back(o);
  }
  return out;
}

}  // namespace past
