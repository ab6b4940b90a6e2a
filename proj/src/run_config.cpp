#include "past/run_config.hpp"

#include <ostream>

#include "past/errors.hpp"
#include "past/io.hpp"

namespace past {

bool RunConfig::set(std::string_view key, std::string_view v) {
  using namespace config;
  auto grid = [&](Point origin, double width, std::uint32_t cols, std::uint32_t rows) {
    plan.grid = RegionGrid(origin, width, cols, rows);
  };
  const auto& g = plan.grid;
  if (key == "workers") plan.workers = static_cast<std::uint32_t>(to_uint(key, v));
  else if (key == "slot_bits") plan.slot_bits = static_cast<std::uint32_t>(to_uint(key, v));
  else if (key == "grid_cols") grid(g.origin(), g.cell_width(), static_cast<std::uint32_t>(to_uint(key, v)), g.rows());
  else if (key == "grid_rows") grid(g.origin(), g.cell_width(), g.cols(), static_cast<std::uint32_t>(to_uint(key, v)));
  else if (key == "region_width") grid(g.origin(), to_double(key, v), g.cols(), g.rows());
  else if (key == "origin_x") grid({to_double(key, v), g.origin().y}, g.cell_width(), g.cols(), g.rows());
  else if (key == "origin_y") grid({g.origin().x, to_double(key, v)}, g.cell_width(), g.cols(), g.rows());
  else if (key == "unit_width") plan.unit_width = static_cast<std::uint32_t>(to_uint(key, v));
  else if (key == "mapping") {
    if (v == "bounded") plan.mapping = SpatialMapping::Bounded;
    else if (v == "unbounded") plan.mapping = SpatialMapping::Unbounded;
    else throw DomainError("mapping must be bounded or unbounded");
  } else if (key == "tru") plan.time.tru_seconds = to_int(key, v);
  else if (key == "m") m = static_cast<std::uint32_t>(to_uint(key, v));
  else if (key == "t_delay") t_delay = to_int(key, v);
  else if (key == "th_time") thresholds.th_time = to_double(key, v);
  else if (key == "th_dist") thresholds.th_dist = to_double(key, v);
  else if (key == "th_velocity") thresholds.th_velocity = to_double(key, v);
  else if (key == "eta") eta = to_double(key, v);
  else if (key == "filters") filters = to_bool(key, v);
  else if (key == "layout") block.layout = parse_layout(v);
  else if (key == "codec") block.codec = parse_codec(v);
  else if (key == "delta") block.delta_timestamps = to_bool(key, v);
  else if (key == "extra_columns") extra_columns = static_cast<std::uint32_t>(to_uint(key, v));
  else if (key == "inbuf_capacity") inbuf_capacity = to_uint(key, v);
  else if (key == "seed") seed = to_uint(key, v);
  else if (key == "transport") {
    if (v == "deterministic") transport = TransportMode::Deterministic;
    else if (v == "socket") transport = TransportMode::Socket;
    else throw DomainError("transport must be deterministic or socket");
  } else return gen.set(key, v);
  return true;
}

void RunConfig::apply(const config::Pairs& pairs) {
  for (const auto& [k, v] : pairs) {
    if (!set(k, v)) throw DomainError("unknown config key '" + k + "'");
  }
}

void RunConfig::validate() const {
  if (plan.workers == 0) throw DomainError("workers must be positive");
  if (plan.slot_bits == 0 || plan.slot_bits > 24) throw DomainError("slot_bits must lie in 1..24");
  if (plan.unit_width == 0) throw DomainError("unit_width must be positive");
  plan.time.validate();
  if (m == 0) throw DomainError("m must be positive");
  if (t_delay < 0) throw DomainError("t_delay must be non-negative");
  thresholds.validate();
  if (eta && !(*eta > 0.0)) throw DomainError("eta must be positive");
  if (inbuf_capacity == 0) throw DomainError("inbuf_capacity must be positive");
  generator().validate();
}

GenConfig RunConfig::generator() const {
  GenConfig g = gen;
  g.universe = plan.grid;
  g.seed = seed;
  g.clone_velocity = thresholds.th_velocity;
  return g;
}

QueryOptions RunConfig::query_options() const {
  QueryOptions q;
  q.thresholds = thresholds;
  q.eta = eta;
  q.filters = filters;
  return q;
}

WorkerOptions RunConfig::worker_options() const {
  WorkerOptions w;
  w.inbuf_capacity = inbuf_capacity;
  w.extra_columns = extra_columns;
  w.block = block;
  return w;
}

CoordinatorOptions RunConfig::coordinator_options() const {
  CoordinatorOptions c;
  c.m = m;
  c.t_delay = t_delay;
  return c;
}

void RunConfig::write(std::ostream& out) const {
  using io::format_double;
  const auto& g = plan.grid;
  out << "workers = " << plan.workers << '\n'
      << "slot_bits = " << plan.slot_bits << '\n'
      << "grid_cols = " << g.cols() << '\n'
      << "grid_rows = " << g.rows() << '\n'
      << "region_width = " << format_double(g.cell_width()) << '\n'
      << "origin_x = " << format_double(g.origin().x) << '\n'
      << "origin_y = " << format_double(g.origin().y) << '\n'
      << "unit_width = " << plan.unit_width << '\n'
      << "mapping = " << (plan.mapping == SpatialMapping::Bounded ? "bounded" : "unbounded") << '\n'
      << "tru = " << plan.time.tru_seconds << '\n'
      << "m = " << m << '\n'
      << "t_delay = " << t_delay << '\n'
      << "th_time = " << format_double(thresholds.th_time) << '\n'
      << "th_dist = " << format_double(thresholds.th_dist) << '\n'
      << "th_velocity = " << format_double(thresholds.th_velocity) << '\n';
  if (eta) out << "eta = " << format_double(*eta) << '\n';
  out << "filters = " << (filters ? "true" : "false") << '\n'
      << "layout = " << static_cast<char>(block.layout) << '\n'
      << "codec = " << codec_for(block.codec).name() << '\n'
      << "delta = " << (block.delta_timestamps ? "true" : "false") << '\n'
      << "extra_columns = " << extra_columns << '\n'
      << "inbuf_capacity = " << inbuf_capacity << '\n'
      << "seed = " << seed << '\n'
      << "transport = " << (transport == TransportMode::Deterministic ? "deterministic" : "socket") << '\n'
      << "n_locations = " << gen.n_locations << '\n'
      << "n_objects = " << gen.n_objects << '\n'
      << "n_areas = " << gen.n_areas << '\n'
      << "frequent_fraction = " << format_double(gen.frequent_fraction) << '\n'
      << "p_visit_frequent = " << format_double(gen.p_visit_frequent) << '\n'
      << "p_visit_infrequent = " << format_double(gen.p_visit_infrequent) << '\n'
      << "period_days = " << gen.period_days << '\n'
      << "visits_per_period = " << gen.visits_per_period << '\n'
      << "n_clones = " << gen.n_clones << '\n'
      << "area_radius = " << format_double(gen.area_radius) << '\n'
      << "zipf_exponent = " << format_double(gen.zipf_exponent) << '\n'
      << "t0 = " << gen.t0 << '\n';
}

}  // namespace past
