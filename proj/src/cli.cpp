#include "past/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "past/cluster_plan.hpp"
#include "past/errors.hpp"
#include "past/io.hpp"
#include "past/optimizer.hpp"
#include "past/query.hpp"
#include "past/run_config.hpp"
#include "past/socket_transport.hpp"
#include "past/workload.hpp"

namespace past {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string data_dir = ".";
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App& sub, Common& c, const char* dir_flags = "--data-dir,-d") {
  sub.add_option(dir_flags, c.data_dir, "Data directory")->capture_default_str();
  sub.add_option("--config", c.config_file, "Flat key = value config file");
  sub.add_option("--set", c.sets, "Config override KEY=VALUE (repeatable)");
  sub.add_option("--seed", c.seed, "Seed for every stochastic component");
}

fs::path store_dir(const Common& c) { return fs::path(c.data_dir) / "store"; }

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

// Later sources win: base file, --config, --set, --seed.
RunConfig load_config(const Common& c, const fs::path& base) try {
  RunConfig rc;
  if (!base.empty() && fs::is_regular_file(base)) rc.apply(config::parse_file(base));
  if (!c.config_file.empty()) {
    require_file(c.config_file, "config file");
    rc.apply(config::parse_file(c.config_file));
  }
  for (const auto& s : c.sets) {
    const auto [k, v] = config::split_assignment(s);
    if (!rc.set(k, v)) throw DomainError("unknown config key '" + k + "'");
  }
  if (c.seed) rc.seed = *c.seed;
  return rc;
} catch (const FormatError& e) {
  throw UsageError(e.what());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw StoreError("cannot write " + p.string());
}

struct OpenStore {
  RunConfig rc;
  std::shared_ptr<const LocationCatalog> catalog;
  std::shared_ptr<const ClusterPlan> plan;
  std::unique_ptr<Cluster> cluster;
};

OpenStore open_store(const Common& c) {
  const fs::path dir = store_dir(c);
  if (!fs::is_regular_file(dir / "plan.snapshot")) {
    throw UsageError("no ingested store under " + dir.string() + " (run `past ingest` first)");
  }
  OpenStore s;
  s.rc = load_config(c, dir / "run.conf");
  s.rc.validate();
  require_file(dir / "locations.txt", "store location catalog");
  s.catalog = std::make_shared<LocationCatalog>(io::read_locations(dir / "locations.txt"));
  s.plan = std::make_shared<ClusterPlan>(ClusterPlan::from_snapshot(read_text(dir / "plan.snapshot"), s.catalog));
  s.cluster = std::make_unique<Cluster>(s.plan, dir, s.rc.worker_options());
  return s;
}

// ---------------------------------------------------------------------------
// Query answers as CSV rows, shared by query, verify and bench.

struct QuerySpec {
  QueryKind q = QueryKind::Q1;
  ObjectId o1 = 0;
  ObjectId o2 = 0;
  Timestamp from = 0;
  Timestamp to = 0;
};

std::string_view columns(QueryKind q) {
  switch (q) {
    case QueryKind::Q1: return "object_id,timestamp,location_id";
    case QueryKind::Q2: return "object1,object2,score";
    case QueryKind::Q3: return "object_id,score";
    case QueryKind::Q4: return "object_id";
  }
  return "";
}

std::string describe(const QuerySpec& s) {
  std::ostringstream o;
  if (s.q != QueryKind::Q4) o << "object=" << s.o1 << ' ';
  if (s.q == QueryKind::Q2) o << "object2=" << s.o2 << ' ';
  o << "range=[" << s.from << ',' << s.to << ']';
  return o.str();
}

std::vector<std::string> engine_rows(const QueryEngine& eng, const QuerySpec& s, PlanKind plan, QueryStats* st) {
  std::vector<std::string> rows;
  switch (s.q) {
    case QueryKind::Q1:
      for (const auto& e : eng.q1_trace(s.o1, s.from, s.to, plan, st)) {
        rows.push_back(std::to_string(e.object_id) + ',' + std::to_string(e.timestamp) + ',' +
                       std::to_string(e.location_id));
      }
      break;
    case QueryKind::Q2:
      rows.push_back(std::to_string(s.o1) + ',' + std::to_string(s.o2) + ',' +
                     std::to_string(eng.q2_similarity(s.o1, s.o2, s.from, s.to, plan, st)));
      break;
    case QueryKind::Q3:
      for (const auto& r : eng.q3_similar_objects(s.o1, s.from, s.to, plan, st)) {
        rows.push_back(std::to_string(r.object_id) + ',' + std::to_string(r.score));
      }
      break;
    case QueryKind::Q4:
      for (auto o : eng.q4_clones(s.from, s.to, plan, st)) rows.push_back(std::to_string(o));
      break;
  }
  return rows;
}

std::vector<std::string> oracle_rows(const OracleGraph& g, const QuerySpec& s, const Thresholds& th) {
  std::vector<std::string> rows;
  switch (s.q) {
    case QueryKind::Q1:
      for (const auto& e : oracle_q1(g, s.o1, s.from, s.to)) {
        rows.push_back(std::to_string(e.object_id) + ',' + std::to_string(e.timestamp) + ',' +
                       std::to_string(e.location_id));
      }
      break;
    case QueryKind::Q2:
      rows.push_back(std::to_string(s.o1) + ',' + std::to_string(s.o2) + ',' +
                     std::to_string(oracle_q2(g, s.o1, s.o2, s.from, s.to, th)));
      break;
    case QueryKind::Q3:
      for (const auto& [o, score] : oracle_q3(g, s.o1, s.from, s.to, th)) {
        rows.push_back(std::to_string(o) + ',' + std::to_string(score));
      }
      break;
    case QueryKind::Q4:
      for (auto o : oracle_q4(g, s.from, s.to, th)) rows.push_back(std::to_string(o));
      break;
  }
  return rows;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void accumulate(QueryStats& into, const QueryStats& s) {
  into.query = s.query;
  into.plan = s.plan;
  into.store += s.store;
  into.workers_touched += s.workers_touched;
  into.regions_scanned += s.regions_scanned;
  into.pair_checks += s.pair_checks;
  into.dist_evals += s.dist_evals;
  into.bytes_shuffled += s.bytes_shuffled;
  into.seconds += s.seconds;
}

PlanKind choose_plan(const QueryEngine& eng, const CostParams& cp, const QuerySpec& s, std::optional<double>& x) {
  const auto nt = n_t(s.from, s.to, eng.plan().time());
  if (s.q == QueryKind::Q3) {
    x = static_cast<double>(eng.relevant_regions(eng.q1_trace(s.o1, s.from, s.to, PlanKind::KT)).size());
  }
  return select_plan(s.q, cp, nt, x);
}

CostParams cost_params(const OpenStore& s, const std::string& profile) {
  auto cp = CostParams::for_store(*s.plan, s.cluster->stores());
  if (!profile.empty()) {
    require_file(profile, "cost profile");
    std::ifstream in(profile);
    cp = read_profile(in, cp);
  }
  return cp;
}

// Distinct object ids and the time span of an edge file.
struct EdgeSummary {
  std::vector<ObjectId> objects;
  Timestamp t_min = 0;
  Timestamp t_max = 0;
};

EdgeSummary summarize(std::span<const Edge> edges) {
  EdgeSummary s;
  std::set<ObjectId> ids;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    ids.insert(edges[i].object_id);
    s.t_min = i == 0 ? edges[i].timestamp : std::min(s.t_min, edges[i].timestamp);
    s.t_max = i == 0 ? edges[i].timestamp : std::max(s.t_max, edges[i].timestamp);
  }
  s.objects.assign(ids.begin(), ids.end());
  return s;
}

std::vector<ObjectId> sample_objects(std::vector<ObjectId> ids, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min(k, ids.size()));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<QuerySpec> specs_for(QueryKind q, const std::vector<ObjectId>& objects, Timestamp from, Timestamp to) {
  std::vector<QuerySpec> out;
  if (q == QueryKind::Q4) {
    out.push_back({q, 0, 0, from, to});
    return out;
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    QuerySpec s{q, objects[i], objects[i], from, to};
    if (q == QueryKind::Q2 && objects.size() > 1) s.o2 = objects[(i + 1) % objects.size()];
    out.push_back(s);
  }
  if (q == QueryKind::Q2 && objects.size() > 1) out.push_back({q, objects[0], objects[0], from, to});
  return out;
}

std::vector<QueryKind> parse_query_list(const std::string& list) {
  std::vector<QueryKind> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(parse_query_kind(item));
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("empty query list");
  return out;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  Common c;
};

int cmd_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = load_config(a.c, {});
  rc.validate();
  const Dataset d = generate(rc.generator());
  const fs::path dir(a.c.data_dir);
  fs::create_directories(dir);
  io::write_locations(dir / "locations.txt", d.locations);
  io::write_edges(dir / "edges.txt", d.edges);
  {
    std::ofstream gt(dir / "ground_truth.txt");
    write_ground_truth(gt, d);
    if (!gt) throw StoreError("cannot write ground truth");
  }
  std::ostringstream conf;
  rc.write(conf);
  write_text(dir / "run.conf", conf.str());
  out << "locations,objects,edges,clones\n"
      << d.locations.size() << ',' << d.objects.size() << ',' << d.edges.size() << ',' << d.clone_ids.size() << '\n';
  err << "wrote " << dir.string() << "/{locations.txt,edges.txt,ground_truth.txt,run.conf}\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  Common c;
  std::string input;
  std::string locations;
  std::optional<std::uint32_t> workers;
  std::optional<std::uint32_t> m;
  std::optional<std::int64_t> tru;
  std::optional<std::string> transport;
  std::uint64_t rounds = 0;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path data(a.c.data_dir);
  RunConfig rc = load_config(a.c, data / "run.conf");
  if (a.workers) rc.plan.workers = *a.workers;
  if (a.m) rc.m = *a.m;
  if (a.tru) rc.plan.time.tru_seconds = *a.tru;
  if (a.transport) rc.set("transport", *a.transport);
  rc.validate();

  const fs::path input = a.input.empty() ? data / "edges.txt" : fs::path(a.input);
  const fs::path locs = a.locations.empty() ? data / "locations.txt" : fs::path(a.locations);
  require_file(input, "edge file");
  require_file(locs, "location catalog");
  auto catalog = std::make_shared<LocationCatalog>(io::read_locations(locs));
  const auto edges = io::read_edges(input);
  auto plan = std::make_shared<ClusterPlan>(ClusterPlan::build(rc.plan, catalog));

  const fs::path dir = store_dir(a.c);
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text(dir / "plan.snapshot", plan->snapshot());
  io::write_locations(dir / "locations.txt", catalog->all());
  std::ostringstream conf;
  rc.write(conf);
  write_text(dir / "run.conf", conf.str());

  Cluster cluster(plan, dir, rc.worker_options());
  CoordinatorOptions opt = rc.coordinator_options();
  opt.rounds = a.rounds > 0 ? a.rounds : rounds_to_cover(edges, rc.plan.time.tru_seconds, rc.m);

  std::vector<RoundLogEntry> log;
  std::uint64_t undelivered = 0;
  auto drive = [&](ClusterTransport& t) {
    Coordinator coord(t, plan->time());
    log = coord.run(edges, opt);
    undelivered = coord.undelivered();
  };
  if (rc.transport == TransportMode::Socket) {
    SocketOptions so;
    so.seed = rc.seed;
    SocketTransport t(cluster, so);
    drive(t);
  } else {
    InProcessOptions io_opt;
    io_opt.seed = rc.seed;
    InProcessTransport t(cluster, io_opt);
    drive(t);
  }

  std::ofstream jsonl(dir / "rounds.jsonl", std::ios::trunc);
  bool failed = false;
  out << "round,t_start,t_end,status,delivered,routed,late,dead_letters,bytes_shuffled,blocks_written,"
         "busy_responses,wall_seconds,partition_makespan,shuffle_makespan\n";
  for (const auto& r : log) {
    jsonl << r.to_json() << '\n';
    failed |= r.status != RoundStatus::Complete;
    out << r.round << ',' << r.t_start << ',' << r.t_end << ',' << to_string(r.status) << ',' << r.delivered << ','
        << r.routed << ',' << r.late << ',' << r.dead_letters << ',' << r.bytes_shuffled << ',' << r.blocks_written
        << ',' << r.busy_responses << ',' << io::format_double(r.wall_seconds) << ','
        << io::format_double(r.partition_makespan) << ',' << io::format_double(r.shuffle_makespan) << '\n';
    if (!r.error.empty()) err << "round " << r.round << ": " << r.error << '\n';
  }
  err << "ingested " << edges.size() << " edges into " << plan->workers() << " workers over " << log.size()
      << " rounds; undelivered " << undelivered << '\n';
  return failed ? kExitMismatch : kExitOk;
}

// ---------------------------------------------------------------------------
// query

struct QueryArgs {
  Common c;
  std::string q;
  std::optional<ObjectId> object;
  std::optional<ObjectId> object2;
  Timestamp from = 0;
  Timestamp to = 0;
  std::string plan = "auto";
  std::string out = "-";
  std::string profile;
};

int cmd_query(const QueryArgs& a, std::ostream& out, std::ostream& err) {
  QuerySpec s;
  try {
    s.q = parse_query_kind(a.q);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  if (s.q != QueryKind::Q4 && !a.object) throw UsageError("--object is required for " + std::string(to_string(s.q)));
  if (s.q == QueryKind::Q2 && !a.object2) throw UsageError("--object2 is required for Q2");
  if (a.from > a.to) throw UsageError("--from must not exceed --to");
  s.o1 = a.object.value_or(0);
  s.o2 = a.object2.value_or(s.o1);
  s.from = a.from;
  s.to = a.to;

  auto st = open_store(a.c);
  QueryEngine eng(st.plan, st.cluster->stores(), st.rc.query_options());
  PlanKind plan;
  std::optional<double> x;
  if (a.plan == "auto") {
    plan = choose_plan(eng, cost_params(st, a.profile), s, x);
  } else {
    try {
      plan = parse_plan_kind(a.plan);
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    if (!plan_supported(s.q, plan)) throw UsageError("plan " + a.plan + " does not apply to " + std::string(to_string(s.q)));
  }

  QueryStats stats;
  const auto rows = engine_rows(eng, s, plan, &stats);
  std::ofstream file;
  std::ostream* sink = &out;
  if (a.out != "-") {
    file.open(a.out, std::ios::trunc);
    if (!file) throw UsageError("cannot open " + a.out);
    sink = &file;
  }
  *sink << "query,plan," << columns(s.q) << '\n';
  for (const auto& r : rows) *sink << to_string(s.q) << ',' << to_string(plan) << ',' << r << '\n';
  err << to_string(s.q) << " plan=" << to_string(plan) << " rows=" << rows.size()
      << " bytes_read=" << stats.store.bytes_read << " invocations=" << stats.store.invocations
      << " dist_evals=" << stats.dist_evals << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  Common c;
  std::string queries = "1,2,3,4";
  std::string input;
  std::size_t objects = 5;
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  const auto qs = parse_query_list(a.queries);
  auto st = open_store(a.c);
  const fs::path input = a.input.empty() ? fs::path(a.c.data_dir) / "edges.txt" : fs::path(a.input);
  require_file(input, "edge file");
  auto edges = io::read_edges(input);
  const auto summary = summarize(edges);
  std::optional<OracleGraph> oracle;
  try {
    oracle.emplace(std::move(edges), st.catalog);
  } catch (const DomainError& e) {
    throw UsageError(std::string("dataset too large for the oracle: ") + e.what());
  }
  const Timestamp from = a.from.value_or(summary.t_min);
  const Timestamp to = a.to.value_or(summary.t_max);
  if (from > to) throw UsageError("--from must not exceed --to");
  const auto objects = sample_objects(summary.objects, a.objects, st.rc.seed);
  const auto th = st.rc.thresholds;
  QueryEngine eng(st.plan, st.cluster->stores(), st.rc.query_options());

  std::size_t checks = 0, mismatches = 0;
  out << "query,plan,object,object2,from,to,expected_rows,actual_rows,status,detail\n";
  for (auto q : qs) {
    for (const auto& spec : specs_for(q, objects, from, to)) {
      const auto want = oracle_rows(*oracle, spec, th);
      for (auto plan : supported_plans(q)) {
        ++checks;
        std::string status = "ok", detail;
        std::vector<std::string> got;
        try {
          got = engine_rows(eng, spec, plan, nullptr);
          if (got != want) {
            status = "mismatch";
            std::size_t i = 0;
            while (i < got.size() && i < want.size() && got[i] == want[i]) ++i;
            detail = "first divergent row " + std::to_string(i) + ": expected '" +
                     (i < want.size() ? want[i] : std::string("<none>")) + "' got '" +
                     (i < got.size() ? got[i] : std::string("<none>")) + "'";
          }
        } catch (const std::exception& e) {
          status = "error";
          detail = e.what();
        }
        if (status != "ok") {
          ++mismatches;
          err << "MISMATCH " << to_string(q) << " plan=" << to_string(plan) << ' ' << describe(spec) << ": " << detail
              << '\n';
        }
        std::replace(detail.begin(), detail.end(), ',', ';');
        out << to_string(q) << ',' << to_string(plan) << ',';
        if (q != QueryKind::Q4) out << spec.o1;
        out << ',';
        if (q == QueryKind::Q2) out << spec.o2;
        out << ',' << spec.from << ',' << spec.to << ',' << want.size() << ',' << got.size() << ',' << status << ','
            << detail << '\n';
      }
    }
  }
  err << checks << " checks, " << mismatches << " mismatches\n";
  return mismatches == 0 ? kExitOk : kExitMismatch;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  Common c;
  std::string queries = "1,2,3,4";
  std::string input;
  std::string out_dir;
  std::string profile;
  std::string calibrate_path;
  std::size_t objects = 8;
  std::size_t repeat = 1;
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;
};

struct BenchRow {
  QueryKind q = QueryKind::Q1;
  PlanKind plan = PlanKind::ST;
  bool filters = true;
  std::size_t runs = 0;
  QueryStats total;
  double wall = 0;
  double estimate = 0;
  double measured = 0;
  std::uint64_t hash = kFnvOffset;
};

void write_bench_rows(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "query,plan,filters,runs,wall_seconds,bytes_read,blocks_read,invocations,bytes_shuffled,regions_scanned,"
         "pair_checks,dist_evals,estimate,measured_cost,result_hash\n";
  for (const auto& r : rows) {
    out << to_string(r.q) << ',' << to_string(r.plan) << ',' << (r.filters ? "on" : "off") << ',' << r.runs << ','
        << io::format_double(r.wall) << ',' << r.total.store.bytes_read << ',' << r.total.store.blocks_read << ','
        << r.total.store.invocations << ',' << r.total.bytes_shuffled << ',' << r.total.regions_scanned << ','
        << r.total.pair_checks << ',' << r.total.dist_evals << ',' << io::format_double(r.estimate) << ','
        << io::format_double(r.measured) << ',' << hex64(r.hash) << '\n';
  }
}

void write_ingest_series(std::ostream& out, const fs::path& jsonl) {
  out << "round,t_start,t_end,status,routed,bytes_shuffled,wall_seconds,partition_makespan,shuffle_makespan,"
         "modeled_edges_per_second,wall_edges_per_second\n";
  std::ifstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const double routed = j.at("routed").get<double>();
    const double wall = j.at("wall_seconds").get<double>();
    const double span = j.at("partition_makespan").get<double>() + j.at("shuffle_makespan").get<double>();
    out << j.at("round").get<std::uint64_t>() << ',' << j.at("t_start").get<Timestamp>() << ','
        << j.at("t_end").get<Timestamp>() << ',' << j.at("status").get<std::string>() << ','
        << j.at("routed").get<std::uint64_t>() << ',' << j.at("bytes_shuffled").get<std::uint64_t>() << ','
        << io::format_double(wall) << ',' << io::format_double(j.at("partition_makespan").get<double>()) << ','
        << io::format_double(j.at("shuffle_makespan").get<double>()) << ','
        << io::format_double(span > 0 ? routed / span : 0.0) << ',' << io::format_double(wall > 0 ? routed / wall : 0.0)
        << '\n';
  }
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const auto qs = parse_query_list(a.queries);
  if (a.repeat == 0) throw UsageError("--repeat must be positive");
  auto st = open_store(a.c);
  const fs::path input = a.input.empty() ? fs::path(a.c.data_dir) / "edges.txt" : fs::path(a.input);
  require_file(input, "edge file");
  const auto summary = summarize(io::read_edges(input));
  const Timestamp from = a.from.value_or(summary.t_min);
  const Timestamp to = a.to.value_or(summary.t_max);
  if (from > to) throw UsageError("--from must not exceed --to");
  const auto objects = sample_objects(summary.objects, a.objects, st.rc.seed);
  const auto cp = cost_params(st, a.profile);
  const auto nt = n_t(from, to, st.plan->time());

  auto on_opts = st.rc.query_options();
  on_opts.filters = true;
  auto off_opts = on_opts;
  off_opts.filters = false;
  const QueryEngine on(st.plan, st.cluster->stores(), on_opts);
  const QueryEngine off(st.plan, st.cluster->stores(), off_opts);

  std::vector<BenchRow> rows;
  std::vector<CalibrationSample> samples;
  auto run = [&](const QueryEngine& eng, QueryKind q, PlanKind plan, bool filters) {
    BenchRow row;
    row.q = q;
    row.plan = plan;
    row.filters = filters;
    for (const auto& spec : specs_for(q, objects, from, to)) {
      std::optional<double> x;
      if (plan == PlanKind::KTST) {
        x = static_cast<double>(eng.relevant_regions(eng.q1_trace(spec.o1, from, to, PlanKind::KT)).size());
      }
      for (std::size_t rep = 0; rep < a.repeat; ++rep) {
        QueryStats s;
        const auto t0 = std::chrono::steady_clock::now();
        const auto result = engine_rows(eng, spec, plan, &s);
        row.wall += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (rep == 0) {
          for (const auto& r : result) row.hash = fnv1a(fnv1a(row.hash, r), "\n");
          accumulate(row.total, s);
          row.estimate += estimate(q, plan, cp, nt, x).total_cost;
          row.measured += measured_cost(s, cp);
          ++row.runs;
        }
        samples.push_back({q, plan, s});
      }
    }
    rows.push_back(row);
  };
  for (auto q : qs) {
    for (auto plan : supported_plans(q)) run(on, q, plan, true);
    if (q == QueryKind::Q3) {
      for (auto plan : supported_plans(q)) run(off, q, plan, false);
    }
  }

  const fs::path jsonl = store_dir(a.c) / "rounds.jsonl";
  if (a.out_dir.empty()) {
    write_bench_rows(out, rows);
    out << '\n';
    write_ingest_series(out, jsonl);
  } else {
    fs::create_directories(a.out_dir);
    std::ofstream qf(fs::path(a.out_dir) / "bench_queries.csv", std::ios::trunc);
    std::ofstream inf(fs::path(a.out_dir) / "bench_ingest.csv", std::ios::trunc);
    write_bench_rows(qf, rows);
    write_ingest_series(inf, jsonl);
    err << "wrote " << a.out_dir << "/bench_queries.csv and bench_ingest.csv\n";
  }
  if (!a.calibrate_path.empty()) {
    std::ofstream prof(a.calibrate_path, std::ios::trunc);
    if (!prof) throw UsageError("cannot write " + a.calibrate_path);
    write_profile(prof, calibrate(samples, cp));
    err << "wrote cost profile " << a.calibrate_path << " from " << samples.size() << " samples\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stats

int cmd_stats(const Common& c, std::ostream& out, std::ostream&) {
  auto st = open_store(c);
  struct Row {
    std::uint64_t st_p, st_r, kt, kt_extra, st_edges, kt_edges;
  };
  std::vector<Row> rows;
  for (auto* s : st.cluster->stores()) {
    rows.push_back({s->stored_bytes(Method::SpatioTemporal, Table::Primary),
                    s->stored_bytes(Method::SpatioTemporal, Table::Replica),
                    s->stored_bytes(Method::KeyTemporal, Table::Primary),
                    s->stored_bytes(Method::KeyTemporal, Table::Replica),
                    s->stored_edges(Method::SpatioTemporal, Table::Primary) +
                        s->stored_edges(Method::SpatioTemporal, Table::Replica),
                    s->stored_edges(Method::KeyTemporal, Table::Primary)});
  }
  auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
  out << "worker,st_primary_bytes,st_replica_bytes,st_bytes,kt_bytes,kt_extra_bytes,st_edges,kt_edges,st_over_kt\n";
  double st_sum = 0, kt_sum = 0, all_sum = 0, st_max = 0, all_max = 0;
  for (std::size_t w = 0; w < rows.size(); ++w) {
    const auto& r = rows[w];
    const double stb = static_cast<double>(r.st_p + r.st_r);
    const double all = stb + static_cast<double>(r.kt + r.kt_extra);
    st_sum += stb;
    kt_sum += static_cast<double>(r.kt);
    all_sum += all;
    st_max = std::max(st_max, stb);
    all_max = std::max(all_max, all);
    out << w << ',' << r.st_p << ',' << r.st_r << ',' << r.st_p + r.st_r << ',' << r.kt << ',' << r.kt_extra << ','
        << r.st_edges << ',' << r.kt_edges << ',' << io::format_double(ratio(stb, static_cast<double>(r.kt))) << '\n';
  }
  const double n = static_cast<double>(rows.size());
  out << "\nmetric,value\n"
      << "workers," << rows.size() << '\n'
      << "st_bytes," << io::format_double(st_sum) << '\n'
      << "kt_bytes," << io::format_double(kt_sum) << '\n'
      << "st_over_kt," << io::format_double(ratio(st_sum, kt_sum)) << '\n'
      << "max_over_mean_st," << io::format_double(ratio(st_max, st_sum / n)) << '\n'
      << "max_over_mean_total," << io::format_double(ratio(all_max, all_sum / n)) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// plan-dump

int cmd_plan_dump(const Common& c, std::ostream& out, std::ostream&) {
  const fs::path snap = store_dir(c) / "plan.snapshot";
  if (fs::is_regular_file(snap)) {
    out << read_text(snap);
    return kExitOk;
  }
  const fs::path data(c.data_dir);
  RunConfig rc = load_config(c, data / "run.conf");
  rc.validate();
  require_file(data / "locations.txt", "location catalog");
  auto catalog = std::make_shared<LocationCatalog>(io::read_locations(data / "locations.txt"));
  out << ClusterPlan::build(rc.plan, catalog).snapshot();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatio-temporal graph store: generate, ingest, query, verify and benchmark"};
  app.name(args.empty() ? "past" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  add_common(*gen_cmd, gen.c, "--out-dir,--data-dir,-d");

  IngestArgs ing;
  auto* ing_cmd = app.add_subcommand("ingest", "Ingest an edge file into DATA/store");
  add_common(*ing_cmd, ing.c);
  ing_cmd->add_option("--input", ing.input, "Edge file (default DATA/edges.txt)");
  ing_cmd->add_option("--locations", ing.locations, "Location catalog (default DATA/locations.txt)");
  ing_cmd->add_option("--workers", ing.workers, "Worker count");
  ing_cmd->add_option("--m", ing.m, "Rounds per TRU");
  ing_cmd->add_option("--tru", ing.tru, "Time range unit in seconds");
  ing_cmd->add_option("--rounds", ing.rounds, "Rounds to run (default: enough to cover the input)");
  ing_cmd->add_option("--transport", ing.transport, "deterministic or socket");

  QueryArgs qry;
  auto* q_cmd = app.add_subcommand("query", "Run one query against the store");
  add_common(*q_cmd, qry.c);
  q_cmd->add_option("--q", qry.q, "1, 2, 3 or 4")->required();
  q_cmd->add_option("--object", qry.object, "Object id");
  q_cmd->add_option("--object2", qry.object2, "Second object id (Q2)");
  q_cmd->add_option("--from", qry.from, "Range start timestamp")->required();
  q_cmd->add_option("--to", qry.to, "Range end timestamp")->required();
  q_cmd->add_option("--plan", qry.plan, "st, kt, ktst or auto")->capture_default_str();
  q_cmd->add_option("--out", qry.out, "Result CSV path, - for stdout")->capture_default_str();
  q_cmd->add_option("--profile", qry.profile, "Cost profile for plan selection");

  VerifyArgs ver;
  auto* v_cmd = app.add_subcommand("verify", "Diff every plan against the brute-force oracle");
  add_common(*v_cmd, ver.c);
  v_cmd->add_option("--q", ver.queries, "Comma-separated query list")->capture_default_str();
  v_cmd->add_option("--input", ver.input, "Edge file (default DATA/edges.txt)");
  v_cmd->add_option("--objects", ver.objects, "Sampled objects per query")->capture_default_str();
  v_cmd->add_option("--from", ver.from, "Range start (default: first timestamp)");
  v_cmd->add_option("--to", ver.to, "Range end (default: last timestamp)");

  BenchArgs bench;
  auto* b_cmd = app.add_subcommand("bench", "Per-query, per-plan cost tables and ingestion series");
  add_common(*b_cmd, bench.c);
  b_cmd->add_option("--q", bench.queries, "Comma-separated query list")->capture_default_str();
  b_cmd->add_option("--input", bench.input, "Edge file (default DATA/edges.txt)");
  b_cmd->add_option("--out-dir", bench.out_dir, "Write bench_queries.csv and bench_ingest.csv here");
  b_cmd->add_option("--objects", bench.objects, "Sampled objects per query")->capture_default_str();
  b_cmd->add_option("--repeat", bench.repeat, "Timed repetitions per query")->capture_default_str();
  b_cmd->add_option("--from", bench.from, "Range start (default: first timestamp)");
  b_cmd->add_option("--to", bench.to, "Range end (default: last timestamp)");
  b_cmd->add_option("--profile", bench.profile, "Cost profile for the estimates");
  b_cmd->add_option("--calibrate", bench.calibrate_path, "Fit the cost constants and write a profile");

  Common stats;
  auto* s_cmd = app.add_subcommand("stats", "Per-worker stored bytes and balance");
  add_common(*s_cmd, stats);

  Common dump;
  auto* p_cmd = app.add_subcommand("plan-dump", "Print the cluster plan snapshot");
  add_common(*p_cmd, dump);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("past");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out, err);
    if (*ing_cmd) return cmd_ingest(ing, out, err);
    if (*q_cmd) return cmd_query(qry, out, err);
    if (*v_cmd) return cmd_verify(ver, out, err);
    if (*b_cmd) return cmd_bench(bench, out, err);
    if (*s_cmd) return cmd_stats(stats, out, err);
    if (*p_cmd) return cmd_plan_dump(dump, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitMismatch;
  }
  return kExitUsage;
}

}  // namespace past
