#pragma once

#include <unistd.h>

#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "past/cluster_plan.hpp"
#include "past/ingest.hpp"
#include "past/storage.hpp"
#include "past/workload.hpp"

namespace past::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("past-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::shared_ptr<LocationCatalog> uniform_catalog(const RegionGrid& g, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(g.origin().x, g.max_x()), uy(g.origin().y, g.max_y());
  std::vector<LocationVertex> locs;
  for (std::size_t i = 0; i < n; ++i) locs.push_back({i + 1, ux(rng), uy(rng), {}});
  return std::make_shared<LocationCatalog>(std::move(locs));
}

inline std::vector<Edge> uniform_edges(std::size_t n, std::size_t locations, std::uint64_t objects, Timestamp t0,
                                       Timestamp span, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Edge> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({1'000'000 + rng() % objects, t0 + static_cast<Timestamp>(rng() % span), 1 + rng() % locations, {}});
  }
  return out;
}

// One stored copy of an edge: (edge, worker, method, table).
using CopyKey = std::tuple<Edge, WorkerId, Method, Table>;

// Reads every block of every store; also checks each block sits under the
// key its edges route to.
inline std::map<CopyKey, int> stored_copies(const std::vector<BlockStore*>& stores, const ClusterPlan& plan,
                                            std::vector<std::string>* problems = nullptr) {
  std::map<CopyKey, int> out;
  for (auto* s : stores) {
    for (Method m : {Method::SpatioTemporal, Method::KeyTemporal}) {
      for (Table t : {Table::Primary, Table::Replica}) {
        for (const auto& key : s->keys(m, t)) {
          for (const auto& e : s->get_block(key, t).decode_edges()) {
            const std::uint64_t pid = m == Method::SpatioTemporal ? plan.region_of_location(e.location_id)
                                                                  : slot_of(e.object_id, plan.slot_bits());
            if (problems && (pid != key.partition_id || time_range_of(e.timestamp, plan.time()) != key.time_range ||
                             key.node_id != s->node())) {
              problems->push_back("edge stored under the wrong key " + to_string(key));
            }
            ++out[{e, s->node(), m, t}];
          }
        }
      }
    }
  }
  return out;
}

// Copies the placement rule requires for each edge.
inline std::map<CopyKey, int> expected_copies(const std::vector<Edge>& edges, const ClusterPlan& plan) {
  std::map<CopyKey, int> out;
  for (const auto& e : edges) {
    const auto r = edge_route(e, plan);
    ++out[{e, r.st, Method::SpatioTemporal, Table::Primary}];
    ++out[{e, r.st_replica, Method::SpatioTemporal, Table::Replica}];
    ++out[{e, r.kt, Method::KeyTemporal, Table::Primary}];
    if (r.extra) ++out[{e, *r.extra, Method::KeyTemporal, Table::Replica}];
  }
  return out;
}

// A dataset ingested into an in-process cluster under `root`.
struct Loaded {
  std::shared_ptr<const ClusterPlan> plan;
  std::unique_ptr<Cluster> cluster;
  std::vector<RoundLogEntry> log;
};

inline Loaded load_dataset(const Dataset& d, const std::filesystem::path& root, std::uint32_t workers,
                           std::uint32_t slot_bits = 8, std::uint32_t unit_width = 4, std::int64_t tru = 3600,
                           std::uint32_t m = 24, WorkerOptions wo = {}) {
  PlanParams p;
  p.workers = workers;
  p.slot_bits = slot_bits;
  p.grid = d.config.universe;
  p.unit_width = unit_width;
  p.time = {tru};
  Loaded out;
  out.plan = std::make_shared<ClusterPlan>(
      ClusterPlan::build(p, std::make_shared<LocationCatalog>(d.locations)));
  out.cluster = std::make_unique<Cluster>(out.plan, root, wo);
  InProcessTransport transport(*out.cluster);
  Coordinator coord(transport, out.plan->time());
  CoordinatorOptions opt;
  opt.m = m;
  opt.rounds = rounds_to_cover(d.edges, tru, m);
  out.log = coord.run(d.edges, opt);
  return out;
}

}  // namespace past::testing
