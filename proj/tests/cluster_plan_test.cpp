#include <gtest/gtest.h>

#include <random>
#include <set>

#include "past/cluster_plan.hpp"

using namespace past;

namespace {

std::shared_ptr<LocationCatalog> grid_catalog(const RegionGrid& g, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(g.origin().x, g.max_x()), uy(g.origin().y, g.max_y());
  std::vector<LocationVertex> locs;
  for (std::size_t i = 0; i < n; ++i) locs.push_back({i + 1, ux(rng), uy(rng), {}});
  return std::make_shared<LocationCatalog>(std::move(locs));
}

PlanParams small_params(std::uint32_t workers) {
  PlanParams p;
  p.workers = workers;
  p.slot_bits = 8;
  p.grid = RegionGrid({0, 0}, 100, 16, 16);
  p.unit_width = 4;
  return p;
}

}  // namespace

TEST(ClusterPlan, RoutesEveryRegionAndSlot) {
  auto p = small_params(5);
  auto plan = ClusterPlan::build(p, grid_catalog(p.grid, 3000, 1));
  std::set<RegionId> seen;
  for (WorkerId w = 0; w < 5; ++w) {
    for (auto r : plan.regions_of_worker(w)) EXPECT_TRUE(seen.insert(r).second);
  }
  EXPECT_EQ(seen.size(), p.grid.region_count());
  std::size_t slots = 0;
  for (WorkerId w = 0; w < 5; ++w) {
    for (auto s : plan.slots_of_worker(w)) {
      EXPECT_EQ(s % 5, w);
      ++slots;
    }
  }
  EXPECT_EQ(slots, 256u);
  EXPECT_THROW(plan.region_of_location(999999), LookupError);
}

TEST(ClusterPlan, SnapshotRoundTripsBitExactly) {
  for (auto mapping : {SpatialMapping::Bounded, SpatialMapping::Unbounded}) {
    auto p = small_params(3);
    p.grid = RegionGrid({-1234.5678, 0.1}, 1.0 / 3.0 * 100, 13, 7);
    p.mapping = mapping;
    auto cat = grid_catalog(p.grid, 2000, 2);
    auto plan = ClusterPlan::build(p, cat);
    auto text = plan.snapshot();
    auto back = ClusterPlan::from_snapshot(text, cat);
    EXPECT_TRUE(same_routing(plan, back));
    EXPECT_EQ(back.snapshot(), text);
  }
}

TEST(ClusterPlan, SnapshotRejectsCorruption) {
  auto p = small_params(3);
  auto cat = grid_catalog(p.grid, 500, 3);
  auto text = ClusterPlan::build(p, cat).snapshot();
  EXPECT_THROW(ClusterPlan::from_snapshot("nonsense", cat), FormatError);
  EXPECT_THROW(ClusterPlan::from_snapshot(text.substr(0, text.size() / 2), cat), FormatError);
  auto bad = text;
  bad.replace(bad.find("workers 3"), 9, "workers 9");
  EXPECT_THROW(ClusterPlan::from_snapshot(bad, cat), FormatError);
}

TEST(EdgeRoute, CollisionExtraIsModularSuccessor) {
  // One region, one worker-owning unit: force w_s by building on a 1x1 grid.
  for (std::uint32_t n : {1u, 2u, 10u}) {
    PlanParams p;
    p.workers = n;
    p.slot_bits = 6;
    p.grid = RegionGrid({0, 0}, 100, 1, 1);
    p.unit_width = 1;
    auto plan = ClusterPlan::build(p, std::make_shared<LocationCatalog>(std::vector<LocationVertex>{{1, 5, 5, {}}}));
    for (ObjectId o = 0; o < 200; ++o) {
      auto r = edge_route({o, 0, 1, {}}, plan);
      EXPECT_EQ(r.st, 0u);
      EXPECT_EQ(r.kt, slot_of(o, 6) % n);
      EXPECT_EQ(r.extra.has_value(), r.st == r.kt);
      if (r.extra) EXPECT_EQ(*r.extra, (r.st + 1) % n);
      EXPECT_EQ(r.st_replica, 1 % n);
    }
  }
  PlanParams p = small_params(2);
  auto plan = ClusterPlan::build(p, grid_catalog(p.grid, 10, 4));
  EXPECT_THROW(edge_route({1, 0, 424242, {}}, plan), LookupError);
}

TEST(EdgeRoute, ReplicaSetsAndCollisionRate) {
  for (std::uint32_t n : {2u, 4u, 7u}) {
    auto p = small_params(n);
    auto cat = grid_catalog(p.grid, 4000, 5 + n);
    auto plan = ClusterPlan::build(p, cat);
    std::mt19937_64 rng(n);
    const int edges = 60000;
    int extras = 0;
    for (int i = 0; i < edges; ++i) {
      Edge e{rng(), 0, 1 + rng() % cat->size(), {}};
      auto r = edge_route(e, plan);
      std::set<WorkerId> set{r.st, r.kt};
      if (r.extra) set.insert(*r.extra);
      EXPECT_GE(set.size(), 2u);
      if (!r.extra) EXPECT_NE(r.st, r.kt);
      extras += r.extra.has_value();
    }
    const double f = double(extras) / edges, q = 1.0 / n;
    EXPECT_NEAR(f, q, 3 * std::sqrt(q * (1 - q) / edges) + 0.02) << "N=" << n;
  }
}
