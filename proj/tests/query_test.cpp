#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "past/errors.hpp"
#include "past/query.hpp"
#include "test_support.hpp"

using namespace past;
using past::testing::TempDir;

namespace {

GenConfig dense(std::uint64_t seed) {
  GenConfig c;
  c.n_locations = 1500;
  c.n_objects = 250;
  c.n_areas = 12;
  c.area_radius = 120;
  c.period_days = 21;
  c.visits_per_period = 6;
  c.n_clones = 4;
  c.seed = seed;
  c.universe = RegionGrid({0, 0}, 1000, 32, 32);
  return c;
}

std::vector<TraceEntry> as_trace(const std::vector<OracleTraceEntry>& v) {
  std::vector<TraceEntry> out;
  for (const auto& e : v) out.push_back({e.object_id, e.timestamp, e.location_id});
  return out;
}

std::vector<SimilarityResult> as_results(const std::vector<std::pair<ObjectId, std::uint64_t>>& v) {
  std::vector<SimilarityResult> out;
  for (const auto& [o, s] : v) out.push_back({o, s});
  return out;
}

class QueryFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = generate(dense(21));
    loaded_ = past::testing::load_dataset(data_, dir_.path(), 3, 6);
    for (const auto& e : loaded_.log) ASSERT_EQ(e.status, RoundStatus::Complete);
    oracle_ = std::make_unique<OracleGraph>(data_.edges, loaded_.plan->catalog_ptr());
  }

  QueryEngine engine(QueryOptions o = {}) { return QueryEngine(loaded_.plan, loaded_.cluster->stores(), o); }

  TempDir dir_{"query"};
  Dataset data_;
  past::testing::Loaded loaded_;
  std::unique_ptr<OracleGraph> oracle_;
};

}  // namespace

TEST(Filters, GridBoundExamples) {
  const FilterGrid fg(1.0);
  EXPECT_EQ(grid_distance_lower_bound({0.2, 0.2}, {0.7, 0.9}, fg), 0.0);
  EXPECT_EQ(grid_distance_lower_bound({0.5, 0.5}, {3.5, 0.5}, fg), 1.0);
  EXPECT_THROW(FilterGrid(0.0), DomainError);
}

TEST(Filters, GridBoundIsSound) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 2000.0);
  const FilterGrid fg(1000.0 / 64);
  for (int i = 0; i < 100000; ++i) {
    const Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
    ASSERT_LE(grid_distance_lower_bound(a, b, fg), dist(a, b) + 1e-9);
  }
}

TEST(Filters, CandidateTimeRanges) {
  const TimeDiscretization d{3600};
  EXPECT_EQ(candidate_time_ranges(10, 1800, d), (std::vector<TimeRangeIndex>{9, 10, 11}));
  EXPECT_EQ(candidate_time_ranges(10, 0, d), (std::vector<TimeRangeIndex>{10}));
  EXPECT_EQ(candidate_time_ranges(10, 2.5 * 3600, d).size(), 7u);
  EXPECT_EQ(candidate_time_ranges(1, 7200, d), (std::vector<TimeRangeIndex>{0, 1, 2, 3}));
  EXPECT_THROW(candidate_time_ranges(1, -1, d), DomainError);
}

TEST(Predicates, EdgeSimilarIsClosed) {
  LocationCatalog cat({{1, 0, 0, {}}, {2, 100, 0, {}}, {3, 0, 100.5, {}}});
  Thresholds th;
  EXPECT_TRUE(edge_similar({1, 0, 1, {}}, {2, 0, 1, {}}, th, cat));
  EXPECT_TRUE(edge_similar({1, 0, 1, {}}, {2, 7 * 3600, 2, {}}, th, cat));
  EXPECT_FALSE(edge_similar({1, 0, 1, {}}, {2, 7 * 3600 + 1, 1, {}}, th, cat));
  EXPECT_FALSE(edge_similar({1, 0, 1, {}}, {2, 0, 3, {}}, th, cat));
  EXPECT_THROW(edge_similar({1, 0, 1, {}}, {2, 0, 99, {}}, th, cat), LookupError);
}

TEST(Predicates, Velocity) {
  Thresholds th;
  EXPECT_TRUE(velocity_exceeds(200000, 3600, th));
  EXPECT_FALSE(velocity_exceeds(100000, 3600, th));
  EXPECT_TRUE(velocity_exceeds(1, 0, th));
  EXPECT_FALSE(velocity_exceeds(0, 0, th));
}

TEST(PlanKinds, ParseAndSupport) {
  EXPECT_EQ(parse_plan_kind("KT+ST"), PlanKind::KTST);
  EXPECT_EQ(parse_plan_kind("st"), PlanKind::ST);
  EXPECT_THROW(parse_plan_kind("zz"), DomainError);
  EXPECT_TRUE(plan_supported(QueryKind::Q3, PlanKind::KTST));
  EXPECT_FALSE(plan_supported(QueryKind::Q1, PlanKind::KTST));
  EXPECT_EQ(supported_plans(QueryKind::Q4).size(), 2u);
}

TEST(QueryTiny, SinglePairSimilarity) {
  TempDir dir("tiny");
  PlanParams p;
  p.workers = 2;
  p.slot_bits = 4;
  p.grid = RegionGrid({0, 0}, 1000, 4, 4);
  p.unit_width = 2;
  auto catalog = std::make_shared<LocationCatalog>(std::vector<LocationVertex>{{1, 990, 500, {}}, {2, 1040, 500, {}}});
  auto plan = std::make_shared<ClusterPlan>(ClusterPlan::build(p, catalog));
  Cluster cluster(plan, dir.path());
  InProcessTransport t(cluster);
  Coordinator coord(t, plan->time());
  const std::vector<Edge> edges{{100, 0, 1, {}}, {200, 100, 2, {}}};
  coord.run(edges, {.m = 1, .rounds = 1});
  QueryEngine q(plan, cluster.stores());
  for (auto plan_kind : {PlanKind::ST, PlanKind::KT}) {
    EXPECT_EQ(q.q2_similarity(100, 200, 0, 3600, plan_kind), 1u);
    EXPECT_EQ(q.q2_similarity(100, 200, 50, 3600, plan_kind), 0u);
  }
  // The two locations sit in different regions; the fan-out still finds the pair.
  for (auto plan_kind : {PlanKind::ST, PlanKind::KT, PlanKind::KTST}) {
    const auto r = q.q3_similar_objects(100, 0, 3600, plan_kind);
    ASSERT_EQ(r.size(), 1u) << to_string(plan_kind);
    EXPECT_EQ(r[0], (SimilarityResult{200, 1}));
  }
  EXPECT_TRUE(q.q1_trace(300, 0, 3600, PlanKind::KT).empty());
  EXPECT_TRUE(q.q3_similar_objects(300, 0, 3600, PlanKind::KTST).empty());
  EXPECT_THROW(q.q1_trace(100, 10, 0, PlanKind::KT), DomainError);
  EXPECT_THROW(q.q1_trace(100, 0, 10, PlanKind::KTST), DomainError);
  EXPECT_TRUE(q.q4_clones(0, 3600, PlanKind::KT).empty());
}

TEST_F(QueryFixture, MatchesOracleUnderEveryPlan) {
  const auto& th = engine().options().thresholds;
  const Timestamp end = 21 * 86400;
  const std::vector<std::pair<Timestamp, Timestamp>> ranges{{0, end}, {3 * 86400 + 1234, 9 * 86400 + 77}, {500, 500}};
  std::uint64_t nonzero_q3 = 0;
  for (bool filters : {true, false}) {
    QueryOptions opt;
    opt.filters = filters;
    auto q = engine(opt);
    for (ObjectId o = kFirstObjectId; o < kFirstObjectId + 250; o += 13) {
      for (auto [ts, te] : ranges) {
        const auto want1 = as_trace(oracle_q1(*oracle_, o, ts, te));
        const auto want3 = as_results(oracle_q3(*oracle_, o, ts, te, th));
        const auto want2 = oracle_q2(*oracle_, o, o + 1, ts, te, th);
        const auto want2self = oracle_q2(*oracle_, o, o, ts, te, th);
        nonzero_q3 += !want3.empty();
        for (auto plan : {PlanKind::ST, PlanKind::KT}) {
          ASSERT_EQ(q.q1_trace(o, ts, te, plan), want1) << o;
          ASSERT_EQ(q.q2_similarity(o, o + 1, ts, te, plan), want2) << o;
          ASSERT_EQ(q.q2_similarity(o, o, ts, te, plan), want2self) << o;
        }
        for (auto plan : {PlanKind::ST, PlanKind::KT, PlanKind::KTST}) {
          ASSERT_EQ(q.q3_similar_objects(o, ts, te, plan), want3) << o << " " << to_string(plan);
        }
      }
    }
    for (auto [ts, te] : ranges) {
      const auto want4 = oracle_q4(*oracle_, ts, te, th);
      EXPECT_EQ(q.q4_clones(ts, te, PlanKind::ST), want4);
      EXPECT_EQ(q.q4_clones(ts, te, PlanKind::KT), want4);
    }
  }
  EXPECT_GT(nonzero_q3, 5u);
  const auto clones = engine().q4_clones(0, end, PlanKind::KT);
  for (auto id : data_.clone_ids) EXPECT_TRUE(std::binary_search(clones.begin(), clones.end(), id));
}

TEST_F(QueryFixture, ParallelSubTasksAgree) {
  QueryOptions opt;
  opt.parallel = true;
  auto par = engine(opt);
  auto seq = engine();
  const Timestamp end = 21 * 86400;
  for (ObjectId o = kFirstObjectId; o < kFirstObjectId + 250; o += 41) {
    for (auto plan : {PlanKind::ST, PlanKind::KT, PlanKind::KTST}) {
      EXPECT_EQ(par.q3_similar_objects(o, 0, end, plan), seq.q3_similar_objects(o, 0, end, plan));
    }
  }
  EXPECT_EQ(par.q4_clones(0, end, PlanKind::ST), seq.q4_clones(0, end, PlanKind::ST));
}

TEST_F(QueryFixture, TraceLookupReadsOneSlot) {
  auto q = engine();
  const Timestamp end = 21 * 86400;
  QueryStats kt, st;
  const auto a = q.q1_trace(kFirstObjectId + 3, 0, end, PlanKind::KT, &kt);
  const auto b = q.q1_trace(kFirstObjectId + 3, 0, end, PlanKind::ST, &st);
  EXPECT_EQ(a, b);
  EXPECT_EQ(kt.store.invocations, 1u);
  EXPECT_EQ(kt.workers_touched, 1u);
  EXPECT_EQ(st.store.invocations, loaded_.plan->grid().region_count());
  EXPECT_LT(kt.store.bytes_read, st.store.bytes_read);
  EXPECT_EQ(st.workers_touched, 3u);
}

TEST_F(QueryFixture, CompositePlanReadsLessThanFullScans) {
  auto q = engine();
  const Timestamp end = 21 * 86400;
  for (ObjectId o = kFirstObjectId; o < kFirstObjectId + 250; o += 50) {
    QueryStats st, kt, ktst;
    q.q3_similar_objects(o, 0, end, PlanKind::ST, &st);
    q.q3_similar_objects(o, 0, end, PlanKind::KT, &kt);
    q.q3_similar_objects(o, 0, end, PlanKind::KTST, &ktst);
    const auto trace = q.q1_trace(o, 0, end, PlanKind::KT);
    if (trace.empty()) continue;
    EXPECT_LT(ktst.regions_scanned, loaded_.plan->grid().region_count());
    EXPECT_EQ(ktst.regions_scanned, q.relevant_regions(trace).size());
    EXPECT_LT(ktst.store.bytes_read, st.store.bytes_read);
    EXPECT_LT(ktst.store.bytes_read, kt.store.bytes_read);
  }
}

TEST_F(QueryFixture, FiltersPruneDistanceEvaluations) {
  QueryOptions on, off;
  off.filters = false;
  auto qa = engine(on), qb = engine(off);
  const Timestamp end = 21 * 86400;
  std::uint64_t evals_on = 0, evals_off = 0;
  for (ObjectId o = kFirstObjectId; o < kFirstObjectId + 250; o += 7) {
    QueryStats a, b;
    EXPECT_EQ(qa.q3_similar_objects(o, 0, end, PlanKind::KTST, &a), qb.q3_similar_objects(o, 0, end, PlanKind::KTST, &b));
    evals_on += a.dist_evals;
    evals_off += b.dist_evals;
    EXPECT_LE(a.pair_checks, b.pair_checks);
  }
  EXPECT_LT(evals_on, evals_off);
}

TEST_F(QueryFixture, UnknownObjectIsEmpty) {
  auto q = engine();
  for (auto plan : {PlanKind::ST, PlanKind::KT}) EXPECT_TRUE(q.q1_trace(42, 0, 1'000'000, plan).empty());
  EXPECT_EQ(q.q2_similarity(42, 43, 0, 1'000'000, PlanKind::KT), 0u);
}

TEST(QueryEngineSetup, RejectsMismatchedStores) {
  TempDir dir("setup");
  PlanParams p;
  p.workers = 2;
  p.grid = RegionGrid({0, 0}, 10, 2, 2);
  p.unit_width = 1;
  auto catalog = std::make_shared<LocationCatalog>(std::vector<LocationVertex>{{1, 1, 1, {}}});
  auto plan = std::make_shared<ClusterPlan>(ClusterPlan::build(p, catalog));
  Cluster cluster(plan, dir.path());
  auto stores = cluster.stores();
  EXPECT_THROW(QueryEngine(plan, {stores[0]}), DomainError);
  EXPECT_THROW(QueryEngine(plan, {stores[1], stores[0]}), DomainError);
}
