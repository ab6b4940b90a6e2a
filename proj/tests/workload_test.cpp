#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "past/errors.hpp"
#include "past/rng.hpp"
#include "past/workload.hpp"

using namespace past;

namespace {

GenConfig small(std::uint64_t seed = 1) {
  GenConfig c;
  c.n_locations = 3000;
  c.n_objects = 800;
  c.n_areas = 40;
  c.period_days = 56;
  c.seed = seed;
  c.universe = RegionGrid({0, 0}, 1000, 32, 32);
  return c;
}

}  // namespace

TEST(Workload, SameSeedSameStream) {
  const auto a = generate(small(7));
  const auto b = generate(small(7));
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_EQ(a.clone_ids, b.clone_ids);
  ASSERT_EQ(a.locations.size(), b.locations.size());
  for (std::size_t i = 0; i < a.locations.size(); ++i) {
    EXPECT_EQ(a.locations[i].x, b.locations[i].x);
    EXPECT_EQ(a.locations[i].y, b.locations[i].y);
  }
  EXPECT_NE(generate(small(8)).edges, a.edges);
}

TEST(Workload, SingleLocationSitsNearItsCenter) {
  GenConfig c;
  c.n_locations = 1;
  c.n_areas = 1;
  c.n_objects = 1;
  c.area_radius = 10;
  std::vector<Area> areas;
  const auto locs = gen_locations(c, areas);
  ASSERT_EQ(locs.size(), 1u);
  ASSERT_EQ(areas.size(), 1u);
  EXPECT_EQ(locs[0].id, 1u);
  EXPECT_LT(dist(locs[0].point(), areas[0].center), 60.0);  // 6 sigma at most
}

TEST(Workload, AreaSizesAreSkewed) {
  auto c = small();
  c.n_locations = 20000;
  c.n_areas = 200;
  std::vector<Area> areas;
  gen_locations(c, areas);
  std::vector<std::size_t> sizes;
  for (const auto& a : areas) sizes.push_back(a.locations.size());
  std::sort(sizes.rbegin(), sizes.rend());
  std::size_t top = 0;
  for (std::size_t i = 0; i < sizes.size() / 10; ++i) top += sizes[i];
  EXPECT_GT(static_cast<double>(top) / c.n_locations, 0.1);
  EXPECT_GT(static_cast<double>(top) / c.n_locations, 0.4);  // Zipf(1) over 200 areas puts ~0.6 in the top decile
}

TEST(Workload, LocationsStayInsideTheUniverse) {
  const auto d = generate(small(3));
  for (const auto& l : d.locations) EXPECT_TRUE(d.config.universe.contains(l.point()));
}

TEST(Workload, NoVisitsMeansNoEdges) {
  auto c = small();
  c.p_visit_frequent = 0;
  c.p_visit_infrequent = 0;
  EXPECT_TRUE(generate(c).edges.empty());
}

TEST(Workload, EdgeCountMatchesBinomialExpectation) {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto c = small(seed);
    const auto d = generate(c);
    const double w = static_cast<double>(c.weeks());
    const double n = static_cast<double>(c.n_objects);
    // Per object: class ~ Bernoulli(0.4), visits | class ~ Binomial(w, p_class).
    const double mean = n * w * (0.4 * 0.8 + 0.6 * 0.2);
    const double within = 0.4 * w * 0.8 * 0.2 + 0.6 * w * 0.2 * 0.8;
    const double between = w * w * 0.4 * 0.6 * (0.8 - 0.2) * (0.8 - 0.2);
    const double sigma = std::sqrt(n * (within + between));
    EXPECT_LE(std::fabs(static_cast<double>(d.edges.size()) - mean), 3 * sigma) << "seed " << seed;
  }
}

TEST(Workload, ClassRatesMatchVisitProbabilities) {
  auto c = small(11);
  c.n_objects = 4000;
  const auto d = generate(c);
  std::map<ObjectId, bool> frequent;
  std::size_t n_freq = 0;
  for (const auto& o : d.objects) {
    frequent[o.id] = o.frequent;
    n_freq += o.frequent;
  }
  double edges_freq = 0, edges_inf = 0;
  for (const auto& e : d.edges) (frequent.at(e.object_id) ? edges_freq : edges_inf) += 1;
  const double w = static_cast<double>(c.weeks());
  const double rate_f = edges_freq / (n_freq * w);
  const double rate_i = edges_inf / ((c.n_objects - n_freq) * w);
  EXPECT_NEAR(rate_f, 0.8, 3 * std::sqrt(0.16 / (n_freq * w)));
  EXPECT_NEAR(rate_i, 0.2, 3 * std::sqrt(0.16 / ((c.n_objects - n_freq) * w)));
  EXPECT_NEAR(static_cast<double>(n_freq) / c.n_objects, 0.4, 3 * std::sqrt(0.24 / c.n_objects));
}

TEST(Workload, EdgesReferenceKnownVerticesAndHomeAreas) {
  const auto d = generate(small(5));
  std::set<LocationId> locs;
  for (const auto& l : d.locations) locs.insert(l.id);
  std::map<ObjectId, std::uint32_t> home;
  for (const auto& o : d.objects) home[o.id] = o.area;
  std::map<LocationId, std::string> area_of;
  for (const auto& l : d.locations) area_of[l.id] = l.properties.at("area");
  const Timestamp end = d.config.t0 + static_cast<Timestamp>(d.config.weeks()) * kWeekSeconds;
  for (const auto& e : d.edges) {
    ASSERT_TRUE(locs.count(e.location_id));
    ASSERT_TRUE(home.count(e.object_id));
    EXPECT_GE(e.object_id, kFirstObjectId);
    EXPECT_GE(e.timestamp, d.config.t0);
    EXPECT_LT(e.timestamp, end);
    EXPECT_EQ(area_of[e.location_id], std::to_string(home[e.object_id]));
  }
}

TEST(Workload, ClonesBeatTheVelocityThreshold) {
  auto c = small(9);
  c.n_clones = 0;
  const auto plain = generate(c);
  EXPECT_TRUE(plain.clone_ids.empty());

  c.n_clones = 12;
  const auto d = generate(c);
  ASSERT_EQ(d.clone_ids.size(), 12u);
  EXPECT_EQ(d.edges.size(), plain.edges.size() + 12 + [&] {
    // Clones without any normal visit also get a home anchor edge.
    std::set<ObjectId> active;
    for (const auto& e : plain.edges) active.insert(e.object_id);
    std::size_t n = 0;
    for (auto id : d.clone_ids) n += !active.count(id);
    return n;
  }());

  auto catalog = std::make_shared<LocationCatalog>(d.locations);
  OracleGraph g(d.edges, catalog);
  Thresholds th;
  const auto found = oracle_q4(g, 0, 1'000'000'000, th);
  for (auto id : d.clone_ids) EXPECT_TRUE(std::binary_search(found.begin(), found.end(), id)) << id;
}

TEST(Workload, GroundTruthListsClonesAndCounts) {
  auto c = small(2);
  c.n_clones = 2;
  const auto d = generate(c);
  std::ostringstream os;
  write_ground_truth(os, d);
  const auto text = os.str();
  for (auto id : d.clone_ids) EXPECT_NE(text.find("clone " + std::to_string(id)), std::string::npos);
  EXPECT_NE(text.find("edges " + std::to_string(kFirstObjectId) + " "), std::string::npos);
}

TEST(Workload, ConfigKeysParse) {
  GenConfig c;
  EXPECT_TRUE(c.set("n_objects", "42"));
  EXPECT_EQ(c.n_objects, 42u);
  EXPECT_TRUE(c.set("frequent_fraction", "0.25"));
  EXPECT_EQ(c.frequent_fraction, 0.25);
  EXPECT_FALSE(c.set("no_such_key", "1"));
  EXPECT_THROW(c.set("n_objects", "many"), DomainError);
  c.frequent_fraction = 1.5;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Oracle, EmptyGraphGivesEmptyAnswers) {
  auto catalog = std::make_shared<LocationCatalog>(std::vector<LocationVertex>{{1, 0, 0, {}}});
  OracleGraph g({}, catalog);
  Thresholds th;
  EXPECT_TRUE(oracle_q1(g, 5, 0, 100).empty());
  EXPECT_EQ(oracle_q2(g, 5, 6, 0, 100, th), 0u);
  EXPECT_TRUE(oracle_q3(g, 5, 0, 100, th).empty());
  EXPECT_TRUE(oracle_q4(g, 0, 100, th).empty());
}

TEST(Oracle, RefusesOversizedGraphs) {
  auto catalog = std::make_shared<LocationCatalog>(std::vector<LocationVertex>{{1, 0, 0, {}}});
  std::vector<Edge> edges(OracleGraph::kMaxEdges + 1, Edge{1, 0, 1, {}});
  EXPECT_THROW(OracleGraph(edges, catalog), DomainError);
}

TEST(Oracle, SelfSimilarityCountsUnorderedPairs) {
  auto catalog = std::make_shared<LocationCatalog>(
      std::vector<LocationVertex>{{1, 0, 0, {}}, {2, 50, 0, {}}, {3, 5000, 0, {}}});
  OracleGraph g({{7, 0, 1, {}}, {7, 100, 2, {}}, {7, 200, 1, {}}, {7, 300, 3, {}}}, catalog);
  Thresholds th;
  // Pairs among the first three are similar (3 pairs); location 3 is far from all.
  EXPECT_EQ(oracle_q2(g, 7, 7, 0, 1000, th), 3u);
}

TEST(Oracle, InvariantUnderInputOrder) {
  auto c = small(4);
  c.n_clones = 3;
  const auto d = generate(c);
  auto catalog = std::make_shared<LocationCatalog>(d.locations);
  auto shuffled = d.edges;
  Rng rng(99);
  rng.shuffle(shuffled);
  OracleGraph a(d.edges, catalog), b(shuffled, catalog);
  Thresholds th;
  const Timestamp end = 60 * 86400;
  for (ObjectId o : {kFirstObjectId, kFirstObjectId + 17, kFirstObjectId + 301}) {
    EXPECT_EQ(oracle_q1(a, o, 0, end), oracle_q1(b, o, 0, end));
    EXPECT_EQ(oracle_q3(a, o, 0, end, th), oracle_q3(b, o, 0, end, th));
    EXPECT_EQ(oracle_q2(a, o, o + 1, 0, end, th), oracle_q2(b, o, o + 1, 0, end, th));
  }
  EXPECT_EQ(oracle_q4(a, 0, end, th), oracle_q4(b, 0, end, th));
}
