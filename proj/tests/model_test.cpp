#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "past/io.hpp"
#include "past/model.hpp"

using namespace past;

TEST(Dist, KnownTriangles) {
  EXPECT_DOUBLE_EQ(dist(Point{0, 0}, Point{0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(dist(Point{0, 0}, Point{3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(dist(Point{1, 2}, Point{4, 6}), 5.0);
}

TEST(Dist, TriangleInequalityAndSymmetry) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e5, 1e5);
  for (int i = 0; i < 10000; ++i) {
    Point a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    EXPECT_LE(dist(a, c), dist(a, b) + dist(b, c) + 1e-9);
    EXPECT_EQ(dist(a, b), dist(b, a));
  }
}

TEST(RegionGrid, RejectsDegenerateShapes) {
  EXPECT_THROW(RegionGrid({0, 0}, 0.0, 4, 4), DomainError);
  EXPECT_THROW(RegionGrid({0, 0}, 10.0, 0, 4), DomainError);
  EXPECT_THROW(RegionGrid({0, 0}, 10.0, 4, 0), DomainError);
}

TEST(LocToRegion, FirstCellsAndRows) {
  RegionGrid g({0, 0}, 10.0, 4, 4);
  EXPECT_EQ(loc_to_region(Point{5, 5}, g), 0u);
  EXPECT_EQ(loc_to_region(Point{35, 5}, g), 3u);
  EXPECT_EQ(loc_to_region(Point{5, 15}, g), 4u);
}

TEST(LocToRegion, HalfOpenCellsWithClampedMaxEdge) {
  RegionGrid g({0, 0}, 10.0, 4, 4);
  EXPECT_EQ(loc_to_region(Point{10, 0}, g), 1u);
  EXPECT_EQ(loc_to_region(Point{40, 40}, g), 15u);
  EXPECT_EQ(loc_to_region(Point{40, 0}, g), 3u);
  EXPECT_THROW(loc_to_region(Point{40.001, 0}, g), DomainError);
  EXPECT_THROW(loc_to_region(Point{-0.001, 0}, g), DomainError);
}

TEST(LocToRegion, CenterRoundTripsEveryRegion) {
  RegionGrid g({-500.5, 1234.25}, 37.5, 13, 9);
  for (RegionId r = 0; r < g.region_count(); ++r) EXPECT_EQ(loc_to_region(g.center(r), g), r);
}

TEST(TimeRange, FloorDivision) {
  TimeDiscretization d{86400};
  EXPECT_EQ(time_range_of(0, d), 0);
  EXPECT_EQ(time_range_of(90000, d), 1);
  EXPECT_EQ(time_range_of(86400, d), 1);
  EXPECT_EQ(time_range_of(86399, d), 0);
  EXPECT_THROW(time_range_of(-1, d), DomainError);
  EXPECT_THROW((TimeDiscretization{0}.validate()), DomainError);
}

TEST(TimeRange, MonotoneInTimestamp) {
  std::mt19937_64 rng(5);
  TimeDiscretization d{3600};
  std::uniform_int_distribution<Timestamp> u(0, 10'000'000);
  for (int i = 0; i < 10000; ++i) {
    auto a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    EXPECT_LE(time_range_of(a, d), time_range_of(b, d));
  }
}

TEST(Thresholds, MustBePositive) {
  Thresholds t;
  EXPECT_NO_THROW(t.validate());
  t.th_dist = 0;
  EXPECT_THROW(t.validate(), DomainError);
}

TEST(LocationCatalog, LookupAndDuplicates) {
  LocationCatalog c({{1, 0, 0, {}}, {7, 3, 4, {}}});
  EXPECT_EQ(c.at(7).x, 3.0);
  EXPECT_EQ(c.find(8), nullptr);
  EXPECT_THROW(c.at(8), LookupError);
  EXPECT_THROW(LocationCatalog({{1, 0, 0, {}}, {1, 1, 1, {}}}), DomainError);
}

TEST(TextIo, EdgeLinesRoundTrip) {
  std::vector<Edge> edges{{7, 100, 9, {}}, {1, 2, 3, {4, 5}}};
  std::stringstream s;
  io::write_edges(s, edges);
  EXPECT_EQ(io::read_edges(s), edges);
}

TEST(TextIo, LocationsRoundTripExactly) {
  std::vector<LocationVertex> locs{{1, 0.1, 1.0 / 3.0, {}}, {2, 123456.789, -0.0, {}}};
  std::stringstream s;
  io::write_locations(s, locs);
  auto back = io::read_locations(s);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].y, 1.0 / 3.0);
  EXPECT_EQ(back[1].x, 123456.789);
}

TEST(TextIo, SkipsCommentsAndReportsBadLines) {
  std::stringstream ok("# header\n\n1,2,3\n");
  EXPECT_EQ(io::read_edges(ok).size(), 1u);
  std::stringstream bad("1,2,3\n1,x,3\n");
  try {
    io::read_edges(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(io::parse_edge_line("1,-5,3"), FormatError);
  EXPECT_THROW(io::parse_edge_line("1,2"), FormatError);
}
