#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "past/storage.hpp"

using namespace past;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("past-storage-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<Edge> random_edges(std::size_t n, std::size_t extras, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Edge> out;
  for (std::size_t i = 0; i < n; ++i) {
    Edge e{rng() % 1000, static_cast<Timestamp>(1'600'000'000 + rng() % 3600), rng() % 500, {}};
    for (std::size_t x = 0; x < extras; ++x) e.extra.push_back(rng());
    out.push_back(e);
  }
  return out;
}

std::multiset<std::tuple<ObjectId, Timestamp, LocationId>> core_multiset(const std::vector<Edge>& edges) {
  std::multiset<std::tuple<ObjectId, Timestamp, LocationId>> m;
  for (const auto& e : edges) m.emplace(e.object_id, e.timestamp, e.location_id);
  return m;
}

const std::uint32_t kCore[] = {0, 1, 2};

}  // namespace

TEST(RowKey, FieldLayoutIsBigEndian) {
  auto b = encode_row_key({0x01020304, Method::KeyTemporal, 0x05, 0x0607});
  const std::array<std::uint8_t, 21> want{1, 2, 3, 4, 'B', 0, 0, 0, 0, 0, 0, 0, 5, 0, 0, 0, 0, 0, 0, 6, 7};
  EXPECT_EQ(b, want);
  EXPECT_THROW(encode_row_key({0, Method::SpatioTemporal, 0, -1}), DomainError);
  auto bad = b;
  bad[4] = 'Z';
  EXPECT_THROW(decode_row_key(bad), FormatError);
}

TEST(RowKey, RoundTripPreservesOrder) {
  std::mt19937_64 rng(1);
  std::vector<RowKey> keys;
  for (int i = 0; i < 10000; ++i) {
    // small domains force many shared prefixes
    keys.push_back({static_cast<WorkerId>(rng() % 3), rng() % 2 ? Method::SpatioTemporal : Method::KeyTemporal,
                    rng() % 5 == 0 ? rng() : rng() % 7, static_cast<TimeRangeIndex>(rng() >> 1)});
  }
  for (const auto& k : keys) EXPECT_EQ(decode_row_key(encode_row_key(k)), k);
  for (std::size_t i = 1; i < keys.size(); ++i) {
    const auto& a = keys[i - 1];
    const auto& b = keys[i];
    EXPECT_EQ(a < b, encode_row_key(a) < encode_row_key(b));
    EXPECT_EQ(a == b, encode_row_key(a) == encode_row_key(b));
  }
}

TEST(Block, SingleEdgeColumns) {
  std::vector<Edge> one{{7, 100, 9, {}}};
  auto b = build_block(one);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->edge_count, 1u);
  EXPECT_EQ(b->decode_column(0), std::vector<std::uint64_t>{7});
  EXPECT_EQ(b->decode_column(1), std::vector<std::uint64_t>{100});
  EXPECT_EQ(b->decode_column(2), std::vector<std::uint64_t>{9});
  EXPECT_FALSE(build_block({}));
}

TEST(Block, SortedByTimeThenObject) {
  auto edges = random_edges(500, 1, 2);
  auto out = build_block(edges)->decode_edges();
  EXPECT_TRUE(std::is_sorted(out.begin(), out.end(), storage_order_less));
  std::sort(edges.begin(), edges.end());
  std::sort(out.begin(), out.end());
  EXPECT_EQ(out, edges);
}

TEST(Block, RejectsMixedExtraWidths) {
  std::vector<Edge> mixed{{1, 1, 1, {}}, {2, 2, 2, {3}}};
  EXPECT_THROW(build_block(mixed), DomainError);
}

TEST(Block, CompressesTimestampColumn) {
  auto edges = random_edges(10000, 0, 3);
  for (auto codec : {CodecId::Lz4, CodecId::Deflate}) {
    auto b = build_block(edges, {Layout::C, codec, true});
    EXPECT_LT(b->columns[column::kTimestamp].data.size(), b->columns[column::kTimestamp].raw_size);
    EXPECT_LT(b->compressed_bytes(), b->raw_bytes());
  }
  auto ident = build_block(edges, {Layout::C, CodecId::Identity, false});
  EXPECT_EQ(ident->compressed_bytes(), ident->raw_bytes());
}

TEST(Block, SerializeParseRoundTrip) {
  auto edges = random_edges(300, 2, 4);
  for (auto layout : {Layout::C, Layout::R}) {
    for (auto codec : {CodecId::Identity, CodecId::Lz4, CodecId::Deflate}) {
      for (bool delta : {false, true}) {
        auto b = *build_block(edges, {layout, codec, delta});
        RowKey k{3, Method::SpatioTemporal, 17, 44};
        auto [k2, b2] = parse_block(serialize_block(k, b));
        EXPECT_EQ(k2, k);
        EXPECT_EQ(b2, b);
        auto back = b2.decode_edges();
        std::sort(back.begin(), back.end());
        auto want = edges;
        std::sort(want.begin(), want.end());
        EXPECT_EQ(back, want);
      }
    }
  }
}

TEST(Block, ParseRejectsGarbage) {
  auto rec = serialize_block({0, Method::SpatioTemporal, 0, 0}, *build_block(random_edges(10, 0, 5)));
  auto bad = rec;
  bad[0] = 'X';
  EXPECT_THROW(parse_block(bad), FormatError);
  EXPECT_THROW(parse_block(std::span(rec).first(20)), FormatError);
  EXPECT_THROW(parse_block(std::span(rec).first(rec.size() - 1)), FormatError);
}

TEST(BlockStore, PutGetReplaceAndForeignKey) {
  TempDir dir;
  BlockStore store(dir.path(), 2);
  RowKey k{2, Method::SpatioTemporal, 5, 10};
  auto b1 = *build_block(random_edges(50, 0, 6));
  store.put_block(k, b1);
  EXPECT_EQ(store.get_record(k), serialize_block(k, b1));
  EXPECT_EQ(store.get_block(k), b1);

  auto b2 = *build_block(random_edges(70, 0, 7));
  store.put_block(k, b2);
  EXPECT_EQ(store.get_block(k), b2);
  EXPECT_EQ(store.keys(Method::SpatioTemporal).size(), 1u);

  EXPECT_THROW(store.put_block({3, Method::SpatioTemporal, 5, 10}, b1), StoreError);
  EXPECT_THROW(store.get_block({2, Method::SpatioTemporal, 5, 11}), NotFoundError);
  EXPECT_THROW(store.read_columns({2, Method::KeyTemporal, 5, 10}, kCore), NotFoundError);
  EXPECT_FALSE(store.contains(k, Table::Replica));
}

TEST(BlockStore, ReopenReplaysManifestAndDropsTornTail) {
  TempDir dir;
  RowKey k1{0, Method::KeyTemporal, 1, 1}, k2{0, Method::KeyTemporal, 2, 1};
  auto b1 = *build_block(random_edges(20, 0, 8));
  auto b2 = *build_block(random_edges(30, 0, 9));
  {
    BlockStore store(dir.path(), 0);
    store.put_block(k1, b1);
    store.put_block(k2, b2);
    store.put_block(k1, b2, Table::Replica);
  }
  {
    BlockStore store(dir.path(), 0);
    EXPECT_EQ(store.get_block(k1), b1);
    EXPECT_EQ(store.get_block(k2), b2);
    EXPECT_EQ(store.get_block(k1, Table::Replica), b2);
  }
  // Chop the last manifest entry in half: the put of k2 never committed.
  const auto manifest = dir.path() / "primary-B.manifest";
  fs::resize_file(manifest, fs::file_size(manifest) - 10);
  BlockStore store(dir.path(), 0);
  EXPECT_TRUE(store.contains(k1));
  EXPECT_FALSE(store.contains(k2));
  store.put_block(k2, b1);
  EXPECT_EQ(store.get_block(k2), b1);
}

TEST(BlockStore, LayoutsReturnIdenticalColumns) {
  TempDir dir;
  BlockStore store(dir.path(), 0);
  auto edges = random_edges(2000, 10, 10);
  RowKey kc{0, Method::SpatioTemporal, 1, 0}, kr{0, Method::SpatioTemporal, 2, 0};
  store.put_block(kc, *build_block(edges, {Layout::C, CodecId::Lz4, true}));
  store.put_block(kr, *build_block(edges, {Layout::R, CodecId::Lz4, true}));

  auto s0 = store.stats();
  auto c = store.read_columns(kc, kCore);
  auto s1 = store.stats();
  auto r = store.read_columns(kr, kCore);
  auto s2 = store.stats();
  EXPECT_EQ(c.values, r.values);
  EXPECT_EQ(c.edge_count, 2000u);
  EXPECT_LT((s1 - s0).bytes_read, (s2 - s1).bytes_read);
  EXPECT_EQ((s1 - s0).invocations, 1u);
  EXPECT_EQ((s1 - s0).blocks_read, 1u);

  auto empty = store.read_columns(kr, {});
  EXPECT_EQ(empty.edge_count, 2000u);
  EXPECT_TRUE(empty.values.empty());
  EXPECT_EQ(store.stats().bytes_read, s2.bytes_read);
  EXPECT_THROW(empty.column(0), LookupError);
  EXPECT_THROW(store.read_columns(kc, std::vector<std::uint32_t>{99}), LookupError);
}

TEST(BlockStore, RoundTripAllLayoutsAndCodecs) {
  TempDir dir;
  BlockStore store(dir.path(), 1);
  auto edges = random_edges(777, 3, 11);
  std::uint64_t pid = 0;
  for (auto layout : {Layout::C, Layout::R}) {
    for (auto codec : {CodecId::Identity, CodecId::Lz4, CodecId::Deflate}) {
      RowKey k{1, Method::KeyTemporal, pid++, 3};
      store.put_block(k, *build_block(edges, {layout, codec, true}));
      const std::uint32_t all[] = {0, 1, 2, 3, 4, 5};
      auto cols = store.read_columns(k, all);
      std::vector<Edge> back;
      for (std::uint32_t i = 0; i < cols.edge_count; ++i) {
        back.push_back({cols.column(0)[i], static_cast<Timestamp>(cols.column(1)[i]), cols.column(2)[i],
                        {cols.column(3)[i], cols.column(4)[i], cols.column(5)[i]}});
      }
      std::sort(back.begin(), back.end());
      auto want = edges;
      std::sort(want.begin(), want.end());
      EXPECT_EQ(back, want);
    }
  }
}

TEST(BlockStore, ColumnLayoutReadsOnlyWantedColumns) {
  // bytes_read(C) < bytes_read(R) whenever k < n columns are wanted.
  TempDir dir;
  BlockStore store(dir.path(), 0);
  std::uint64_t pid = 0;
  for (std::size_t extras = 1; extras <= 9; ++extras) {
    auto edges = random_edges(500, extras, 12 + extras);
    RowKey kc{0, Method::SpatioTemporal, pid++, 0}, kr{0, Method::SpatioTemporal, pid++, 0};
    store.put_block(kc, *build_block(edges, {Layout::C, CodecId::Lz4, true}));
    store.put_block(kr, *build_block(edges, {Layout::R, CodecId::Lz4, true}));
    for (std::uint32_t k = 1; k < 3 + extras; ++k) {
      std::vector<std::uint32_t> wanted(k);
      std::iota(wanted.begin(), wanted.end(), 0u);
      auto s0 = store.stats();
      store.read_columns(kc, wanted);
      auto s1 = store.stats();
      store.read_columns(kr, wanted);
      auto s2 = store.stats();
      EXPECT_LT((s1 - s0).bytes_read, (s2 - s1).bytes_read) << "extras=" << extras << " k=" << k;
    }
  }
}

TEST(BlockStore, ScanRangeMatchesKeyEnumeration) {
  TempDir dir;
  BlockStore store(dir.path(), 0);
  std::mt19937_64 rng(13);
  std::set<RowKey> stored;
  for (int i = 0; i < 120; ++i) {
    RowKey k{0, rng() % 2 ? Method::SpatioTemporal : Method::KeyTemporal, rng() % 8,
             static_cast<TimeRangeIndex>(rng() % 12)};
    store.put_block(k, *build_block(random_edges(1 + rng() % 5, 0, rng())));
    stored.insert(k);
  }
  for (int trial = 0; trial < 200; ++trial) {
    const Method m = trial % 2 ? Method::SpatioTemporal : Method::KeyTemporal;
    std::vector<std::uint64_t> ids;
    for (std::uint64_t p = 0; p < 9; ++p) {
      if (rng() % 3 == 0) ids.push_back(p);
    }
    TimeRangeIndex lo = rng() % 12, hi = rng() % 12;
    if (lo > hi) std::swap(lo, hi);
    std::set<RowKey> want;
    for (const auto& k : stored) {
      if (k.method == m && std::count(ids.begin(), ids.end(), k.partition_id) && k.time_range >= lo &&
          k.time_range <= hi) {
        want.insert(k);
      }
    }
    std::set<RowKey> got;
    const auto before = store.stats();
    store.scan_range(m, ids, lo, hi, kCore, [&](const RowKey& k, const ColumnData&) { got.insert(k); });
    EXPECT_EQ(got, want);
    EXPECT_EQ((store.stats() - before).invocations, ids.size());
    EXPECT_EQ((store.stats() - before).blocks_read, want.size());
  }
  EXPECT_THROW(store.scan_range(Method::SpatioTemporal, std::vector<std::uint64_t>{1}, 5, 4, kCore,
                                [](const RowKey&, const ColumnData&) {}),
               DomainError);
}

TEST(BlockStore, ScanSingleRangeAndUnionCoversEverything) {
  TempDir dir;
  BlockStore store(dir.path(), 0);
  for (TimeRangeIndex tr : {3, 4, 5}) {
    store.put_block({0, Method::SpatioTemporal, 7, tr}, *build_block(random_edges(10, 0, 20 + tr)));
  }
  std::vector<RowKey> got;
  const std::uint64_t ids[] = {7};
  store.scan_range(Method::SpatioTemporal, ids, 4, 4, kCore, [&](const RowKey& k, const ColumnData&) {
    got.push_back(k);
  });
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].time_range, 4);
  got.clear();
  store.scan_range(Method::SpatioTemporal, ids, 6, 9, kCore, [&](const RowKey& k, const ColumnData&) {
    got.push_back(k);
  });
  EXPECT_TRUE(got.empty());

  std::uint64_t edges = 0;
  store.scan_range(Method::SpatioTemporal, ids, 0, 1000, {}, [&](const RowKey&, const ColumnData& c) {
    edges += c.edge_count;
  });
  EXPECT_EQ(edges, 30u);
  EXPECT_EQ(store.stored_edges(Method::SpatioTemporal, Table::Primary), 30u);
}

TEST(BlockStore, CorruptPayloadIsDetected) {
  TempDir dir;
  RowKey k{0, Method::SpatioTemporal, 1, 1};
  {
    BlockStore store(dir.path(), 0);
    store.put_block(k, *build_block(random_edges(400, 0, 30), {Layout::C, CodecId::Deflate, true}));
  }
  {
    std::fstream f(dir.path() / "primary-A.blk", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(fs::file_size(dir.path() / "primary-A.blk") - 40));
    f.put('\x5a').put('\x5a').put('\x5a');
  }
  BlockStore store(dir.path(), 0);
  const std::uint32_t all[] = {0, 1, 2};
  EXPECT_THROW(store.read_columns(k, all), FormatError);
}
