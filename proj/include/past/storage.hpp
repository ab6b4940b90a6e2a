#pragma once

// Per-worker embedded partition store. Edges of one sub-partition (a region
// or slot within one TRU) form a columnar block; blocks live in append-only
// data files addressed by row keys through an append-only manifest.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "past/model.hpp"

namespace past {

using Bytes = std::vector<std::uint8_t>;

enum class Method : std::uint8_t { SpatioTemporal = 'A', KeyTemporal = 'B' };

// node_id | method | partition_id | time_range, big-endian, so byte order
// equals (node, method, partition, time) order.
struct RowKey {
  WorkerId node_id = 0;
  Method method = Method::SpatioTemporal;
  std::uint64_t partition_id = 0;
  TimeRangeIndex time_range = 0;

  friend bool operator==(const RowKey&, const RowKey&) = default;
  friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

inline constexpr std::size_t kRowKeyBytes = 4 + 1 + 8 + 8;

std::array<std::uint8_t, kRowKeyBytes> encode_row_key(const RowKey& key);
RowKey decode_row_key(std::span<const std::uint8_t> bytes);
std::string to_string(const RowKey& key);

// ---------------------------------------------------------------------------
// Codecs

enum class CodecId : std::uint8_t { Identity = 0, Lz4 = 1, Deflate = 2 };

class Codec {
 public:
  virtual ~Codec() = default;
  virtual CodecId id() const = 0;
  virtual std::string_view name() const = 0;
  virtual Bytes compress(std::span<const std::uint8_t> raw) const = 0;
  virtual Bytes decompress(std::span<const std::uint8_t> packed, std::size_t raw_size) const = 0;
};

const Codec& codec_for(CodecId id);
CodecId parse_codec(std::string_view name);

// ---------------------------------------------------------------------------
// Blocks

enum class Layout : std::uint8_t { C = 'C', R = 'R' };

Layout parse_layout(std::string_view name);

namespace column {
inline constexpr std::uint32_t kObject = 0;
inline constexpr std::uint32_t kTimestamp = 1;
inline constexpr std::uint32_t kLocation = 2;
inline constexpr std::uint32_t kFirstExtra = 3;
}  // namespace column

struct ColumnChunk {
  std::uint32_t raw_size = 0;
  Bytes data;  // compressed

  friend bool operator==(const ColumnChunk&, const ColumnChunk&) = default;
};

struct SubPartitionBlock {
  std::uint32_t edge_count = 0;
  CodecId codec = CodecId::Lz4;
  Layout layout = Layout::C;
  bool delta_timestamps = false;
  std::vector<ColumnChunk> columns;

  std::size_t column_count() const { return columns.size(); }
  std::size_t compressed_bytes() const;
  std::size_t raw_bytes() const;
  std::vector<std::uint64_t> decode_column(std::uint32_t index) const;
  std::vector<Edge> decode_edges() const;

  friend bool operator==(const SubPartitionBlock&, const SubPartitionBlock&) = default;
};

struct BlockOptions {
  Layout layout = Layout::C;
  CodecId codec = CodecId::Lz4;
  bool delta_timestamps = true;
};

// Sorts by (timestamp, object, location, extra) and compresses each column.
// All edges must carry the same number of extra values. Empty input -> nullopt.
std::optional<SubPartitionBlock> build_block(std::span<const Edge> edges, const BlockOptions& options = {});

// On-disk record:
//   magic "PSTB" | version u16 | row key | codec u8 | layout u8 | flags u8 |
//   edge_count u32 | ncols u16 | ncols x {offset u64, stored u32, raw u32} | payloads
Bytes serialize_block(const RowKey& key, const SubPartitionBlock& block);
std::pair<RowKey, SubPartitionBlock> parse_block(std::span<const std::uint8_t> record);

inline constexpr std::size_t kBlockHeaderBytes = 4 + 2 + kRowKeyBytes + 1 + 1 + 1 + 4 + 2;
inline constexpr std::size_t kDirectoryEntryBytes = 8 + 4 + 4;

// ---------------------------------------------------------------------------
// Store

// Primary tables are what queries read. Replica tables hold the second
// spatio-temporal copy and the collision copy used for fault tolerance.
enum class Table : std::uint8_t { Primary = 0, Replica = 1 };

struct StoreStats {
  std::uint64_t bytes_read = 0;
  std::uint64_t blocks_read = 0;
  std::uint64_t invocations = 0;

  StoreStats& operator+=(const StoreStats& o) {
    bytes_read += o.bytes_read;
    blocks_read += o.blocks_read;
    invocations += o.invocations;
    return *this;
  }
  friend StoreStats operator-(const StoreStats& a, const StoreStats& b) {
    return {a.bytes_read - b.bytes_read, a.blocks_read - b.blocks_read, a.invocations - b.invocations};
  }
  friend bool operator==(const StoreStats&, const StoreStats&) = default;
};

struct ColumnData {
  std::uint32_t edge_count = 0;
  std::vector<std::uint32_t> indices;             // requested column indices, ascending
  std::vector<std::vector<std::uint64_t>> values;  // parallel to indices

  const std::vector<std::uint64_t>& column(std::uint32_t index) const;
};

struct TimeInterval {
  TimeRangeIndex lo = 0;
  TimeRangeIndex hi = 0;  // inclusive
};

class BlockStore {
 public:
  using ScanVisitor = std::function<void(const RowKey&, const ColumnData&)>;

  BlockStore(std::filesystem::path dir, WorkerId node);
  ~BlockStore();
  BlockStore(const BlockStore&) = delete;
  BlockStore& operator=(const BlockStore&) = delete;

  WorkerId node() const { return node_; }
  const std::filesystem::path& dir() const { return dir_; }

  // Appends the block and publishes it in the manifest; replaces any block
  // stored under the same key. Rejects keys addressed to another node.
  void put_block(const RowKey& key, const SubPartitionBlock& block, Table table = Table::Primary);

  bool contains(const RowKey& key, Table table = Table::Primary) const;
  SubPartitionBlock get_block(const RowKey& key, Table table = Table::Primary) const;
  Bytes get_record(const RowKey& key, Table table = Table::Primary) const;

  // One backend invocation. Layout C reads only the wanted columns; layout R
  // reads the whole record and decodes the wanted ones. Counters go to the
  // store totals and, when given, to `sink` as well.
  ColumnData read_columns(const RowKey& key, std::span<const std::uint32_t> wanted, Table table = Table::Primary,
                          StoreStats* sink = nullptr);

  // One invocation per partition id; visits every stored block of those
  // partitions whose time range falls in one of the (sorted, disjoint) intervals.
  void scan(Method method, std::span<const std::uint64_t> partition_ids, std::span<const TimeInterval> ranges,
            std::span<const std::uint32_t> wanted, const ScanVisitor& visit, Table table = Table::Primary,
            StoreStats* sink = nullptr);
  void scan_range(Method method, std::span<const std::uint64_t> partition_ids, TimeRangeIndex tr_lo,
                  TimeRangeIndex tr_hi, std::span<const std::uint32_t> wanted, const ScanVisitor& visit,
                  Table table = Table::Primary, StoreStats* sink = nullptr);

  std::vector<RowKey> keys(Method method, Table table = Table::Primary) const;
  std::uint64_t stored_bytes(Method method, Table table) const;
  std::uint64_t stored_edges(Method method, Table table) const;
  StoreStats stats() const;

 private:
  struct Extent {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint32_t edge_count = 0;
    Layout layout = Layout::C;
  };
  struct TableFiles;

  TableFiles& files(Method method, Table table) const;
  const Extent& extent(const RowKey& key, Table table) const;
  ColumnData read_extent(const TableFiles& f, const Extent& e, std::span<const std::uint32_t> wanted,
                         StoreStats* sink);
  void account(const StoreStats& delta, StoreStats* sink);

  std::filesystem::path dir_;
  WorkerId node_;
  mutable std::mutex mutex_;
  std::array<std::unique_ptr<TableFiles>, 4> tables_;
  std::atomic<std::uint64_t> bytes_read_{0};
  std::atomic<std::uint64_t> blocks_read_{0};
  std::atomic<std::uint64_t> invocations_{0};
};

}  // namespace past
