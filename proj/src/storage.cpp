#include "past/storage.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "lz4.h"

namespace past {

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'S', 'T', 'B'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kFlagDeltaTimestamps = 0x01;

// Manifest entry: row key | offset u64 | length u64 | edge_count u32 | layout u8
constexpr std::size_t kManifestEntryBytes = kRowKeyBytes + 8 + 8 + 4 + 1;

template <typename T>
void put_be(std::uint8_t* out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * (sizeof(T) - 1 - i)));
}

template <typename T>
T get_be(const std::uint8_t* in) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<T>((v << 8) | in[i]);
  return v;
}

template <typename T>
void append_be(Bytes& out, T v) {
  const auto n = out.size();
  out.resize(n + sizeof(T));
  put_be(out.data() + n, v);
}

Bytes encode_u64_le(std::span<const std::uint64_t> values) {
  Bytes out(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<std::uint8_t>(values[i] >> (8 * b));
  }
  return out;
}

std::vector<std::uint64_t> decode_u64_le(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) throw FormatError("column length is not a multiple of 8");
  std::vector<std::uint64_t> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[i * 8 + b];
    out[i] = v;
  }
  return out;
}

void delta_encode(std::vector<std::uint64_t>& v) {
  for (std::size_t i = v.size(); i-- > 1;) v[i] -= v[i - 1];
}

void delta_decode(std::vector<std::uint64_t>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) v[i] += v[i - 1];
}

class IdentityCodec final : public Codec {
 public:
  CodecId id() const override { return CodecId::Identity; }
  std::string_view name() const override { return "identity"; }
  Bytes compress(std::span<const std::uint8_t> raw) const override { return {raw.begin(), raw.end()}; }
  Bytes decompress(std::span<const std::uint8_t> packed, std::size_t raw_size) const override {
    if (packed.size() != raw_size) throw FormatError("identity payload size mismatch");
    return {packed.begin(), packed.end()};
  }
};

class Lz4Codec final : public Codec {
 public:
  CodecId id() const override { return CodecId::Lz4; }
  std::string_view name() const override { return "lz4"; }
  Bytes compress(std::span<const std::uint8_t> raw) const override {
    if (raw.size() > static_cast<std::size_t>(LZ4_MAX_INPUT_SIZE)) throw StoreError("column too large for lz4");
    Bytes out(static_cast<std::size_t>(LZ4_compressBound(static_cast<int>(raw.size()))));
    const int n = LZ4_compress_default(reinterpret_cast<const char*>(raw.data()), reinterpret_cast<char*>(out.data()),
                                       static_cast<int>(raw.size()), static_cast<int>(out.size()));
    if (n <= 0 && !raw.empty()) throw StoreError("lz4 compression failed");
    out.resize(static_cast<std::size_t>(std::max(n, 0)));
    return out;
  }
  Bytes decompress(std::span<const std::uint8_t> packed, std::size_t raw_size) const override {
    Bytes out(raw_size);
    if (raw_size == 0) return out;
    const int n = LZ4_decompress_safe(reinterpret_cast<const char*>(packed.data()), reinterpret_cast<char*>(out.data()),
                                      static_cast<int>(packed.size()), static_cast<int>(raw_size));
    if (n < 0 || static_cast<std::size_t>(n) != raw_size) throw FormatError("corrupt lz4 payload");
    return out;
  }
};

class DeflateCodec final : public Codec {
 public:
  CodecId id() const override { return CodecId::Deflate; }
  std::string_view name() const override { return "deflate"; }
  Bytes compress(std::span<const std::uint8_t> raw) const override {
    uLongf len = compressBound(static_cast<uLong>(raw.size()));
    Bytes out(len);
    if (::compress2(out.data(), &len, raw.data(), static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK) {
      throw StoreError("deflate compression failed");
    }
    out.resize(len);
    return out;
  }
  Bytes decompress(std::span<const std::uint8_t> packed, std::size_t raw_size) const override {
    Bytes out(raw_size);
    uLongf len = static_cast<uLongf>(raw_size);
    const int rc = ::uncompress(out.data(), &len, packed.data(), static_cast<uLong>(packed.size()));
    if (rc != Z_OK || len != raw_size) throw FormatError("corrupt deflate payload");
    return out;
  }
};

struct DirectoryEntry {
  std::uint64_t offset = 0;  // from the start of the record
  std::uint32_t stored = 0;
  std::uint32_t raw = 0;
};

DirectoryEntry parse_directory_entry(const std::uint8_t* p) {
  return {get_be<std::uint64_t>(p), get_be<std::uint32_t>(p + 8), get_be<std::uint32_t>(p + 12)};
}

struct RecordHeader {
  RowKey key;
  CodecId codec = CodecId::Identity;
  Layout layout = Layout::C;
  std::uint8_t flags = 0;
  std::uint32_t edge_count = 0;
  std::uint16_t ncols = 0;
};

RecordHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kBlockHeaderBytes) throw FormatError("block record shorter than its header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad block magic");
  const std::uint8_t* p = bytes.data() + 4;
  if (get_be<std::uint16_t>(p) != kVersion) throw FormatError("unsupported block version");
  p += 2;
  RecordHeader h;
  h.key = decode_row_key({p, kRowKeyBytes});
  p += kRowKeyBytes;
  if (*p > static_cast<std::uint8_t>(CodecId::Deflate)) throw FormatError("unknown codec id");
  h.codec = static_cast<CodecId>(*p++);
  if (*p != 'C' && *p != 'R') throw FormatError("unknown block layout");
  h.layout = static_cast<Layout>(*p++);
  h.flags = *p++;
  h.edge_count = get_be<std::uint32_t>(p);
  p += 4;
  h.ncols = get_be<std::uint16_t>(p);
  return h;
}

std::vector<std::uint64_t> decode_payload(const RecordHeader& h, std::uint32_t index, const DirectoryEntry& d,
                                          std::span<const std::uint8_t> payload) {
  if (d.raw != std::uint64_t{h.edge_count} * 8) throw FormatError("column length disagrees with edge count");
  auto raw = codec_for(h.codec).decompress(payload, d.raw);
  auto values = decode_u64_le(raw);
  if (index == column::kTimestamp && (h.flags & kFlagDeltaTimestamps)) delta_decode(values);
  return values;
}

void full_pwrite(int fd, const std::uint8_t* data, std::size_t n, std::uint64_t offset) {
  while (n > 0) {
    const ssize_t w = ::pwrite(fd, data, n, static_cast<off_t>(offset));
    if (w < 0) {
      if (errno == EINTR) continue;
      throw StoreError(std::string("write failed: ") + std::strerror(errno));
    }
    data += w;
    offset += static_cast<std::uint64_t>(w);
    n -= static_cast<std::size_t>(w);
  }
}

void full_pread(int fd, std::uint8_t* data, std::size_t n, std::uint64_t offset) {
  while (n > 0) {
    const ssize_t r = ::pread(fd, data, n, static_cast<off_t>(offset));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw StoreError(std::string("read failed: ") + std::strerror(errno));
    }
    if (r == 0) throw StoreError("unexpected end of block file");
    data += r;
    offset += static_cast<std::uint64_t>(r);
    n -= static_cast<std::size_t>(r);
  }
}

std::size_t table_slot(Method m, Table t) {
  return (m == Method::SpatioTemporal ? 0 : 2) + static_cast<std::size_t>(t);
}

}  // namespace

// ---------------------------------------------------------------------------

std::array<std::uint8_t, kRowKeyBytes> encode_row_key(const RowKey& key) {
  if (key.time_range < 0) throw DomainError("row key time range must be non-negative");
  std::array<std::uint8_t, kRowKeyBytes> out{};
  put_be(out.data(), key.node_id);
  out[4] = static_cast<std::uint8_t>(key.method);
  put_be(out.data() + 5, key.partition_id);
  put_be(out.data() + 13, static_cast<std::uint64_t>(key.time_range));
  return out;
}

RowKey decode_row_key(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kRowKeyBytes) throw FormatError("row key must be 21 bytes");
  if (bytes[4] != 'A' && bytes[4] != 'B') throw FormatError("row key method must be 'A' or 'B'");
  RowKey k;
  k.node_id = get_be<std::uint32_t>(bytes.data());
  k.method = static_cast<Method>(bytes[4]);
  k.partition_id = get_be<std::uint64_t>(bytes.data() + 5);
  const auto tr = get_be<std::uint64_t>(bytes.data() + 13);
  if (tr > static_cast<std::uint64_t>(INT64_MAX)) throw FormatError("row key time range out of range");
  k.time_range = static_cast<TimeRangeIndex>(tr);
  return k;
}

std::string to_string(const RowKey& key) {
  return std::to_string(key.node_id) + "/" + static_cast<char>(key.method) + "/" + std::to_string(key.partition_id) +
         "/" + std::to_string(key.time_range);
}

const Codec& codec_for(CodecId id) {
  static const IdentityCodec identity;
  static const Lz4Codec lz4;
  static const DeflateCodec deflate;
  switch (id) {
    case CodecId::Identity: return identity;
    case CodecId::Lz4: return lz4;
    case CodecId::Deflate: return deflate;
  }
  throw FormatError("unknown codec id");
}

CodecId parse_codec(std::string_view name) {
  if (name == "identity" || name == "none") return CodecId::Identity;
  if (name == "lz4") return CodecId::Lz4;
  if (name == "deflate" || name == "zlib") return CodecId::Deflate;
  throw DomainError("unknown codec '" + std::string(name) + "'");
}

Layout parse_layout(std::string_view name) {
  if (name == "C" || name == "c") return Layout::C;
  if (name == "R" || name == "r") return Layout::R;
  throw DomainError("unknown layout '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

std::size_t SubPartitionBlock::compressed_bytes() const {
  std::size_t n = 0;
  for (const auto& c : columns) n += c.data.size();
  return n;
}

std::size_t SubPartitionBlock::raw_bytes() const {
  std::size_t n = 0;
  for (const auto& c : columns) n += c.raw_size;
  return n;
}

std::vector<std::uint64_t> SubPartitionBlock::decode_column(std::uint32_t index) const {
  if (index >= columns.size()) throw LookupError("block has no column " + std::to_string(index));
  const auto& c = columns[index];
  if (c.raw_size != std::uint64_t{edge_count} * 8) throw FormatError("column length disagrees with edge count");
  auto values = decode_u64_le(codec_for(codec).decompress(c.data, c.raw_size));
  if (index == column::kTimestamp && delta_timestamps) delta_decode(values);
  return values;
}

std::vector<Edge> SubPartitionBlock::decode_edges() const {
  if (columns.size() < column::kFirstExtra) throw FormatError("block is missing core columns");
  std::vector<std::vector<std::uint64_t>> cols;
  cols.reserve(columns.size());
  for (std::uint32_t i = 0; i < columns.size(); ++i) cols.push_back(decode_column(i));
  std::vector<Edge> out(edge_count);
  for (std::uint32_t i = 0; i < edge_count; ++i) {
    auto& e = out[i];
    e.object_id = cols[column::kObject][i];
    e.timestamp = static_cast<Timestamp>(cols[column::kTimestamp][i]);
    e.location_id = cols[column::kLocation][i];
    for (std::size_t c = column::kFirstExtra; c < cols.size(); ++c) e.extra.push_back(cols[c][i]);
  }
  return out;
}

std::optional<SubPartitionBlock> build_block(std::span<const Edge> edges, const BlockOptions& options) {
  if (edges.empty()) return std::nullopt;
  if (edges.size() > UINT32_MAX) throw DomainError("too many edges for one block");
  const std::size_t extras = edges.front().extra.size();
  for (const auto& e : edges) {
    if (e.extra.size() != extras) throw DomainError("edges in one block must have the same number of extras");
    if (e.timestamp < 0) throw DomainError("negative timestamp");
  }

  std::vector<Edge> sorted(edges.begin(), edges.end());
  std::sort(sorted.begin(), sorted.end(), storage_order_less);

  const std::size_t ncols = column::kFirstExtra + extras;
  std::vector<std::vector<std::uint64_t>> cols(ncols, std::vector<std::uint64_t>(sorted.size()));
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cols[column::kObject][i] = sorted[i].object_id;
    cols[column::kTimestamp][i] = static_cast<std::uint64_t>(sorted[i].timestamp);
    cols[column::kLocation][i] = sorted[i].location_id;
    for (std::size_t x = 0; x < extras; ++x) cols[column::kFirstExtra + x][i] = sorted[i].extra[x];
  }
  if (options.delta_timestamps) delta_encode(cols[column::kTimestamp]);

  SubPartitionBlock block;
  block.edge_count = static_cast<std::uint32_t>(sorted.size());
  block.codec = options.codec;
  block.layout = options.layout;
  block.delta_timestamps = options.delta_timestamps;
  const auto& codec = codec_for(options.codec);
  for (const auto& c : cols) {
    auto raw = encode_u64_le(c);
    block.columns.push_back({static_cast<std::uint32_t>(raw.size()), codec.compress(raw)});
  }
  return block;
}

Bytes serialize_block(const RowKey& key, const SubPartitionBlock& block) {
  if (block.columns.size() > UINT16_MAX) throw DomainError("too many columns");
  Bytes out;
  out.reserve(kBlockHeaderBytes + block.columns.size() * kDirectoryEntryBytes + block.compressed_bytes());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  append_be<std::uint16_t>(out, kVersion);
  const auto k = encode_row_key(key);
  out.insert(out.end(), k.begin(), k.end());
  out.push_back(static_cast<std::uint8_t>(block.codec));
  out.push_back(static_cast<std::uint8_t>(block.layout));
  out.push_back(block.delta_timestamps ? kFlagDeltaTimestamps : 0);
  append_be<std::uint32_t>(out, block.edge_count);
  append_be<std::uint16_t>(out, static_cast<std::uint16_t>(block.columns.size()));

  std::uint64_t offset = kBlockHeaderBytes + block.columns.size() * kDirectoryEntryBytes;
  for (const auto& c : block.columns) {
    append_be<std::uint64_t>(out, offset);
    append_be<std::uint32_t>(out, static_cast<std::uint32_t>(c.data.size()));
    append_be<std::uint32_t>(out, c.raw_size);
    offset += c.data.size();
  }
  for (const auto& c : block.columns) out.insert(out.end(), c.data.begin(), c.data.end());
  return out;
}

std::pair<RowKey, SubPartitionBlock> parse_block(std::span<const std::uint8_t> record) {
  const auto h = parse_header(record);
  const std::size_t dir_end = kBlockHeaderBytes + std::size_t{h.ncols} * kDirectoryEntryBytes;
  if (record.size() < dir_end) throw FormatError("block record truncated in directory");
  SubPartitionBlock block;
  block.edge_count = h.edge_count;
  block.codec = h.codec;
  block.layout = h.layout;
  block.delta_timestamps = (h.flags & kFlagDeltaTimestamps) != 0;
  for (std::uint16_t i = 0; i < h.ncols; ++i) {
    const auto d = parse_directory_entry(record.data() + kBlockHeaderBytes + i * kDirectoryEntryBytes);
    if (d.offset < dir_end || d.offset + d.stored > record.size()) throw FormatError("column payload out of bounds");
    block.columns.push_back({d.raw, Bytes(record.begin() + static_cast<std::ptrdiff_t>(d.offset),
                                          record.begin() + static_cast<std::ptrdiff_t>(d.offset + d.stored))});
  }
  return {h.key, std::move(block)};
}

const std::vector<std::uint64_t>& ColumnData::column(std::uint32_t index) const {
  auto it = std::lower_bound(indices.begin(), indices.end(), index);
  if (it == indices.end() || *it != index) throw LookupError("column " + std::to_string(index) + " was not read");
  return values[static_cast<std::size_t>(it - indices.begin())];
}

// ---------------------------------------------------------------------------
// BlockStore

struct BlockStore::TableFiles {
  int data_fd = -1;
  int manifest_fd = -1;
  std::uint64_t data_size = 0;
  std::uint64_t manifest_size = 0;
  std::map<RowKey, Extent> index;

  ~TableFiles() {
    if (data_fd >= 0) ::close(data_fd);
    if (manifest_fd >= 0) ::close(manifest_fd);
  }
};

namespace {

int open_or_throw(const std::filesystem::path& p) {
  const int fd = ::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw StoreError("cannot open " + p.string() + ": " + std::strerror(errno));
  return fd;
}

std::uint64_t file_size(int fd) {
  const off_t end = ::lseek(fd, 0, SEEK_END);
  if (end < 0) throw StoreError(std::string("cannot size file: ") + std::strerror(errno));
  return static_cast<std::uint64_t>(end);
}

}  // namespace

BlockStore::BlockStore(std::filesystem::path dir, WorkerId node) : dir_(std::move(dir)), node_(node) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw StoreError("cannot create store directory " + dir_.string() + ": " + ec.message());

  for (Method m : {Method::SpatioTemporal, Method::KeyTemporal}) {
    for (Table t : {Table::Primary, Table::Replica}) {
      const std::string stem = std::string(t == Table::Primary ? "primary-" : "replica-") + static_cast<char>(m);
      auto f = std::make_unique<TableFiles>();
      f->data_fd = open_or_throw(dir_ / (stem + ".blk"));
      f->manifest_fd = open_or_throw(dir_ / (stem + ".manifest"));
      f->data_size = file_size(f->data_fd);
      const std::uint64_t msize = file_size(f->manifest_fd);

      // Replay; a torn trailing entry or one pointing past the data file is
      // the residue of an interrupted put and is dropped.
      Bytes manifest(static_cast<std::size_t>(msize));
      if (msize > 0) full_pread(f->manifest_fd, manifest.data(), manifest.size(), 0);
      std::uint64_t good = 0;
      for (std::size_t off = 0; off + kManifestEntryBytes <= manifest.size(); off += kManifestEntryBytes) {
        const std::uint8_t* p = manifest.data() + off;
        Extent e;
        RowKey key;
        try {
          key = decode_row_key({p, kRowKeyBytes});
        } catch (const FormatError&) {
          break;
        }
        e.offset = get_be<std::uint64_t>(p + kRowKeyBytes);
        e.length = get_be<std::uint64_t>(p + kRowKeyBytes + 8);
        e.edge_count = get_be<std::uint32_t>(p + kRowKeyBytes + 16);
        e.layout = static_cast<Layout>(p[kRowKeyBytes + 20]);
        if (e.offset + e.length > f->data_size) break;
        f->index[key] = e;
        good = off + kManifestEntryBytes;
      }
      f->manifest_size = good;
      tables_[table_slot(m, t)] = std::move(f);
    }
  }
}

BlockStore::~BlockStore() = default;

BlockStore::TableFiles& BlockStore::files(Method method, Table table) const {
  return *tables_[table_slot(method, table)];
}

void BlockStore::put_block(const RowKey& key, const SubPartitionBlock& block, Table table) {
  if (key.node_id != node_) {
    throw StoreError("row key for node " + std::to_string(key.node_id) + " sent to store of node " +
                     std::to_string(node_));
  }
  const Bytes record = serialize_block(key, block);

  std::lock_guard lock(mutex_);
  auto& f = files(key.method, table);
  const std::uint64_t offset = f.data_size;
  full_pwrite(f.data_fd, record.data(), record.size(), offset);
  f.data_size += record.size();

  std::uint8_t entry[kManifestEntryBytes];
  const auto k = encode_row_key(key);
  std::memcpy(entry, k.data(), kRowKeyBytes);
  put_be<std::uint64_t>(entry + kRowKeyBytes, offset);
  put_be<std::uint64_t>(entry + kRowKeyBytes + 8, record.size());
  put_be<std::uint32_t>(entry + kRowKeyBytes + 16, block.edge_count);
  entry[kRowKeyBytes + 20] = static_cast<std::uint8_t>(block.layout);
  // The manifest entry is the commit point: a block becomes visible only once
  // its entry is fully written.
  full_pwrite(f.manifest_fd, entry, kManifestEntryBytes, f.manifest_size);
  f.manifest_size += kManifestEntryBytes;
  f.index[key] = {offset, record.size(), block.edge_count, block.layout};
}

bool BlockStore::contains(const RowKey& key, Table table) const {
  std::lock_guard lock(mutex_);
  return files(key.method, table).index.count(key) != 0;
}

const BlockStore::Extent& BlockStore::extent(const RowKey& key, Table table) const {
  const auto& idx = files(key.method, table).index;
  auto it = idx.find(key);
  if (it == idx.end()) throw NotFoundError("no block under key " + to_string(key));
  return it->second;
}

Bytes BlockStore::get_record(const RowKey& key, Table table) const {
  Extent e;
  {
    std::lock_guard lock(mutex_);
    e = extent(key, table);
  }
  Bytes out(static_cast<std::size_t>(e.length));
  full_pread(files(key.method, table).data_fd, out.data(), out.size(), e.offset);
  return out;
}

SubPartitionBlock BlockStore::get_block(const RowKey& key, Table table) const {
  auto [stored_key, block] = parse_block(get_record(key, table));
  if (stored_key != key) throw FormatError("block record carries key " + to_string(stored_key));
  return block;
}

void BlockStore::account(const StoreStats& delta, StoreStats* sink) {
  bytes_read_.fetch_add(delta.bytes_read, std::memory_order_relaxed);
  blocks_read_.fetch_add(delta.blocks_read, std::memory_order_relaxed);
  invocations_.fetch_add(delta.invocations, std::memory_order_relaxed);
  if (sink) *sink += delta;
}

ColumnData BlockStore::read_extent(const TableFiles& f, const Extent& e, std::span<const std::uint32_t> wanted,
                                   StoreStats* sink) {
  ColumnData out;
  out.edge_count = e.edge_count;
  out.indices.assign(wanted.begin(), wanted.end());
  std::sort(out.indices.begin(), out.indices.end());
  out.indices.erase(std::unique(out.indices.begin(), out.indices.end()), out.indices.end());
  if (out.indices.empty()) {
    account({0, 1, 0}, sink);
    return out;
  }

  if (e.layout == Layout::R) {
    Bytes record(static_cast<std::size_t>(e.length));
    full_pread(f.data_fd, record.data(), record.size(), e.offset);
    account({record.size(), 1, 0}, sink);
    const auto h = parse_header(record);
    for (auto idx : out.indices) {
      if (idx >= h.ncols) throw LookupError("block has no column " + std::to_string(idx));
      const auto d = parse_directory_entry(record.data() + kBlockHeaderBytes + idx * kDirectoryEntryBytes);
      if (d.offset + d.stored > record.size()) throw FormatError("column payload out of bounds");
      out.values.push_back(decode_payload(h, idx, d, {record.data() + d.offset, d.stored}));
    }
    return out;
  }

  // Layout C: the header, then per wanted column its directory entry and payload.
  Bytes header(kBlockHeaderBytes);
  full_pread(f.data_fd, header.data(), header.size(), e.offset);
  std::uint64_t read = header.size();
  const auto h = parse_header(header);
  for (auto idx : out.indices) {
    if (idx >= h.ncols) throw LookupError("block has no column " + std::to_string(idx));
    std::uint8_t dir[kDirectoryEntryBytes];
    full_pread(f.data_fd, dir, sizeof dir, e.offset + kBlockHeaderBytes + idx * kDirectoryEntryBytes);
    const auto d = parse_directory_entry(dir);
    if (d.offset + d.stored > e.length) throw FormatError("column payload out of bounds");
    Bytes payload(d.stored);
    full_pread(f.data_fd, payload.data(), payload.size(), e.offset + d.offset);
    read += sizeof dir + payload.size();
    out.values.push_back(decode_payload(h, idx, d, payload));
  }
  account({read, 1, 0}, sink);
  return out;
}

ColumnData BlockStore::read_columns(const RowKey& key, std::span<const std::uint32_t> wanted, Table table,
                                    StoreStats* sink) {
  Extent e;
  {
    std::lock_guard lock(mutex_);
    e = extent(key, table);
  }
  account({0, 0, 1}, sink);
  return read_extent(files(key.method, table), e, wanted, sink);
}

void BlockStore::scan(Method method, std::span<const std::uint64_t> partition_ids,
                      std::span<const TimeInterval> ranges, std::span<const std::uint32_t> wanted,
                      const ScanVisitor& visit, Table table, StoreStats* sink) {
  auto& f = files(method, table);
  for (auto pid : partition_ids) {
    account({0, 0, 1}, sink);
    for (const auto& r : ranges) {
      if (r.lo > r.hi) continue;
      std::vector<std::pair<RowKey, Extent>> hits;
      {
        std::lock_guard lock(mutex_);
        auto it = f.index.lower_bound(RowKey{node_, method, pid, std::max<TimeRangeIndex>(r.lo, 0)});
        for (; it != f.index.end() && it->first.partition_id == pid && it->first.time_range <= r.hi; ++it) {
          hits.emplace_back(*it);
        }
      }
      for (const auto& [key, e] : hits) visit(key, read_extent(f, e, wanted, sink));
    }
  }
}

void BlockStore::scan_range(Method method, std::span<const std::uint64_t> partition_ids, TimeRangeIndex tr_lo,
                            TimeRangeIndex tr_hi, std::span<const std::uint32_t> wanted, const ScanVisitor& visit,
                            Table table, StoreStats* sink) {
  if (tr_lo > tr_hi) throw DomainError("scan_range needs tr_lo <= tr_hi");
  const TimeInterval r{tr_lo, tr_hi};
  scan(method, partition_ids, {&r, 1}, wanted, visit, table, sink);
}

std::vector<RowKey> BlockStore::keys(Method method, Table table) const {
  std::lock_guard lock(mutex_);
  std::vector<RowKey> out;
  for (const auto& [k, e] : files(method, table).index) out.push_back(k);
  return out;
}

std::uint64_t BlockStore::stored_bytes(Method method, Table table) const {
  std::lock_guard lock(mutex_);
  std::uint64_t n = 0;
  for (const auto& [k, e] : files(method, table).index) n += e.length;
  return n;
}

std::uint64_t BlockStore::stored_edges(Method method, Table table) const {
  std::lock_guard lock(mutex_);
  std::uint64_t n = 0;
  for (const auto& [k, e] : files(method, table).index) n += e.edge_count;
  return n;
}

StoreStats BlockStore::stats() const {
  return {bytes_read_.load(), blocks_read_.load(), invocations_.load()};
}

}  // namespace past
