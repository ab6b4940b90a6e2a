#pragma once

// Message contract shared by the in-process and socket transports.
//
// Frame: [u32 length of the rest][u8 kind][u64 round][u32 sender][body]
// All header integers are big-endian. Edge batches inside bodies use the
// storage column encoding (little-endian u64 arrays, uncompressed).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "past/model.hpp"
#include "past/storage.hpp"

namespace past::wire {

enum class FrameKind : std::uint8_t {
  NextRound = 1,
  PartitionDone = 2,
  Shuffle = 3,
  RoundComplete = 4,
  EdgeBatch = 5,
  BatchAck = 6,
  Retrieve = 7,
  Payload = 8,
  Busy = 9,
  Error = 10,
  Shutdown = 11,
  Ack = 12,
};

std::string_view to_string(FrameKind k);

struct Frame {
  FrameKind kind = FrameKind::Error;
  std::uint64_t round = 0;
  WorkerId sender = 0;
  Bytes body;
};

inline constexpr std::size_t kFramePrefixBytes = 4;
inline constexpr std::size_t kFrameHeaderBytes = 1 + 8 + 4;
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

Bytes encode_frame(const Frame& f);

// Decodes one frame from the front of `buffer`. Returns nullopt when the
// buffer holds only part of a frame; sets `consumed` on success.
std::optional<Frame> decode_frame(std::span<const std::uint8_t> buffer, std::size_t& consumed);

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void str(std::string_view s);
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void edges(std::span<const Edge> edges);

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::string str();
  std::vector<Edge> edges();

  bool done() const { return pos_ == in_.size(); }
  void expect_done() const;

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace past::wire
