#include "past/wire.hpp"

#include <bit>
#include <cstring>

namespace past::wire {

std::string_view to_string(FrameKind k) {
  switch (k) {
    case FrameKind::NextRound: return "NextRound";
    case FrameKind::PartitionDone: return "PartitionDone";
    case FrameKind::Shuffle: return "Shuffle";
    case FrameKind::RoundComplete: return "RoundComplete";
    case FrameKind::EdgeBatch: return "EdgeBatch";
    case FrameKind::BatchAck: return "BatchAck";
    case FrameKind::Retrieve: return "Retrieve";
    case FrameKind::Payload: return "Payload";
    case FrameKind::Busy: return "Busy";
    case FrameKind::Error: return "Error";
    case FrameKind::Shutdown: return "Shutdown";
    case FrameKind::Ack: return "Ack";
  }
  return "?";
}

Bytes encode_frame(const Frame& f) {
  const std::size_t rest = kFrameHeaderBytes + f.body.size();
  if (rest > kMaxFrameBytes) throw FormatError("frame too large");
  Writer w;
  w.u32(static_cast<std::uint32_t>(rest));
  w.u8(static_cast<std::uint8_t>(f.kind));
  w.u64(f.round);
  w.u32(f.sender);
  w.bytes(f.body);
  return w.take();
}

std::optional<Frame> decode_frame(std::span<const std::uint8_t> buffer, std::size_t& consumed) {
  if (buffer.size() < kFramePrefixBytes) return std::nullopt;
  Reader prefix(buffer.first(kFramePrefixBytes));
  const std::uint32_t rest = prefix.u32();
  if (rest < kFrameHeaderBytes || rest > kMaxFrameBytes) throw FormatError("bad frame length");
  if (buffer.size() < kFramePrefixBytes + rest) return std::nullopt;
  Reader r(buffer.subspan(kFramePrefixBytes, rest));
  Frame f;
  const auto kind = r.u8();
  if (kind < 1 || kind > static_cast<std::uint8_t>(FrameKind::Ack)) throw FormatError("unknown frame kind");
  f.kind = static_cast<FrameKind>(kind);
  f.round = r.u64();
  f.sender = r.u32();
  const auto body = buffer.subspan(kFramePrefixBytes + kFrameHeaderBytes, rest - kFrameHeaderBytes);
  f.body.assign(body.begin(), body.end());
  consumed = kFramePrefixBytes + rest;
  return f;
}

void Writer::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v >> 8));
  u8(static_cast<std::uint8_t>(v));
}

void Writer::u32(std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) u8(static_cast<std::uint8_t>(v >> s));
}

void Writer::u64(std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) u8(static_cast<std::uint8_t>(v >> s));
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

// [u32 count][u16 ncols][ncols x count little-endian u64]
void Writer::edges(std::span<const Edge> edges) {
  const std::size_t extras = edges.empty() ? 0 : edges.front().extra.size();
  for (const auto& e : edges) {
    if (e.extra.size() != extras) throw DomainError("edge batch mixes extra widths");
  }
  u32(static_cast<std::uint32_t>(edges.size()));
  u16(static_cast<std::uint16_t>(column::kFirstExtra + extras));
  auto column_out = [&](auto get) {
    for (const auto& e : edges) {
      const std::uint64_t v = get(e);
      for (int b = 0; b < 8; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
    }
  };
  column_out([](const Edge& e) { return e.object_id; });
  column_out([](const Edge& e) { return static_cast<std::uint64_t>(e.timestamp); });
  column_out([](const Edge& e) { return e.location_id; });
  for (std::size_t x = 0; x < extras; ++x) column_out([x](const Edge& e) { return e.extra[x]; });
}

std::span<const std::uint8_t> Reader::take(std::size_t n) {
  if (in_.size() - pos_ < n) throw FormatError("message truncated");
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint16_t Reader::u16() {
  auto b = take(2);
  return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
}

std::uint32_t Reader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (auto c : b) v = v << 8 | c;
  return v;
}

std::uint64_t Reader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (auto c : b) v = v << 8 | c;
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::str() {
  auto n = u32();
  auto b = take(n);
  return {b.begin(), b.end()};
}

std::vector<Edge> Reader::edges() {
  const auto count = u32();
  const auto ncols = u16();
  if (ncols < column::kFirstExtra) throw FormatError("edge batch is missing core columns");
  std::vector<Edge> out(count);
  for (std::uint16_t c = 0; c < ncols; ++c) {
    auto b = take(std::size_t{count} * 8);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::uint64_t v = 0;
      for (int k = 7; k >= 0; --k) v = v << 8 | b[i * 8 + k];
      auto& e = out[i];
      switch (c) {
        case column::kObject: e.object_id = v; break;
        case column::kTimestamp: e.timestamp = static_cast<Timestamp>(v); break;
        case column::kLocation: e.location_id = v; break;
        default: e.extra.push_back(v);
      }
    }
  }
  return out;
}

void Reader::expect_done() const {
  if (!done()) throw FormatError("trailing bytes in message");
}

}  // namespace past::wire
