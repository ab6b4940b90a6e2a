#pragma once

// Everything a CLI run needs to know, settable from a flat key=value file.
// Keys not listed here are handed to the generator config.
//
//   workers slot_bits grid_cols grid_rows region_width origin_x origin_y
//   unit_width mapping(bounded|unbounded) tru m t_delay
//   th_time th_dist th_velocity eta filters
//   layout(C|R) codec(identity|lz4|deflate) delta extra_columns
//   seed transport(deterministic|socket) inbuf_capacity

#include <iosfwd>
#include <optional>
#include <string>

#include "past/cluster_plan.hpp"
#include "past/config.hpp"
#include "past/ingest.hpp"
#include "past/query.hpp"
#include "past/storage.hpp"
#include "past/workload.hpp"

namespace past {

enum class TransportMode : std::uint8_t { Deterministic, Socket };

struct RunConfig {
  PlanParams plan{};
  std::uint32_t m = 4;
  std::int64_t t_delay = 0;
  Thresholds thresholds{};
  std::optional<double> eta;
  bool filters = true;
  BlockOptions block{};
  std::uint32_t extra_columns = 0;
  std::size_t inbuf_capacity = IngestBuffer::kDefaultCapacity;
  std::uint64_t seed = 1;
  TransportMode transport = TransportMode::Deterministic;
  GenConfig gen{};

  // false if neither this nor the generator config knows the key.
  bool set(std::string_view key, std::string_view value);
  // DomainError naming the first unknown key.
  void apply(const config::Pairs& pairs);
  void validate() const;

  GenConfig generator() const;  // gen with the shared grid and seed
  QueryOptions query_options() const;
  WorkerOptions worker_options() const;
  CoordinatorOptions coordinator_options() const;

  // Every key, in a form apply() reads back.
  void write(std::ostream& out) const;
};

}  // namespace past
