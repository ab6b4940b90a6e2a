#pragma once

// Loopback TCP binding of the ingestion transport. Every worker listens on an
// ephemeral 127.0.0.1 port and serves two kinds of connections: a persistent
// control connection from the coordinator, and one-shot retrieval requests
// from peers. Workers run as threads of this process.

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "past/ingest.hpp"

namespace past {

struct SocketOptions {
  std::uint64_t seed = 1;
  std::chrono::milliseconds timeout{10000};     // per request / phase reply
  std::chrono::microseconds busy_backoff{200};  // before re-polling the busy list
  std::optional<WorkerId> unreachable;          // drops every peer retrieval
  std::optional<WorkerId> stalled;              // never answers NextRound
};

class SocketTransport final : public ClusterTransport {
 public:
  explicit SocketTransport(Cluster& cluster, SocketOptions options = {});
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  std::uint32_t workers() const override { return cluster_.size(); }
  std::size_t deliver(WorkerId w, std::span<const Edge> edges) override;
  std::vector<PartitionReport> partition_phase(const RoundState& r) override;
  std::vector<ShuffleReport> shuffle_phase(const RoundState& r) override;

  std::vector<std::uint16_t> ports() const;
  // Serving intervals in steady-clock nanoseconds.
  std::vector<ServeInterval> serve_log() const;

 private:
  struct Node;

  void shutdown();
  void handle_connection(Node& node, int fd);
  void run_shuffle(Node& node, std::uint64_t round);
  void retrieve_from(Node& node, WorkerId peer, std::uint64_t round, ShuffleSession& session);

  Cluster& cluster_;
  SocketOptions options_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<int> control_;  // coordinator side of each control connection
  mutable std::mutex log_mutex_;
  std::vector<ServeInterval> serve_log_;
};

}  // namespace past
