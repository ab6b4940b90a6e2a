#pragma once

// Round-based ingestion. Each worker plays two roles: an IngestStore that
// buffers arriving edges and splits one round's window into per-destination
// out-buffers, and a GraphStore that pulls its share from every peer and
// writes it into its BlockStore. A coordinator drives rounds through a
// transport; two transports exist (seeded in-process scheduler, loopback TCP).

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "past/cluster_plan.hpp"
#include "past/storage.hpp"

namespace past {

// Out-buffer kinds. Spatial and SpatialReplica go to the spatio-temporal
// tables (primary / replica), Key and Collision to the key-temporal ones.
enum class OutKind : std::uint8_t { Spatial = 0, Key = 1, Collision = 2, SpatialReplica = 3 };
inline constexpr std::size_t kOutKinds = 4;
inline constexpr std::array<OutKind, kOutKinds> kAllOutKinds{OutKind::Spatial, OutKind::Key, OutKind::Collision,
                                                             OutKind::SpatialReplica};

Method method_of(OutKind k);
Table table_of(OutKind k);
std::string_view to_string(OutKind k);

using TimeBuckets = std::map<TimeRangeIndex, std::vector<Edge>>;

// What one IngestStore holds for one destination worker in one round.
struct RetrievalPayload {
  std::array<TimeBuckets, kOutKinds> parts;

  std::size_t edge_count() const;
  std::size_t edge_count(OutKind k) const;
  bool empty() const { return edge_count() == 0; }
};

// Per kind: u32 bucket count, then per bucket i64 time range + edge batch.
Bytes encode_payload(const RetrievalPayload& p);
std::size_t payload_wire_size(const RetrievalPayload& p);
RetrievalPayload decode_payload(std::span<const std::uint8_t> bytes);

class IngestBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = std::size_t{1} << 24;

  explicit IngestBuffer(std::size_t capacity = kDefaultCapacity);

  // false means backpressure: the buffer is full and the edge was not taken.
  bool append(const Edge& e);

  std::size_t size() const { return edges_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Edge>& edges() const { return edges_; }

  // Removes every edge matching `pred` and returns them in arrival order.
  std::vector<Edge> extract_if(const std::function<bool(const Edge&)>& pred);

 private:
  std::size_t capacity_;
  std::deque<Edge> edges_;
};

enum class RoundPhase : std::uint8_t { Collecting = 0, Partitioned = 1, Shuffled = 2 };

struct RoundState {
  std::uint64_t round = 0;
  Timestamp t_start = 0;
  std::uint32_t m = 1;          // TRUs per round
  std::int64_t tru = 3600;
  std::int64_t t_delay = 0;     // straggler allowance, seconds
  RoundPhase phase = RoundPhase::Collecting;

  Timestamp t_end() const { return t_start + static_cast<std::int64_t>(m) * tru; }
  // Edges older than this are dead letters; [late_floor, t_start) ships late.
  Timestamp late_floor() const { return t_start - static_cast<std::int64_t>(m) * tru; }
  Timestamp trigger_time() const { return t_end() + t_delay; }
  void advance(RoundPhase next);
};

struct DeadLetter {
  Edge edge;
  std::string reason;
};

// PartitionDone.
struct PartitionReport {
  WorkerId worker = 0;
  std::uint64_t round = 0;
  std::uint64_t routed = 0;        // window edges moved to out-buffers
  std::uint64_t late = 0;          // of which older than t_start
  std::uint64_t dead_letters = 0;
  std::uint64_t remaining = 0;     // inbuf size afterwards
  std::array<std::uint64_t, kOutKinds> staged{};
  double seconds = 0.0;
};

// RoundComplete.
struct ShuffleReport {
  WorkerId worker = 0;
  std::uint64_t round = 0;
  std::array<std::uint64_t, kOutKinds> received{};
  std::uint64_t bytes_received = 0;
  std::uint64_t blocks_written = 0;
  std::uint64_t polls = 0;
  std::uint64_t busy = 0;
  double retrieve_seconds = 0.0;
  double serve_seconds = 0.0;
  double store_seconds = 0.0;

  double busy_seconds() const { return retrieve_seconds + serve_seconds + store_seconds; }
};

Bytes encode_partition_report(const PartitionReport& r);
PartitionReport decode_partition_report(std::span<const std::uint8_t> bytes);
Bytes encode_shuffle_report(const ShuffleReport& r);
ShuffleReport decode_shuffle_report(std::span<const std::uint8_t> bytes);

struct WorkerOptions {
  std::size_t inbuf_capacity = IngestBuffer::kDefaultCapacity;
  std::uint32_t extra_columns = 0;  // edges with another extra width are dead letters
  BlockOptions block{};
};

class Worker {
 public:
  Worker(WorkerId id, std::shared_ptr<const ClusterPlan> plan, const std::filesystem::path& store_dir,
         WorkerOptions options = {});

  WorkerId id() const { return id_; }
  const ClusterPlan& plan() const { return *plan_; }
  const WorkerOptions& options() const { return options_; }

  // IngestStore role.
  bool append_new_edge(const Edge& e);
  const IngestBuffer& inbuf() const { return inbuf_; }
  PartitionReport compute_partition(const RoundState& round);
  const RetrievalPayload& outbound(WorkerId dest) const { return outbound_.at(dest); }

  // Serving a retrieval: the payload is copied out, and only cleared once the
  // requester acknowledges it.
  RetrievalPayload serve(WorkerId requester);
  void acknowledge(WorkerId requester);
  bool outbound_empty() const;

  // GraphStore role.
  void accept(WorkerId from, RetrievalPayload payload, std::uint64_t wire_bytes = 0);
  ShuffleReport finish_round(std::uint64_t round);
  void note_poll(bool busy, double seconds);

  BlockStore& store() { return store_; }
  const BlockStore& store() const { return store_; }
  const std::vector<DeadLetter>& dead_letters() const { return dead_letters_; }

 private:
  using GroupKey = std::pair<std::uint64_t, TimeRangeIndex>;  // (partition id, time range)

  WorkerId id_;
  std::shared_ptr<const ClusterPlan> plan_;
  WorkerOptions options_;
  IngestBuffer inbuf_;
  BlockStore store_;
  std::vector<DeadLetter> dead_letters_;

  mutable std::mutex out_mutex_;
  std::vector<RetrievalPayload> outbound_;  // by destination worker
  double serve_seconds_ = 0.0;

  std::array<std::map<GroupKey, std::vector<Edge>>, kOutKinds> staged_;
  ShuffleReport pending_;
};

// A set of workers sharing one plan, with stores under root/worker-<id>.
class Cluster {
 public:
  Cluster(std::shared_ptr<const ClusterPlan> plan, const std::filesystem::path& root, WorkerOptions options = {});

  std::uint32_t size() const { return static_cast<std::uint32_t>(workers_.size()); }
  Worker& worker(WorkerId w) { return *workers_.at(w); }
  const Worker& worker(WorkerId w) const { return *workers_.at(w); }
  const ClusterPlan& plan() const { return *plan_; }
  std::shared_ptr<const ClusterPlan> plan_ptr() const { return plan_; }
  std::vector<BlockStore*> stores();
  static std::filesystem::path worker_dir(const std::filesystem::path& root, WorkerId w);

 private:
  std::shared_ptr<const ClusterPlan> plan_;
  std::vector<std::unique_ptr<Worker>> workers_;
};

// ---------------------------------------------------------------------------
// Busy protocol as a pure state machine, shared by the seeded scheduler and
// the exhaustive model checker.

struct ServeGate {
  std::optional<WorkerId> serving;

  bool busy() const { return serving.has_value(); }
  friend bool operator==(const ServeGate&, const ServeGate&) = default;
};

class ShuffleSession {
 public:
  ShuffleSession() = default;
  ShuffleSession(WorkerId self, std::vector<WorkerId> order);

  // Seeded permutation of all workers (self included) for one round.
  static std::vector<WorkerId> permutation(WorkerId self, std::uint32_t workers, std::uint64_t seed,
                                           std::uint64_t round);

  WorkerId self() const { return self_; }
  const std::vector<WorkerId>& order() const { return order_; }
  std::size_t cursor() const { return cursor_; }
  const std::deque<WorkerId>& busy_list() const { return busy_; }
  std::optional<WorkerId> in_flight() const { return in_flight_; }

  // The peer to poll next: first pass over the permutation, then the busy
  // list front. nullopt while a retrieval is in flight or once done.
  std::optional<WorkerId> next_peer() const;
  void on_started(WorkerId peer);
  void on_busy(WorkerId peer);
  void on_finished(WorkerId peer);
  bool done() const;
  bool retrieved(WorkerId peer) const { return retrieved_.at(peer); }

  friend bool operator==(const ShuffleSession&, const ShuffleSession&) = default;

 private:
  void advance(WorkerId peer);

  WorkerId self_ = 0;
  std::vector<WorkerId> order_;
  std::size_t cursor_ = 0;
  std::deque<WorkerId> busy_;
  std::optional<WorkerId> in_flight_;
  std::vector<bool> retrieved_;
};

struct ShuffleState {
  std::vector<ShuffleSession> sessions;  // by requester
  std::vector<ServeGate> gates;          // by server

  friend bool operator==(const ShuffleState&, const ShuffleState&) = default;
};

struct ShuffleAction {
  enum class Kind : std::uint8_t { Poll, Complete } kind = Kind::Poll;
  WorkerId requester = 0;
  WorkerId peer = 0;
};

enum class ActionOutcome : std::uint8_t { Started, Busy, Completed };

ShuffleState initial_shuffle_state(std::uint32_t workers, std::uint64_t seed, std::uint64_t round);
std::vector<ShuffleAction> enabled_actions(const ShuffleState& s);
ActionOutcome apply_action(ShuffleState& s, const ShuffleAction& a);
bool is_terminal(const ShuffleState& s);

struct ServeInterval {
  WorkerId server = 0;
  WorkerId requester = 0;
  std::uint64_t start = 0;  // scheduler step or nanosecond timestamp
  std::uint64_t end = 0;
};

// Returns a description of the first overlap between two intervals of the
// same server, if any.
std::optional<std::string> audit_serve_log(std::vector<ServeInterval> log);

struct ModelCheckResult {
  std::uint32_t workers = 0;
  std::uint64_t initial_states = 0;
  std::uint64_t states = 0;
  std::uint64_t transitions = 0;
  std::uint64_t terminal_states = 0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

// Explores every interleaving from every combination of per-requester
// permutations. Checks mutual exclusion in every state, that every
// non-terminal state has a successor, that a terminal state is reachable
// from every state, and that terminal states have retrieved everything.
ModelCheckResult model_check_shuffle(std::uint32_t workers);

// ---------------------------------------------------------------------------
// Transports and the coordinator.

class ClusterTransport {
 public:
  virtual ~ClusterTransport() = default;
  virtual std::uint32_t workers() const = 0;
  // Hands edges to one IngestStore; returns how many were accepted.
  virtual std::size_t deliver(WorkerId w, std::span<const Edge> edges) = 0;
  // Broadcast NextRound, await every PartitionDone.
  virtual std::vector<PartitionReport> partition_phase(const RoundState& r) = 0;
  // Broadcast Shuffle, await every RoundComplete.
  virtual std::vector<ShuffleReport> shuffle_phase(const RoundState& r) = 0;
};

struct InProcessOptions {
  std::uint64_t seed = 1;
  std::vector<WorkerId> unreachable;  // fault injection: peers that never answer
};

// Deterministic binding: the shuffle of all workers is one seeded walk over
// the busy-protocol state machine, executing each retrieval when it completes.
class InProcessTransport final : public ClusterTransport {
 public:
  InProcessTransport(Cluster& cluster, InProcessOptions options = {});

  std::uint32_t workers() const override { return cluster_.size(); }
  std::size_t deliver(WorkerId w, std::span<const Edge> edges) override;
  std::vector<PartitionReport> partition_phase(const RoundState& r) override;
  std::vector<ShuffleReport> shuffle_phase(const RoundState& r) override;

  const std::vector<ServeInterval>& serve_log() const { return serve_log_; }
  std::uint64_t steps() const { return step_; }

 private:
  Cluster& cluster_;
  InProcessOptions options_;
  std::vector<ServeInterval> serve_log_;
  std::uint64_t step_ = 0;
};

enum class RoundStatus : std::uint8_t { Complete, Failed, Aborted };
std::string_view to_string(RoundStatus s);

struct RoundLogEntry {
  std::uint64_t round = 0;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  RoundStatus status = RoundStatus::Complete;
  std::string error;
  std::uint64_t delivered = 0;             // edges handed to IngestStores before partitioning
  std::uint64_t arrived_during_shuffle = 0;
  std::uint64_t backpressure = 0;          // deliveries refused by a full inbuf
  std::uint64_t routed = 0;
  std::uint64_t late = 0;
  std::uint64_t dead_letters = 0;
  std::array<std::uint64_t, kOutKinds> stored{};
  std::uint64_t bytes_shuffled = 0;
  std::uint64_t blocks_written = 0;
  std::uint64_t busy_responses = 0;
  double wall_seconds = 0.0;
  double partition_makespan = 0.0;  // slowest worker's partition phase
  double shuffle_makespan = 0.0;    // slowest worker's retrieve + serve + store

  std::string to_json() const;
};

struct TimedEdge {
  Timestamp arrival = 0;
  Edge edge;
};

struct CoordinatorOptions {
  std::uint32_t m = 1;
  std::int64_t t_delay = 0;
  std::optional<Timestamp> t_start;  // default: earliest timestamp, floored to a TRU
  std::uint64_t rounds = 1;
};

class Coordinator {
 public:
  Coordinator(ClusterTransport& transport, TimeDiscretization time);

  // Edges are fed round-robin to IngestStores in arrival order. An edge
  // arrives before round k partitions when arrival <= trigger time of k.
  // Stops after the first round that does not complete.
  std::vector<RoundLogEntry> run(std::vector<TimedEdge> input, const CoordinatorOptions& options);
  // Arrival time = edge timestamp.
  std::vector<RoundLogEntry> run(std::span<const Edge> input, const CoordinatorOptions& options);

  // Input edges not delivered to any IngestStore when run() returned.
  std::uint64_t undelivered() const { return undelivered_; }

 private:
  ClusterTransport& transport_;
  TimeDiscretization time_;
  std::uint64_t undelivered_ = 0;
};

// Rounds needed to cover every timestamp in `input` from the default start.
std::uint64_t rounds_to_cover(std::span<const Edge> input, std::int64_t tru, std::uint32_t m);

}  // namespace past
