#include "past/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "past/rng.hpp"
#include "past/wire.hpp"

namespace past {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

Method method_of(OutKind k) {
  return k == OutKind::Spatial || k == OutKind::SpatialReplica ? Method::SpatioTemporal : Method::KeyTemporal;
}

Table table_of(OutKind k) { return k == OutKind::Spatial || k == OutKind::Key ? Table::Primary : Table::Replica; }

std::string_view to_string(OutKind k) {
  switch (k) {
    case OutKind::Spatial: return "spatial";
    case OutKind::Key: return "key";
    case OutKind::Collision: return "collision";
    case OutKind::SpatialReplica: return "spatial_replica";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Payloads and reports

std::size_t RetrievalPayload::edge_count(OutKind k) const {
  std::size_t n = 0;
  for (const auto& [tr, edges] : parts[static_cast<std::size_t>(k)]) n += edges.size();
  return n;
}

std::size_t RetrievalPayload::edge_count() const {
  std::size_t n = 0;
  for (auto k : kAllOutKinds) n += edge_count(k);
  return n;
}

Bytes encode_payload(const RetrievalPayload& p) {
  wire::Writer w;
  for (const auto& buckets : p.parts) {
    w.u32(static_cast<std::uint32_t>(buckets.size()));
    for (const auto& [tr, edges] : buckets) {
      w.i64(tr);
      w.edges(edges);
    }
  }
  return w.take();
}

std::size_t payload_wire_size(const RetrievalPayload& p) {
  std::size_t n = 0;
  for (const auto& buckets : p.parts) {
    n += 4;
    for (const auto& [tr, edges] : buckets) {
      const std::size_t cols = column::kFirstExtra + (edges.empty() ? 0 : edges.front().extra.size());
      n += 8 + 4 + 2 + 8 * cols * edges.size();
    }
  }
  return n;
}

RetrievalPayload decode_payload(std::span<const std::uint8_t> bytes) {
  wire::Reader r(bytes);
  RetrievalPayload p;
  for (auto& buckets : p.parts) {
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto tr = r.i64();
      buckets[tr] = r.edges();
    }
  }
  r.expect_done();
  return p;
}

Bytes encode_partition_report(const PartitionReport& x) {
  wire::Writer w;
  w.u32(x.worker);
  w.u64(x.round);
  w.u64(x.routed);
  w.u64(x.late);
  w.u64(x.dead_letters);
  w.u64(x.remaining);
  for (auto v : x.staged) w.u64(v);
  w.f64(x.seconds);
  return w.take();
}

PartitionReport decode_partition_report(std::span<const std::uint8_t> bytes) {
  wire::Reader r(bytes);
  PartitionReport x;
  x.worker = r.u32();
  x.round = r.u64();
  x.routed = r.u64();
  x.late = r.u64();
  x.dead_letters = r.u64();
  x.remaining = r.u64();
  for (auto& v : x.staged) v = r.u64();
  x.seconds = r.f64();
  r.expect_done();
  return x;
}

Bytes encode_shuffle_report(const ShuffleReport& x) {
  wire::Writer w;
  w.u32(x.worker);
  w.u64(x.round);
  for (auto v : x.received) w.u64(v);
  w.u64(x.bytes_received);
  w.u64(x.blocks_written);
  w.u64(x.polls);
  w.u64(x.busy);
  w.f64(x.retrieve_seconds);
  w.f64(x.serve_seconds);
  w.f64(x.store_seconds);
  return w.take();
}

ShuffleReport decode_shuffle_report(std::span<const std::uint8_t> bytes) {
  wire::Reader r(bytes);
  ShuffleReport x;
  x.worker = r.u32();
  x.round = r.u64();
  for (auto& v : x.received) v = r.u64();
  x.bytes_received = r.u64();
  x.blocks_written = r.u64();
  x.polls = r.u64();
  x.busy = r.u64();
  x.retrieve_seconds = r.f64();
  x.serve_seconds = r.f64();
  x.store_seconds = r.f64();
  r.expect_done();
  return x;
}

// ---------------------------------------------------------------------------
// IngestBuffer / RoundState

IngestBuffer::IngestBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw DomainError("ingest buffer capacity must be positive");
}

bool IngestBuffer::append(const Edge& e) {
  if (edges_.size() >= capacity_) return false;
  edges_.push_back(e);
  return true;
}

std::vector<Edge> IngestBuffer::extract_if(const std::function<bool(const Edge&)>& pred) {
  std::vector<Edge> taken;
  std::deque<Edge> kept;
  for (auto& e : edges_) {
    if (pred(e)) {
      taken.push_back(std::move(e));
    } else {
      kept.push_back(std::move(e));
    }
  }
  edges_ = std::move(kept);
  return taken;
}

void RoundState::advance(RoundPhase next) {
  if (static_cast<int>(next) != static_cast<int>(phase) + 1) throw DomainError("round phase can only move forward");
  phase = next;
}

// ---------------------------------------------------------------------------
// Worker

Worker::Worker(WorkerId id, std::shared_ptr<const ClusterPlan> plan, const std::filesystem::path& store_dir,
               WorkerOptions options)
    : id_(id),
      plan_(std::move(plan)),
      options_(options),
      inbuf_(options.inbuf_capacity),
      store_(store_dir, id),
      outbound_(plan_->workers()) {
  if (id >= plan_->workers()) throw DomainError("worker id outside the cluster plan");
  pending_.worker = id;
}

bool Worker::append_new_edge(const Edge& e) { return inbuf_.append(e); }

PartitionReport Worker::compute_partition(const RoundState& round) {
  const auto t0 = Clock::now();
  if (round.tru != plan_->time().tru_seconds) throw DomainError("round TRU differs from the cluster plan");
  if (!outbound_empty()) throw StoreError("out-buffers of the previous round were never retrieved");

  PartitionReport rep;
  rep.worker = id_;
  rep.round = round.round;
  const auto window = inbuf_.extract_if([&](const Edge& e) { return e.timestamp < round.t_end(); });
  const auto& catalog = plan_->catalog();
  std::lock_guard lock(out_mutex_);
  for (const auto& e : window) {
    const char* reason = nullptr;
    if (e.timestamp < 0) {
      reason = "negative timestamp";
    } else if (e.timestamp < round.late_floor()) {
      reason = "older than one round before the window";
    } else if (e.extra.size() != options_.extra_columns) {
      reason = "unexpected number of extra columns";
    } else if (!catalog.contains(e.location_id)) {
      reason = "unknown location id";
    }
    if (reason != nullptr) {
      dead_letters_.push_back({e, reason});
      ++rep.dead_letters;
      continue;
    }
    const auto route = edge_route(e, *plan_);
    const auto tr = time_range_of(e.timestamp, plan_->time());
    auto put = [&](WorkerId dest, OutKind k) {
      outbound_[dest].parts[static_cast<std::size_t>(k)][tr].push_back(e);
      ++rep.staged[static_cast<std::size_t>(k)];
    };
    put(route.st, OutKind::Spatial);
    put(route.st_replica, OutKind::SpatialReplica);
    put(route.kt, OutKind::Key);
    if (route.extra) put(*route.extra, OutKind::Collision);
    ++rep.routed;
    if (e.timestamp < round.t_start) ++rep.late;
  }
  rep.remaining = inbuf_.size();
  pending_ = ShuffleReport{};
  pending_.worker = id_;
  serve_seconds_ = 0.0;
  rep.seconds = seconds_since(t0);
  return rep;
}

RetrievalPayload Worker::serve(WorkerId requester) {
  const auto t0 = Clock::now();
  std::lock_guard lock(out_mutex_);
  RetrievalPayload copy = outbound_.at(requester);
  serve_seconds_ += seconds_since(t0);
  return copy;
}

void Worker::acknowledge(WorkerId requester) {
  std::lock_guard lock(out_mutex_);
  outbound_.at(requester) = RetrievalPayload{};
}

bool Worker::outbound_empty() const {
  std::lock_guard lock(out_mutex_);
  return std::all_of(outbound_.begin(), outbound_.end(), [](const RetrievalPayload& p) { return p.empty(); });
}

void Worker::accept(WorkerId from, RetrievalPayload payload, std::uint64_t wire_bytes) {
  (void)from;
  const auto t0 = Clock::now();
  for (auto k : kAllOutKinds) {
    const auto ki = static_cast<std::size_t>(k);
    for (auto& [tr, edges] : payload.parts[ki]) {
      for (auto& e : edges) {
        const std::uint64_t pid = method_of(k) == Method::SpatioTemporal
                                      ? plan_->region_of_location(e.location_id)
                                      : slot_of(e.object_id, plan_->slot_bits());
        staged_[ki][{pid, tr}].push_back(std::move(e));
        ++pending_.received[ki];
      }
    }
  }
  pending_.bytes_received += wire_bytes;
  pending_.retrieve_seconds += seconds_since(t0);
}

void Worker::note_poll(bool busy, double seconds) {
  ++pending_.polls;
  if (busy) ++pending_.busy;
  pending_.retrieve_seconds += seconds;
}

ShuffleReport Worker::finish_round(std::uint64_t round) {
  const auto t0 = Clock::now();
  for (auto k : kAllOutKinds) {
    auto& groups = staged_[static_cast<std::size_t>(k)];
    for (auto& [group, edges] : groups) {
      const RowKey key{id_, method_of(k), group.first, group.second};
      const Table table = table_of(k);
      // Late edges can reach a sub-partition written in an earlier round.
      if (store_.contains(key, table)) {
        auto existing = store_.get_block(key, table).decode_edges();
        edges.insert(edges.end(), existing.begin(), existing.end());
      }
      if (auto block = build_block(edges, options_.block)) {
        store_.put_block(key, *block, table);
        ++pending_.blocks_written;
      }
    }
    groups.clear();
  }
  pending_.store_seconds += seconds_since(t0);
  {
    std::lock_guard lock(out_mutex_);
    pending_.serve_seconds = serve_seconds_;
  }
  ShuffleReport out = pending_;
  out.worker = id_;
  out.round = round;
  pending_ = ShuffleReport{};
  pending_.worker = id_;
  serve_seconds_ = 0.0;
  return out;
}

Cluster::Cluster(std::shared_ptr<const ClusterPlan> plan, const std::filesystem::path& root, WorkerOptions options)
    : plan_(std::move(plan)) {
  if (plan_ == nullptr) throw DomainError("cluster needs a plan");
  for (WorkerId w = 0; w < plan_->workers(); ++w) {
    workers_.push_back(std::make_unique<Worker>(w, plan_, worker_dir(root, w), options));
  }
}

std::vector<BlockStore*> Cluster::stores() {
  std::vector<BlockStore*> out;
  for (auto& w : workers_) out.push_back(&w->store());
  return out;
}

std::filesystem::path Cluster::worker_dir(const std::filesystem::path& root, WorkerId w) {
  return root / ("worker-" + std::to_string(w));
}

// ---------------------------------------------------------------------------
// Busy protocol state machine

ShuffleSession::ShuffleSession(WorkerId self, std::vector<WorkerId> order)
    : self_(self), order_(std::move(order)), retrieved_(order_.size(), false) {
  std::vector<WorkerId> sorted = order_;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) throw DomainError("shuffle order must be a permutation of all workers");
  }
}

std::vector<WorkerId> ShuffleSession::permutation(WorkerId self, std::uint32_t workers, std::uint64_t seed,
                                                  std::uint64_t round) {
  std::vector<WorkerId> order(workers);
  std::iota(order.begin(), order.end(), WorkerId{0});
  Rng rng(mix64(seed ^ mix64(round ^ (std::uint64_t{self} << 32))));
  rng.shuffle(order);
  return order;
}

std::optional<WorkerId> ShuffleSession::next_peer() const {
  if (in_flight_) return std::nullopt;
  if (cursor_ < order_.size()) return order_[cursor_];
  if (!busy_.empty()) return busy_.front();
  return std::nullopt;
}

void ShuffleSession::advance(WorkerId peer) {
  if (cursor_ < order_.size()) {
    if (order_[cursor_] != peer) throw DomainError("polled a peer out of order");
    ++cursor_;
  } else {
    if (busy_.empty() || busy_.front() != peer) throw DomainError("polled a peer out of order");
    busy_.pop_front();
  }
}

void ShuffleSession::on_started(WorkerId peer) {
  advance(peer);
  in_flight_ = peer;
}

void ShuffleSession::on_busy(WorkerId peer) {
  advance(peer);
  busy_.push_back(peer);
}

void ShuffleSession::on_finished(WorkerId peer) {
  if (in_flight_ != peer) throw DomainError("finished a retrieval that was not in flight");
  in_flight_.reset();
  retrieved_.at(peer) = true;
}

bool ShuffleSession::done() const {
  return !in_flight_ && cursor_ == order_.size() && busy_.empty();
}

ShuffleState initial_shuffle_state(std::uint32_t workers, std::uint64_t seed, std::uint64_t round) {
  ShuffleState s;
  s.gates.resize(workers);
  for (WorkerId w = 0; w < workers; ++w) {
    s.sessions.emplace_back(w, ShuffleSession::permutation(w, workers, seed, round));
  }
  return s;
}

std::vector<ShuffleAction> enabled_actions(const ShuffleState& s) {
  std::vector<ShuffleAction> out;
  for (const auto& sess : s.sessions) {
    if (auto p = sess.in_flight()) {
      out.push_back({ShuffleAction::Kind::Complete, sess.self(), *p});
    } else if (auto q = sess.next_peer()) {
      out.push_back({ShuffleAction::Kind::Poll, sess.self(), *q});
    }
  }
  return out;
}

ActionOutcome apply_action(ShuffleState& s, const ShuffleAction& a) {
  auto& sess = s.sessions.at(a.requester);
  auto& gate = s.gates.at(a.peer);
  if (a.kind == ShuffleAction::Kind::Complete) {
    if (gate.serving != a.requester) throw DomainError("completion without a matching serve");
    gate.serving.reset();
    sess.on_finished(a.peer);
    return ActionOutcome::Completed;
  }
  if (sess.next_peer() != a.peer) throw DomainError("poll action is not enabled");
  if (gate.busy()) {
    sess.on_busy(a.peer);
    return ActionOutcome::Busy;
  }
  gate.serving = a.requester;
  sess.on_started(a.peer);
  return ActionOutcome::Started;
}

bool is_terminal(const ShuffleState& s) {
  return std::all_of(s.sessions.begin(), s.sessions.end(), [](const ShuffleSession& x) { return x.done(); });
}

std::optional<std::string> audit_serve_log(std::vector<ServeInterval> log) {
  std::sort(log.begin(), log.end(), [](const ServeInterval& a, const ServeInterval& b) {
    return std::tie(a.server, a.start, a.end) < std::tie(b.server, b.start, b.end);
  });
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].end < log[i].start) return "interval with end before start on server " + std::to_string(log[i].server);
    if (i > 0 && log[i].server == log[i - 1].server && log[i].start < log[i - 1].end) {
      return "server " + std::to_string(log[i].server) + " served requesters " + std::to_string(log[i - 1].requester) +
             " and " + std::to_string(log[i].requester) + " concurrently";
    }
  }
  return std::nullopt;
}

namespace {

std::string state_key(const ShuffleState& s) {
  std::string k;
  const auto enc = [&](std::optional<WorkerId> w) { k.push_back(w ? static_cast<char>('a' + *w) : '-'); };
  for (const auto& g : s.gates) enc(g.serving);
  for (const auto& sess : s.sessions) {
    k.push_back('|');
    for (auto w : sess.order()) k.push_back(static_cast<char>('a' + w));
    k.push_back(static_cast<char>('0' + sess.cursor()));
    enc(sess.in_flight());
    for (WorkerId w = 0; w < sess.order().size(); ++w) k.push_back(sess.retrieved(w) ? '1' : '0');
    k.push_back(':');
    for (auto w : sess.busy_list()) k.push_back(static_cast<char>('a' + w));
  }
  return k;
}

void permutations_of(std::uint32_t n, std::vector<std::vector<WorkerId>>& out) {
  std::vector<WorkerId> p(n);
  std::iota(p.begin(), p.end(), WorkerId{0});
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
}

}  // namespace

// Busy re-polls make the state graph cyclic, so termination is checked as
// "a terminal state stays reachable from every reachable state" together with
// the absence of stuck states; under a fair scheduler that implies every run
// drains its busy lists.
ModelCheckResult model_check_shuffle(std::uint32_t workers) {
  if (workers == 0 || workers > 4) throw DomainError("model check supports 1..4 workers");
  ModelCheckResult res;
  res.workers = workers;
  auto fail = [&](std::string msg) {
    if (res.violations.size() < 16) res.violations.push_back(std::move(msg));
  };

  std::vector<std::vector<WorkerId>> perms;
  permutations_of(workers, perms);

  // Full states live only in the frontier; visited states are known by key.
  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<bool> terminal;
  std::deque<std::pair<std::uint32_t, ShuffleState>> frontier;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // (from, to)

  auto intern = [&](ShuffleState&& s) {
    auto [it, inserted] = index.emplace(state_key(s), static_cast<std::uint32_t>(terminal.size()));
    if (inserted) {
      terminal.push_back(is_terminal(s));
      frontier.emplace_back(it->second, std::move(s));
    }
    return it->second;
  };

  // Every combination of per-requester permutations.
  std::vector<std::size_t> choice(workers, 0);
  while (true) {
    ShuffleState s;
    s.gates.resize(workers);
    for (WorkerId w = 0; w < workers; ++w) s.sessions.emplace_back(w, perms[choice[w]]);
    intern(std::move(s));
    ++res.initial_states;
    std::size_t i = 0;
    while (i < workers && ++choice[i] == perms.size()) choice[i++] = 0;
    if (i == workers) break;
  }

  while (!frontier.empty()) {
    const std::uint32_t id = frontier.front().first;
    const ShuffleState s = std::move(frontier.front().second);
    frontier.pop_front();

    std::vector<int> holders(workers, 0);
    for (const auto& sess : s.sessions) {
      if (auto p = sess.in_flight()) {
        ++holders[*p];
        if (s.gates[*p].serving != sess.self()) fail("requester in flight without holding the peer's gate");
      }
    }
    for (WorkerId w = 0; w < workers; ++w) {
      if (holders[w] > 1) fail("peer " + std::to_string(w) + " serves two retrievals at once");
      if (s.gates[w].busy() && holders[w] == 0) fail("gate held with no retrieval in flight");
    }

    const auto actions = enabled_actions(s);
    if (actions.empty() && !terminal[id]) fail("stuck non-terminal state");
    if (terminal[id]) {
      ++res.terminal_states;
      for (const auto& sess : s.sessions) {
        for (WorkerId w = 0; w < workers; ++w) {
          if (!sess.retrieved(w)) fail("terminal state with a peer never retrieved");
        }
      }
    }
    for (const auto& a : actions) {
      ShuffleState next = s;
      apply_action(next, a);
      edges.emplace_back(id, intern(std::move(next)));
      ++res.transitions;
    }
  }
  res.states = terminal.size();

  // Backward reachability from the terminal states over a CSR reverse graph.
  std::vector<std::uint32_t> start(terminal.size() + 1, 0), preds(edges.size());
  for (const auto& [from, to] : edges) ++start[to + 1];
  for (std::size_t i = 1; i < start.size(); ++i) start[i] += start[i - 1];
  {
    auto fill = start;
    for (const auto& [from, to] : edges) preds[fill[to]++] = from;
  }
  std::vector<bool> can_finish(terminal.size(), false);
  std::deque<std::uint32_t> q;
  for (std::uint32_t i = 0; i < terminal.size(); ++i) {
    if (terminal[i]) {
      can_finish[i] = true;
      q.push_back(i);
    }
  }
  while (!q.empty()) {
    const auto i = q.front();
    q.pop_front();
    for (auto k = start[i]; k < start[i + 1]; ++k) {
      const auto p = preds[k];
      if (!can_finish[p]) {
        can_finish[p] = true;
        q.push_back(p);
      }
    }
  }
  const auto stranded = std::count(can_finish.begin(), can_finish.end(), false);
  if (stranded > 0) fail(std::to_string(stranded) + " states cannot reach a terminal state");
  return res;
}

// ---------------------------------------------------------------------------
// In-process transport

InProcessTransport::InProcessTransport(Cluster& cluster, InProcessOptions options)
    : cluster_(cluster), options_(std::move(options)) {}

std::size_t InProcessTransport::deliver(WorkerId w, std::span<const Edge> edges) {
  auto& worker = cluster_.worker(w);
  std::size_t n = 0;
  for (const auto& e : edges) {
    if (!worker.append_new_edge(e)) break;
    ++n;
  }
  return n;
}

std::vector<PartitionReport> InProcessTransport::partition_phase(const RoundState& r) {
  std::vector<PartitionReport> out;
  for (WorkerId w = 0; w < cluster_.size(); ++w) out.push_back(cluster_.worker(w).compute_partition(r));
  return out;
}

std::vector<ShuffleReport> InProcessTransport::shuffle_phase(const RoundState& r) {
  const auto n = cluster_.size();
  auto state = initial_shuffle_state(n, options_.seed, r.round);
  Rng rng(mix64(options_.seed * 0x9e3779b97f4a7c15ULL + r.round));
  std::vector<std::uint64_t> started(n, 0);

  while (!is_terminal(state)) {
    const auto actions = enabled_actions(state);
    if (actions.empty()) throw RoundAborted("shuffle scheduler found no enabled action");
    const auto a = actions[rng.below(actions.size())];
    ++step_;
    if (a.kind == ShuffleAction::Kind::Poll &&
        std::find(options_.unreachable.begin(), options_.unreachable.end(), a.peer) != options_.unreachable.end()) {
      throw RoundAborted("worker " + std::to_string(a.requester) + " cannot reach peer " + std::to_string(a.peer));
    }
    const auto outcome = apply_action(state, a);
    auto& requester = cluster_.worker(a.requester);
    switch (outcome) {
      case ActionOutcome::Busy:
        requester.note_poll(true, 0.0);
        break;
      case ActionOutcome::Started:
        requester.note_poll(false, 0.0);
        started[a.peer] = step_;
        break;
      case ActionOutcome::Completed: {
        auto& server = cluster_.worker(a.peer);
        auto payload = server.serve(a.requester);
        const auto bytes = payload_wire_size(payload);
        requester.accept(a.peer, std::move(payload), bytes);
        server.acknowledge(a.requester);
        serve_log_.push_back({a.peer, a.requester, started[a.peer], step_});
        break;
      }
    }
  }

  std::vector<ShuffleReport> out;
  for (WorkerId w = 0; w < n; ++w) out.push_back(cluster_.worker(w).finish_round(r.round));
  return out;
}

// ---------------------------------------------------------------------------
// Coordinator

std::string_view to_string(RoundStatus s) {
  switch (s) {
    case RoundStatus::Complete: return "complete";
    case RoundStatus::Failed: return "failed";
    case RoundStatus::Aborted: return "aborted";
  }
  return "?";
}

std::string RoundLogEntry::to_json() const {
  nlohmann::json j;
  j["round"] = round;
  j["t_start"] = t_start;
  j["t_end"] = t_end;
  j["status"] = std::string(to_string(status));
  if (!error.empty()) j["error"] = error;
  j["delivered"] = delivered;
  j["arrived_during_shuffle"] = arrived_during_shuffle;
  j["backpressure"] = backpressure;
  j["routed"] = routed;
  j["late"] = late;
  j["dead_letters"] = dead_letters;
  for (auto k : kAllOutKinds) j["stored"][std::string(to_string(k))] = stored[static_cast<std::size_t>(k)];
  j["bytes_shuffled"] = bytes_shuffled;
  j["blocks_written"] = blocks_written;
  j["busy_responses"] = busy_responses;
  j["wall_seconds"] = wall_seconds;
  j["partition_makespan"] = partition_makespan;
  j["shuffle_makespan"] = shuffle_makespan;
  return j.dump();
}

Coordinator::Coordinator(ClusterTransport& transport, TimeDiscretization time) : transport_(transport), time_(time) {
  time_.validate();
}

std::vector<RoundLogEntry> Coordinator::run(std::span<const Edge> input, const CoordinatorOptions& options) {
  std::vector<TimedEdge> timed;
  timed.reserve(input.size());
  for (const auto& e : input) timed.push_back({e.timestamp, e});
  return run(std::move(timed), options);
}

std::vector<RoundLogEntry> Coordinator::run(std::vector<TimedEdge> input, const CoordinatorOptions& options) {
  const std::uint32_t n = transport_.workers();
  if (n == 0) throw DomainError("no workers registered with the coordinator");
  if (options.m == 0) throw DomainError("a round must span at least one TRU");
  if (options.t_delay < 0) throw DomainError("t_delay must be non-negative");

  std::stable_sort(input.begin(), input.end(),
                   [](const TimedEdge& a, const TimedEdge& b) { return a.arrival < b.arrival; });
  Timestamp t_start = 0;
  if (options.t_start) {
    t_start = *options.t_start;
  } else if (!input.empty()) {
    Timestamp lo = input.front().edge.timestamp;
    for (const auto& te : input) lo = std::min(lo, te.edge.timestamp);
    t_start = lo >= 0 ? lo - lo % time_.tru_seconds : 0;
  }

  std::size_t next = 0;
  std::vector<std::deque<Edge>> held(n);  // refused by a full inbuf, retried first
  std::uint64_t rr = 0;
  auto feed = [&](Timestamp upto, std::uint64_t& delivered, std::uint64_t& refused) {
    std::vector<std::vector<Edge>> batch(n);
    for (WorkerId w = 0; w < n; ++w) batch[w].assign(held[w].begin(), held[w].end());
    for (auto& h : held) h.clear();
    for (; next < input.size() && input[next].arrival <= upto; ++next) batch[rr++ % n].push_back(input[next].edge);
    for (WorkerId w = 0; w < n; ++w) {
      if (batch[w].empty()) continue;
      const auto accepted = transport_.deliver(w, batch[w]);
      delivered += accepted;
      if (accepted < batch[w].size()) {
        ++refused;
        held[w].assign(batch[w].begin() + static_cast<std::ptrdiff_t>(accepted), batch[w].end());
      }
    }
  };

  std::vector<RoundLogEntry> log;
  for (std::uint64_t k = 0; k < options.rounds; ++k) {
    const auto wall0 = Clock::now();
    RoundState rs;
    rs.round = k;
    rs.t_start = t_start;
    rs.m = options.m;
    rs.tru = time_.tru_seconds;
    rs.t_delay = options.t_delay;

    RoundLogEntry entry;
    entry.round = k;
    entry.t_start = rs.t_start;
    entry.t_end = rs.t_end();
    feed(rs.trigger_time(), entry.delivered, entry.backpressure);
    try {
      for (const auto& p : transport_.partition_phase(rs)) {
        entry.routed += p.routed;
        entry.late += p.late;
        entry.dead_letters += p.dead_letters;
        entry.partition_makespan = std::max(entry.partition_makespan, p.seconds);
      }
      rs.advance(RoundPhase::Partitioned);
      // Collection of the next window overlaps this shuffle.
      feed(rs.trigger_time() + static_cast<std::int64_t>(rs.m) * rs.tru, entry.arrived_during_shuffle,
           entry.backpressure);
      for (const auto& s : transport_.shuffle_phase(rs)) {
        for (std::size_t i = 0; i < kOutKinds; ++i) entry.stored[i] += s.received[i];
        entry.bytes_shuffled += s.bytes_received;
        entry.blocks_written += s.blocks_written;
        entry.busy_responses += s.busy;
        entry.shuffle_makespan = std::max(entry.shuffle_makespan, s.busy_seconds());
      }
      rs.advance(RoundPhase::Shuffled);
    } catch (const RoundAborted& e) {
      entry.status = RoundStatus::Aborted;
      entry.error = e.what();
    } catch (const std::exception& e) {
      entry.status = RoundStatus::Failed;
      entry.error = e.what();
    }
    entry.wall_seconds = seconds_since(wall0);
    log.push_back(entry);
    if (entry.status != RoundStatus::Complete) break;
    t_start = rs.t_end();
  }
  undelivered_ = input.size() - next;
  for (const auto& h : held) undelivered_ += h.size();
  return log;
}

std::uint64_t rounds_to_cover(std::span<const Edge> input, std::int64_t tru, std::uint32_t m) {
  if (input.empty()) return 0;
  if (tru <= 0 || m == 0) throw DomainError("TRU and m must be positive");
  Timestamp lo = input.front().timestamp, hi = lo;
  for (const auto& e : input) {
    lo = std::min(lo, e.timestamp);
    hi = std::max(hi, e.timestamp);
  }
  const Timestamp t0 = lo >= 0 ? lo - lo % tru : 0;
  const std::int64_t span = hi - t0 + 1;
  const std::int64_t per_round = tru * m;
  return static_cast<std::uint64_t>((span + per_round - 1) / per_round);
}

}  // namespace past
