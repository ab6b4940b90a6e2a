#include "past/socket_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "past/wire.hpp"

namespace past {

namespace {

using Clock = std::chrono::steady_clock;
constexpr WorkerId kCoordinator = 0xffffffffU;
constexpr std::string_view kAbortPrefix = "abort: ";

std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch()).count());
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void send_all(int fd, const Bytes& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StoreError(errno_text("send"));
    }
    off += static_cast<std::size_t>(n);
  }
}

void send_frame(int fd, wire::FrameKind kind, std::uint64_t round, WorkerId sender, Bytes body = {}) {
  send_all(fd, wire::encode_frame({kind, round, sender, std::move(body)}));
}

// Reads exactly one frame. Throws TimeoutError past the deadline and
// StoreError when the connection closes first.
wire::Frame read_frame(int fd, Clock::time_point deadline) {
  Bytes buf;
  std::size_t want = wire::kFramePrefixBytes;
  while (true) {
    if (buf.size() >= wire::kFramePrefixBytes) {
      std::size_t consumed = 0;
      if (auto f = wire::decode_frame(buf, consumed)) return *f;
      const auto rest = wire::Reader(std::span(buf).first(4)).u32();
      want = wire::kFramePrefixBytes + rest;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) throw TimeoutError("no reply before the deadline");
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw StoreError(errno_text("poll"));
    }
    if (rc == 0) continue;
    const std::size_t old = buf.size();
    buf.resize(std::max(want, old + 1));
    const ssize_t n = ::recv(fd, buf.data() + old, buf.size() - old, 0);
    if (n < 0) {
      buf.resize(old);
      if (errno == EINTR || errno == EAGAIN) continue;
      throw StoreError(errno_text("recv"));
    }
    if (n == 0) throw StoreError("connection closed");
    buf.resize(old + static_cast<std::size_t>(n));
  }
}

int listen_loopback(std::uint16_t& port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw StoreError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd, 64) < 0) {
    const auto msg = errno_text("bind/listen");
    ::close(fd);
    throw StoreError(msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port = ntohs(addr.sin_port);
  return fd;
}

int connect_loopback(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw StoreError(errno_text("socket"));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    const auto msg = errno_text("connect");
    ::close(fd);
    throw StoreError(msg);
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

Bytes encode_round(const RoundState& r) {
  wire::Writer w;
  w.u64(r.round);
  w.i64(r.t_start);
  w.u32(r.m);
  w.i64(r.tru);
  w.i64(r.t_delay);
  return w.take();
}

RoundState decode_round(std::span<const std::uint8_t> b) {
  wire::Reader r(b);
  RoundState s;
  s.round = r.u64();
  s.t_start = r.i64();
  s.m = r.u32();
  s.tru = r.i64();
  s.t_delay = r.i64();
  r.expect_done();
  return s;
}

[[noreturn]] void rethrow_remote(const wire::Frame& f) {
  wire::Reader r(f.body);
  const auto msg = r.str();
  if (msg.rfind(kAbortPrefix, 0) == 0) throw RoundAborted(msg.substr(kAbortPrefix.size()));
  throw StoreError("worker " + std::to_string(f.sender) + ": " + msg);
}

}  // namespace

struct SocketTransport::Node {
  WorkerId id = 0;
  int listen_fd = -1;
  std::uint16_t port = 0;
  std::atomic<bool> stop{false};
  std::atomic<std::int64_t> serving{-1};  // requester currently being served
  std::thread acceptor;
  std::mutex mutex;
  struct Handler {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> finished;
  };
  std::vector<Handler> handlers;
  std::vector<int> open_fds;

  void reap_finished() {
    std::erase_if(handlers, [](Handler& h) {
      if (!h.finished->load()) return false;
      h.thread.join();
      return true;
    });
  }
};

SocketTransport::SocketTransport(Cluster& cluster, SocketOptions options)
    : cluster_(cluster), options_(std::move(options)) {
  try {
    for (WorkerId w = 0; w < cluster_.size(); ++w) {
      auto node = std::make_unique<Node>();
      node->id = w;
      node->listen_fd = listen_loopback(node->port);
      nodes_.push_back(std::move(node));
    }
    for (auto& n : nodes_) {
      Node* node = n.get();
      node->acceptor = std::thread([this, node] {
        while (!node->stop.load()) {
          pollfd p{node->listen_fd, POLLIN, 0};
          if (::poll(&p, 1, 50) <= 0) continue;
          const int fd = ::accept4(node->listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
          if (fd < 0) continue;
          const int one = 1;
          ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
          std::lock_guard lock(node->mutex);
          node->reap_finished();
          node->open_fds.push_back(fd);
          auto finished = std::make_shared<std::atomic<bool>>(false);
          node->handlers.push_back({std::thread([this, node, fd, finished] {
                                      handle_connection(*node, fd);
                                      std::lock_guard inner(node->mutex);
                                      std::erase(node->open_fds, fd);
                                      ::close(fd);
                                      finished->store(true);
                                    }),
                                    finished});
        }
      });
    }
    for (auto& n : nodes_) control_.push_back(connect_loopback(n->port));
  } catch (...) {
    shutdown();
    throw;
  }
}

SocketTransport::~SocketTransport() { shutdown(); }

void SocketTransport::shutdown() {
  for (std::size_t i = 0; i < control_.size(); ++i) {
    try {
      send_frame(control_[i], wire::FrameKind::Shutdown, 0, kCoordinator);
    } catch (const std::exception&) {
    }
    ::close(control_[i]);
  }
  control_.clear();
  for (auto& n : nodes_) n->stop = true;
  for (auto& n : nodes_) {
    if (n->acceptor.joinable()) n->acceptor.join();
    {
      std::lock_guard lock(n->mutex);
      for (int fd : n->open_fds) ::shutdown(fd, SHUT_RDWR);
    }
    std::vector<Node::Handler> handlers;
    {
      std::lock_guard lock(n->mutex);
      handlers.swap(n->handlers);
    }
    for (auto& h : handlers) {
      if (h.thread.joinable()) h.thread.join();
    }
    if (n->listen_fd >= 0) ::close(n->listen_fd);
    n->listen_fd = -1;
  }
  nodes_.clear();
}

std::vector<std::uint16_t> SocketTransport::ports() const {
  std::vector<std::uint16_t> out;
  for (const auto& n : nodes_) out.push_back(n->port);
  return out;
}

std::vector<ServeInterval> SocketTransport::serve_log() const {
  std::lock_guard lock(log_mutex_);
  return serve_log_;
}

void SocketTransport::handle_connection(Node& node, int fd) {
  auto& worker = cluster_.worker(node.id);
  const auto far_future = Clock::now() + std::chrono::hours(24 * 365);
  while (!node.stop.load()) {
    wire::Frame f;
    try {
      f = read_frame(fd, far_future);
    } catch (const std::exception&) {
      return;  // peer closed or transport shut down
    }
    const bool from_coordinator = f.sender == kCoordinator;
    try {
      switch (f.kind) {
        case wire::FrameKind::Shutdown:
          return;
        case wire::FrameKind::EdgeBatch: {
          if (!from_coordinator) throw DomainError("edge batches come from the coordinator");
          wire::Reader r(f.body);
          const auto edges = r.edges();
          std::uint32_t accepted = 0;
          for (const auto& e : edges) {
            if (!worker.append_new_edge(e)) break;
            ++accepted;
          }
          wire::Writer w;
          w.u32(accepted);
          send_frame(fd, wire::FrameKind::BatchAck, f.round, node.id, w.take());
          break;
        }
        case wire::FrameKind::NextRound: {
          if (!from_coordinator) throw DomainError("NextRound must come from the coordinator");
          if (options_.stalled == node.id) break;
          const auto report = worker.compute_partition(decode_round(f.body));
          send_frame(fd, wire::FrameKind::PartitionDone, f.round, node.id, encode_partition_report(report));
          break;
        }
        case wire::FrameKind::Shuffle: {
          if (!from_coordinator) throw DomainError("Shuffle must come from the coordinator");
          run_shuffle(node, f.round);
          const auto report = worker.finish_round(f.round);
          send_frame(fd, wire::FrameKind::RoundComplete, f.round, node.id, encode_shuffle_report(report));
          break;
        }
        case wire::FrameKind::Retrieve: {
          if (options_.unreachable == node.id) return;  // drop the connection unanswered
          const WorkerId requester = f.sender;
          std::int64_t idle = -1;
          if (!node.serving.compare_exchange_strong(idle, requester)) {
            send_frame(fd, wire::FrameKind::Busy, f.round, node.id);
            break;
          }
          const auto start = now_ns();
          try {
            send_frame(fd, wire::FrameKind::Payload, f.round, node.id, encode_payload(worker.serve(requester)));
            const auto ack = read_frame(fd, Clock::now() + options_.timeout);
            if (ack.kind != wire::FrameKind::Ack) throw StoreError("expected Ack after Payload");
            worker.acknowledge(requester);
            // Confirms the clear, so the requester cannot finish its round first.
            send_frame(fd, wire::FrameKind::Ack, f.round, node.id);
          } catch (...) {
            node.serving = -1;
            throw;
          }
          {
            std::lock_guard lock(log_mutex_);
            serve_log_.push_back({node.id, requester, start, now_ns()});
          }
          node.serving = -1;
          break;
        }
        default:
          throw FormatError("unexpected frame " + std::string(wire::to_string(f.kind)));
      }
    } catch (const std::exception& e) {
      wire::Writer w;
      const bool abort = dynamic_cast<const RoundAborted*>(&e) != nullptr;
      w.str((abort ? std::string(kAbortPrefix) : std::string()) + e.what());
      try {
        send_frame(fd, wire::FrameKind::Error, f.round, node.id, w.take());
      } catch (const std::exception&) {
        return;
      }
    }
  }
}

void SocketTransport::retrieve_from(Node& node, WorkerId peer, std::uint64_t round, ShuffleSession& session) {
  auto& worker = cluster_.worker(node.id);
  const auto t0 = Clock::now();
  int fd = -1;
  wire::Frame reply;
  std::string last_error;
  for (int attempt = 0; attempt < 3 && fd < 0; ++attempt) {
    try {
      fd = connect_loopback(nodes_.at(peer)->port);
      send_frame(fd, wire::FrameKind::Retrieve, round, node.id);
      reply = read_frame(fd, Clock::now() + options_.timeout);
    } catch (const std::exception& e) {
      last_error = e.what();
      if (fd >= 0) ::close(fd);
      fd = -1;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  if (fd < 0) {
    throw RoundAborted("worker " + std::to_string(node.id) + " cannot reach peer " + std::to_string(peer) + " (" +
                       last_error + ")");
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
  if (reply.kind == wire::FrameKind::Busy) {
    ::close(fd);
    session.on_busy(peer);
    worker.note_poll(true, elapsed);
    return;
  }
  if (reply.kind != wire::FrameKind::Payload) {
    ::close(fd);
    throw StoreError("unexpected reply " + std::string(wire::to_string(reply.kind)) + " from peer " +
                     std::to_string(peer));
  }
  session.on_started(peer);
  try {
    worker.accept(peer, decode_payload(reply.body), reply.body.size());
    send_frame(fd, wire::FrameKind::Ack, round, node.id);
    const auto confirm = read_frame(fd, Clock::now() + options_.timeout);
    if (confirm.kind != wire::FrameKind::Ack) throw StoreError("peer " + std::to_string(peer) + " did not confirm the clear");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  session.on_finished(peer);
  worker.note_poll(false, elapsed);
}

void SocketTransport::run_shuffle(Node& node, std::uint64_t round) {
  ShuffleSession session(node.id, ShuffleSession::permutation(node.id, cluster_.size(), options_.seed, round));
  while (!session.done()) {
    const auto peer = session.next_peer();
    if (!peer) throw DomainError("shuffle session stalled");
    // Re-polls of the busy list back off; the first pass does not.
    if (session.cursor() == session.order().size()) std::this_thread::sleep_for(options_.busy_backoff);
    retrieve_from(node, *peer, round, session);
  }
}

std::size_t SocketTransport::deliver(WorkerId w, std::span<const Edge> edges) {
  wire::Writer body;
  body.edges(edges);
  send_frame(control_.at(w), wire::FrameKind::EdgeBatch, 0, kCoordinator, body.take());
  const auto reply = read_frame(control_.at(w), Clock::now() + options_.timeout);
  if (reply.kind == wire::FrameKind::Error) rethrow_remote(reply);
  if (reply.kind != wire::FrameKind::BatchAck) throw StoreError("expected BatchAck");
  wire::Reader r(reply.body);
  return r.u32();
}

std::vector<PartitionReport> SocketTransport::partition_phase(const RoundState& r) {
  for (auto fd : control_) send_frame(fd, wire::FrameKind::NextRound, r.round, kCoordinator, encode_round(r));
  const auto deadline = Clock::now() + options_.timeout;
  std::vector<PartitionReport> out;
  for (WorkerId w = 0; w < control_.size(); ++w) {
    wire::Frame f;
    try {
      f = read_frame(control_[w], deadline);
    } catch (const TimeoutError&) {
      throw TimeoutError("worker " + std::to_string(w) + " sent no PartitionDone for round " +
                         std::to_string(r.round));
    }
    if (f.kind == wire::FrameKind::Error) rethrow_remote(f);
    if (f.kind != wire::FrameKind::PartitionDone) throw StoreError("expected PartitionDone");
    out.push_back(decode_partition_report(f.body));
  }
  return out;
}

std::vector<ShuffleReport> SocketTransport::shuffle_phase(const RoundState& r) {
  for (auto fd : control_) send_frame(fd, wire::FrameKind::Shuffle, r.round, kCoordinator);
  const auto deadline = Clock::now() + options_.timeout;
  std::vector<ShuffleReport> out;
  std::optional<wire::Frame> failure;
  for (WorkerId w = 0; w < control_.size(); ++w) {
    wire::Frame f;
    try {
      f = read_frame(control_[w], deadline);
    } catch (const TimeoutError&) {
      throw TimeoutError("worker " + std::to_string(w) + " sent no RoundComplete for round " +
                         std::to_string(r.round));
    }
    if (f.kind == wire::FrameKind::Error) {
      if (!failure) failure = f;
      continue;
    }
    if (f.kind != wire::FrameKind::RoundComplete) throw StoreError("expected RoundComplete");
    out.push_back(decode_shuffle_report(f.body));
  }
  if (failure) rethrow_remote(*failure);
  return out;
}

}  // namespace past
