#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <queue>
#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "dflow/runtime.hpp"

namespace dflow {

struct PortUnavailable : std::runtime_error {
  explicit PortUnavailable(int port)
      : std::runtime_error("port unavailable: " + std::to_string(port)) {}
};

class ProcMailbox : public Mailbox {
 public:
  std::optional<Frame> receive(std::optional<int64_t> deadline) override;

 private:
  friend class ProcRuntime;
  std::mutex m;
  std::condition_variable cv;
  std::deque<Frame> queue;
  bool killed = false;
  class ProcRuntime* rt = nullptr;

  void push(Frame f);
  void kill();
};

// Real-clock runtime: every endpoint listens on its own localhost TCP port,
// frames travel over per-(src,dst) connections (FIFO per pair), components
// run as threads. Clock units are nanoseconds since cluster start.
class ProcRuntime : public Runtime {
 public:
  explicit ProcRuntime(std::map<EndpointId, uint16_t> ports);
  ~ProcRuntime() override;

  int64_t now() const override;
  bool simulated() const override { return false; }

  void send(Frame f) override;
  void schedule(const EndpointId& dst, Frame f, int64_t delay) override;
  void register_handler(const EndpointId& ep, std::function<void(Frame)> h) override;
  Mailbox* register_mailbox(const EndpointId& ep) override;
  void spawn_activity(const EndpointId& owner, std::function<void()> body) override;
  void sleep_until(int64_t deadline) override;
  void kill_prefix(const std::string& prefix) override;
  bool is_dead(const EndpointId& ep) const override;
  void shutdown() override;

 private:
  struct Endpoint {
    int listen_fd = -1;
    std::unique_ptr<ProcMailbox> mailbox;
    std::thread acceptor;
    std::thread dispatcher;  // only for handler endpoints
    std::vector<std::thread> readers;
    std::vector<int> conn_fds;
    std::mutex conn_m;
    bool dead = false;
  };

  struct Timer {
    int64_t at;
    uint64_t seq;
    Frame frame;
    bool operator<(const Timer& o) const {
      return at != o.at ? at > o.at : seq > o.seq;  // min-heap via priority_queue
    }
  };

  void start_listener(const EndpointId& ep);
  void accept_loop(const EndpointId& ep);
  void reader_loop(const EndpointId& ep, int fd);
  void timer_loop();
  void deliver_local(Frame f);
  int connect_to(const EndpointId& dst);

  std::chrono::steady_clock::time_point start_;
  std::mutex ports_m_;  // ports_ grows when ephemeral endpoints register
  std::map<EndpointId, uint16_t> ports_;
  mutable std::mutex m_;
  std::map<EndpointId, std::unique_ptr<Endpoint>> endpoints_;
  // Killed endpoints not (yet) re-registered; frames to them drop. A retired
  // Endpoint keeps its reader threads joinable until shutdown.
  std::set<EndpointId> dead_;
  std::vector<std::unique_ptr<Endpoint>> retired_;
  std::vector<std::thread> activities_;

  std::mutex conn_cache_m_;
  struct CachedConn {
    int fd = -1;
    std::unique_ptr<std::mutex> write_m = std::make_unique<std::mutex>();
  };
  std::map<std::pair<EndpointId, EndpointId>, CachedConn> conn_cache_;

  std::mutex timer_m_;
  std::condition_variable timer_cv_;
  std::priority_queue<Timer> timers_;
  uint64_t timer_seq_ = 0;
  bool stopping_ = false;
  std::thread timer_thread_;
};

}  // namespace dflow
