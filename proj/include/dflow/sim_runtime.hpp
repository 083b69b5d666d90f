#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <queue>
#include <set>
#include <thread>
#include <vector>

#include "dflow/runtime.hpp"

namespace dflow {

struct SimParams {
  int64_t intra_node_latency = 1;   // ticks
  int64_t inter_node_latency = 10;  // ticks
  // Virtual time a shard is occupied per request; models the control plane
  // as a serial service so shard-count scaling is observable.
  int64_t shard_service = 1;
};

class SimRuntime;

// Cooperatively scheduled blocking activity. Exactly one thread (an activity
// or the controller) runs at any moment, so a fixed seed gives a fixed event
// order; the handoff mutex provides the needed memory visibility.
class SimMailbox : public Mailbox {
 public:
  std::optional<Frame> receive(std::optional<int64_t> deadline) override;

 private:
  friend class SimRuntime;
  enum class BlockReason { None, Receive, Sleep };

  void yield_to_controller();

  SimRuntime* rt = nullptr;
  EndpointId owner;
  std::thread thread;
  std::mutex m;
  std::condition_variable cv;
  bool activity_turn = false;
  bool finished = false;
  bool started = false;
  bool killed = false;
  BlockReason blocked = BlockReason::None;
  bool timeout_fired = false;
  uint64_t wait_gen = 0;
  std::deque<Frame> queue;
};

// Deterministic discrete-event runtime. Messages become events ordered by
// (tick, sequence); handlers run inline in the controller thread; blocking
// activities run one at a time under controller handoff.
class SimRuntime : public Runtime {
 public:
  explicit SimRuntime(SimParams params = {});
  ~SimRuntime() override;

  int64_t now() const override { return now_; }
  bool simulated() const override { return true; }

  void send(Frame f) override;
  void schedule(const EndpointId& dst, Frame f, int64_t delay) override;
  void register_handler(const EndpointId& ep, std::function<void(Frame)> h) override;
  Mailbox* register_mailbox(const EndpointId& ep) override;
  void spawn_activity(const EndpointId& owner, std::function<void()> body) override;
  void sleep_until(int64_t deadline) override;
  void kill_prefix(const std::string& prefix) override;
  bool is_dead(const EndpointId& ep) const override;
  void shutdown() override;

  // Processes events until stop() is true or no events remain.
  void run_until(const std::function<bool()>& stop);
  void run_to_idle();
  bool idle() const { return events_.empty(); }
  uint64_t events_processed() const { return events_processed_; }

 private:
  friend class SimMailbox;

  struct Event {
    int64_t tick;
    uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const {
      return tick != o.tick ? tick > o.tick : seq > o.seq;
    }
  };

  void push_event(int64_t tick, std::function<void()> fn);
  void deliver(const EndpointId& dst, Frame f);
  void resume(SimMailbox* mb);
  void kill_activity(SimMailbox* mb);
  int64_t latency(const EndpointId& src, const EndpointId& dst) const;

  SimParams params_;
  int64_t now_ = 0;
  uint64_t next_seq_ = 0;
  uint64_t events_processed_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::map<EndpointId, std::function<void(Frame)>> handlers_;
  std::map<EndpointId, std::unique_ptr<SimMailbox>> mailboxes_;
  // Killed mailboxes park here: pending timeout events still hold raw
  // pointers into them (their killed/finished flags make those a no-op).
  std::vector<std::unique_ptr<SimMailbox>> retired_;
  std::map<EndpointId, int64_t> shard_busy_;
  // Endpoints killed and not (yet) re-registered; frames to them drop.
  std::set<EndpointId> dead_;
  bool shut_down_ = false;
};

}  // namespace dflow
