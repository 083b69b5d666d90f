#include "dflow/sim_runtime.hpp"

#include <cassert>
#include <stdexcept>

namespace dflow {

namespace {

thread_local SimMailbox* g_current_activity = nullptr;

std::string endpoint_group(const EndpointId& ep) {
  if (ep.rfind("node/", 0) == 0) {
    size_t second = ep.find('/', 5);
    return second == std::string::npos ? ep : ep.substr(0, second);
  }
  if (ep.rfind("driver", 0) == 0) return "driver";
  return ep;
}

}  // namespace

// --- SimMailbox -------------------------------------------------------------

void SimMailbox::yield_to_controller() {
  std::unique_lock<std::mutex> l(m);
  activity_turn = false;
  cv.notify_all();
  cv.wait(l, [&] { return activity_turn; });
}

std::optional<Frame> SimMailbox::receive(std::optional<int64_t> deadline) {
  for (;;) {
    if (killed) throw ActivityKilled{};
    {
      std::unique_lock<std::mutex> l(m);
      if (!queue.empty()) {
        Frame f = std::move(queue.front());
        queue.pop_front();
        return f;
      }
    }
    if (deadline && *deadline <= rt->now()) return std::nullopt;
    uint64_t gen;
    {
      std::unique_lock<std::mutex> l(m);
      blocked = BlockReason::Receive;
      gen = ++wait_gen;
    }
    if (deadline) {
      SimMailbox* self = this;
      rt->push_event(*deadline, [self, gen] {
        std::unique_lock<std::mutex> l(self->m);
        if (self->finished || self->killed) return;
        if (self->blocked == BlockReason::Receive && self->wait_gen == gen) {
          self->timeout_fired = true;
          self->blocked = BlockReason::None;
          l.unlock();
          self->rt->resume(self);
        }
      });
    }
    yield_to_controller();
    if (killed) throw ActivityKilled{};
    if (timeout_fired) {
      timeout_fired = false;
      std::unique_lock<std::mutex> l(m);
      if (queue.empty()) return std::nullopt;
    }
  }
}

// --- SimRuntime -------------------------------------------------------------

SimRuntime::SimRuntime(SimParams params) : params_(params) {}

SimRuntime::~SimRuntime() { shutdown(); }

void SimRuntime::push_event(int64_t tick, std::function<void()> fn) {
  events_.push(Event{std::max(tick, now_), next_seq_++, std::move(fn)});
}

int64_t SimRuntime::latency(const EndpointId& src, const EndpointId& dst) const {
  return endpoint_group(src) == endpoint_group(dst) ? params_.intra_node_latency
                                                    : params_.inter_node_latency;
}

void SimRuntime::send(Frame f) {
  if (is_dead(f.src)) return;  // in-flight sends from a killed component vanish
  int64_t at = now_ + latency(f.src, f.dst);
  if (params_.shard_service > 0 && f.dst.rfind("shard/", 0) == 0) {
    int64_t& busy = shard_busy_[f.dst];
    int64_t start = std::max(at, busy);
    busy = start + params_.shard_service;
    at = busy;
  }
  EndpointId dst = f.dst;
  push_event(at, [this, dst, fr = std::move(f)]() mutable { deliver(dst, std::move(fr)); });
}

void SimRuntime::schedule(const EndpointId& dst, Frame f, int64_t delay) {
  f.dst = dst;
  push_event(now_ + delay, [this, dst, fr = std::move(f)]() mutable { deliver(dst, std::move(fr)); });
}

void SimRuntime::deliver(const EndpointId& dst, Frame f) {
  if (is_dead(dst)) return;
  auto h = handlers_.find(dst);
  if (h != handlers_.end()) {
    h->second(std::move(f));
    return;
  }
  auto mb = mailboxes_.find(dst);
  if (mb == mailboxes_.end()) return;
  SimMailbox* box = mb->second.get();
  bool wake = false;
  {
    std::unique_lock<std::mutex> l(box->m);
    if (box->finished || box->killed) return;
    box->queue.push_back(std::move(f));
    if (box->blocked == SimMailbox::BlockReason::Receive) {
      box->blocked = SimMailbox::BlockReason::None;
      ++box->wait_gen;  // invalidate any pending timeout
      wake = true;
    }
  }
  if (wake && box->started) resume(box);
}

void SimRuntime::register_handler(const EndpointId& ep, std::function<void(Frame)> h) {
  dead_.erase(ep);  // re-registering a killed endpoint revives it
  handlers_[ep] = std::move(h);
}

Mailbox* SimRuntime::register_mailbox(const EndpointId& ep) {
  dead_.erase(ep);
  auto box = std::make_unique<SimMailbox>();
  box->rt = this;
  box->owner = ep;
  SimMailbox* ptr = box.get();
  mailboxes_[ep] = std::move(box);
  return ptr;
}

void SimRuntime::spawn_activity(const EndpointId& owner, std::function<void()> body) {
  auto it = mailboxes_.find(owner);
  if (it == mailboxes_.end()) throw std::logic_error("spawn_activity without mailbox: " + owner);
  SimMailbox* box = it->second.get();
  if (box->thread.joinable()) {
    if (!box->finished)
      throw std::logic_error("activity already running on " + owner);
    box->thread.join();
    box->finished = false;
    box->started = false;
    box->activity_turn = false;
    box->blocked = SimMailbox::BlockReason::None;
    box->timeout_fired = false;
  }
  box->thread = std::thread([box, body = std::move(body)] {
    {
      std::unique_lock<std::mutex> l(box->m);
      box->cv.wait(l, [&] { return box->activity_turn; });
    }
    g_current_activity = box;
    try {
      body();
    } catch (const ActivityKilled&) {
    }
    std::unique_lock<std::mutex> l(box->m);
    box->finished = true;
    box->activity_turn = false;
    box->cv.notify_all();
  });
  // The activity starts at a scheduled event so startup order is part of the
  // deterministic event sequence.
  push_event(now_, [this, box] {
    if (box->killed || box->finished) return;
    box->started = true;
    resume(box);
  });
}

void SimRuntime::resume(SimMailbox* box) {
  std::unique_lock<std::mutex> l(box->m);
  if (box->finished) return;
  box->activity_turn = true;
  box->cv.notify_all();
  box->cv.wait(l, [&] { return !box->activity_turn || box->finished; });
}

void SimRuntime::sleep_until(int64_t deadline) {
  SimMailbox* box = g_current_activity;
  if (!box) throw std::logic_error("sleep_until outside activity");
  while (now_ < deadline) {
    if (box->killed) throw ActivityKilled{};
    uint64_t gen;
    {
      std::unique_lock<std::mutex> l(box->m);
      box->blocked = SimMailbox::BlockReason::Sleep;
      gen = ++box->wait_gen;
    }
    push_event(deadline, [this, box, gen] {
      std::unique_lock<std::mutex> l(box->m);
      if (box->finished || box->killed) return;
      if (box->blocked == SimMailbox::BlockReason::Sleep && box->wait_gen == gen) {
        box->blocked = SimMailbox::BlockReason::None;
        l.unlock();
        resume(box);
      }
    });
    box->yield_to_controller();
    if (box->killed) throw ActivityKilled{};
  }
}

void SimRuntime::kill_activity(SimMailbox* box) {
  {
    std::unique_lock<std::mutex> l(box->m);
    box->killed = true;
  }
  if (box->thread.joinable()) {
    if (box->started) {
      // Wake it so it can observe killed and unwind.
      resume(box);
    } else {
      std::unique_lock<std::mutex> l(box->m);
      box->finished = true;
      box->activity_turn = true;
      box->cv.notify_all();
    }
    box->thread.join();
  }
}

void SimRuntime::kill_prefix(const std::string& prefix) {
  for (auto it = handlers_.begin(); it != handlers_.end();) {
    if (it->first.rfind(prefix, 0) == 0) {
      dead_.insert(it->first);
      it = handlers_.erase(it);
    } else {
      ++it;
    }
  }
  for (auto it = mailboxes_.begin(); it != mailboxes_.end();) {
    if (it->first.rfind(prefix, 0) == 0) {
      dead_.insert(it->first);
      kill_activity(it->second.get());
      retired_.push_back(std::move(it->second));
      it = mailboxes_.erase(it);
    } else {
      ++it;
    }
  }
}

bool SimRuntime::is_dead(const EndpointId& ep) const { return dead_.count(ep) > 0; }

void SimRuntime::run_until(const std::function<bool()>& stop) {
  while (!stop() && !events_.empty()) {
    Event ev = std::move(const_cast<Event&>(events_.top()));
    events_.pop();
    now_ = std::max(now_, ev.tick);
    ++events_processed_;
    ev.fn();
  }
}

void SimRuntime::run_to_idle() {
  run_until([] { return false; });
}

void SimRuntime::shutdown() {
  if (shut_down_) return;
  shut_down_ = true;
  for (auto& [ep, box] : mailboxes_) {
    if (!box->finished || box->thread.joinable()) kill_activity(box.get());
    if (box->thread.joinable()) box->thread.join();
  }
  handlers_.clear();
  while (!events_.empty()) events_.pop();
}

}  // namespace dflow
