#pragma once

#include <deque>

#include "dflow/control.hpp"
#include "dflow/kernels.hpp"
#include "dflow/runtime.hpp"
#include "dflow/store.hpp"

namespace dflow {

// Converts a kernel duration (microseconds) to clock units: ticks in
// simulated mode, nanoseconds in process mode.
inline int64_t us_to_units(const Runtime& rt, int64_t us) {
  return rt.simulated() ? us : us * 1000;
}

// Executes one task at a time: resolves arguments through the local store,
// runs the kernel, reports outputs to the local scheduler. Runs as a blocking
// activity on its own mailbox.
class Worker {
 public:
  Worker(Runtime* rt, uint32_t node_index, uint32_t worker_index, std::string node_id,
         uint32_t num_shards, const FunctionRegistry* registry);

  // Activity body; returns only when killed.
  void run();

  EndpointId endpoint() const { return self_; }

 private:
  friend class WorkerKernelContext;

  void execute(const TaskSpec& spec);
  std::optional<Frame> next_frame();
  // Sends a request and blocks until the matching reply, servicing
  // STATUS_REQ and stashing other frames meanwhile.
  MsgReply blocking_call(const EndpointId& dst, MsgType type, std::string payload,
                         uint64_t req_id);
  void answer_status(const EndpointId& to);
  Value fetch(const ObjectID& id);

  Runtime* rt_;
  uint32_t node_index_;
  uint32_t worker_index_;
  std::string node_id_;
  EndpointId self_;
  EndpointId ls_;
  EndpointId store_;
  const FunctionRegistry* registry_;
  ControlClient control_;
  Mailbox* mailbox_ = nullptr;

  std::deque<Frame> stash_;
  uint64_t next_req_ = 2;  // even ids; ControlClient owns the odd ones
  bool busy_ = false;
  TaskID current_;
  uint32_t submit_counter_ = 0;  // per-task child index
};

}  // namespace dflow
